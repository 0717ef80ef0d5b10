//! The singular solution: construction from its center asymptotics,
//! the first zero Theta_star with start-halving refinement, decay-rate
//! verification in Emden variables, and convergence of regular solutions.
//!
//! The solution blowing up like a theta^{-mu} at the center is started at a
//! small offset theta0 from the leading asymptotic forms
//!
//! ```text
//! U(theta0)  = a cos(theta0/2)^{-(N-2)} (2 tan(theta0/2))^{-mu},
//! U'(theta0) = a cos(theta0/2)^{-N} (2 tan(theta0/2))^{-mu-1}
//!              (-mu + (N-2) sin(theta0/2)^2),
//! ```
//!
//! whose dropped corrections are O(theta0^2) relative. Integrating from
//! theta0, theta0/2, and theta0/4 turns the start halvings into an error
//! control: the refinement estimate is the observed shift of the first
//! zero, and construction fails when the halvings do not settle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{
    integrate_sphere_from, integrate_stereo_regular, Frame, IntegratorConfig, RadialProfile,
};
use crate::model::{self, Exponents, Params};

/// Default start offset for the singular construction.
pub const DEFAULT_SINGULAR_START: f64 = 1e-4;
/// Default agreement requirement between successive start halvings.
pub const DEFAULT_REFINE_TOL: f64 = 1e-6;

/// The singular solution with its first zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularProfile {
    pub params: Params,
    /// Finest start offset actually used (theta0/4).
    pub theta_start: f64,
    /// Trajectory from the finest start, theta frame, up to the first zero.
    pub profile: RadialProfile,
    /// First zero from the finest start, certified by the halving runs.
    pub theta_star: f64,
    pub r_star: f64,
    /// |Theta*(theta0/2) - Theta*(theta0)|.
    pub refinement_estimate: f64,
    /// (start offset, first zero) for the three runs.
    pub runs: Vec<(f64, f64)>,
}

/// Leading asymptotic start values (U, U') of the singular solution at
/// theta0. Requires p > p_S and 0 < theta0 <= 1e-2.
pub fn singular_start_values(params: &Params, theta0: f64) -> Result<(f64, f64)> {
    let exps = model::compute_exponents(params);
    if params.p <= params.p_critical() {
        return Err(Error::RequiresSupercritical { p: params.p, p_s: params.p_critical() });
    }
    if !(theta0 > 0.0 && theta0 <= 1e-2) {
        return Err(Error::InvalidParams(format!("theta0 = {theta0} outside (0, 1e-2]")));
    }
    let (a, _, _) = exps.supercritical(params)?;
    let nf = params.nf();
    let mu = exps.mu;
    let half = theta0 / 2.0;
    let c = half.cos();
    let s = half.sin();
    let t2 = 2.0 * half.tan();
    let u0 = a * c.powf(-(nf - 2.0)) * t2.powf(-mu);
    let du0 = a * c.powf(-nf) * t2.powf(-mu - 1.0) * (-mu + (nf - 2.0) * s * s);
    Ok((u0, du0))
}

/// Construct the singular solution and its first zero with the default
/// start offset and refinement tolerance.
pub fn compute_theta_star(params: &Params, cfg: &IntegratorConfig) -> Result<SingularProfile> {
    compute_theta_star_from(params, cfg, DEFAULT_SINGULAR_START, DEFAULT_REFINE_TOL)
}

/// Construct the singular solution starting at `theta0`, halving the start
/// twice; errors out when the halvings do not settle below `refine_tol`.
pub fn compute_theta_star_from(
    params: &Params,
    cfg: &IntegratorConfig,
    theta0: f64,
    refine_tol: f64,
) -> Result<SingularProfile> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(3);
    let mut finest: Option<RadialProfile> = None;
    for k in 0..3 {
        let t0 = theta0 / 2f64.powi(k);
        let (u0, du0) = singular_start_values(params, t0)?;
        let prof = integrate_sphere_from(params, t0, (u0, du0), 1.0, cfg)?;
        let zero = prof.first_zero.ok_or(Error::NoZero { x_end: std::f64::consts::PI })?;
        runs.push((t0, zero));
        finest = Some(prof);
    }
    let (t1, t2, t3) = (runs[0].1, runs[1].1, runs[2].1);
    let d1 = t2 - t1;
    let d2 = t3 - t2;
    let refinement_estimate = d1.abs();
    if d2.abs() > refine_tol {
        return Err(Error::RefinementDiverged(format!(
            "refinements disagree by {:e} > tol {refine_tol:e}; lower theta0 or tighten tolerances",
            d2.abs()
        )));
    }
    // The start error carries the spiral phase, so its sign rotates under
    // halving and an observed-order extrapolation can overshoot; the finest
    // start is kept and the halving differences serve as error control.
    let theta_star = t3;
    let profile = finest.unwrap();
    Ok(SingularProfile {
        params: *params,
        theta_start: theta0 / 4.0,
        profile,
        theta_star,
        r_star: model::stereo_r_of_theta(theta_star),
        refinement_estimate,
        runs,
    })
}

impl SingularProfile {
    /// The singular solution in the stereographic frame, extended below the
    /// integrated grid by the leading asymptote
    /// `u*(r) ~ 2^{q/(p-1)} a r^{-mu}` (relative error O(r^2)), so that
    /// intersection counts can reach radii far inside the start offset.
    pub fn stereo_profile_extended(&self, r_min: f64) -> Result<RadialProfile> {
        let exps = model::compute_exponents(&self.params);
        let (a, _, _) = exps.supercritical(&self.params)?;
        let mu = exps.mu;
        let coeff = 2f64.powf(exps.q / (self.params.p - 1.0)) * a;
        let integrated = model::stereographic_u_from_capital(self.params.n, &self.profile)?;
        let splice = integrated.x_min();
        if !(r_min > 0.0) {
            return Err(Error::InvalidParams("r_min must be > 0".into()));
        }
        let mut out = RadialProfile::empty(Frame::RStereographic);
        if r_min < splice {
            let points_per_decade = 200.0;
            let decades = (splice / r_min).log10();
            let count = (decades * points_per_decade).ceil() as usize + 1;
            for k in 0..count {
                let r = r_min * (splice / r_min).powf(k as f64 / count as f64);
                if r >= splice * (1.0 - 1e-12) {
                    break;
                }
                out.push(r, coeff * r.powf(-mu), -mu * coeff * r.powf(-mu - 1.0));
            }
        }
        for i in 0..integrated.len() {
            out.push(integrated.grid[i], integrated.value[i], integrated.derivative[i]);
        }
        out.first_zero = integrated.first_zero;
        out.end_derivative = integrated.end_derivative;
        out.first_zero_err = integrated.first_zero_err;
        Ok(out)
    }
}

/// Fit the decay rate of |y*(t) - 1| against t in Emden variables; the
/// singular solution approaches 1 at rate 2m (the correction is O(r^2) and
/// e^{2mt} = r^2).
pub fn asymptotic_decay_check(sing: &SingularProfile, exps: &Exponents) -> Result<f64> {
    let params = sing.params;
    let (_, m, _) = exps.supercritical(&params)?;
    let stereo = model::stereographic_u_from_capital(params.n, &sing.profile)?;
    let orbit = model::emden_from_u(&params, exps, &stereo)?;
    let r_lo = 20.0 * stereo.x_min();
    let r_hi = 0.1f64;
    let (t_lo, t_hi) = (r_lo.ln() / m, r_hi.ln() / m);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..orbit.len() {
        let t = orbit.t[i];
        let dev = (orbit.y[i] - 1.0).abs();
        if t >= t_lo && t <= t_hi && dev > 1e-9 {
            xs.push(t);
            ys.push(dev.ln());
        }
    }
    if xs.len() < 8 {
        return Err(Error::WindowTooShort(format!("only {} usable points in the fit window", xs.len())));
    }
    // least squares slope
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// One row of the convergence study.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub gamma_stereo: f64,
    /// sup over [r0, min(R(gamma), R*)] of |u(., gamma) - u*|.
    pub sup_distance: f64,
    /// |R(gamma) - R*|.
    pub zero_gap: f64,
}

/// Measure convergence of regular solutions to the singular one along a
/// list of stereographic center values.
pub fn convergence_study(
    params: &Params,
    gamma_list: &[f64],
    r0: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<ConvergencePoint>> {
    let sing = compute_theta_star(params, cfg)?;
    convergence_study_against(params, &sing, gamma_list, r0, cfg)
}

/// Same study against an already computed singular profile.
pub fn convergence_study_against(
    params: &Params,
    sing: &SingularProfile,
    gamma_list: &[f64],
    r0: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<ConvergencePoint>> {
    if !(r0 > 0.0 && r0 < sing.r_star) {
        return Err(Error::InvalidParams(format!("need 0 < r0 < R* = {}", sing.r_star)));
    }
    let u_star = model::stereographic_u_from_capital(params.n, &sing.profile)?;
    let mut out = Vec::with_capacity(gamma_list.len());
    for &gamma in gamma_list {
        let prof = integrate_stereo_regular(params, gamma, 1.0, cfg)?;
        let r_gamma = prof.first_zero.unwrap();
        let hi = r_gamma.min(sing.r_star).min(u_star.x_max()).min(prof.x_max());
        let mut sup = 0.0f64;
        let mut eval_at = |r: f64| -> Result<()> {
            let (u, _) = prof.eval(r)?;
            let (us, _) = u_star.eval(r)?;
            sup = sup.max((u - us).abs());
            Ok(())
        };
        for &r in u_star.grid.iter().filter(|&&r| r >= r0 && r <= hi) {
            eval_at(r)?;
        }
        for &r in prof.grid.iter().filter(|&&r| r >= r0 && r <= hi) {
            eval_at(r)?;
        }
        out.push(ConvergencePoint { gamma_stereo: gamma, sup_distance: sup, zero_gap: (r_gamma - sing.r_star).abs() });
    }
    Ok(out)
}

/// The flat singular solution a rho^{-mu} tabulated on a log grid, for
/// intersection counting against regular flat profiles.
pub fn flat_singular_profile(params: &Params, rho_min: f64, rho_max: f64, points_per_decade: usize) -> Result<RadialProfile> {
    let exps = model::compute_exponents(params);
    let (a, _, _) = exps.supercritical(params)?;
    let mu = exps.mu;
    if !(rho_min > 0.0 && rho_min < rho_max) {
        return Err(Error::InvalidParams("need 0 < rho_min < rho_max".into()));
    }
    let decades = (rho_max / rho_min).log10();
    let count = (decades * points_per_decade as f64).ceil() as usize + 1;
    let mut prof = RadialProfile::empty(Frame::RhoFlat);
    for k in 0..=count {
        let rho = rho_min * (rho_max / rho_min).powf(k as f64 / count as f64);
        prof.push(rho, a * rho.powf(-mu), -mu * a * rho.powf(-mu - 1.0));
    }
    Ok(prof)
}

/// Defect of the stored singular trajectory under re-integration at a
/// tighter tolerance, normalized by the dominant term of the equation.
/// Sampled on [theta_lo, theta_hi]; small values certify that the stored
/// profile solves the cap equation.
pub fn equation_defect(params: &Params, profile: &RadialProfile, theta_lo: f64, theta_hi: f64, samples: usize) -> Result<f64> {
    let tight = IntegratorConfig { rel_tol: 1e-13, abs_tol: 1e-15, ..IntegratorConfig::default() };
    let nf = params.nf();
    let mut worst = 0.0f64;
    let idx: Vec<usize> = (0..profile.len())
        .filter(|&i| profile.grid[i] >= theta_lo && profile.grid[i] <= theta_hi)
        .collect();
    if idx.len() < 2 {
        return Err(Error::ProfileRange("fewer than two profile nodes in the sample window".into()));
    }
    let stride = (idx.len() / samples).max(1);
    for w in idx.chunks(stride) {
        let i = w[0];
        if i + 1 >= profile.len() {
            break;
        }
        let (x0, x1) = (profile.grid[i], profile.grid[i + 1]);
        let re = integrate_sphere_from_state_endpoint(params, x0, (profile.value[i], profile.derivative[i]), x1, &tight)?;
        let h = x1 - x0;
        let defect = ((re.0 - profile.value[i + 1]).abs() / h).max((re.1 - profile.derivative[i + 1]).abs() / h);
        // dominant equation term at the cell
        let u = profile.value[i];
        let du = profile.derivative[i];
        let cot = x0.cos() / x0.sin();
        let scale = (u.abs().powf(params.p)).max(((nf - 1.0) * cot * du).abs()).max(1e-300);
        worst = worst.max(defect / scale);
    }
    Ok(worst)
}

fn integrate_sphere_from_state_endpoint(
    params: &Params,
    x0: f64,
    y0: (f64, f64),
    x1: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64)> {
    let prof = crate::integrate::integrate_sphere_segment(params, x0, y0, x1, 1.0, cfg)?;
    Ok((*prof.value.last().unwrap(), *prof.derivative.last().unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::compute_exponents;
    use crate::testutil::dd::Dd;
    use approx::assert_relative_eq;

    fn p37() -> Params {
        Params::new(3, 7.0).unwrap()
    }

    #[test]
    fn start_values_leading_order() {
        let params = p37();
        let exps = compute_exponents(&params);
        let a = exps.a.unwrap();
        let mu = exps.mu;
        // theta0 -> 0: U0 ~ a theta0^{-mu}
        let theta0 = 1e-6;
        let (u0, du0) = singular_start_values(&params, theta0).unwrap();
        assert_relative_eq!(u0, a * theta0.powf(-mu), max_relative = 1e-6);
        // dU0/U0 -> -mu/theta0
        assert_relative_eq!(du0 / u0, -mu / theta0, max_relative = 1e-6);
    }

    #[test]
    fn start_values_match_double_double_oracle() {
        let params = p37();
        let theta0 = 1e-3;
        let (u0, du0) = singular_start_values(&params, theta0).unwrap();

        let two = Dd::from(2.0);
        let nine = Dd::from(9.0);
        let mu = Dd::from(1.0) / Dd::from(3.0);
        let a = (two / nine).pow(Dd::from(1.0) / Dd::from(6.0));
        let half = Dd::from(theta0) / two;
        let c = half.cos_small();
        let s = half.sin_small();
        let t2 = two * half.tan_small();
        let u_ref = a * c.pow(Dd::from(-1.0)) * t2.pow(Dd::from(0.0) - mu);
        let du_ref = a * c.pow(Dd::from(-3.0))
            * t2.pow(Dd::from(0.0) - mu - Dd::from(1.0))
            * (Dd::from(0.0) - mu + s * s);
        assert_relative_eq!(u0, u_ref.to_f64(), max_relative = 1e-12);
        assert_relative_eq!(du0, du_ref.to_f64(), max_relative = 1e-12);
    }

    #[test]
    fn start_values_reject_subcritical() {
        assert!(singular_start_values(&Params::new(3, 5.0).unwrap(), 1e-4).is_err());
        assert!(singular_start_values(&p37(), 0.5).is_err());
    }

    #[test]
    fn theta_star_stable_under_halving() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let sing = compute_theta_star(&params, &cfg).unwrap();
        assert!(sing.theta_star > 0.0 && sing.theta_star < std::f64::consts::PI);
        assert!(sing.refinement_estimate < 1e-6, "estimate {:e}", sing.refinement_estimate);
        assert_relative_eq!(sing.r_star, (sing.theta_star / 2.0).tan(), max_relative = 1e-14);
        // monotone decreasing trajectory
        for w in sing.profile.derivative.windows(1) {
            assert!(w[0] < 0.0);
        }
    }

    #[test]
    fn theta_star_halving_contracts_at_coarse_starts() {
        // with a coarse start the truncation error dominates integration
        // noise and halving must contract at least linearly
        let params = p37();
        let cfg = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-14, ..Default::default() };
        let sing = compute_theta_star_from(&params, &cfg, 8e-3, 1e-3).unwrap();
        let d1 = (sing.runs[1].1 - sing.runs[0].1).abs();
        let d2 = (sing.runs[2].1 - sing.runs[1].1).abs();
        assert!(d2 <= d1 / 2.0, "d1 = {d1:e}, d2 = {d2:e}");
        // coarse and default starts land on the same first zero
        let default_run = compute_theta_star(&params, &IntegratorConfig::default()).unwrap();
        assert_relative_eq!(sing.theta_star, default_run.theta_star, max_relative = 1e-6);
    }

    #[test]
    fn theta_star_above_large_p_bound() {
        // Theta* >= underline bound pi - arcsin(4/(p-1)) for N = 3
        let params = Params::new(3, 50.0).unwrap();
        let cfg = IntegratorConfig::default();
        let sing = compute_theta_star(&params, &cfg).unwrap();
        let bound = std::f64::consts::PI - (4.0f64 / 49.0).asin();
        assert!(sing.theta_star > bound, "theta* = {} vs bound {}", sing.theta_star, bound);
    }

    #[test]
    fn decay_rate_close_to_two_m() {
        let params = p37();
        let exps = compute_exponents(&params);
        let cfg = IntegratorConfig::default();
        let sing = compute_theta_star(&params, &cfg).unwrap();
        let rate = asymptotic_decay_check(&sing, &exps).unwrap();
        let two_m = 2.0 * exps.m.unwrap();
        assert!((rate - two_m).abs() < 0.15 * two_m, "rate {rate} vs 2m {two_m}");
    }

    #[test]
    fn singular_trajectory_solves_equation() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let sing = compute_theta_star(&params, &cfg).unwrap();
        let lo = 2.0 * sing.theta_start;
        let hi = sing.theta_star - 1e-6;
        let defect = equation_defect(&params, &sing.profile, lo, hi, 25).unwrap();
        assert!(defect < 1e-8, "relative equation defect {defect:e}");
    }

    #[test]
    fn regular_stays_below_singular_near_origin() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let sing = compute_theta_star(&params, &cfg).unwrap();
        let r0 = sing.r_star / 2.0;
        let rows = convergence_study_against(&params, &sing, &[10.0, 1e3], r0, &cfg).unwrap();
        assert!(rows[1].sup_distance < rows[0].sup_distance);
        // ordering near the origin: regular bounded, singular blows up
        let u_star = model::stereographic_u_from_capital(params.n, &sing.profile).unwrap();
        for &gamma in &[10.0, 1e3] {
            let prof = integrate_stereo_regular(&params, gamma, 1.0, &cfg).unwrap();
            let r_probe = u_star.x_min().max(prof.x_min()) * 1.5;
            let (u, _) = prof.eval(r_probe).unwrap();
            let (us, _) = u_star.eval(r_probe).unwrap();
            assert!(u < us, "gamma = {gamma}");
        }
    }

    #[test]
    fn extended_stereo_profile_splices_smoothly() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let sing = compute_theta_star(&params, &cfg).unwrap();
        let ext = sing.stereo_profile_extended(1e-9).unwrap();
        assert!(ext.x_min() <= 1e-9 * 1.0001);
        // asymptote and integration agree at the splice to O(r^2) once the
        // r^{-mu} trend is compensated
        let exps = compute_exponents(&params);
        let integrated = model::stereographic_u_from_capital(params.n, &sing.profile).unwrap();
        let splice = integrated.x_min();
        let (ra, rb) = (splice * 0.999, splice * 1.001);
        let (v_ext, _) = ext.eval(ra).unwrap();
        let (v_int, _) = ext.eval(rb).unwrap();
        assert_relative_eq!(v_ext * ra.powf(exps.mu), v_int * rb.powf(exps.mu), max_relative = 1e-7);
    }
}
