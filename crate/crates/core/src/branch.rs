//! The bifurcation map Gamma -> Theta(Gamma): pointwise evaluation through
//! the variational co-integration, branch tracing with turning-point
//! bracketing, oscillation counts around a reference angle, and inversion
//! of the branch in the subcritical regime.
//!
//! Slope signs come from the variational value w(R): differentiating
//! u(R(gamma), gamma) = 0 gives R'(gamma) = -w(R)/u_r(R) with u_r(R) < 0,
//! so sign(Theta') = sign(R') = sign(w(R)).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{integrate_stereo_regular, integrate_variational, IntegratorConfig};
use crate::model::{self, Params};

/// Default half-width of the dead band used when counting oscillations.
pub const OSCILLATION_DEAD_BAND: f64 = 1e-9;
/// Turning brackets are refined until their width in log10(Gamma) drops
/// below this.
pub const TURNING_BRACKET_LOG10_WIDTH: f64 = 1e-4;

/// One evaluated point of the bifurcation diagram.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BranchPoint {
    /// Center value Gamma = U(0) on the sphere.
    pub gamma_sphere: f64,
    /// Stereographic center value gamma = 2^{(N-2)/2} Gamma.
    pub gamma_stereo: f64,
    /// First zero Theta(Gamma) of the cap solution.
    pub theta: f64,
    /// R = tan(Theta/2).
    pub r: f64,
    /// Sign of Theta'(Gamma): -1, 0 (inside the dead band), or +1.
    pub slope_sign: i8,
    /// Variational value w(R).
    pub w_end: f64,
}

/// An evaluated stretch of the bifurcation diagram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub params: Params,
    /// Points ordered by increasing Gamma.
    pub points: Vec<BranchPoint>,
    /// Turning-point brackets (Gamma_low, Gamma_high), each containing a
    /// slope-sign change.
    pub turning_points: Vec<(f64, f64)>,
    pub theta_min: f64,
    /// Gamma at which theta_min was attained.
    pub theta_min_gamma: f64,
    /// Sign changes of Theta - Theta_star, when a reference was supplied.
    pub oscillation_count: Option<usize>,
    /// Gammas that failed to evaluate, with the error text.
    pub failures: Vec<(f64, String)>,
}

/// Evaluate one branch point: Theta, R, w(R), and the slope sign.
///
/// The sign comes from the variational value w(R) whenever that value is
/// resolvable above the integration noise floor; for branch stretches where
/// w decays through many decades (extreme center values) it falls back to a
/// centered finite difference of log R against log gamma.
pub fn theta_of_gamma(params: &Params, gamma_sphere: f64, cfg: &IntegratorConfig) -> Result<BranchPoint> {
    let sol = integrate_variational(params, gamma_sphere, cfg)?;
    let gamma_stereo_v = params.gamma_stereo_of_sphere(gamma_sphere);
    let r = if critical_concentrated(params, gamma_stereo_v) {
        crate::integrate::critical_cap_zero(params, gamma_stereo_v, cfg)?
    } else {
        sol.r_zero()
    };
    let w_max = sol.w.value.iter().fold(0.0f64, |acc, w| acc.max(w.abs()));
    // absolute errors on w persist to the endpoint through the constant
    // homogeneous mode; below this floor the computed w(R) is noise
    let w_noise = 1e3 * cfg.rel_tol * w_max;
    let slope_sign = if !sol.tail_closed && sol.w_end.abs() > w_noise {
        if sol.w_end > 0.0 {
            1
        } else {
            -1
        }
    } else {
        fd_slope_sign(params, gamma_sphere, cfg)?
    };
    Ok(BranchPoint {
        gamma_sphere,
        gamma_stereo: params.gamma_stereo_of_sphere(gamma_sphere),
        theta: model::theta_of_stereo_r(r),
        r,
        slope_sign,
        w_end: sol.w_end,
    })
}

/// Centered finite difference of ln R against ln Gamma, with a reliability
/// gate; 0 when the difference is below the resolvable floor.
fn fd_slope_sign(params: &Params, gamma_sphere: f64, cfg: &IntegratorConfig) -> Result<i8> {
    let h = 0.25f64;
    let r_hi = theta_r_at(params, gamma_sphere * h.exp(), cfg)?;
    let r_lo = theta_r_at(params, gamma_sphere * (-h).exp(), cfg)?;
    let d = r_hi.ln() - r_lo.ln();
    if d.abs() > 40.0 * cfg.rel_tol {
        Ok(if d > 0.0 { 1 } else { -1 })
    } else {
        Ok(0)
    }
}

fn theta_r_at(params: &Params, gamma_sphere: f64, cfg: &IntegratorConfig) -> Result<f64> {
    robust_first_zero_r(params, params.gamma_stereo_of_sphere(gamma_sphere), 1.0, cfg)
}

/// First zero R, routed through the Emden frame for concentrated critical
/// solutions where the stereographic extraction loses the hemisphere gap
/// to roundoff.
fn robust_first_zero_r(params: &Params, gamma_stereo: f64, lambda: f64, cfg: &IntegratorConfig) -> Result<f64> {
    if lambda == 1.0 && critical_concentrated(params, gamma_stereo) {
        crate::integrate::critical_cap_zero(params, gamma_stereo, cfg)
    } else {
        let prof = integrate_stereo_regular(params, gamma_stereo, lambda, cfg)?;
        Ok(prof.first_zero.expect("stereo integration always reports a zero"))
    }
}

fn critical_concentrated(params: &Params, gamma_stereo: f64) -> bool {
    params.p == params.p_critical() && gamma_stereo.powf((params.p - 1.0) / 2.0) > 1e2
}

/// Trace the branch over a log-spaced Gamma grid, bisecting every
/// slope-sign change down to a narrow bracket in log Gamma.
pub fn trace_branch(
    params: &Params,
    gamma_min: f64,
    gamma_max: f64,
    n_points: usize,
    cfg: &IntegratorConfig,
) -> Result<Branch> {
    if !(gamma_min > 0.0 && gamma_min < gamma_max) {
        return Err(Error::InvalidParams("need 0 < gamma_min < gamma_max".into()));
    }
    if n_points < 2 {
        return Err(Error::InvalidParams("n_points must be >= 2".into()));
    }
    let mut points: Vec<BranchPoint> = Vec::with_capacity(n_points);
    let mut failures = Vec::new();
    let (l0, l1) = (gamma_min.ln(), gamma_max.ln());
    for k in 0..n_points {
        let g = (l0 + (l1 - l0) * k as f64 / (n_points - 1) as f64).exp();
        match theta_of_gamma(params, g, cfg) {
            Ok(pt) => points.push(pt),
            Err(e) => failures.push((g, e.to_string())),
        }
    }
    if points.is_empty() {
        return Err(Error::BracketFailure("no branch point evaluated successfully".into()));
    }

    // Refine every sign change between consecutive points.
    let mut turning_points = Vec::new();
    let mut inserted: Vec<BranchPoint> = Vec::new();
    let width = TURNING_BRACKET_LOG10_WIDTH * std::f64::consts::LN_10;
    for k in 1..points.len() {
        let (mut lo, mut hi) = (points[k - 1], points[k]);
        if lo.slope_sign == 0 || hi.slope_sign == 0 || lo.slope_sign == hi.slope_sign {
            continue;
        }
        while (hi.gamma_sphere / lo.gamma_sphere).ln() > width {
            let gm = (0.5 * (lo.gamma_sphere.ln() + hi.gamma_sphere.ln())).exp();
            match theta_of_gamma(params, gm, cfg) {
                Ok(mid) => {
                    if mid.slope_sign == lo.slope_sign {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    inserted.push(mid);
                }
                Err(e) => {
                    failures.push((gm, e.to_string()));
                    break;
                }
            }
        }
        turning_points.push((lo.gamma_sphere, hi.gamma_sphere));
    }
    points.extend(inserted);
    points.sort_by(|a, b| a.gamma_sphere.partial_cmp(&b.gamma_sphere).unwrap());
    points.dedup_by(|a, b| a.gamma_sphere == b.gamma_sphere);

    let (mut theta_min, mut theta_min_gamma) = (f64::INFINITY, f64::NAN);
    for pt in &points {
        if pt.theta < theta_min {
            theta_min = pt.theta;
            theta_min_gamma = pt.gamma_sphere;
        }
    }
    Ok(Branch {
        params: *params,
        points,
        turning_points,
        theta_min,
        theta_min_gamma,
        oscillation_count: None,
        failures,
    })
}

/// Count sign changes of Theta(Gamma_i) - theta_star along the branch,
/// skipping points inside the dead band.
pub fn oscillation_count(branch: &Branch, theta_star: f64) -> usize {
    oscillation_count_with(branch, theta_star, OSCILLATION_DEAD_BAND)
}

pub fn oscillation_count_with(branch: &Branch, theta_star: f64, dead_band: f64) -> usize {
    let mut count = 0;
    let mut last: Option<bool> = None;
    for pt in &branch.points {
        let d = pt.theta - theta_star;
        if d.abs() <= dead_band {
            continue;
        }
        let sign = d > 0.0;
        if let Some(prev) = last {
            if prev != sign {
                count += 1;
            }
        }
        last = Some(sign);
    }
    count
}

/// Attach an oscillation count around `theta_star` to a traced branch.
pub fn with_oscillation_count(mut branch: Branch, theta_star: f64) -> Branch {
    branch.oscillation_count = Some(oscillation_count(&branch, theta_star));
    branch
}

/// Upper estimate of the nonexistence threshold: the smallest Theta seen on
/// the evaluated branch, with the Gamma attaining it. The true threshold is
/// the infimum over all Gamma, so this is an upper bound for it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThetaFloorEstimate {
    pub theta_min: f64,
    pub gamma_at_min: f64,
}

pub fn underline_theta_estimate(branch: &Branch) -> ThetaFloorEstimate {
    ThetaFloorEstimate { theta_min: branch.theta_min, gamma_at_min: branch.theta_min_gamma }
}

/// First zero Theta for a given Gamma without the variational overhead,
/// optionally with a coupling constant lambda on the nonlinearity.
pub fn theta_at_scaled(params: &Params, gamma_sphere: f64, lambda: f64, cfg: &IntegratorConfig) -> Result<f64> {
    let r = robust_first_zero_r(params, params.gamma_stereo_of_sphere(gamma_sphere), lambda, cfg)?;
    Ok(model::theta_of_stereo_r(r))
}

/// Invert the branch: the unique Gamma with Theta(Gamma) = theta_target,
/// valid for 1 < p <= p_S where the branch is strictly decreasing.
pub fn gamma_of_theta(params: &Params, theta_target: f64, cfg: &IntegratorConfig) -> Result<f64> {
    if params.p > params.p_critical() {
        return Err(Error::InvalidParams(format!(
            "branch inversion requires 1 < p <= p_S (p = {}, p_S = {})",
            params.p,
            params.p_critical()
        )));
    }
    gamma_of_theta_scaled(params, theta_target, 1.0, cfg)
}

/// Branch inversion with a coupling constant lambda (same monotonicity).
pub fn gamma_of_theta_scaled(
    params: &Params,
    theta_target: f64,
    lambda: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if !(theta_target > 0.0 && theta_target < std::f64::consts::PI) {
        return Err(Error::InvalidParams("theta_target must lie in (0, pi)".into()));
    }
    // successive Theta decrements below this are considered branch
    // flattening onto an asymptote the target cannot cross
    let flat_tol = 1e4 * cfg.rel_tol;
    let mut lo = 1e-4;
    let mut hi = 1.0;
    let mut theta_lo = theta_at_scaled(params, lo, lambda, cfg)?;
    while theta_lo < theta_target {
        lo /= 100.0;
        if lo < 1e-30 {
            return Err(Error::OutOfRange(format!(
                "Theta = {theta_target} not attained for arbitrarily small Gamma"
            )));
        }
        let next = theta_at_scaled(params, lo, lambda, cfg)?;
        if (next - theta_lo).abs() < flat_tol {
            return Err(Error::OutOfRange(format!(
                "Theta = {theta_target} sits at or above the small-Gamma asymptote (~{next})"
            )));
        }
        theta_lo = next;
    }
    let mut theta_hi = theta_at_scaled(params, hi, lambda, cfg)?;
    while theta_hi > theta_target {
        hi *= 100.0;
        if hi > 1e30 {
            return Err(Error::OutOfRange(format!(
                "Theta = {theta_target} not attained: Theta(Gamma) stays above it up to Gamma = 1e30"
            )));
        }
        let next = theta_at_scaled(params, hi, lambda, cfg)?;
        if (theta_hi - next).abs() < flat_tol && next > theta_target - flat_tol {
            return Err(Error::OutOfRange(format!(
                "Theta = {theta_target} sits at or below the large-Gamma asymptote (~{next})"
            )));
        }
        theta_hi = next;
    }
    // bisection on ln Gamma to relative tolerance 1e-10
    let mut llo = lo.ln();
    let mut lhi = hi.ln();
    while lhi - llo > 1e-11 {
        let mid = 0.5 * (llo + lhi);
        let theta_mid = theta_at_scaled(params, mid.exp(), lambda, cfg)?;
        if theta_mid > theta_target {
            llo = mid;
        } else {
            lhi = mid;
        }
    }
    Ok((0.5 * (llo + lhi)).exp())
}
