//! Emden phase-plane systems (flat and cap), Lyapunov and energy monitors,
//! equilibrium classification, sublevel-set trapping, and intersection
//! numbers between radial profiles.
//!
//! Flat system: `y' = z`, `z' = -alpha z + y - y^p`, with Lyapunov function
//! `J = z^2/2 - y^2/2 + y^{p+1}/(p+1)` satisfying `dJ/dt = -alpha z^2`.
//! The cap system carries the forcing terms `B0(t) y^p + B1(t) y` and the
//! shifted energy `E = H + B0 y^{p+1}/(p+1) + B1 y^2/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{IntegratorConfig, RadialProfile};
use crate::model::{self, Exponents, Params};
use crate::ode::{self, Verdict};

/// Emden-variable trajectory with Lyapunov/energy traces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseOrbit {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub j_trace: Vec<f64>,
    /// Cap-system energy trace; `None` for flat orbits.
    pub e_trace: Option<Vec<f64>>,
}

impl PhaseOrbit {
    pub fn empty(with_energy: bool) -> Self {
        Self {
            t: Vec::new(),
            y: Vec::new(),
            z: Vec::new(),
            j_trace: Vec::new(),
            e_trace: if with_energy { Some(Vec::new()) } else { None },
        }
    }

    pub fn push(&mut self, t: f64, y: f64, z: f64, p: f64, energy: Option<f64>) {
        self.t.push(t);
        self.y.push(y);
        self.z.push(z);
        self.j_trace.push(lyapunov_j(y, z, p));
        if let (Some(es), Some(e)) = (self.e_trace.as_mut(), energy) {
            es.push(e);
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn endpoint(&self) -> (f64, f64) {
        (*self.y.last().unwrap(), *self.z.last().unwrap())
    }
}

/// J(y, z) = z^2/2 - y^2/2 + y^{p+1}/(p+1).
pub fn lyapunov_j(y: f64, z: f64, p: f64) -> f64 {
    0.5 * z * z - 0.5 * y * y + y.abs().powf(p + 1.0) / (p + 1.0)
}

/// H(y, z) = z^2/2 - (y^2-1)/2 + (y^{p+1}-1)/(p+1), vanishing at (1, 0).
pub fn energy_h(y: f64, z: f64, p: f64) -> f64 {
    0.5 * z * z - 0.5 * (y * y - 1.0) + (y.abs().powf(p + 1.0) - 1.0) / (p + 1.0)
}

/// Cap energy E(y, z, t) = H + B0(t) y^{p+1}/(p+1) + m^2 B1(t) y^2/2, built
/// on the same forcing normalization as the cap Emden equation so that
/// dE/dt = -alpha z^2 + B0' y^{p+1}/(p+1) + m^2 B1' y^2/2 along orbits.
pub fn energy_e(y: f64, z: f64, t: f64, exps: &Exponents, n: u32, p: f64) -> Result<f64> {
    let (b0, b1) = model::cap_coefficients(t, exps, n)?;
    let m = exps.m.ok_or(Error::RequiresSupercritical { p, p_s: exps.p_s })?;
    Ok(energy_h(y, z, p) + b0 * y.abs().powf(p + 1.0) / (p + 1.0) + m * m * b1 * y * y / 2.0)
}

/// Positive y-intercept of {J = 0}: xi = ((p+1)/2)^{1/(p-1)}.
pub fn xi_intercept(p: f64) -> f64 {
    ((p + 1.0) / 2.0).powf(1.0 / (p - 1.0))
}

struct EmdenFlat {
    alpha: f64,
    p: f64,
}

impl ode::System<2> for EmdenFlat {
    fn rhs(&self, _t: f64, y: &[f64; 2]) -> [f64; 2] {
        let ypow = y[0].signum() * y[0].abs().powf(self.p);
        [y[1], -self.alpha * y[1] + y[0] - ypow]
    }
}

struct EmdenCap<'a> {
    alpha: f64,
    m2: f64,
    p: f64,
    exps: &'a Exponents,
    n: u32,
}

impl ode::System<2> for EmdenCap<'_> {
    fn rhs(&self, t: f64, y: &[f64; 2]) -> [f64; 2] {
        let (b0, b1) = model::cap_coefficients(t, self.exps, self.n).expect("cap system is supercritical");
        let ypow = y[0].signum() * y[0].abs().powf(self.p);
        [y[1], -self.alpha * y[1] + y[0] - ypow - b0 * ypow - self.m2 * b1 * y[0]]
    }
}

fn orbit_start(gamma_over_a: f64, m_mu: f64, t_start: f64) -> Result<(f64, f64)> {
    let y0 = gamma_over_a * (m_mu * t_start).exp();
    if !(y0 < 1e-6) {
        return Err(Error::StartTooLarge(format!(
            "y(t_start) = {y0:e} >= 1e-6; move t_start further left"
        )));
    }
    Ok((y0, m_mu * y0))
}

/// Integrate the flat Emden system from its unstable-manifold asymptote
/// `y ~ (gamma_bar/a) e^{m mu t}`, recording J along the orbit.
pub fn flat_orbit(params: &Params, gamma_bar: f64, t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<PhaseOrbit> {
    cfg.validate()?;
    if !(gamma_bar > 0.0) {
        return Err(Error::InvalidParams("gamma_bar must be > 0".into()));
    }
    let exps = model::compute_exponents(params);
    let (a, m, alpha) = exps.supercritical(params)?;
    let (y0, z0) = orbit_start(gamma_bar / a, m * exps.mu, t_span.0)?;
    let sys = EmdenFlat { alpha, p: params.p };
    let mut orbit = PhaseOrbit::empty(false);
    orbit.push(t_span.0, y0, z0, params.p, None);
    // scale the absolute floor to the tiny start so the early growth phase
    // stays under relative control
    let mut ctl = cfg.ctl(0.01);
    ctl.abs_tol = (cfg.abs_tol * y0).max(1e-290);
    ode::integrate(&sys, t_span.0, [y0, z0], t_span.1, &ctl, |s| {
        orbit.push(s.x1, s.y1[0], s.y1[1], params.p, None);
        Verdict::Continue
    })?;
    Ok(orbit)
}

/// Integrate the cap Emden system for the regular solution with
/// stereographic center value `gamma_stereo`, recording J and E.
pub fn cap_orbit(params: &Params, gamma_stereo: f64, t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<PhaseOrbit> {
    cfg.validate()?;
    if !(gamma_stereo > 0.0) {
        return Err(Error::InvalidParams("gamma must be > 0".into()));
    }
    let exps = model::compute_exponents(params);
    let (a, m, alpha) = exps.supercritical(params)?;
    let scale = 2f64.powf(-exps.q / (params.p - 1.0));
    let (y0, z0) = orbit_start(scale * gamma_stereo / a, m * exps.mu, t_span.0)?;
    let sys = EmdenCap { alpha, m2: m * m, p: params.p, exps: &exps, n: params.n };
    let mut orbit = PhaseOrbit::empty(true);
    let e0 = energy_e(y0, z0, t_span.0, &exps, params.n, params.p)?;
    orbit.push(t_span.0, y0, z0, params.p, Some(e0));
    let mut failed = None;
    let mut ctl = cfg.ctl(0.01);
    ctl.abs_tol = (cfg.abs_tol * y0).max(1e-290);
    ode::integrate(&sys, t_span.0, [y0, z0], t_span.1, &ctl, |s| {
        match energy_e(s.y1[0], s.y1[1], s.x1, &exps, params.n, params.p) {
            Ok(e) => {
                orbit.push(s.x1, s.y1[0], s.y1[1], params.p, Some(e));
                Verdict::Continue
            }
            Err(e) => {
                failed = Some(e);
                Verdict::Stop
            }
        }
    })?;
    match failed {
        Some(e) => Err(e),
        None => Ok(orbit),
    }
}

/// Linearization report at the equilibrium (1, 0): roots of
/// `lambda^2 + alpha lambda + (p-1) = 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub location: (f64, f64),
    /// Two eigenvalues as (re, im) pairs.
    pub eigenvalues: [(f64, f64); 2],
    pub spiral: bool,
}

pub fn equilibrium_report(exps: &Exponents, p: f64) -> Result<EquilibriumReport> {
    let alpha = exps.alpha.ok_or(Error::RequiresSupercritical { p, p_s: exps.p_s })?;
    let disc = alpha * alpha - 4.0 * (p - 1.0);
    let eigenvalues = if disc < 0.0 {
        let im = (-disc).sqrt() / 2.0;
        [(-alpha / 2.0, im), (-alpha / 2.0, -im)]
    } else {
        let rt = disc.sqrt();
        [((-alpha + rt) / 2.0, 0.0), ((-alpha - rt) / 2.0, 0.0)]
    };
    Ok(EquilibriumReport { location: (1.0, 0.0), eigenvalues, spiral: disc < 0.0 })
}

/// Result of counting sign changes of a difference of two profiles.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntersectionCount {
    /// Crossings certified simple (difference climbs well above the local
    /// interpolation noise on the bracketing cell).
    pub certified: usize,
    /// Sign changes too close to the noise floor to certify.
    pub indeterminate: usize,
}

/// Count sign changes of `a - b` over `interval`. Both profiles must cover
/// the interval; values between nodes come from cubic Hermite interpolation.
pub fn intersection_count(a: &RadialProfile, b: &RadialProfile, interval: (f64, f64)) -> Result<IntersectionCount> {
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::InvalidParams("empty interval".into()));
    }
    for (name, prof) in [("first", a), ("second", b)] {
        if prof.x_min() > lo || prof.x_max() < hi {
            return Err(Error::ProfileRange(format!(
                "{name} profile covers [{:e}, {:e}], requested [{lo:e}, {hi:e}]",
                prof.x_min(),
                prof.x_max()
            )));
        }
    }
    // merged node set restricted to the interval
    let mut xs: Vec<f64> = a
        .grid
        .iter()
        .chain(b.grid.iter())
        .copied()
        .filter(|&x| x >= lo && x <= hi)
        .collect();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    xs.dedup_by(|u, v| (*u - *v).abs() <= 1e-13 * u.abs().max(1e-300));

    let mut diffs: Vec<(f64, f64, f64)> = Vec::with_capacity(xs.len()); // (x, d, noise)
    for &x in &xs {
        let (va, _) = a.eval(x)?;
        let (vb, _) = b.eval(x)?;
        // |Hermite - linear| is O(h^2 f''), two orders above the actual
        // Hermite error on resolved grids; /64 keeps the gauge conservative
        // without drowning genuine crossings
        let noise_a = (va - a.eval_linear(x)?).abs();
        let noise_b = (vb - b.eval_linear(x)?).abs();
        let noise = (noise_a + noise_b) / 64.0 + 1e-14 * (va.abs() + vb.abs());
        diffs.push((x, va - vb, noise));
    }

    let mut certified = 0;
    let mut indeterminate = 0;
    let mut last: Option<(f64, f64, f64)> = None;
    for &(x, d, noise) in &diffs {
        if d == 0.0 {
            continue;
        }
        if let Some((_, dp, np)) = last {
            if (d > 0.0) != (dp > 0.0) {
                if (d - dp).abs() > 1e3 * noise.max(np) {
                    certified += 1;
                } else {
                    indeterminate += 1;
                }
            }
        }
        last = Some((x, d, noise));
    }
    Ok(IntersectionCount { certified, indeterminate })
}

/// Outcome of monitoring the trapping property of a cap orbit: once the
/// orbit enters {H < eps, y > 0} while the forcing terms sit below the
/// eps/8 thresholds, H must stay below 2 eps up to the monitored horizon.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrappingReport {
    pub eps: f64,
    pub entered_at: Option<f64>,
    pub monitored_to: f64,
    pub max_h_after_entry: f64,
    pub violated: bool,
}

/// Default trapping level: small enough that {H < 2 eps, y > 0} is confined
/// to the channel 0 <= y <= xi.
pub fn default_trapping_eps(p: f64) -> f64 {
    let xi = xi_intercept(p);
    let barrier_left = energy_h(0.0, 0.0, p);
    let barrier_right = energy_h(xi, 0.0, p);
    0.25 * barrier_left.min(barrier_right)
}

pub fn trapping_check(orbit: &PhaseOrbit, eps: f64, exps: &Exponents, n: u32, p: f64) -> Result<TrappingReport> {
    let xi = xi_intercept(p);
    let m = exps.m.ok_or(Error::RequiresSupercritical { p, p_s: exps.p_s })?;
    let b0_cap = eps / 8.0 / (xi.powf(p + 1.0) / (p + 1.0));
    let b1_cap = eps / 8.0 / (xi * xi / 2.0);
    let mut entered_at = None;
    let mut monitored_to = orbit.t[0];
    let mut max_h = f64::NEG_INFINITY;
    for i in 0..orbit.len() {
        let t = orbit.t[i];
        let (b0, b1) = model::cap_coefficients(t, exps, n)?;
        let b1 = m * m * b1;
        let below = b0 < b0_cap && b1 < b1_cap;
        if !below {
            break; // B0, B1 grow with t: the admissible horizon ends here
        }
        monitored_to = t;
        let h = energy_h(orbit.y[i], orbit.z[i], p);
        if entered_at.is_none() && h < eps && orbit.y[i] > 0.0 {
            entered_at = Some(t);
        }
        if entered_at.is_some() {
            max_h = max_h.max(h);
        }
    }
    Ok(TrappingReport {
        eps,
        entered_at,
        monitored_to,
        max_h_after_entry: max_h,
        violated: entered_at.is_some() && max_h >= 2.0 * eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::integrate_flat_regular;
    use crate::model::compute_exponents;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn p37() -> Params {
        Params::new(3, 7.0).unwrap()
    }

    #[test]
    fn lyapunov_values() {
        assert_eq!(lyapunov_j(0.0, 0.0, 7.0), 0.0);
        let p = 7.0;
        assert_relative_eq!(lyapunov_j(1.0, 0.0, p), -0.5 + 1.0 / (p + 1.0), max_relative = 1e-15);
        assert!(lyapunov_j(1.0, 0.0, p) < 0.0);
    }

    #[test]
    fn flat_orbit_converges_and_j_monotone() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let orbit = flat_orbit(&params, 1.0, (-20.0, 40.0), &cfg).unwrap();
        let (y_end, z_end) = orbit.endpoint();
        assert!(((y_end - 1.0).powi(2) + z_end.powi(2)).sqrt() < 1e-4, "endpoint ({y_end}, {z_end})");

        let mut max_increase: f64 = 0.0;
        for k in 1..orbit.len() {
            max_increase = max_increase.max(orbit.j_trace[k] - orbit.j_trace[k - 1]);
            assert!(orbit.j_trace[k] <= 1e-12, "J stays nonpositive");
        }
        assert!(max_increase < 1e-10, "max single-step J increase {max_increase:e}");
    }

    #[test]
    fn flat_orbit_dissipation_rate() {
        // (J_{k+1} - J_k)/dt ~ -alpha z^2 at midpoints, second order in dt
        let params = p37();
        let exps = compute_exponents(&params);
        let alpha = exps.alpha.unwrap();
        let cfg = IntegratorConfig { max_step: 0.05, ..Default::default() };
        let orbit = flat_orbit(&params, 1.0, (-20.0, 20.0), &cfg).unwrap();
        for k in 1..orbit.len() {
            let dt = orbit.t[k] - orbit.t[k - 1];
            let zm = 0.5 * (orbit.z[k] + orbit.z[k - 1]);
            let lhs = (orbit.j_trace[k] - orbit.j_trace[k - 1]) / dt;
            let rhs = -alpha * zm * zm;
            assert!((lhs - rhs).abs() <= 20.0 * dt * dt + 1e-12, "defect {} at dt {}", (lhs - rhs).abs(), dt);
        }
    }

    #[test]
    fn flat_orbit_matches_flat_profile() {
        // a rho^{-mu} y(t) with t = ln(rho)/m reproduces u(rho, 1)
        let params = p37();
        let exps = compute_exponents(&params);
        let (a, m, _) = exps.supercritical(&params).unwrap();
        let cfg = IntegratorConfig::default();
        let orbit = flat_orbit(&params, 1.0, (-25.0, 3.0), &cfg).unwrap();
        let prof = integrate_flat_regular(&params, 1.0, 200.0, &cfg).unwrap();
        for k in 0..orbit.len() {
            let rho = (m * orbit.t[k]).exp();
            if !(1e-3..=100.0).contains(&rho) {
                continue;
            }
            let expected = a * rho.powf(-exps.mu) * orbit.y[k];
            let (u, _) = prof.eval(rho).unwrap();
            assert_relative_eq!(u, expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn flat_orbit_guards_start() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        assert!(matches!(flat_orbit(&params, 1.0, (-1.0, 10.0), &cfg), Err(Error::StartTooLarge(_))));
    }

    #[test]
    fn equilibrium_classification() {
        let params = p37();
        let exps = compute_exponents(&params);
        let rep = equilibrium_report(&exps, params.p).unwrap();
        assert!(rep.spiral);
        assert_relative_eq!(rep.eigenvalues[0].0, -exps.alpha.unwrap() / 2.0, max_relative = 1e-14);
        assert!(rep.eigenvalues[0].1 > 0.0);

        // pure rotation at criticality: eigenvalues +- i sqrt(p-1)
        let pc = Params::new(3, 5.0).unwrap();
        let ec = compute_exponents(&pc);
        let rep = equilibrium_report(&ec, pc.p).unwrap();
        assert_abs_diff_eq!(rep.eigenvalues[0].0, 0.0, epsilon = 1e-12);
        assert_relative_eq!(rep.eigenvalues[0].1, 2.0, max_relative = 1e-12);

        // above Joseph-Lundgren: node, not spiral
        let pn = Params::new(11, 8.0).unwrap();
        let en = compute_exponents(&pn);
        let rep = equilibrium_report(&en, pn.p).unwrap();
        assert!(!rep.spiral);
        assert_eq!(rep.eigenvalues[0].1, 0.0);
    }

    #[test]
    fn equilibrium_consistent_with_classify() {
        for &(n, p) in &[(3u32, 7.0), (3, 50.0), (11, 6.95), (11, 8.0), (4, 9.0)] {
            let params = Params::new(n, p).unwrap();
            let exps = compute_exponents(&params);
            let rep = equilibrium_report(&exps, p).unwrap();
            assert_eq!(rep.spiral, model::classify(&params).spiral, "N={n} p={p}");
        }
    }

    #[test]
    fn intersection_identical_profiles() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let prof = integrate_flat_regular(&params, 1.0, 30.0, &cfg).unwrap();
        let count = intersection_count(&prof, &prof, (0.1, 20.0)).unwrap();
        assert_eq!(count.certified, 0);
        assert_eq!(count.indeterminate, 0);
    }

    #[test]
    fn intersection_count_stable_under_refinement() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let flat = integrate_flat_regular(&params, 1.0, 150.0, &cfg).unwrap();
        let tight = IntegratorConfig { rel_tol: 1e-12, max_step: 0.05, ..cfg };
        let flat_fine = integrate_flat_regular(&params, 1.0, 150.0, &tight).unwrap();
        let sing = crate::singular::flat_singular_profile(&params, 5e-3, 150.0, 200).unwrap();
        let sing_fine = crate::singular::flat_singular_profile(&params, 5e-3, 150.0, 400).unwrap();
        let base = intersection_count(&flat, &sing, (0.01, 100.0)).unwrap();
        let fine = intersection_count(&flat_fine, &sing_fine, (0.01, 100.0)).unwrap();
        assert_eq!(base.certified, fine.certified);
        assert_eq!(base.indeterminate, 0);
        assert_eq!(fine.indeterminate, 0);
    }

    #[test]
    fn flat_orbit_distance_shrinks_over_last_decade() {
        let params = p37();
        let orbit = flat_orbit(&params, 1.0, (-20.0, 40.0), &IntegratorConfig::default()).unwrap();
        let dist = |k: usize| ((orbit.y[k] - 1.0).powi(2) + orbit.z[k].powi(2)).sqrt();
        let t_end = *orbit.t.last().unwrap();
        let at = |t: f64| (0..orbit.len()).find(|&k| orbit.t[k] >= t).unwrap();
        // spiral decay: strictly closer at the end than a decade before
        assert!(dist(orbit.len() - 1) < dist(at(t_end - 10.0)) / 10.0);
    }

    #[test]
    fn cap_orbit_trapping() {
        let params = p37();
        let exps = compute_exponents(&params);
        let cfg = IntegratorConfig::default();
        let gamma = 1e4;
        let orbit = cap_orbit(&params, gamma, (-40.0, -2.0), &cfg).unwrap();
        let eps = default_trapping_eps(params.p);
        let rep = trapping_check(&orbit, eps, &exps, params.n, params.p).unwrap();
        assert!(rep.entered_at.is_some(), "orbit should enter the trap for large gamma");
        assert!(!rep.violated, "H reached {} vs 2 eps = {}", rep.max_h_after_entry, 2.0 * eps);
    }

    #[test]
    fn cap_energy_growth_bounded_by_forcing() {
        // E(t_end) - E(t_start) <= B0(T) xi^{p+1}/(p+1) + B1(T) xi^2/2 + tol
        let params = p37();
        let exps = compute_exponents(&params);
        let cfg = IntegratorConfig::default();
        let orbit = cap_orbit(&params, 1e4, (-40.0, -2.0), &cfg).unwrap();
        let es = orbit.e_trace.as_ref().unwrap();
        let t_end = *orbit.t.last().unwrap();
        let (b0, b1) = model::cap_coefficients(t_end, &exps, params.n).unwrap();
        let m = exps.m.unwrap();
        let xi = xi_intercept(params.p);
        let bound = b0 * xi.powf(params.p + 1.0) / (params.p + 1.0) + m * m * b1 * xi * xi / 2.0;
        assert!(es.last().unwrap() - es.first().unwrap() <= bound + 1e-9);
    }

    #[test]
    fn energy_e_reduces_to_h_for_early_times() {
        let params = p37();
        let exps = compute_exponents(&params);
        let e = energy_e(0.5, 0.1, -300.0, &exps, 3, params.p).unwrap();
        assert_relative_eq!(e, energy_h(0.5, 0.1, params.p), max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn xi_is_the_positive_j_intercept(p in 1.2f64..30.0) {
            let xi = xi_intercept(p);
            prop_assert!(lyapunov_j(xi, 0.0, p).abs() <= 1e-12);
        }

        #[test]
        fn h_vanishes_at_equilibrium(p in 1.2f64..30.0) {
            prop_assert!(energy_h(1.0, 0.0, p).abs() <= 1e-15);
        }
    }
}
