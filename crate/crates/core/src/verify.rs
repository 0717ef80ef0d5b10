//! Acceptance checks: every numbered criterion is a runnable function
//! returning a structured report, shared by the CLI `verify` command and
//! the `acceptance` integration test.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::branch::{self, trace_branch};
use crate::integrate::{
    flat_singular_residual, integrate_flat_regular, integrate_sphere_regular, IntegratorConfig,
};
use crate::model::{classify, compute_exponents, Params};
use crate::phase::{equilibrium_report, flat_orbit, intersection_count};
use crate::singular::{self, compute_theta_star, flat_singular_profile};
use crate::spectral;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    /// One line per check: measured value against its tolerance.
    pub checks: Vec<String>,
    /// Failing checks only.
    pub failures: Vec<String>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{} criterion {:2} [{}] ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds
        )
    }
}

struct Checker {
    checks: Vec<String>,
    failures: Vec<String>,
}

impl Checker {
    fn new() -> Self {
        Self { checks: Vec::new(), failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if ok {
            self.checks.push(format!("ok: {detail}"));
        } else {
            self.checks.push(format!("FAIL: {detail}"));
            self.failures.push(detail);
        }
    }

    fn error(&mut self, detail: String) {
        self.checks.push(format!("ERROR: {detail}"));
        self.failures.push(detail);
    }

    fn finish(self, id: usize, name: &str, started: Instant) -> CriterionReport {
        CriterionReport {
            id,
            name: name.to_string(),
            passed: self.failures.is_empty(),
            checks: self.checks,
            failures: self.failures,
            seconds: started.elapsed().as_secs_f64(),
        }
    }
}

/// IDs of all acceptance criteria.
pub fn all_ids() -> Vec<usize> {
    (1..=14).collect()
}

/// Named criterion subsets accepted by `verify --suite`.
pub fn suite_ids(name: &str) -> Option<Vec<usize>> {
    match name {
        "all" => Some(all_ids()),
        "critical-n3" => Some(vec![1, 5]),
        "supercritical-n3" => Some(vec![6, 7, 8, 14]),
        "identities" => Some(vec![2, 3, 4, 9]),
        "bounds" => Some(vec![10]),
        "limits-p1" => Some(vec![12]),
        "bessel" => Some(vec![13]),
        "variational" => Some(vec![11]),
        _ => None,
    }
}

/// Run one criterion by id (1..=14).
pub fn run_criterion(id: usize) -> CriterionReport {
    match id {
        1 => criterion_01_eigen_closed_form(),
        2 => criterion_02_exponent_identities(),
        3 => criterion_03_flat_singular_residual(),
        4 => criterion_04_psi0_identity(),
        5 => criterion_05_critical_limits(),
        6 => criterion_06_supercritical_oscillation(),
        7 => criterion_07_lyapunov_suite(),
        8 => criterion_08_intersection_growth(),
        9 => criterion_09_pohozaev_endpoints(),
        10 => criterion_10_nonexistence(),
        11 => criterion_11_variational_slope(),
        12 => criterion_12_p_to_one_limits(),
        13 => criterion_13_bessel_limit(),
        14 => criterion_14_singular_convergence(),
        other => CriterionReport {
            id: other,
            name: "unknown".into(),
            passed: false,
            checks: vec![],
            failures: vec![format!("no criterion with id {other}")],
            seconds: 0.0,
        },
    }
}

pub fn run_all() -> Vec<CriterionReport> {
    all_ids().into_iter().map(run_criterion).collect()
}

fn criterion_01_eigen_closed_form() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let cfg = IntegratorConfig::default();
    for theta in [0.5, 1.0, FRAC_PI_2, 2.0, 3.0] {
        match spectral::lambda1(3, theta, &cfg) {
            Ok(res) => {
                let expect = (PI / theta).powi(2) - 1.0;
                let err = (res.lambda1 - expect).abs();
                c.check(err < 1e-8, format!("Theta={theta:.6}: |lambda1 - closed form| = {err:.2e} < 1e-8"));
            }
            Err(e) => c.error(format!("lambda1(3, {theta}): {e}")),
        }
    }
    let dt = started.elapsed().as_secs_f64();
    c.check(dt < 5.0, format!("runtime {dt:.2} s < 5 s"));
    c.finish(1, "closed-form eigenvalue oracle (N=3)", started)
}

fn criterion_02_exponent_identities() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let mut worst = 0.0f64;
    for n in 3..=12u32 {
        let p_s = Params::new(n, 2.0).unwrap().p_critical();
        for j in 1..=50 {
            let p = p_s + 10.0 * j as f64 / 50.0;
            let params = Params::new(n, p).unwrap();
            let e = compute_exponents(&params);
            let m = e.m.unwrap();
            let ident = m * m * e.mu * (params.nf() - 2.0 - e.mu);
            worst = worst.max((ident - 1.0).abs());
        }
    }
    c.check(worst <= 1e-14, format!("max |m^2 mu (N-2-mu) - 1| = {worst:.2e} <= 1e-14 over N=3..12, 50-pt p grids"));
    let p_jl = Params::new(11, 2.0).unwrap().p_joseph_lundgren();
    let expect = 1.0 + 4.0 / (7.0 - 2.0 * 10f64.sqrt());
    let err = ((p_jl - expect) / expect).abs();
    c.check(err < 1e-12, format!("p_JL(11) = {p_jl:.12} matches 1+4/(7-2 sqrt(10)) to {err:.2e} < 1e-12"));
    c.finish(2, "exponent identities", started)
}

fn criterion_03_flat_singular_residual() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    for (n, p) in [(3u32, 7.0), (5, 4.0), (11, 8.0)] {
        let params = Params::new(n, p).unwrap();
        let mut worst = 0.0f64;
        for k in 0..200 {
            let rho = 0.1 * 100f64.powf(k as f64 / 199.0);
            worst = worst.max(flat_singular_residual(&params, rho));
        }
        c.check(worst < 1e-10, format!("(N={n}, p={p}): max relative residual {worst:.2e} < 1e-10 on [0.1, 10]"));
    }
    c.finish(3, "flat singular residual", started)
}

fn criterion_04_psi0_identity() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    for n in [3u32, 4, 10] {
        let grid: Vec<f64> = (0..500).map(|k| 0.1 * 100f64.powf(k as f64 / 499.0)).collect();
        let res = spectral::psi0_residual(n, &grid);
        c.check(res < 1e-9, format!("N={n}: max |(L + N A^2) psi0| = {res:.2e} < 1e-9 on [0.1, 10]"));
    }
    c.finish(4, "psi0 identity", started)
}

fn criterion_05_critical_limits() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let params = Params::new(3, 5.0).unwrap();
    let cfg = IntegratorConfig { rel_tol: 1e-11, abs_tol: 1e-13, ..Default::default() };
    let n_pts = 60;
    let (l0, l1) = (1e-3f64.ln(), 1e4f64.ln());
    let mut thetas = Vec::with_capacity(n_pts);
    let mut failed = false;
    for k in 0..n_pts {
        let g = (l0 + (l1 - l0) * k as f64 / (n_pts - 1) as f64).exp();
        match branch::theta_at_scaled(&params, g, 1.0, &cfg) {
            Ok(t) => thetas.push(t),
            Err(e) => {
                c.error(format!("Theta(Gamma={g:.3e}) failed: {e}"));
                failed = true;
            }
        }
    }
    if !failed {
        let monotone = thetas.windows(2).all(|w| w[0] > w[1]);
        c.check(monotone, "Theta strictly decreasing on the 60-point log grid [1e-3, 1e4]".into());
        let last = *thetas.last().unwrap();
        c.check(
            last > FRAC_PI_2 && last < FRAC_PI_2 + 0.05,
            format!("Theta(1e4) = {last:.10} in (pi/2, pi/2 + 0.05)"),
        );
        let min = thetas.iter().cloned().fold(f64::INFINITY, f64::min);
        c.check(min > FRAC_PI_2, format!("every Theta > pi/2 (min = {min:.10}, pi/2 = {FRAC_PI_2:.10})"));
    }
    let dt = started.elapsed().as_secs_f64();
    c.check(dt < 60.0, format!("runtime {dt:.2} s < 60 s"));
    c.finish(5, "critical-case limits (N=3, p=5)", started)
}

fn criterion_06_supercritical_oscillation() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let params = Params::new(3, 7.0).unwrap();
    let cfg = IntegratorConfig::default();
    match compute_theta_star(&params, &cfg) {
        Ok(sing) => {
            c.check(
                sing.refinement_estimate < 1e-6,
                format!("Theta* = {:.10} with refinement estimate {:.2e} < 1e-6", sing.theta_star, sing.refinement_estimate),
            );
            match trace_branch(&params, 1.0, 1e6, 121, &cfg) {
                Ok(br) => {
                    let br = branch::with_oscillation_count(br, sing.theta_star);
                    let osc = br.oscillation_count.unwrap();
                    c.check(osc >= 2, format!("oscillation count around Theta* = {osc} >= 2 (branch to Gamma = 1e6)"));
                    c.check(!br.turning_points.is_empty(), format!("{} turning bracket(s) found", br.turning_points.len()));
                    c.check(br.failures.is_empty(), format!("{} branch evaluation failures", br.failures.len()));
                }
                Err(e) => c.error(format!("trace_branch: {e}")),
            }
        }
        Err(e) => c.error(format!("compute_theta_star: {e}")),
    }
    c.finish(6, "supercritical oscillation (N=3, p=7)", started)
}

fn criterion_07_lyapunov_suite() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let params = Params::new(3, 7.0).unwrap();
    let cfg = IntegratorConfig::default();
    match flat_orbit(&params, 1.0, (-20.0, 40.0), &cfg) {
        Ok(orbit) => {
            let mut max_inc = f64::NEG_INFINITY;
            for k in 1..orbit.len() {
                max_inc = max_inc.max(orbit.j_trace[k] - orbit.j_trace[k - 1]);
            }
            c.check(max_inc < 1e-10, format!("max single-step J increase {max_inc:.2e} < 1e-10"));
            let (y, z) = orbit.endpoint();
            let dist = ((y - 1.0).powi(2) + z.powi(2)).sqrt();
            c.check(dist < 1e-4, format!("endpoint distance to (1,0) = {dist:.2e} < 1e-4"));
        }
        Err(e) => c.error(format!("flat_orbit: {e}")),
    }
    let exps = compute_exponents(&params);
    match equilibrium_report(&exps, params.p) {
        Ok(rep) => {
            let regime = classify(&params);
            c.check(
                rep.spiral && regime.spiral,
                format!("equilibrium classified spiral = {} consistent with regime spiral = {}", rep.spiral, regime.spiral),
            );
        }
        Err(e) => c.error(format!("equilibrium_report: {e}")),
    }
    c.finish(7, "phase-plane Lyapunov suite (N=3, p=7, gamma_bar=1)", started)
}

fn criterion_08_intersection_growth() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let params = Params::new(3, 7.0).unwrap();
    let cfg = IntegratorConfig::default();
    // flat: u(., 1) against a rho^{-mu} over growing windows
    let flat = match integrate_flat_regular(&params, 1.0, 1.2e3, &cfg) {
        Ok(p) => p,
        Err(e) => {
            c.error(format!("integrate_flat_regular: {e}"));
            return c.finish(8, "intersection growth", started);
        }
    };
    let sing_flat = flat_singular_profile(&params, 5e-3, 1.2e3, 200).unwrap();
    let mut counts = Vec::new();
    for rho_max in [10.0, 100.0, 1000.0] {
        match intersection_count(&flat, &sing_flat, (0.01, rho_max)) {
            Ok(ic) => {
                c.check(ic.indeterminate == 0, format!("rho_max={rho_max}: {} indeterminate crossings", ic.indeterminate));
                counts.push(ic.certified);
            }
            Err(e) => c.error(format!("intersection_count flat (rho_max {rho_max}): {e}")),
        }
    }
    if counts.len() == 3 {
        c.check(
            counts[0] <= counts[1] && counts[1] <= counts[2],
            format!("flat counts nondecreasing in rho_max: {counts:?}"),
        );
        c.check(counts[2] >= 3, format!("count at rho_max = 1e3 is {} >= 3", counts[2]));
    }
    // cap: u(., gamma) against the singular solution
    match compute_theta_star(&params, &cfg) {
        Ok(sing) => {
            let mut cap_counts = Vec::new();
            for gamma in [10.0, 1e4] {
                let run = || -> crate::error::Result<usize> {
                    let prof = crate::integrate::integrate_stereo_regular(&params, gamma, 1.0, &cfg)?;
                    let ext = sing.stereo_profile_extended(prof.x_min())?;
                    let hi = prof.first_zero.unwrap().min(sing.r_star);
                    let lo = 2.0 * prof.x_min().max(ext.x_min());
                    let ic = intersection_count(&prof, &ext, (lo, hi))?;
                    Ok(ic.certified)
                };
                match run() {
                    Ok(n) => cap_counts.push(n),
                    Err(e) => c.error(format!("cap intersection (gamma {gamma}): {e}")),
                }
            }
            if cap_counts.len() == 2 {
                c.check(
                    cap_counts[1] > cap_counts[0],
                    format!("cap count at gamma=1e4 ({}) > count at gamma=10 ({})", cap_counts[1], cap_counts[0]),
                );
            }
        }
        Err(e) => c.error(format!("compute_theta_star: {e}")),
    }
    c.finish(8, "intersection growth", started)
}

fn criterion_09_pohozaev_endpoints() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let cfg = IntegratorConfig::default();
    for (n, p, gamma) in [
        (3u32, 7.0, 1.0),
        (3, 7.0, 100.0),
        (3, 5.0, 1.0),
        (4, 3.0, 2.0),
        (5, 4.0, 1.0),
        (11, 8.0, 1.0),
    ] {
        let params = Params::new(n, p).unwrap();
        let run = || -> crate::error::Result<(f64, f64, f64)> {
            let prof = integrate_sphere_regular(&params, gamma, &cfg)?;
            let trace = spectral::pohozaev_trace(&params, &prof)?;
            let h_end = trace.h_values.last().copied().unwrap().abs();
            let h_start = trace.h_values.first().copied().unwrap().abs();
            Ok((h_end, h_start, trace.scale))
        };
        match run() {
            Ok((h_end, h_start, scale)) => {
                c.check(
                    h_end < 1e-8 * scale,
                    format!("(N={n}, p={p}, Gamma={gamma}): |H(Theta)| = {h_end:.2e} < 1e-8 x scale {scale:.2e}"),
                );
                c.check(
                    h_start < 1e-8 * scale,
                    format!("(N={n}, p={p}, Gamma={gamma}): |H(theta_min)| = {h_start:.2e} < 1e-8 x scale {scale:.2e}"),
                );
            }
            Err(e) => c.error(format!("(N={n}, p={p}, Gamma={gamma}): {e}")),
        }
    }
    c.finish(9, "Pohozaev endpoints", started)
}

fn criterion_10_nonexistence() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    match spectral::nonexistence_certificate(3, 10.0, 2.0) {
        Ok(v) => c.check(v, "certificate true at (N=3, p=10, Theta=2.0)".into()),
        Err(e) => c.error(format!("certificate(2.0): {e}")),
    }
    match spectral::nonexistence_certificate(3, 10.0, 3.1) {
        Ok(v) => c.check(!v, "certificate false at (N=3, p=10, Theta=3.1)".into()),
        Err(e) => c.error(format!("certificate(3.1): {e}")),
    }
    let params = Params::new(3, 10.0).unwrap();
    let cfg = IntegratorConfig::default();
    match trace_branch(&params, 1e-2, 1e5, 141, &cfg) {
        Ok(br) => {
            let bound = PI - (4.0f64 / 9.0).asin() - 1e-6;
            c.check(
                br.theta_min >= bound,
                format!("branch theta_min = {:.9} >= pi - arcsin(4/9) - 1e-6 = {bound:.9}", br.theta_min),
            );
            c.check(br.failures.is_empty(), format!("{} branch evaluation failures", br.failures.len()));
        }
        Err(e) => c.error(format!("trace_branch: {e}")),
    }
    let dt = started.elapsed().as_secs_f64();
    c.check(dt < 120.0, format!("runtime {dt:.2} s < 120 s"));
    c.finish(10, "nonexistence consistency (N=3, p=10)", started)
}

fn criterion_11_variational_slope() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let params = Params::new(3, 7.0).unwrap();
    let cfg = IntegratorConfig::default();
    let mut compared = 0usize;
    for gamma in [1e-2, 1.0, 10.0, 1e3, 1e5] {
        let run = || -> crate::error::Result<(i8, f64, f64)> {
            let pt = branch::theta_of_gamma(&params, gamma, &cfg)?;
            let fd_at = |h: f64| -> crate::error::Result<f64> {
                let tp = branch::theta_at_scaled(&params, gamma * (1.0 + h), 1.0, &cfg)?;
                let tm = branch::theta_at_scaled(&params, gamma * (1.0 - h), 1.0, &cfg)?;
                Ok((tp - tm) / (2.0 * gamma * h))
            };
            let fd1 = fd_at(2e-3)?;
            let fd2 = fd_at(1e-3)?;
            let err_est = (fd2 - fd1).abs() * 4.0 / 3.0 + 1e-14 / gamma;
            Ok((pt.slope_sign, fd2, err_est))
        };
        match run() {
            Ok((sign, fd2, err_est)) => {
                if fd2.abs() > 10.0 * err_est {
                    compared += 1;
                    c.check(
                        (sign as f64) == fd2.signum(),
                        format!("Gamma={gamma:.1e}: sign(w_end) = {sign} matches FD slope {fd2:.3e} (err est {err_est:.1e})"),
                    );
                } else {
                    c.check(true, format!("Gamma={gamma:.1e}: FD below reliability threshold, skipped"));
                }
            }
            Err(e) => c.error(format!("Gamma={gamma:.1e}: {e}")),
        }
    }
    c.check(compared >= 3, format!("{compared} of 5 points had reliable finite differences"));
    c.finish(11, "variational slope cross-check (N=3, p=7)", started)
}

fn criterion_12_p_to_one_limits() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let cfg = IntegratorConfig::default();
    let theta_dagger = match spectral::theta_dagger(3, &cfg) {
        Ok(td) => {
            let expect = PI / 2f64.sqrt();
            c.check(
                (td - expect).abs() < 1e-8,
                format!("Theta_dagger = {td:.12} matches pi/sqrt(2) to {:.2e} < 1e-8", (td - expect).abs()),
            );
            td
        }
        Err(e) => {
            c.error(format!("theta_dagger: {e}"));
            return c.finish(12, "p -> 1 limits (N=3)", started);
        }
    };
    let ps = [1.5, 1.2, 1.1, 1.05];
    match spectral::gamma_p_trend(3, 1.8, &ps, &cfg) {
        Ok(rows) => {
            let increasing = rows.windows(2).all(|w| w[1].1 > w[0].1);
            c.check(increasing, format!("Gamma(p) at Theta=1.8 increases as p drops: {rows:?}"));
        }
        Err(e) => c.error(format!("gamma_p_trend(1.8): {e}")),
    }
    match spectral::gamma_p_trend(3, 2.6, &ps, &cfg) {
        Ok(rows) => {
            let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
            c.check(decreasing, format!("Gamma(p) at Theta=2.6 decreases as p drops: {rows:?}"));
        }
        Err(e) => c.error(format!("gamma_p_trend(2.6): {e}")),
    }
    match (spectral::gamma_dagger(3, &cfg), spectral::gamma_p_trend(3, theta_dagger, &[1.05], &cfg)) {
        (Ok(gd), Ok(rows)) => {
            let g = rows[0].1;
            let rel = ((g - gd) / gd).abs();
            c.check(
                rel < 0.20,
                format!("Gamma(1.05) = {g:.6} at Theta_dagger within 20% of Gamma_dagger = {gd:.6} (rel {rel:.3})"),
            );
        }
        (Err(e), _) => c.error(format!("gamma_dagger: {e}")),
        (_, Err(e)) => c.error(format!("gamma_p_trend(theta_dagger): {e}")),
    }
    c.finish(12, "p -> 1 limits (N=3)", started)
}

fn criterion_13_bessel_limit() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let cfg = IntegratorConfig::default();
    match spectral::bessel_limit_check(3, &[1e2, 1e3, 1e4], &cfg) {
        Ok(rows) => {
            let errs: Vec<f64> = rows.iter().map(|(_, v)| (v - PI).abs()).collect();
            c.check(errs[2] < 0.05, format!("|2 sqrt(lambda) r1 - pi| = {:.4e} < 0.05 at lambda = 1e4", errs[2]));
            c.check(
                errs[0] > errs[1] && errs[1] > errs[2],
                format!("monotone error decay over lambda = 1e2, 1e3, 1e4: {errs:?}"),
            );
        }
        Err(e) => c.error(format!("bessel_limit_check: {e}")),
    }
    c.finish(13, "Bessel limit (N=3)", started)
}

fn criterion_14_singular_convergence() -> CriterionReport {
    let started = Instant::now();
    let mut c = Checker::new();
    let params = Params::new(3, 7.0).unwrap();
    let cfg = IntegratorConfig::default();
    match compute_theta_star(&params, &cfg) {
        Ok(sing) => {
            let gammas: Vec<f64> = (1..=5).map(|k| 10f64.powi(k)).collect();
            match singular::convergence_study_against(&params, &sing, &gammas, sing.r_star / 2.0, &cfg) {
                Ok(rows) => {
                    let sup_decreasing = rows.windows(2).all(|w| w[1].sup_distance < w[0].sup_distance);
                    let sups: Vec<f64> = rows.iter().map(|r| r.sup_distance).collect();
                    c.check(sup_decreasing, format!("sup distance on [R*/2, R*] decreasing along gamma = 10^k: {sups:?}"));
                    let gap = rows.last().unwrap().zero_gap;
                    c.check(gap < 1e-2, format!("|R(1e5) - R*| = {gap:.3e} < 1e-2"));
                }
                Err(e) => c.error(format!("convergence_study: {e}")),
            }
        }
        Err(e) => c.error(format!("compute_theta_star: {e}")),
    }
    c.finish(14, "singular-solution convergence (N=3, p=7)", started)
}
