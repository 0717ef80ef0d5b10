//! The cap eigenvalue problem by shooting, Bessel-limit checks, Rayleigh
//! quotient cross-checks, the Pohozaev functional with nonexistence
//! certificates, and the p -> 1 limit objects.
//!
//! The weight integral `I(theta) = int_theta^Theta sin^{1-N}` has an exact
//! recursive antiderivative (all terms positive, so the recursion is
//! stable); the Pohozaev functional and the certificate function
//! `F = cos(theta) sin^{N-2}(theta) I(theta)` are built on it.

use serde::{Deserialize, Serialize};

use crate::branch;
use crate::error::{Error, Result};
use crate::integrate::{
    integrate_sphere_linear, integrate_sphere_linear_to, IntegratorConfig, RadialProfile,
};
use crate::model::{self, Params};

/// First cap eigenvalue with its eigenfunction and the final bisection
/// bracket.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenResult {
    pub n: u32,
    pub theta: f64,
    pub lambda1: f64,
    pub phi_profile: RadialProfile,
    pub bracket: (f64, f64),
}

/// Exact evaluation of `int_theta^Theta sin^{1-N}(phi) dphi` by the
/// reduction formula for negative powers of sin. Every contribution is
/// positive, so no cancellation occurs.
pub fn int_inv_sin_pow(n: u32, theta: f64, theta_end: f64) -> f64 {
    let k_target = n as i64 - 1;
    let (mut k, mut acc) = if k_target % 2 == 0 {
        (0i64, theta_end - theta)
    } else {
        (1i64, ((theta_end / 2.0).tan() / (theta / 2.0).tan()).ln())
    };
    while k < k_target {
        let kk = (k + 2) as f64;
        let boundary = (theta.cos() * theta.sin().powi(-(k as i32) - 1)
            - theta_end.cos() * theta_end.sin().powi(-(k as i32) - 1))
            / (kk - 1.0);
        acc = boundary + (kk - 2.0) / (kk - 1.0) * acc;
        k += 2;
    }
    acc
}

/// The certificate function F(theta) = cos(theta) sin^{N-2}(theta) I(theta),
/// with F(0+) = 1/(N-2).
pub fn pohozaev_f(n: u32, theta: f64, theta_end: f64) -> f64 {
    theta.cos() * theta.sin().powi(n as i32 - 2) * int_inv_sin_pow(n, theta, theta_end)
}

/// Pohozaev functional evaluated along a profile grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PohozaevTrace {
    pub theta_grid: Vec<f64>,
    pub h_values: Vec<f64>,
    /// sup of F over the grid (including the theta -> 0 limit 1/(N-2)).
    pub f_sup: f64,
    /// sup over the grid of the largest of the three summand magnitudes;
    /// the natural scale for endpoint checks.
    pub scale: f64,
}

/// Evaluate the Pohozaev functional
/// `H = -U'^2 sin^{2N-2} I - U U' sin^{N-1} - 2/(p+1) U^{p+1} sin^{2N-2} I`
/// along a theta-frame solution profile with a first zero.
pub fn pohozaev_trace(params: &Params, profile: &RadialProfile) -> Result<PohozaevTrace> {
    if profile.kind != crate::integrate::Frame::ThetaOnSphere {
        return Err(Error::InvalidParams("pohozaev trace expects a theta-frame profile".into()));
    }
    let theta_end = profile
        .first_zero
        .ok_or_else(|| Error::InvalidParams("profile carries no first zero".into()))?;
    let n = params.n;
    let p = params.p;
    let mut theta_grid = Vec::new();
    let mut h_values = Vec::new();
    let mut f_sup = 1.0 / (params.nf() - 2.0);
    let mut scale = 0.0f64;
    let total = profile.len();
    let stride = (total / 4000).max(1);
    for i in (0..total).step_by(stride).chain([total - 1]) {
        let th = profile.grid[i];
        if th >= theta_end {
            continue;
        }
        let (u, du) = (profile.value[i], profile.derivative[i]);
        let s = th.sin();
        let weight = int_inv_sin_pow(n, th, theta_end);
        let s_n1 = s.powi(n as i32 - 1);
        let s_2n2 = s.powi(2 * (n as i32 - 1));
        let t1 = -du * du * s_2n2 * weight;
        let t2 = -u * du * s_n1;
        let t3 = -2.0 / (p + 1.0) * u.abs().powf(p + 1.0) * s_2n2 * weight;
        theta_grid.push(th);
        h_values.push(t1 + t2 + t3);
        scale = scale.max(t1.abs()).max(t2.abs()).max(t3.abs());
        f_sup = f_sup.max(th.cos() * s.powi(n as i32 - 2) * weight);
    }
    // H(Theta) = 0 exactly by I(Theta) = 0 and U(Theta) = 0; record the
    // numerically evaluated endpoint.
    theta_grid.push(theta_end);
    let du_end = profile.end_derivative.unwrap_or(*profile.derivative.last().unwrap());
    let u_end = *profile.value.last().unwrap();
    h_values.push(-u_end * du_end * theta_end.sin().powi(n as i32 - 1));
    Ok(PohozaevTrace { theta_grid, h_values, f_sup, scale })
}

/// Nonexistence certificate: true when (p+3)/(4N-4) exceeds
/// `sup_{0 < theta <= Theta} F(theta)` by a safety margin, in which case the
/// cap problem has no solution on the cap of radius Theta.
pub fn nonexistence_certificate(n: u32, p: f64, theta: f64) -> Result<bool> {
    if !(theta > 0.0 && theta < std::f64::consts::PI) || !(p > 1.0) || n < 3 {
        return Err(Error::InvalidParams("need N >= 3, p > 1, Theta in (0, pi)".into()));
    }
    let sup_f = sup_pohozaev_f(n, theta);
    Ok((p + 3.0) / (4.0 * f64::from(n) - 4.0) > sup_f + 1e-9)
}

/// sup of F over (0, Theta] by dense sampling plus golden-section
/// refinement around the best samples, including the theta -> 0 limit.
pub fn sup_pohozaev_f(n: u32, theta_end: f64) -> f64 {
    let samples = 10_000usize;
    let f = |th: f64| pohozaev_f(n, th, theta_end);
    let mut best: Vec<(f64, usize)> = Vec::new(); // (value, index)
    let mut sup = 1.0 / (f64::from(n) - 2.0); // theta -> 0 limit
    for j in 1..=samples {
        let th = theta_end * j as f64 / samples as f64;
        let v = f(th);
        sup = sup.max(v);
        best.push((v, j));
    }
    best.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for &(_, j) in best.iter().take(3) {
        let mut a = theta_end * (j.saturating_sub(1)).max(1) as f64 / samples as f64;
        let mut b = theta_end * (j + 1).min(samples) as f64 / samples as f64;
        let mut x1 = b - phi * (b - a);
        let mut x2 = a + phi * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if b - a < 1e-13 * theta_end {
                break;
            }
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = f(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = f(x1);
            }
        }
        sup = sup.max(f1).max(f2);
    }
    sup
}

/// First eigenvalue lambda1(Theta) of the cap eigenvalue problem by
/// bisection on the first-zero position (monotone in lambda by Sturm
/// comparison).
pub fn lambda1(n: u32, theta: f64, cfg: &IntegratorConfig) -> Result<EigenResult> {
    if n < 3 || !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(Error::InvalidParams("need N >= 3 and Theta in (0, pi)".into()));
    }
    let zero_before = |lam: f64| -> Result<bool> {
        let prof = integrate_sphere_linear_to(n, lam, theta, cfg)?;
        Ok(prof.first_zero.is_some())
    };
    let mut lo = 1e-6;
    if zero_before(lo)? {
        return Err(Error::BracketFailure(format!(
            "lambda1({theta}) < 1e-6: Theta too close to pi for the configured bracket"
        )));
    }
    let mut hi = 4.0 * f64::from(n);
    while !zero_before(hi)? {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::BracketFailure("upper bracket expansion exceeded 1e12".into()));
        }
    }
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if zero_before(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let phi_profile = integrate_sphere_linear(n, lambda, cfg)?;
    let zero = phi_profile.first_zero.ok_or(Error::NoZero { x_end: std::f64::consts::PI })?;
    if (zero - theta).abs() > 1e-10 * theta.max(1.0) {
        return Err(Error::RefinementDiverged(format!(
            "eigenfunction zero {zero} differs from Theta {theta} by {:e}",
            (zero - theta).abs()
        )));
    }
    Ok(EigenResult { n, theta, lambda1: lambda, phi_profile, bracket: (lo, hi) })
}

/// First zero of the large-lambda limiting equation
/// `psi'' + (N-1) psi'/s + psi = 0`, i.e. the first zero of the Bessel
/// function J_{N/2-1} in the paper's normalization.
pub fn bessel_limit_reference(n: u32, cfg: &IntegratorConfig) -> Result<f64> {
    cfg.validate()?;
    let nm1 = f64::from(n) - 1.0;
    let sys = move |s: f64, y: &[f64; 2]| [y[1], -nm1 / s * y[1] - y[0]];
    let s0 = cfg.theta_start;
    let c = 1.0 / (2.0 * f64::from(n));
    let y0 = [1.0 - c * s0 * s0, -2.0 * c * s0];
    let mut profile = RadialProfile::empty(crate::integrate::Frame::RhoFlat);
    let zero = crate::integrate::run_watched(&sys, s0, y0, 30.0, &cfg.ctl(s0 / 2.0), true, |x, y, _| {
        profile.push(x, y[0], y[1]);
    })?;
    zero.map(|ev| ev.x).ok_or(Error::NoZero { x_end: 30.0 })
}

/// For each lambda, the product `2 sqrt(lambda) r1(lambda)` where r1 is the
/// first zero of the stereographic eigenfunction; the sequence approaches
/// the first zero of J_{N/2-1}.
pub fn bessel_limit_check(n: u32, lambda_list: &[f64], cfg: &IntegratorConfig) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(lambda_list.len());
    for &lam in lambda_list {
        let prof = integrate_sphere_linear(n, lam, cfg)?;
        let zero = prof.first_zero.ok_or(Error::NoZero { x_end: std::f64::consts::PI })?;
        let r1 = model::stereo_r_of_theta(zero);
        out.push((lam, 2.0 * lam.sqrt() * r1));
    }
    Ok(out)
}

// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_X: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];
const GL_W: [f64; 5] = [
    0.2369268850561891,
    0.4786286704993665,
    0.568888888888889,
    0.4786286704993665,
    0.2369268850561891,
];

/// Integrate `f` over the cells of a grid with 5-point Gauss-Legendre.
fn quad_over_cells(grid: &[f64], hi: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1].min(hi));
        if b <= a {
            break;
        }
        let c = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        for k in 0..5 {
            total += GL_W[k] * hw * f(c + hw * GL_X[k])?;
        }
    }
    Ok(total)
}

/// Quadratic-form cross-check: the Rayleigh functional of the solution,
/// evaluated from its defining integrand and independently from the
/// Green-identity form `-(p-1) int A^{-q} u^{p+1} r^{N-1} dr`. Both are
/// negative and must agree.
pub fn rayleigh_check(params: &Params, profile: &RadialProfile) -> Result<(f64, f64)> {
    if profile.kind != crate::integrate::Frame::RStereographic {
        return Err(Error::InvalidParams("rayleigh check expects an r-frame profile".into()));
    }
    let r_end = profile
        .first_zero
        .ok_or_else(|| Error::InvalidParams("profile carries no first zero".into()))?;
    let nf = params.nf();
    let p = params.p;
    let q = params.q();
    // derivative profile for Hermite evaluation of u': pair (u', u'') with
    // u'' supplied by the equation
    let mut dprof = RadialProfile::empty(crate::integrate::Frame::RStereographic);
    for i in 0..profile.len() {
        let r = profile.grid[i];
        let (u, du) = (profile.value[i], profile.derivative[i]);
        let a = model::conformal_a(r);
        let ddu = -(nf - 1.0) / r * du - 0.25 * nf * (nf - 2.0) * a * a * u
            - a.powf(-q) * u.signum() * u.abs().powf(p);
        dprof.push(r, du, ddu);
    }
    let lhs = quad_over_cells(&profile.grid, r_end, |r| {
        let (u, _) = profile.eval(r)?;
        let (du, _) = dprof.eval(r)?;
        let a = model::conformal_a(r);
        let val = du * du - 0.25 * nf * (nf - 2.0) * a * a * u * u - p * a.powf(-q) * u.abs().powf(p + 1.0);
        Ok(val * r.powf(nf - 1.0))
    })?;
    let rhs = quad_over_cells(&profile.grid, r_end, |r| {
        let (u, _) = profile.eval(r)?;
        let a = model::conformal_a(r);
        Ok(-(p - 1.0) * a.powf(-q) * u.abs().powf(p + 1.0) * r.powf(nf - 1.0))
    })?;
    Ok((lhs, rhs))
}

/// psi0 = A^{(N-2)/2}(A - 1) and its exact first two derivatives.
pub fn psi0(n: u32, r: f64) -> (f64, f64, f64) {
    let c = (f64::from(n) - 2.0) / 2.0;
    let a = model::conformal_a(r);
    let da = -r * a * a;
    let dda = -a * a + 2.0 * r * r * a * a * a;
    let g = a.powf(c);
    let dg = c * a.powf(c - 1.0) * da;
    let ddg = c * (c - 1.0) * a.powf(c - 2.0) * da * da + c * a.powf(c - 1.0) * dda;
    let v = g * (a - 1.0);
    let dv = dg * (a - 1.0) + g * da;
    let ddv = ddg * (a - 1.0) + 2.0 * dg * da + g * dda;
    (v, dv, ddv)
}

/// Max over the grid of |(L + N A^2) psi0|; the identity is exact, so this
/// measures only rounding.
pub fn psi0_residual(n: u32, r_grid: &[f64]) -> f64 {
    let nf = f64::from(n);
    let mut worst = 0.0f64;
    for &r in r_grid {
        let a = model::conformal_a(r);
        let (v, dv, ddv) = psi0(n, r);
        let res = ddv + (nf - 1.0) / r * dv + (0.25 * nf * (nf - 2.0) + nf) * a * a * v;
        worst = worst.max(res.abs());
    }
    worst
}

/// The angle Theta_dagger with lambda1(Theta_dagger) = 1: by Sturm theory
/// it is exactly the first zero of the lambda = 1 eigenfunction, so a
/// single integration suffices.
pub fn theta_dagger(n: u32, cfg: &IntegratorConfig) -> Result<f64> {
    let prof = integrate_sphere_linear(n, 1.0, cfg)?;
    prof.first_zero.ok_or(Error::NoZero { x_end: std::f64::consts::PI })
}

/// The p -> 1 limit center value
/// `Gamma_dagger = exp(-int phi^2 ln(phi) w / int phi^2 w)` with
/// `w = sin^{N-1}` over (0, Theta_dagger), phi the lambda = 1
/// eigenfunction normalized by phi(0) = 1.
pub fn gamma_dagger(n: u32, cfg: &IntegratorConfig) -> Result<f64> {
    let prof = integrate_sphere_linear(n, 1.0, cfg)?;
    let theta_end = prof.first_zero.ok_or(Error::NoZero { x_end: std::f64::consts::PI })?;
    gamma_dagger_from_eigenfunction(n, &prof, theta_end)
}

/// Same quadrature for an arbitrary eigenfunction profile (used to compare
/// against the N = 3 closed form).
pub fn gamma_dagger_from_eigenfunction(n: u32, phi: &RadialProfile, theta_end: f64) -> Result<f64> {
    let nf = f64::from(n);
    let num = quad_over_cells(&phi.grid, theta_end, |th| {
        let (v, _) = phi.eval(th)?;
        // phi^2 ln(phi) -> 0 at the zero; cut the unusable tail
        if v <= 0.0 {
            return Ok(0.0);
        }
        Ok(v * v * v.ln() * th.sin().powf(nf - 1.0))
    })?;
    let den = quad_over_cells(&phi.grid, theta_end, |th| {
        let (v, _) = phi.eval(th)?;
        Ok(v.max(0.0) * v.max(0.0) * th.sin().powf(nf - 1.0))
    })?;
    if !(den > 0.0) {
        return Err(Error::Quadrature("vanishing normalization integral".into()));
    }
    Ok((-num / den).exp())
}

/// Gamma(p) at a fixed cap angle for a list of p approaching 1, through the
/// branch inversion.
pub fn gamma_p_trend(n: u32, theta: f64, p_list: &[f64], cfg: &IntegratorConfig) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let params = Params::new(n, p)?;
        if p >= params.p_critical() {
            return Err(Error::InvalidParams(format!("p = {p} is not subcritical for N = {n}")));
        }
        let gamma = branch::gamma_of_theta(&params, theta, cfg)?;
        out.push((p, gamma));
    }
    Ok(out)
}
