//! Adaptive shooting integrations for the radial equations, with regularized
//! Taylor starts at the coordinate singularity and first-zero event
//! detection.
//!
//! Four problems are covered:
//!
//! * the cap equation `U'' + (N-1) cot(theta) U' + lambda |U|^{p-1} U = 0`
//!   (theta frame),
//! * its stereographic form
//!   `u'' + (N-1)u'/r + N(N-2)A^2 u/4 + lambda A^{-q} |u|^{p-1} u = 0`,
//! * the flat equation `u'' + (N-1)u'/rho + u^p = 0`,
//! * the linear eigen-equation `phi'' + (N-1) cot(theta) phi' + lambda phi = 0`,
//!
//! plus the variational co-integration of the stereographic solution with
//! its derivative with respect to the center value.
//!
//! The theta-frame nonlinear integration switches to the stereographic frame
//! once it crosses the equator: the r frame has no coordinate singularity at
//! the far pole, so first zeros that sit extremely close to theta = pi remain
//! fully resolved as large radii. First zeros are localized by bisection,
//! re-stepping into the bracketing accepted step, so event accuracy matches
//! integration accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Params};
use crate::ode::{self, StepControl, System, Verdict};

/// Independent-variable kind of a radial profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    ThetaOnSphere,
    RStereographic,
    RhoFlat,
}

/// Tolerances and start offset for the shooting integrations.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Series-start offset at the coordinate singularity. For center values
    /// with a short natural length scale the effective start is rescaled by
    /// the blow-up factor, so the relative truncation error stays fixed.
    pub theta_start: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, theta_start: 1e-6, max_step: f64::INFINITY, max_steps: 2_000_000 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-3) {
            return Err(Error::InvalidConfig(format!("rel_tol = {} outside (0, 1e-3]", self.rel_tol)));
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidConfig("abs_tol must be positive".into()));
        }
        if !(self.theta_start > 0.0 && self.theta_start < 1e-2) {
            return Err(Error::InvalidConfig(format!("theta_start = {} outside (0, 1e-2)", self.theta_start)));
        }
        if self.max_steps < 100 {
            return Err(Error::InvalidConfig("max_steps too small".into()));
        }
        Ok(())
    }

    pub(crate) fn ctl(&self, h_init: f64) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            h_init,
            h_max: self.max_step,
            max_steps: self.max_steps,
        }
    }

    /// Step control under pure relative error: the radial solutions decay
    /// through arbitrarily many decades before their first zero, so any
    /// fixed absolute floor would eventually drown the signal. Components
    /// cross zero transversally, which keeps the step size bounded below.
    pub(crate) fn ctl_rel(&self, h_init: f64) -> StepControl {
        StepControl { abs_tol: 1e-290, ..self.ctl(h_init) }
    }
}

/// A radial solution trajectory on an increasing grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfile {
    pub kind: Frame,
    pub grid: Vec<f64>,
    pub value: Vec<f64>,
    pub derivative: Vec<f64>,
    /// Location of the first zero of the value, when one was found.
    pub first_zero: Option<f64>,
    /// Derivative at the first zero (strictly negative for our solutions).
    pub end_derivative: Option<f64>,
    /// Localization error estimate for the first zero.
    pub first_zero_err: Option<f64>,
}

impl RadialProfile {
    pub fn empty(kind: Frame) -> Self {
        Self {
            kind,
            grid: Vec::new(),
            value: Vec::new(),
            derivative: Vec::new(),
            first_zero: None,
            end_derivative: None,
            first_zero_err: None,
        }
    }

    pub fn push(&mut self, x: f64, v: f64, d: f64) {
        if let Some(&last) = self.grid.last() {
            if x <= last {
                return; // keep the grid strictly increasing
            }
        }
        self.grid.push(x);
        self.value.push(v);
        self.derivative.push(d);
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn x_min(&self) -> f64 {
        *self.grid.first().unwrap_or(&f64::NAN)
    }

    pub fn x_max(&self) -> f64 {
        *self.grid.last().unwrap_or(&f64::NAN)
    }

    fn cell_of(&self, x: f64) -> Result<usize> {
        if self.grid.len() < 2 || x < self.x_min() || x > self.x_max() {
            return Err(Error::ProfileRange(format!(
                "x = {x:e} outside [{:e}, {:e}]",
                self.x_min(),
                self.x_max()
            )));
        }
        let idx = self.grid.partition_point(|&g| g <= x);
        Ok(idx.clamp(1, self.grid.len() - 1) - 1)
    }

    /// Cubic Hermite evaluation of (value, derivative) at x within the grid.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let i = self.cell_of(x)?;
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let h = x1 - x0;
        let s = (x - x0) / h;
        let (v0, v1) = (self.value[i], self.value[i + 1]);
        let (d0, d1) = (self.derivative[i], self.derivative[i + 1]);
        let s2 = s * s;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s2 * (3.0 - 2.0 * s);
        let h11 = s2 * (s - 1.0);
        let v = h00 * v0 + h10 * h * d0 + h01 * v1 + h11 * h * d1;
        // derivative of the Hermite basis
        let dh00 = 6.0 * s * (s - 1.0) / h;
        let dh10 = (1.0 - s) * (1.0 - 3.0 * s);
        let dh01 = -dh00;
        let dh11 = s * (3.0 * s - 2.0);
        let d = dh00 * v0 + dh10 * d0 + dh01 * v1 + dh11 * d1;
        Ok((v, d))
    }

    /// Linear interpolation of the value, used as a cheap a-posteriori
    /// interpolation error gauge next to [`RadialProfile::eval`].
    pub fn eval_linear(&self, x: f64) -> Result<f64> {
        let i = self.cell_of(x)?;
        let s = (x - self.grid[i]) / (self.grid[i + 1] - self.grid[i]);
        Ok(self.value[i] * (1.0 - s) + self.value[i + 1] * s)
    }
}

/// Localized first zero of the watched component, with the full system state.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ZeroEvent<const D: usize> {
    pub x: f64,
    pub y: [f64; D],
    pub f: [f64; D],
    pub err: f64,
}

/// sign(u) |u|^p
fn sgn_pow(u: f64, p: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(p)
    }
}

/// A^{-q} |u|^{p-1} u with an exp/ln fallback when the direct product
/// over- or underflows through an intermediate.
fn stereo_power_term(u: f64, p: f64, a: f64, q: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let direct = a.powf(-q) * sgn_pow(u, p);
    if direct.is_finite() {
        return direct;
    }
    let expo = p * u.abs().ln() - q * a.ln();
    if expo < -745.0 {
        0.0
    } else {
        u.signum() * expo.exp()
    }
}

/// A^{-q} |u|^{p-1}, same guard as [`stereo_power_term`].
fn stereo_power_coeff(u: f64, p: f64, a: f64, q: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let direct = a.powf(-q) * u.abs().powf(p - 1.0);
    if direct.is_finite() {
        return direct;
    }
    let expo = (p - 1.0) * u.abs().ln() - q * a.ln();
    if expo < -745.0 {
        0.0
    } else {
        expo.exp()
    }
}

struct SpherePower {
    nm1: f64,
    p: f64,
    lambda: f64,
}

impl System<2> for SpherePower {
    fn rhs(&self, x: f64, y: &[f64; 2]) -> [f64; 2] {
        let cot = x.cos() / x.sin();
        [y[1], -self.nm1 * cot * y[1] - self.lambda * sgn_pow(y[0], self.p)]
    }
}

struct SphereLinear {
    nm1: f64,
    lambda: f64,
}

impl System<2> for SphereLinear {
    fn rhs(&self, x: f64, y: &[f64; 2]) -> [f64; 2] {
        let cot = x.cos() / x.sin();
        [y[1], -self.nm1 * cot * y[1] - self.lambda * y[0]]
    }
}

struct StereoPower {
    nf: f64,
    p: f64,
    q: f64,
    lambda: f64,
}

impl System<2> for StereoPower {
    fn rhs(&self, x: f64, y: &[f64; 2]) -> [f64; 2] {
        let a = model::conformal_a(x);
        let lin = 0.25 * self.nf * (self.nf - 2.0) * a * a;
        [
            y[1],
            -(self.nf - 1.0) / x * y[1] - lin * y[0] - self.lambda * stereo_power_term(y[0], self.p, a, self.q),
        ]
    }
}

struct FlatPower {
    nm1: f64,
    p: f64,
}

impl System<2> for FlatPower {
    fn rhs(&self, x: f64, y: &[f64; 2]) -> [f64; 2] {
        // |u|^{p-1} u: identical to u^p on the positive region of interest,
        // and odd-extended across the extinction zero so the event can be
        // bracketed for fractional p.
        [y[1], -self.nm1 / x * y[1] - sgn_pow(y[0], self.p)]
    }
}

/// State: [u, u', w, w'] where w solves the variational equation
/// (L + p A^{-q} u^{p-1}) w = 0 along u.
struct StereoVariational {
    nf: f64,
    p: f64,
    q: f64,
}

impl System<4> for StereoVariational {
    fn rhs(&self, x: f64, y: &[f64; 4]) -> [f64; 4] {
        let a = model::conformal_a(x);
        let lin = 0.25 * self.nf * (self.nf - 2.0) * a * a;
        let inv_r = (self.nf - 1.0) / x;
        let nl_u = stereo_power_term(y[0], self.p, a, self.q);
        let nl_w = self.p * stereo_power_coeff(y[0], self.p, a, self.q) * y[2];
        [
            y[1],
            -inv_r * y[1] - lin * y[0] - nl_u,
            y[3],
            -inv_r * y[3] - lin * y[2] - nl_w,
        ]
    }
}

/// Drive the integrator while watching component 0 for its first zero.
/// Records every accepted node through `record(x, y, f)`.
pub(crate) fn run_watched<S: System<D>, const D: usize>(
    sys: &S,
    x0: f64,
    y0: [f64; D],
    x_end: f64,
    ctl: &StepControl,
    stop_at_zero: bool,
    mut record: impl FnMut(f64, &[f64; D], &[f64; D]),
) -> Result<Option<ZeroEvent<D>>> {
    record(x0, &y0, &sys.rhs(x0, &y0));
    let mut zero: Option<ZeroEvent<D>> = None;
    let out = ode::integrate(sys, x0, y0, x_end, ctl, |step| {
        if zero.is_none() && step.y0[0] > 0.0 && step.y1[0] <= 0.0 {
            let ev = refine_zero(sys, step);
            record(ev.x, &ev.y, &ev.f);
            zero = Some(ev);
            if stop_at_zero {
                return Verdict::Stop;
            }
        } else {
            record(step.x1, &step.y1, &step.f1);
        }
        Verdict::Continue
    });
    match out {
        Ok(_) => Ok(zero),
        Err(e) => Err(e),
    }
}

/// Bisection on the interior of the bracketing step, evaluating by a single
/// re-step from the step start.
fn refine_zero<S: System<D>, const D: usize>(sys: &S, step: &ode::Step<D>) -> ZeroEvent<D> {
    let mut lo = step.x0;
    let mut hi = step.x1;
    let mut best_y = step.y1;
    let mut best_f = step.f1;
    let mut best_x = hi;
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (ym, fm) = ode::step_to(sys, step.x0, &step.y0, &step.f0, mid);
        if ym[0] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
            best_x = mid;
            best_y = ym;
            best_f = fm;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi.abs() {
            break;
        }
    }
    let err = (hi - lo).abs() + f64::EPSILON * best_x.abs();
    ZeroEvent { x: best_x, y: best_y, f: best_f, err }
}

fn zero_drift_estimate(cfg: &IntegratorConfig, bracket_err: f64, span: f64) -> f64 {
    bracket_err + cfg.rel_tol * span.abs()
}

/// Radius at which an r-frame march without a zero switches to the analytic
/// tail closure: beyond it the solution sits in the linear far-field and
/// the zero is recovered from conserved quadratures instead of marching.
const R_TAIL_SWITCH: f64 = 1e10;

/// Analytic closure of a zero lying beyond the marched range.
///
/// In the far field the nonlinearity is spent and the flux identity
/// `U' sin^{N-1} = -int_0^theta U^p sin^{N-1}` pins the zero: with
/// `S = int U^p sin^{N-1} d theta` accumulated over the computed profile
/// (a sum of positives, so no cancellation) the zero angle solves
/// `int_{theta_e}^{Theta} sin^{1-N} = U(theta_e)/S`. Everything is solved
/// in the gap variable delta = pi - theta, so zeros exponentially close to
/// the far pole keep full relative accuracy as radii. The neglected flux
/// accumulated past the march end costs O(r_end/R) relative accuracy on R,
/// far below anything the branch logic resolves at these extremes.
const GX: [f64; 5] = [-0.906179845938664, -0.5384693101056831, 0.0, 0.5384693101056831, 0.906179845938664];
const GW: [f64; 5] = [0.2369268850561891, 0.4786286704993665, 0.568888888888889, 0.4786286704993665, 0.2369268850561891];

/// Flux integral `int U^p sin^{N-1} d theta` over a theta-frame profile
/// segment (used to seed the closure when part of the trajectory was
/// integrated in the theta frame).
fn flux_integral_theta(params: &Params, profile: &RadialProfile, lambda: f64) -> Result<f64> {
    let nf = params.nf();
    let p = params.p;
    let mut total = 0.0f64;
    for wnd in profile.grid.windows(2) {
        let mid = 0.5 * (wnd[0] + wnd[1]);
        let hw = 0.5 * (wnd[1] - wnd[0]);
        for k in 0..5 {
            let th = mid + hw * GX[k];
            let (u, _) = profile.eval(th)?;
            total += GW[k] * hw * lambda * u.abs().powf(p) * th.sin().powf(nf - 1.0);
        }
    }
    Ok(total)
}

fn tail_close_with_flux(params: &Params, profile: &RadialProfile, s_seed: f64, lambda: f64) -> Result<(f64, f64)> {
    let nf = params.nf();
    let n = params.n;
    let c = (nf - 2.0) / 2.0;
    let p = params.p;
    let cap_u = |r: f64, u: f64| model::conformal_a(r).powf(-c) * u;
    // S = int U^p sin^{N-1} d theta over the profile, in r variables
    let mut s_inf = s_seed;
    for wnd in profile.grid.windows(2) {
        let (a, b) = (wnd[0], wnd[1]);
        let mid = 0.5 * (a + b);
        let hw = 0.5 * (b - a);
        for k in 0..5 {
            let r = mid + hw * GX[k];
            let (u, _) = profile.eval(r)?;
            let aa = model::conformal_a(r);
            let sin_theta = r * aa;
            s_inf += GW[k] * hw * lambda * cap_u(r, u).abs().powf(p) * sin_theta.powf(nf - 1.0) * aa;
        }
    }
    let r_e = profile.x_max();
    let u_e = *profile.value.last().unwrap();
    let cap_u_e = cap_u(r_e, u_e);
    if !(s_inf > 0.0 && cap_u_e > 0.0) {
        return Err(Error::NoZero { x_end: r_e });
    }
    let target = cap_u_e / s_inf;
    let delta_e = 2.0 * (1.0 / r_e).atan();
    // solve int_{delta}^{delta_e} sin^{1-N} = target by bisection in ln delta
    let gap = |delta: f64| crate::spectral::int_inv_sin_pow(n, delta, delta_e) - target;
    if gap(delta_e * (1.0 - 1e-9)) > 0.0 {
        return Err(Error::BracketFailure("tail closure: zero indistinguishable from the march end".into()));
    }
    let (mut llo, mut lhi) = ((1e-280f64).ln(), (delta_e * (1.0 - 1e-9)).ln());
    if gap(llo.exp()) < 0.0 {
        return Err(Error::BracketFailure("tail closure: zero below representable gap".into()));
    }
    for _ in 0..260 {
        let mid = 0.5 * (llo + lhi);
        if gap(mid.exp()) > 0.0 {
            llo = mid;
        } else {
            lhi = mid;
        }
        if lhi - llo < 1e-14 {
            break;
        }
    }
    let delta_zero = (0.5 * (llo + lhi)).exp();
    let r_zero = 1.0 / (delta_zero / 2.0).tan();
    // u_r(R) = A^{c+1} U'(Theta) with U'(Theta) = -S / sin^{N-1}(Theta)
    let a_zero = 2.0 * (delta_zero / 2.0).sin().powi(2);
    let du_cap = -s_inf / delta_zero.sin().powf(nf - 1.0);
    let u_r = a_zero.powf(c + 1.0) * du_cap;
    Ok((r_zero, u_r))
}

/// Integrate the cap initial value problem
/// `U'' + (N-1) cot(theta) U' + |U|^{p-1} U = 0`, `U(0) = gamma_sphere`,
/// `U'(0) = 0`, up to and including the first zero.
pub fn integrate_sphere_regular(params: &Params, gamma_sphere: f64, cfg: &IntegratorConfig) -> Result<RadialProfile> {
    integrate_sphere_power(params, gamma_sphere, 1.0, cfg)
}

/// Same problem with a coupling constant: `U'' + (N-1) cot U' + lambda
/// |U|^{p-1} U = 0`. Switches to the stereographic frame past the equator,
/// so first zeros arbitrarily close to pi stay resolved (as large radii).
pub fn integrate_sphere_power(
    params: &Params,
    gamma_sphere: f64,
    lambda: f64,
    cfg: &IntegratorConfig,
) -> Result<RadialProfile> {
    cfg.validate()?;
    if !(gamma_sphere > 0.0) {
        return Err(Error::InvalidParams(format!("Gamma = {gamma_sphere} must be > 0")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams(format!("lambda = {lambda} must be > 0")));
    }
    let nf = params.nf();
    let p = params.p;
    let sys = SpherePower { nm1: nf - 1.0, p, lambda };

    // Taylor start: U = G - lambda G^p theta^2 / (2N) + O(theta^4), rescaled
    // into the blow-up length when lambda G^{p-1} is large.
    let scale = (lambda * gamma_sphere.powf(p - 1.0)).sqrt();
    let theta0 = cfg.theta_start * scale.recip().min(1.0);
    let c = lambda * sgn_pow(gamma_sphere, p) / (2.0 * nf);
    let y0 = [gamma_sphere - c * theta0 * theta0, -2.0 * c * theta0];

    let mut profile = RadialProfile::empty(Frame::ThetaOnSphere);
    let ctl = cfg.ctl_rel(theta0 / 2.0);
    let zero = run_watched(&sys, theta0, y0, std::f64::consts::FRAC_PI_2, &ctl, true, |x, y, _| {
        profile.push(x, y[0], y[1]);
    })?;

    if let Some(ev) = zero {
        profile.first_zero = Some(ev.x);
        profile.end_derivative = Some(ev.f[0]);
        profile.first_zero_err = Some(zero_drift_estimate(cfg, ev.err, ev.x - theta0));
        return Ok(profile);
    }

    // No zero on the near hemisphere: continue in the stereographic frame
    // from r = 1, where the far pole is r = infinity and the zero always
    // occurs at a finite radius.
    let n_val = profile.value.last().copied().unwrap();
    let n_der = profile.derivative.last().copied().unwrap();
    let (_, u1, du1) = model::stereo_point_from_sphere(params.n, std::f64::consts::FRAC_PI_2, n_val, n_der);
    let sys_r = StereoPower { nf, p, q: params.q(), lambda };
    let ctl_r = cfg.ctl_rel(1e-2);
    let mut r_prof = RadialProfile::empty(Frame::RStereographic);
    let zero_r = run_watched(&sys_r, 1.0, [u1, du1], R_TAIL_SWITCH, &ctl_r, true, |x, y, _| {
        r_prof.push(x, y[0], y[1]);
    })?;
    for i in 0..r_prof.len() {
        let (theta, uu, duu) = model::sphere_point_from_stereo(params.n, r_prof.grid[i], r_prof.value[i], r_prof.derivative[i]);
        profile.push(theta, uu, duu);
    }
    match zero_r {
        Some(ev) => {
            let (theta_z, _, du_z) = model::sphere_point_from_stereo(params.n, ev.x, 0.0, ev.f[0]);
            profile.first_zero = Some(theta_z);
            profile.end_derivative = Some(du_z);
            // localization error mapped through d theta / d r = A(r)
            let a = model::conformal_a(ev.x);
            profile.first_zero_err = Some(zero_drift_estimate(cfg, ev.err * a, theta_z));
            Ok(profile)
        }
        None => {
            // far-field zero beyond the marched range: close analytically,
            // seeding the flux integral with the near-hemisphere part
            let near = {
                let mut near = RadialProfile::empty(Frame::ThetaOnSphere);
                for i in 0..profile.len() {
                    if profile.grid[i] > std::f64::consts::FRAC_PI_2 {
                        break;
                    }
                    near.push(profile.grid[i], profile.value[i], profile.derivative[i]);
                }
                near
            };
            let seed = flux_integral_theta(params, &near, lambda)?;
            let (r_zero, u_r) = tail_close_with_flux(params, &r_prof, seed, lambda)?;
            let (theta_z, _, du_z) = model::sphere_point_from_stereo(params.n, r_zero, 0.0, u_r);
            profile.first_zero = Some(theta_z);
            profile.end_derivative = Some(du_z);
            profile.first_zero_err = Some(10.0 * cfg.rel_tol);
            Ok(profile)
        }
    }
}

/// Integrate the cap equation in the theta frame from an arbitrary interior
/// state (used for singular starts), up to and including the first zero.
pub fn integrate_sphere_from(
    params: &Params,
    theta0: f64,
    y0: (f64, f64),
    lambda: f64,
    cfg: &IntegratorConfig,
) -> Result<RadialProfile> {
    cfg.validate()?;
    if !(theta0 > 0.0 && theta0 < std::f64::consts::PI) {
        return Err(Error::InvalidParams("theta0 must lie in (0, pi)".into()));
    }
    let sys = SpherePower { nm1: params.nf() - 1.0, p: params.p, lambda };
    let mut profile = RadialProfile::empty(Frame::ThetaOnSphere);
    let x_end = std::f64::consts::PI * (1.0 - 1e-12);
    let zero = run_watched(&sys, theta0, [y0.0, y0.1], x_end, &cfg.ctl_rel(theta0 / 10.0), true, |x, y, _| {
        profile.push(x, y[0], y[1]);
    })?;
    match zero {
        Some(ev) => {
            profile.first_zero = Some(ev.x);
            profile.end_derivative = Some(ev.f[0]);
            profile.first_zero_err = Some(zero_drift_estimate(cfg, ev.err, ev.x - theta0));
            Ok(profile)
        }
        None => Err(Error::NoZero { x_end }),
    }
}

/// Integrate the cap equation in the theta frame between two interior
/// angles without zero detection (re-integration checks).
pub fn integrate_sphere_segment(
    params: &Params,
    x0: f64,
    y0: (f64, f64),
    x1: f64,
    lambda: f64,
    cfg: &IntegratorConfig,
) -> Result<RadialProfile> {
    cfg.validate()?;
    let sys = SpherePower { nm1: params.nf() - 1.0, p: params.p, lambda };
    let mut profile = RadialProfile::empty(Frame::ThetaOnSphere);
    let h0 = ((x1 - x0) / 8.0).abs().min(x0 / 10.0);
    profile.push(x0, y0.0, y0.1);
    ode::integrate(&sys, x0, [y0.0, y0.1], x1, &cfg.ctl_rel(h0), |s| {
        profile.push(s.x1, s.y1[0], s.y1[1]);
        Verdict::Continue
    })?;
    Ok(profile)
}

/// Integrate the flat problem `u'' + (N-1)u'/rho + u^p = 0`, `u(0) =
/// gamma_bar`, on (0, rho_max], stopping early at the extinction zero when
/// one occurs (only possible for p < p_S).
pub fn integrate_flat_regular(
    params: &Params,
    gamma_bar: f64,
    rho_max: f64,
    cfg: &IntegratorConfig,
) -> Result<RadialProfile> {
    cfg.validate()?;
    if !(gamma_bar > 0.0 && rho_max > 0.0) {
        return Err(Error::InvalidParams("gamma_bar and rho_max must be > 0".into()));
    }
    let nf = params.nf();
    let p = params.p;
    let sys = FlatPower { nm1: nf - 1.0, p };
    let rho0 = cfg.theta_start * gamma_bar.powf(-(p - 1.0) / 2.0).min(1.0);
    let c = gamma_bar.powf(p) / (2.0 * nf);
    let y0 = [gamma_bar - c * rho0 * rho0, -2.0 * c * rho0];
    let mut profile = RadialProfile::empty(Frame::RhoFlat);
    let zero = run_watched(&sys, rho0, y0, rho_max, &cfg.ctl_rel(rho0 / 2.0), true, |x, y, _| {
        profile.push(x, y[0], y[1]);
    })?;
    if let Some(ev) = zero {
        profile.first_zero = Some(ev.x);
        profile.end_derivative = Some(ev.f[0]);
        profile.first_zero_err = Some(zero_drift_estimate(cfg, ev.err, ev.x));
    }
    Ok(profile)
}

/// Integrate the stereographic problem (the cap equation in the r frame)
/// from the center value `gamma_stereo`, stopping at the first zero R.
pub fn integrate_stereo_regular(
    params: &Params,
    gamma_stereo: f64,
    lambda: f64,
    cfg: &IntegratorConfig,
) -> Result<RadialProfile> {
    cfg.validate()?;
    if !(gamma_stereo > 0.0) {
        return Err(Error::InvalidParams("gamma must be > 0".into()));
    }
    let nf = params.nf();
    let p = params.p;
    let q = params.q();
    let sys = StereoPower { nf, p, q, lambda };
    let (r0, y0) = stereo_start(params, gamma_stereo, lambda, cfg);
    let mut profile = RadialProfile::empty(Frame::RStereographic);
    let zero = run_watched(&sys, r0, y0, R_TAIL_SWITCH, &cfg.ctl_rel(r0 / 2.0), true, |x, y, _| {
        profile.push(x, y[0], y[1]);
    })?;
    match zero {
        Some(ev) => {
            profile.first_zero = Some(ev.x);
            profile.end_derivative = Some(ev.f[0]);
            profile.first_zero_err = Some(zero_drift_estimate(cfg, ev.err, ev.x));
        }
        None => {
            // far-field zero: recover it from the flux quadrature
            let (r_zero, u_r) = tail_close_with_flux(params, &profile, 0.0, lambda)?;
            profile.first_zero = Some(r_zero);
            profile.end_derivative = Some(u_r);
            profile.first_zero_err = Some(10.0 * cfg.rel_tol * r_zero);
        }
    }
    Ok(profile)
}

fn stereo_start(params: &Params, gamma_stereo: f64, lambda: f64, cfg: &IntegratorConfig) -> (f64, [f64; 2]) {
    let nf = params.nf();
    let p = params.p;
    let q = params.q();
    let scale = (lambda * gamma_stereo.powf(p - 1.0)).sqrt();
    let r0 = cfg.theta_start * scale.recip().min(1.0);
    let c = (nf * (nf - 2.0) * gamma_stereo + lambda * 2f64.powf(-q) * gamma_stereo.powf(p)) / (2.0 * nf);
    (r0, [gamma_stereo - c * r0 * r0, -2.0 * c * r0])
}

/// Integrate the linear eigen-equation with `phi(0) = 1`, `phi'(0) = 0` up
/// to `theta_end`. Returns the profile; `first_zero` is `None` when phi
/// stays positive on the range (a legitimate outcome for small lambda).
pub fn integrate_sphere_linear_to(
    n: u32,
    lambda: f64,
    theta_end: f64,
    cfg: &IntegratorConfig,
) -> Result<RadialProfile> {
    cfg.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParams("lambda must be > 0".into()));
    }
    let nf = f64::from(n);
    let sys = SphereLinear { nm1: nf - 1.0, lambda };
    let theta0 = cfg.theta_start * lambda.sqrt().recip().min(1.0);
    let c = lambda / (2.0 * nf);
    let y0 = [1.0 - c * theta0 * theta0, -2.0 * c * theta0];
    let mut profile = RadialProfile::empty(Frame::ThetaOnSphere);
    let zero = run_watched(&sys, theta0, y0, theta_end, &cfg.ctl_rel(theta0 / 2.0), true, |x, y, _| {
        profile.push(x, y[0], y[1]);
    })?;
    if let Some(ev) = zero {
        profile.first_zero = Some(ev.x);
        profile.end_derivative = Some(ev.f[0]);
        profile.first_zero_err = Some(zero_drift_estimate(cfg, ev.err, ev.x));
    }
    Ok(profile)
}

/// Integrate the linear eigen-equation over the whole cap (0, pi).
pub fn integrate_sphere_linear(n: u32, lambda: f64, cfg: &IntegratorConfig) -> Result<RadialProfile> {
    integrate_sphere_linear_to(n, lambda, std::f64::consts::PI * (1.0 - 1e-12), cfg)
}

/// Regular solution co-integrated with its variational equation in the
/// stereographic frame.
#[derive(Debug, Clone)]
pub struct VariationalSolution {
    /// u(., gamma), r frame, up to and including the first zero R.
    pub u: RadialProfile,
    /// w = du/dgamma on the same grid (no zero bookkeeping).
    pub w: RadialProfile,
    /// w evaluated at R; for tail-closed solutions this is the value at the
    /// march end, not at the zero.
    pub w_end: f64,
    /// u_r(R) < 0.
    pub u_r_end: f64,
    /// True when the zero lay beyond the marched range and was recovered by
    /// the analytic tail closure; w_end is then only a proxy.
    pub tail_closed: bool,
}

impl VariationalSolution {
    pub fn r_zero(&self) -> f64 {
        self.u.first_zero.expect("variational solution always carries a zero")
    }

    /// Number of sign changes of w on (0, R).
    pub fn w_sign_changes(&self) -> usize {
        let mut count = 0;
        for k in 1..self.w.value.len() {
            if self.w.value[k - 1] != 0.0 && self.w.value[k] != 0.0 && (self.w.value[k - 1] > 0.0) != (self.w.value[k] > 0.0)
            {
                count += 1;
            }
        }
        count
    }
}

/// Co-integrate the stereographic solution and the variational equation
/// `(L + p A^{-q} u^{p-1}) w = 0`, `w(0) = 1`, `w'(0) = 0`, up to the first
/// zero R of u; returns w(R) along with both trajectories.
pub fn integrate_variational(params: &Params, gamma_sphere: f64, cfg: &IntegratorConfig) -> Result<VariationalSolution> {
    cfg.validate()?;
    if !(gamma_sphere > 0.0) {
        return Err(Error::InvalidParams("Gamma must be > 0".into()));
    }
    let gamma = params.gamma_stereo_of_sphere(gamma_sphere);
    let nf = params.nf();
    let p = params.p;
    let q = params.q();
    let sys = StereoVariational { nf, p, q };
    let (r0, [u0, du0]) = stereo_start(params, gamma, 1.0, cfg);
    let cw = (nf * (nf - 2.0) + p * 2f64.powf(-q) * gamma.powf(p - 1.0)) / (2.0 * nf);
    let y0 = [u0, du0, 1.0 - cw * r0 * r0, -2.0 * cw * r0];

    let mut u = RadialProfile::empty(Frame::RStereographic);
    let mut w = RadialProfile::empty(Frame::RStereographic);
    let zero = run_watched(&sys, r0, y0, R_TAIL_SWITCH, &cfg.ctl_rel(r0 / 2.0), true, |x, y, _| {
        u.push(x, y[0], y[1]);
        w.push(x, y[2], y[3]);
    })?;
    match zero {
        Some(ev) => {
            u.first_zero = Some(ev.x);
            u.end_derivative = Some(ev.f[0]);
            u.first_zero_err = Some(zero_drift_estimate(cfg, ev.err, ev.x));
            Ok(VariationalSolution { u, w, w_end: ev.y[2], u_r_end: ev.f[0], tail_closed: false })
        }
        None => {
            let (r_zero, u_r) = tail_close_with_flux(params, &u, 0.0, 1.0)?;
            u.first_zero = Some(r_zero);
            u.end_derivative = Some(u_r);
            u.first_zero_err = Some(10.0 * cfg.rel_tol * r_zero);
            let w_end = *w.value.last().unwrap();
            Ok(VariationalSolution { u, w, w_end, u_r_end: u_r, tail_closed: true })
        }
    }
}

/// First zero R of the cap solution computed in the Emden frame
/// (y = 2^{-q/(p-1)} u r^mu / a against t = ln(r)/m), where the
/// concentration of the solution at the center is scaled out.
///
/// For strongly concentrated critical solutions the stereographic extraction
/// of R is ill-conditioned (the tail the zero lives on is smaller than the
/// center peak by the square of the blow-up factor); the Emden variables
/// keep every scale polynomially bounded and recover the zero at
/// integration accuracy. Requires p >= p_S.
pub fn integrate_cap_emden_zero(params: &Params, gamma_stereo: f64, cfg: &IntegratorConfig) -> Result<f64> {
    cfg.validate()?;
    if !(gamma_stereo > 0.0) {
        return Err(Error::InvalidParams("gamma must be > 0".into()));
    }
    let exps = model::compute_exponents(params);
    let (a, m, alpha) = exps.supercritical(params)?;
    let mu = exps.mu;
    let c0 = 2f64.powf(-exps.q / (params.p - 1.0)) * gamma_stereo / a;
    // start where both the amplitude and the cap forcing are negligible
    let t_amp = (1e-8 / c0).ln() / (m * mu);
    let t_forcing = -14.0 * std::f64::consts::LN_10 / (2.0 * m);
    let t0 = t_amp.min(t_forcing);
    let y0 = c0 * (m * mu * t0).exp();
    let z0 = m * mu * y0;
    let n = params.n;
    let p = params.p;
    let m2 = m * m;
    let sys = move |t: f64, y: &[f64; 2]| {
        let (b0, b1) = model::cap_coefficients(t, &exps, n).expect("cap coefficients exist for p >= p_S");
        let ypow = y[0].signum() * y[0].abs().powf(p);
        // the equation carries m^2 B1: the y-coefficient of the transformed
        // linear cap term is m^2 N(N-2) A^2 r^2 / 4
        [y[1], -alpha * y[1] + y[0] - ypow - b0 * ypow - m2 * b1 * y[0]]
    };
    let zero = run_watched(&sys, t0, [y0, z0], 1e6, &cfg.ctl_rel(0.01), true, |_, _, _| {})?;
    let ev = zero.ok_or(Error::NoZero { x_end: f64::INFINITY })?;
    Ok((m * ev.x).exp())
}

/// First zero R of the strongly concentrated critical cap solution by
/// integrating the deviation from the exact flat critical bubble.
///
/// At p = p_S the flat Emden system is Hamiltonian and the regular solution
/// follows the explicit homoclinic
/// `y_hom(t) = (gamma/a) e^t (1 + k^2 e^{2t/mu})^{-mu}`,
/// `k^2 = gamma^{p-1}/(N(N-2))` (the critical bubble). Direct shooting
/// loses the hemisphere gap R - 1 = O(gamma^{-2}): noise injected at the
/// bubble rides the saddle's unstable mode and is amplified by the full
/// concentration factor. Integrating d = y - y_hom instead removes the
/// amplified carrier analytically; d obeys
///
/// ```text
/// d'' - d + [(y_hom+d)^p - y_hom^p] + m^2 B1(t) (y_hom + d) = 0
/// ```
///
/// exactly (no linearization), the zero-determining signal is generated by
/// the forcing near the crossing, and the extraction stays well conditioned
/// uniformly in gamma.
pub fn critical_cap_zero(params: &Params, gamma_stereo: f64, cfg: &IntegratorConfig) -> Result<f64> {
    cfg.validate()?;
    if params.p != params.p_critical() {
        return Err(Error::InvalidParams("critical_cap_zero requires p = p_S exactly".into()));
    }
    if !(gamma_stereo > 0.0) {
        return Err(Error::InvalidParams("gamma must be > 0".into()));
    }
    let exps = model::compute_exponents(params);
    let (a, m, _alpha) = exps.supercritical(params)?;
    let mu = exps.mu;
    let p = params.p;
    let nf = params.nf();
    let n = params.n;
    let c0 = gamma_stereo / a;
    let k2 = gamma_stereo.powf(p - 1.0) / (nf * (nf - 2.0));
    let m2 = m * m;

    // closed-form homoclinic and its t-derivative
    let hom = move |t: f64| -> (f64, f64) {
        let w = k2 * (2.0 * t / mu).exp();
        let y = c0 * t.exp() * (1.0 + w).powf(-mu);
        (y, y * (1.0 - w) / (1.0 + w))
    };

    let pow_diff = move |yb: f64, d: f64| -> f64 {
        let y = yb + d;
        if y > 0.5 * yb {
            yb.powf(p) * (p * (d / yb).ln_1p()).exp_m1()
        } else {
            sgn_pow(y, p) - yb.powf(p)
        }
    };
    let sys = move |t: f64, s: &[f64; 2]| -> [f64; 2] {
        let (yb, _) = hom(t);
        let (_, b1) = model::cap_coefficients(t, &exps, n).expect("critical coefficients");
        [s[1], s[0] - pow_diff(yb, s[0]) - m2 * b1 * (yb + s[0])]
    };

    // start left of the bubble and of any appreciable forcing, on the
    // particular response d ~ -m^2 N(N-2) c0 e^{(2m+1)t} / ((2m+1)^2 - 1)
    let t_bubble = -mu * k2.sqrt().ln();
    let t0 = (-6.0f64).min((1e-3 * a / gamma_stereo).ln()).min(t_bubble - 8.0);
    let denom = (2.0 * m + 1.0) * (2.0 * m + 1.0) - 1.0;
    let d0 = -m2 * nf * (nf - 2.0) * c0 * ((2.0 * m + 1.0) * t0).exp() / denom;
    let s0 = [d0, (2.0 * m + 1.0) * d0];

    // march and watch the crossing of y = y_hom + d
    let ctl = cfg.ctl_rel(0.01);
    let mut crossing: Option<(ode::Step<2>, f64, f64)> = None;
    let g_of = move |t: f64, s: &[f64; 2]| hom(t).0 + s[0];
    let mut g_prev = g_of(t0, &s0);
    ode::integrate(&sys, t0, s0, 60.0, &ctl, |step| {
        let g_now = g_of(step.x1, &step.y1);
        if crossing.is_none() && g_prev > 0.0 && g_now <= 0.0 {
            crossing = Some((*step, g_prev, g_now));
            return Verdict::Stop;
        }
        g_prev = g_now;
        Verdict::Continue
    })?;
    let (step, _, _) = crossing.ok_or(Error::NoZero { x_end: 60.0 })?;
    let (mut lo, mut hi) = (step.x0, step.x1);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (sm, _) = ode::step_to(&sys, step.x0, &step.y0, &step.f0, mid);
        if g_of(mid, &sm) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    Ok((m * 0.5 * (lo + hi)).exp())
}

/// Residual of the flat singular solution a rho^{-mu} inserted into the flat
/// equation, relative to the size of its largest term. Analytically zero.
pub fn flat_singular_residual(params: &Params, rho: f64) -> f64 {
    let exps = model::compute_exponents(params);
    let (a, mu) = match exps.a {
        Some(a) => (a, exps.mu),
        None => return f64::NAN,
    };
    let nf = params.nf();
    let t_second = a * mu * (mu + 1.0) * rho.powf(-mu - 2.0);
    let t_first = -(nf - 1.0) * mu * a * rho.powf(-mu - 2.0);
    let t_power = a.powf(params.p) * rho.powf(-mu * params.p);
    let scale = t_second.abs().max(t_first.abs()).max(t_power.abs());
    (t_second + t_first + t_power).abs() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p37() -> Params {
        Params::new(3, 7.0).unwrap()
    }

    #[test]
    fn sphere_regular_basic_contract() {
        let cfg = IntegratorConfig::default();
        let prof = integrate_sphere_regular(&p37(), 1.0, &cfg).unwrap();
        let theta = prof.first_zero.unwrap();
        assert!(theta > 0.0 && theta < std::f64::consts::PI);
        assert!(prof.end_derivative.unwrap() < 0.0);
        // value strictly positive before the zero, derivative negative
        for k in 1..prof.len() - 1 {
            assert!(prof.value[k] > 0.0, "U>0 before the zero");
            assert!(prof.derivative[k] < 0.0, "U'<0 on (0, Theta]");
        }
        let final_value = *prof.value.last().unwrap();
        assert!(final_value.abs() < cfg.abs_tol, "value at zero {final_value:e}");
    }

    #[test]
    fn sphere_regular_small_gamma_zero_near_pi() {
        let cfg = IntegratorConfig::default();
        let prof = integrate_sphere_regular(&p37(), 1e-3, &cfg).unwrap();
        let theta = prof.first_zero.unwrap();
        assert!(theta > std::f64::consts::PI - 0.1);
        assert!(theta <= std::f64::consts::PI);
    }

    #[test]
    fn taylor_start_consistency() {
        // first zeros with theta_start and theta_start/10 agree to 5 h^3
        let params = p37();
        let mut cfg = IntegratorConfig { rel_tol: 1e-12, abs_tol: 1e-14, theta_start: 1e-3, ..Default::default() };
        let t1 = integrate_sphere_regular(&params, 1.0, &cfg).unwrap().first_zero.unwrap();
        cfg.theta_start = 1e-4;
        let t2 = integrate_sphere_regular(&params, 1.0, &cfg).unwrap().first_zero.unwrap();
        assert!((t1 - t2).abs() < 5.0 * 1e-3f64.powi(3), "|d theta| = {:e}", (t1 - t2).abs());
    }

    #[test]
    fn tolerance_halving_moves_zero_within_estimate() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let prof = integrate_sphere_regular(&params, 2.0, &cfg).unwrap();
        let tight = IntegratorConfig { rel_tol: cfg.rel_tol / 2.0, abs_tol: cfg.abs_tol / 2.0, ..cfg };
        let prof2 = integrate_sphere_regular(&params, 2.0, &tight).unwrap();
        let dz = (prof.first_zero.unwrap() - prof2.first_zero.unwrap()).abs();
        assert!(dz < 10.0 * prof.first_zero_err.unwrap(), "dz {dz:e} vs est {:e}", prof.first_zero_err.unwrap());
    }

    #[test]
    fn flat_positive_supercritical_and_scaling_law() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let base = integrate_flat_regular(&params, 1.0, 50.0, &cfg).unwrap();
        assert!(base.first_zero.is_none());
        assert!(base.value.iter().all(|&v| v > 0.0));

        // u(rho, g) = g u(g^{(p-1)/2} rho, 1)
        let g: f64 = 2.0;
        let s = g.powf((params.p - 1.0) / 2.0);
        let scaled = integrate_flat_regular(&params, g, 50.0 / s, &cfg).unwrap();
        for &rho in &[0.5, 1.0, 2.0, 5.0, 7.0] {
            let (u1, _) = scaled.eval(rho / s).unwrap();
            let (u2, _) = base.eval(rho).unwrap();
            assert_relative_eq!(u1, g * u2, max_relative = 1e-8);
        }
    }

    #[test]
    fn flat_singular_residual_vanishes() {
        for &(n, p) in &[(3u32, 7.0), (5, 4.0), (11, 8.0)] {
            let params = Params::new(n, p).unwrap();
            for k in 0..40 {
                let rho = 0.1 * 10f64.powf(k as f64 / 19.5);
                assert!(flat_singular_residual(&params, rho) < 1e-10, "N={n} p={p} rho={rho}");
            }
        }
    }

    #[test]
    fn sphere_linear_closed_form_n3() {
        let cfg = IntegratorConfig::default();
        // lambda = 3 -> zero at pi/2
        let prof = integrate_sphere_linear(3, 3.0, &cfg).unwrap();
        assert_relative_eq!(prof.first_zero.unwrap(), std::f64::consts::FRAC_PI_2, max_relative = 1e-10);
        // lambda = 0.1 -> zero at pi/sqrt(1.1)
        let prof = integrate_sphere_linear(3, 0.1, &cfg).unwrap();
        assert_relative_eq!(prof.first_zero.unwrap(), std::f64::consts::PI / 1.1f64.sqrt(), max_relative = 1e-10);
        // large lambda: zero ~ pi/(2 sqrt(lambda)) in r units, j_{1/2} = pi
        let lam = 1e4;
        let prof = integrate_sphere_linear(3, lam, &cfg).unwrap();
        let r1 = model::stereo_r_of_theta(prof.first_zero.unwrap());
        assert!((2.0 * lam.sqrt() * r1 - std::f64::consts::PI).abs() < 0.05);
    }

    #[test]
    fn variational_small_gamma_signs() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let sol = integrate_variational(&params, 0.05, &cfg).unwrap();
        assert!(sol.w_end < 0.0, "w(R) = {} should be negative for small gamma", sol.w_end);
        assert!(sol.u_r_end < 0.0);
        assert_eq!(sol.w_sign_changes(), 1, "w has exactly one zero on (0, R)");
    }

    #[test]
    fn stereo_and_sphere_frames_agree() {
        let params = p37();
        let cfg = IntegratorConfig::default();
        let gamma_sphere = 1.5;
        let sphere = integrate_sphere_regular(&params, gamma_sphere, &cfg).unwrap();
        let stereo = integrate_stereo_regular(&params, params.gamma_stereo_of_sphere(gamma_sphere), 1.0, &cfg).unwrap();
        let theta_from_r = model::theta_of_stereo_r(stereo.first_zero.unwrap());
        assert_relative_eq!(sphere.first_zero.unwrap(), theta_from_r, max_relative = 1e-9);
    }

    #[test]
    fn hermite_eval_matches_nodes() {
        let params = p37();
        let prof = integrate_sphere_regular(&params, 1.0, &IntegratorConfig::default()).unwrap();
        let k = prof.len() / 2;
        let (v, d) = prof.eval(prof.grid[k]).unwrap();
        assert_relative_eq!(v, prof.value[k], max_relative = 1e-12);
        assert_relative_eq!(d, prof.derivative[k], max_relative = 1e-9);
        assert!(prof.eval(prof.x_max() * 2.0).is_err());
    }

    #[test]
    fn emden_frame_zero_matches_stereo_frame() {
        // same zero through two frames: supercritical and critical
        let cfg = IntegratorConfig::default();
        for (n, p, gamma) in [(3u32, 7.0, 5.0), (3, 5.0, 140.0), (4, 3.5, 8.0)] {
            let params = Params::new(n, p).unwrap();
            let direct = integrate_stereo_regular(&params, gamma, 1.0, &cfg).unwrap().first_zero.unwrap();
            let emden = integrate_cap_emden_zero(&params, gamma, &cfg).unwrap();
            assert_relative_eq!(direct, emden, max_relative = 1e-7);
        }
    }

    #[test]
    fn critical_bubble_difference_route_matches_direct_march() {
        // moderate concentration: both the direct march and the
        // homoclinic-difference route resolve R - 1
        let params = Params::new(3, 5.0).unwrap();
        let cfg = IntegratorConfig::default();
        let gamma = params.gamma_stereo_of_sphere(100.0);
        let direct = integrate_stereo_regular(&params, gamma, 1.0, &cfg).unwrap().first_zero.unwrap();
        let diffed = critical_cap_zero(&params, gamma, &cfg).unwrap();
        assert_relative_eq!(direct - 1.0, diffed - 1.0, max_relative = 1e-4);
    }

    #[test]
    fn tail_closure_matches_direct_march_in_overlap() {
        // Gamma chosen so the zero (~1e8) is still marchable directly; the
        // closure built from a truncated profile must land on the same zero
        let params = p37();
        let cfg = IntegratorConfig::default();
        let gamma = params.gamma_stereo_of_sphere(0.0485);
        let direct = integrate_stereo_regular(&params, gamma, 1.0, &cfg).unwrap().first_zero.unwrap();
        assert!(direct > 1e7 && direct < R_TAIL_SWITCH, "direct zero at {direct:e}");

        let sys = StereoPower { nf: params.nf(), p: params.p, q: params.q(), lambda: 1.0 };
        let (r0, y0) = stereo_start(&params, gamma, 1.0, &cfg);
        let mut truncated = RadialProfile::empty(Frame::RStereographic);
        run_watched(&sys, r0, y0, 1e6, &cfg.ctl_rel(r0 / 2.0), true, |x, y, _| {
            truncated.push(x, y[0], y[1]);
        })
        .unwrap();
        let (closed, u_r) = tail_close_with_flux(&params, &truncated, 0.0, 1.0).unwrap();
        // closure accuracy is O(r_end/R) = O(1e-2) at this truncation
        assert_relative_eq!(closed, direct, max_relative = 5e-4);
        assert!(u_r < 0.0);
    }

    #[test]
    fn far_field_zero_follows_the_blowup_scaling() {
        // R(Gamma) ~ c Gamma^{-(p-1)} for small center values
        let params = p37();
        let cfg = IntegratorConfig::default();
        let r1 = integrate_stereo_regular(&params, params.gamma_stereo_of_sphere(2e-3), 1.0, &cfg)
            .unwrap()
            .first_zero
            .unwrap();
        let r2 = integrate_stereo_regular(&params, params.gamma_stereo_of_sphere(1e-3), 1.0, &cfg)
            .unwrap()
            .first_zero
            .unwrap();
        let exponent = (r2 / r1).ln() / 2f64.ln();
        assert!((exponent - 6.0).abs() < 1e-3, "scaling exponent {exponent}");
    }

    #[test]
    fn invalid_inputs_rejected() {
        let cfg = IntegratorConfig::default();
        assert!(integrate_sphere_regular(&p37(), -1.0, &cfg).is_err());
        assert!(integrate_sphere_linear(3, 0.0, &cfg).is_err());
        let bad = IntegratorConfig { rel_tol: 0.1, ..cfg };
        assert!(integrate_sphere_regular(&p37(), 1.0, &bad).is_err());
    }
}
