//! Embedded Dormand-Prince 5(4) integrator with PI step-size control.
//!
//! The driver reports every accepted step through a callback carrying the
//! full step record (both endpoints with derivatives), which is enough for
//! cubic Hermite interpolation and for re-stepping into the interior of an
//! accepted step when an event has to be localized.

use crate::error::{Error, Result};

/// Right-hand side of a first-order system of dimension D.
pub trait System<const D: usize> {
    fn rhs(&self, x: f64, y: &[f64; D]) -> [f64; D];
}

impl<F, const D: usize> System<D> for F
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    fn rhs(&self, x: f64, y: &[f64; D]) -> [f64; D] {
        self(x, y)
    }
}

/// Tolerances and work bounds for the adaptive driver.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step size (sign follows the integration direction).
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

/// One accepted step, with derivatives at both endpoints.
#[derive(Debug, Clone, Copy)]
pub struct Step<const D: usize> {
    pub x0: f64,
    pub y0: [f64; D],
    pub f0: [f64; D],
    pub x1: f64,
    pub y1: [f64; D],
    pub f1: [f64; D],
}

/// Callback verdict after each accepted step.
pub enum Verdict {
    Continue,
    Stop,
}

/// Terminal state of a run.
#[derive(Debug, Clone, Copy)]
pub struct EndState<const D: usize> {
    pub x: f64,
    pub y: [f64; D],
    pub steps: usize,
    /// True when the callback stopped the run before x_end.
    pub stopped: bool,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Error coefficients: 5th-order weights minus the embedded 4th-order ones.
const E1: f64 = B1 - 5179.0 / 57600.0;
const E3: f64 = B3 - 7571.0 / 16695.0;
const E4: f64 = B4 - 393.0 / 640.0;
const E5: f64 = B5 + 92097.0 / 339200.0;
const E6: f64 = B6 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const D: usize>(y: &[f64; D], pairs: &[(f64, &[f64; D])], h: f64) -> [f64; D] {
    let mut out = *y;
    for i in 0..D {
        let mut acc = 0.0;
        for (c, k) in pairs {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// One Dormand-Prince step of size h from (x0, y0) with f0 = rhs(x0, y0).
/// Returns (y1, f1, err) where err is the embedded error vector.
pub fn dp_step<S: System<D>, const D: usize>(
    sys: &S,
    x0: f64,
    y0: &[f64; D],
    f0: &[f64; D],
    h: f64,
) -> ([f64; D], [f64; D], [f64; D]) {
    let k1 = *f0;
    let k2 = sys.rhs(x0 + C2 * h, &axpy(y0, &[(A21, &k1)], h));
    let k3 = sys.rhs(x0 + C3 * h, &axpy(y0, &[(A31, &k1), (A32, &k2)], h));
    let k4 = sys.rhs(x0 + C4 * h, &axpy(y0, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
    let k5 = sys.rhs(
        x0 + C5 * h,
        &axpy(y0, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
    );
    let k6 = sys.rhs(
        x0 + h,
        &axpy(y0, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h),
    );
    let y1 = axpy(y0, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
    let k7 = sys.rhs(x0 + h, &y1);
    let mut err = [0.0; D];
    for i in 0..D {
        err[i] = h
            * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y1, k7, err)
}

fn error_norm<const D: usize>(err: &[f64; D], y0: &[f64; D], y1: &[f64; D], ctl: &StepControl) -> f64 {
    let mut acc = 0.0;
    for i in 0..D {
        let scale = ctl.abs_tol + ctl.rel_tol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / scale;
        acc += r * r;
    }
    (acc / D as f64).sqrt()
}

/// Integrate from (x0, y0) towards x_end, invoking `on_step` after every
/// accepted step. The callback may stop the run early.
pub fn integrate<S: System<D>, const D: usize>(
    sys: &S,
    x0: f64,
    y0: [f64; D],
    x_end: f64,
    ctl: &StepControl,
    mut on_step: impl FnMut(&Step<D>) -> Verdict,
) -> Result<EndState<D>> {
    let dir = (x_end - x0).signum();
    if dir == 0.0 {
        return Ok(EndState { x: x0, y: y0, steps: 0, stopped: false });
    }
    let mut x = x0;
    let mut y = y0;
    let mut f = sys.rhs(x, &y);
    let mut h = ctl.h_init.abs().min(ctl.h_max).min((x_end - x0).abs()) * dir;
    if h == 0.0 {
        return Err(Error::InvalidConfig("initial step size is zero".into()));
    }
    let mut err_prev: f64 = 1.0;
    let mut steps = 0usize;
    let mut rejected = false;

    loop {
        if steps >= ctl.max_steps {
            return Err(Error::StepLimit { steps, x });
        }
        // Clamp onto the endpoint.
        if (x + h - x_end) * dir > 0.0 {
            h = x_end - x;
        }
        if h.abs() < x.abs() * f64::EPSILON * 4.0 + f64::MIN_POSITIVE * 16.0 {
            return Err(Error::StepUnderflow { x });
        }
        let (y1, f1, err) = dp_step(sys, x, &y, &f, h);
        steps += 1;
        let en = error_norm(&err, &y, &y1, ctl);
        if en <= 1.0 && y1.iter().all(|v| v.is_finite()) {
            let step = Step { x0: x, y0: y, f0: f, x1: x + h, y1, f1 };
            x += h;
            y = y1;
            f = f1;
            let done = (x - x_end) * dir >= 0.0;
            let verdict = on_step(&step);
            if matches!(verdict, Verdict::Stop) {
                return Ok(EndState { x, y, steps, stopped: true });
            }
            if done {
                return Ok(EndState { x, y, steps, stopped: false });
            }
            // PI controller (order 5): fac = s * en^-0.17 * en_prev^0.04
            let fac = if en == 0.0 {
                6.0
            } else {
                0.9 * en.powf(-0.17) * err_prev.powf(0.04)
            };
            let fac = fac.clamp(0.2, if rejected { 1.0 } else { 6.0 });
            err_prev = en.max(1e-10);
            rejected = false;
            h = (h * fac).abs().min(ctl.h_max) * dir;
        } else {
            rejected = true;
            let fac = if en.is_finite() { (0.9 * en.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
            h *= fac;
        }
    }
}

/// Re-integrate the interior of an accepted step: a single Dormand-Prince
/// step from (x0, y0) to xq. Within an accepted step this is at least as
/// accurate as the accepted solution itself.
pub fn step_to<S: System<D>, const D: usize>(
    sys: &S,
    x0: f64,
    y0: &[f64; D],
    f0: &[f64; D],
    xq: f64,
) -> ([f64; D], [f64; D]) {
    let (y, f, _) = dp_step(sys, x0, y0, f0, xq - x0);
    (y, f)
}

/// Cubic Hermite interpolation on one step (for dense sampling, not event
/// refinement).
pub fn hermite<const D: usize>(step: &Step<D>, x: f64) -> [f64; D] {
    let h = step.x1 - step.x0;
    let s = (x - step.x0) / h;
    let s2 = s * s;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s2 * (3.0 - 2.0 * s);
    let h11 = s2 * (s - 1.0);
    let mut out = [0.0; D];
    for (i, o) in out.iter_mut().enumerate() {
        *o = h00 * step.y0[i] + h10 * h * step.f0[i] + h01 * step.y1[i] + h11 * h * step.f1[i];
    }
    out
}
