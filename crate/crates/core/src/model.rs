//! Problem parameters, derived exponents, regime classification, and the
//! changes of variables between the spherical, stereographic, and Emden
//! frames.
//!
//! All quantities derive from the pair (N, p): the critical exponent
//! `p_S = (N+2)/(N-2)`, the Joseph-Lundgren exponent `p_JL`, and the
//! supercritical constants
//!
//! ```text
//! mu = 2/(p-1),   a = {mu (N-2-mu)}^{mu/2},   m = a^{-(p-1)/2},
//! alpha = m (N-2-2 mu),   q = (N-2)(p - p_S)/2,
//! ```
//!
//! which satisfy the identity `m^2 mu (N-2-mu) = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{Frame, RadialProfile};
use crate::phase::PhaseOrbit;

/// Problem data: sphere dimension N >= 3 and nonlinearity exponent p > 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: u32,
    pub p: f64,
}

impl Params {
    pub fn new(n: u32, p: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParams(format!("N = {n} < 3 unsupported")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParams(format!("p = {p} must be finite and > 1")));
        }
        Ok(Self { n, p })
    }

    /// Dimension as a float.
    pub fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    /// Critical Sobolev exponent (N+2)/(N-2).
    pub fn p_critical(&self) -> f64 {
        (self.nf() + 2.0) / (self.nf() - 2.0)
    }

    /// Joseph-Lundgren exponent; infinite for N <= 10.
    pub fn p_joseph_lundgren(&self) -> f64 {
        if self.n >= 11 {
            1.0 + 4.0 / (self.nf() - 4.0 - 2.0 * (self.nf() - 1.0).sqrt())
        } else {
            f64::INFINITY
        }
    }

    /// mu = 2/(p-1).
    pub fn mu(&self) -> f64 {
        2.0 / (self.p - 1.0)
    }

    /// q = (N-2)(p - p_S)/2; negative in the subcritical regime.
    pub fn q(&self) -> f64 {
        (self.nf() - 2.0) * (self.p - self.p_critical()) / 2.0
    }

    /// gamma = 2^{(N-2)/2} Gamma: stereographic center value from the
    /// spherical one.
    pub fn gamma_stereo_of_sphere(&self, gamma_sphere: f64) -> f64 {
        2f64.powf((self.nf() - 2.0) / 2.0) * gamma_sphere
    }

    /// Inverse of [`Params::gamma_stereo_of_sphere`].
    pub fn gamma_sphere_of_stereo(&self, gamma_stereo: f64) -> f64 {
        2f64.powf(-(self.nf() - 2.0) / 2.0) * gamma_stereo
    }
}

/// Derived exponents and constants.
///
/// `a`, `m`, `alpha` are populated for p >= p_S (the formula for `a` needs
/// N-2-mu > 0, which holds there); `beta` additionally needs the spiral
/// condition. `mu` and `q` are defined for every p > 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Exponents {
    #[serde(with = "crate::io::float_maybe_inf")]
    pub p_s: f64,
    #[serde(with = "crate::io::float_maybe_inf")]
    pub p_jl: f64,
    pub mu: f64,
    pub q: f64,
    pub a: Option<f64>,
    pub m: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl Exponents {
    /// The triple (a, m, alpha), or an error when p < p_S.
    pub fn supercritical(&self, params: &Params) -> Result<(f64, f64, f64)> {
        match (self.a, self.m, self.alpha) {
            (Some(a), Some(m), Some(alpha)) => Ok((a, m, alpha)),
            _ => Err(Error::RequiresSupercritical { p: params.p, p_s: self.p_s }),
        }
    }
}

/// Compute all derived exponents for the given parameters.
pub fn compute_exponents(params: &Params) -> Exponents {
    let nf = params.nf();
    let p = params.p;
    let p_s = params.p_critical();
    let mu = params.mu();
    let q = params.q();

    let (a, m, alpha, beta) = if p >= p_s {
        let a = (mu * (nf - 2.0 - mu)).powf(mu / 2.0);
        let m = a.powf(-(p - 1.0) / 2.0);
        let alpha = m * (nf - 2.0 - 2.0 * mu);
        let disc = (p - 1.0) - (alpha / 2.0) * (alpha / 2.0);
        let beta = if disc > 0.0 { Some(disc.sqrt()) } else { None };
        (Some(a), Some(m), Some(alpha), beta)
    } else {
        (None, None, None, None)
    };

    Exponents { p_s, p_jl: params.p_joseph_lundgren(), mu, q, a, m, alpha, beta }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JlPosition {
    BelowJl,
    AtOrAboveJl,
}

/// Regime classification of (N, p).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub criticality: Criticality,
    pub jl_position: JlPosition,
    /// Spiral condition (N-4-2 sqrt(N-1))/2 < mu < (N-4+2 sqrt(N-1))/2.
    pub spiral: bool,
}

/// Classify the regime of (N, p).
pub fn classify(params: &Params) -> Regime {
    let p_s = params.p_critical();
    let criticality = if params.p > p_s {
        Criticality::Supercritical
    } else if params.p == p_s {
        Criticality::Critical
    } else {
        Criticality::Subcritical
    };
    let jl_position = if params.p >= params.p_joseph_lundgren() {
        JlPosition::AtOrAboveJl
    } else {
        JlPosition::BelowJl
    };
    let nf = params.nf();
    let mu = params.mu();
    let root = 2.0 * (nf - 1.0).sqrt();
    let spiral = (nf - 4.0 - root) / 2.0 < mu && mu < (nf - 4.0 + root) / 2.0;
    Regime { criticality, jl_position, spiral }
}

/// Cap forcing coefficients of the Emden-frame equation,
/// `B0(t) = (1+e^{2mt})^q - 1` and `B1(t) = N(N-2) e^{2mt} / (1+e^{2mt})^2`.
///
/// Evaluated in overflow-safe form: `B0 = expm1(q * softplus(2mt))` and `B1`
/// through the decaying exponential for t > 0.
pub fn cap_coefficients(t: f64, exps: &Exponents, n: u32) -> Result<(f64, f64)> {
    let m = exps.m.ok_or(Error::RequiresSupercritical { p: f64::NAN, p_s: exps.p_s })?;
    let q = exps.q;
    let nf = f64::from(n);
    let s = 2.0 * m * t;
    // softplus(s) = ln(1 + e^s), stable on both sides
    let softplus = if s > 0.0 { s + (-s).exp().ln_1p() } else { s.exp().ln_1p() };
    let b0 = (q * softplus).exp_m1();
    let e = (-s.abs()).exp();
    let b1 = nf * (nf - 2.0) * e / ((1.0 + e) * (1.0 + e));
    Ok((b0, b1))
}

/// r = tan(theta/2), the stereographic radius of the polar angle.
pub fn stereo_r_of_theta(theta: f64) -> f64 {
    (theta / 2.0).tan()
}

/// theta = 2 arctan(r), inverse of [`stereo_r_of_theta`].
pub fn theta_of_stereo_r(r: f64) -> f64 {
    2.0 * r.atan()
}

/// Conformal factor A(r) = 2/(1+r^2).
pub fn conformal_a(r: f64) -> f64 {
    2.0 / (1.0 + r * r)
}

/// Pointwise sphere -> stereographic transform of (value, derivative):
/// u = A^{(N-2)/2} U, du/dr = A^{(N-2)/2+1} (U' - (N-2)/2 r U).
pub fn stereo_point_from_sphere(n: u32, theta: f64, u_val: f64, u_der: f64) -> (f64, f64, f64) {
    let c = (f64::from(n) - 2.0) / 2.0;
    let r = stereo_r_of_theta(theta);
    let a = conformal_a(r);
    let v = a.powf(c) * u_val;
    let dv = a.powf(c + 1.0) * (u_der - c * r * u_val);
    (r, v, dv)
}

/// Pointwise stereographic -> sphere transform, inverse of
/// [`stereo_point_from_sphere`].
pub fn sphere_point_from_stereo(n: u32, r: f64, v_val: f64, v_der: f64) -> (f64, f64, f64) {
    let c = (f64::from(n) - 2.0) / 2.0;
    let theta = theta_of_stereo_r(r);
    let a = conformal_a(r);
    let u = a.powf(-c) * v_val;
    let du = a.powf(-c) * (c * r * v_val + v_der / a);
    (theta, u, du)
}

/// Transform a spherical-cap profile U(theta) into the stereographic frame
/// u(r) = A(r)^{(N-2)/2} U, r = tan(theta/2). Rejects grids touching
/// theta >= pi.
pub fn stereographic_u_from_capital(n: u32, profile: &RadialProfile) -> Result<RadialProfile> {
    if profile.kind != Frame::ThetaOnSphere {
        return Err(Error::InvalidParams("expected a theta-frame profile".into()));
    }
    if profile.grid.iter().any(|&th| th >= std::f64::consts::PI) {
        return Err(Error::InvalidParams("theta >= pi not representable in the stereographic frame".into()));
    }
    let mut out = RadialProfile::empty(Frame::RStereographic);
    for i in 0..profile.grid.len() {
        let (r, v, dv) = stereo_point_from_sphere(n, profile.grid[i], profile.value[i], profile.derivative[i]);
        out.push(r, v, dv);
    }
    out.first_zero = profile.first_zero.map(stereo_r_of_theta);
    out.first_zero_err = profile.first_zero_err;
    if let (Some(th), Some(du)) = (profile.first_zero, profile.end_derivative) {
        // u = 0 at the zero, so only the derivative term survives
        let a = conformal_a(stereo_r_of_theta(th));
        out.end_derivative = Some(a.powf((f64::from(n) - 2.0) / 2.0 + 1.0) * du);
    }
    Ok(out)
}

/// Inverse of [`stereographic_u_from_capital`].
pub fn stereographic_u_to_capital(n: u32, profile: &RadialProfile) -> Result<RadialProfile> {
    if profile.kind != Frame::RStereographic {
        return Err(Error::InvalidParams("expected an r-frame profile".into()));
    }
    let mut out = RadialProfile::empty(Frame::ThetaOnSphere);
    for i in 0..profile.grid.len() {
        let (th, u, du) = sphere_point_from_stereo(n, profile.grid[i], profile.value[i], profile.derivative[i]);
        out.push(th, u, du);
    }
    out.first_zero = profile.first_zero.map(theta_of_stereo_r);
    out.first_zero_err = profile.first_zero_err;
    if let (Some(r), Some(dv)) = (profile.first_zero, profile.end_derivative) {
        let a = conformal_a(r);
        out.end_derivative = Some(a.powf(-(f64::from(n) - 2.0) / 2.0 - 1.0) * dv);
    }
    Ok(out)
}

/// Emden transform of a stereographic-frame profile:
/// `y(t) = 2^{-q/(p-1)} u(r) r^mu / a` at `t = (1/m) log r`, with
/// `z = dy/dt` recovered from the chain rule. Supercritical only; r = 0 is
/// excluded by construction (the grid must be positive).
pub fn emden_from_u(params: &Params, exps: &Exponents, profile: &RadialProfile) -> Result<PhaseOrbit> {
    if profile.kind != Frame::RStereographic {
        return Err(Error::InvalidParams("expected an r-frame profile".into()));
    }
    let (a, m, _) = exps.supercritical(params)?;
    let mu = exps.mu;
    let scale = 2f64.powf(-exps.q / (params.p - 1.0)) / a;
    let mut orbit = PhaseOrbit::empty(false);
    for i in 0..profile.grid.len() {
        let r = profile.grid[i];
        if r <= 0.0 {
            return Err(Error::InvalidParams("emden transform requires r > 0".into()));
        }
        let u = profile.value[i];
        let du = profile.derivative[i];
        let t = r.ln() / m;
        let y = scale * u * r.powf(mu);
        let z = scale * m * (du * r.powf(mu + 1.0) + mu * u * r.powf(mu));
        orbit.push(t, y, z, params.p, None);
    }
    Ok(orbit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::dd::Dd;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn exponents_critical_n3() {
        let params = Params::new(3, 5.0).unwrap();
        let e = compute_exponents(&params);
        assert_eq!(e.p_s, 5.0);
        assert!(e.p_jl.is_infinite());
        assert_relative_eq!(e.mu, 0.5);
        assert_relative_eq!(e.a.unwrap(), 0.25f64.powf(0.25), max_relative = 1e-15);
        assert_relative_eq!(e.a.unwrap(), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-14);
        assert_relative_eq!(e.m.unwrap(), 2.0, max_relative = 1e-14);
        assert_abs_diff_eq!(e.alpha.unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.q, 0.0, epsilon = 1e-15);
        // beta = sqrt(p-1) at criticality
        assert_relative_eq!(e.beta.unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn exponents_supercritical_n3_p7() {
        let params = Params::new(3, 7.0).unwrap();
        let e = compute_exponents(&params);
        assert_relative_eq!(e.mu, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(e.a.unwrap(), (2.0f64 / 9.0).powf(1.0 / 6.0), max_relative = 1e-14);
        assert_relative_eq!(e.m.unwrap(), 4.5f64.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(e.alpha.unwrap(), 4.5f64.sqrt() / 3.0, max_relative = 1e-13);
        assert_relative_eq!(e.alpha.unwrap(), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-12);
        let (a, m, _) = (e.a.unwrap(), e.m.unwrap(), ());
        let _ = a;
        let ident = m * m * e.mu * (params.nf() - 2.0 - e.mu);
        assert_relative_eq!(ident, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn joseph_lundgren_n11() {
        let params = Params::new(11, 2.0).unwrap();
        let e = compute_exponents(&params);
        let expected = 1.0 + 4.0 / (7.0 - 2.0 * 10f64.sqrt());
        assert_relative_eq!(e.p_jl, expected, max_relative = 1e-15);
        // identity (p_JL - 1)(N - 4 - 2 sqrt(N-1)) = 4
        let ident = (e.p_jl - 1.0) * (11.0 - 4.0 - 2.0 * 10f64.sqrt());
        assert_relative_eq!(ident, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn classify_examples() {
        let r = classify(&Params::new(3, 5.0).unwrap());
        assert_eq!(r.criticality, Criticality::Critical);
        assert_eq!(r.jl_position, JlPosition::BelowJl);

        let r = classify(&Params::new(3, 7.0).unwrap());
        assert_eq!(r.criticality, Criticality::Supercritical);
        assert_eq!(r.jl_position, JlPosition::BelowJl);
        assert!(r.spiral);

        // p_JL(11) ~ 6.92, so p = 7 sits above it
        let r = classify(&Params::new(11, 7.0).unwrap());
        assert_eq!(r.criticality, Criticality::Supercritical);
        assert_eq!(r.jl_position, JlPosition::AtOrAboveJl);

        let r = classify(&Params::new(11, 8.0).unwrap());
        assert!(!r.spiral);
    }

    #[test]
    fn spiral_consistent_with_eigen_discriminant() {
        // alpha^2 - 4(p-1) < 0 must agree with the mu-interval form
        for &(n, p) in &[(3u32, 7.0), (3, 50.0), (11, 8.0), (11, 6.95), (12, 7.5), (5, 4.0)] {
            let params = Params::new(n, p).unwrap();
            let e = compute_exponents(&params);
            if let Some(alpha) = e.alpha {
                let disc_neg = alpha * alpha - 4.0 * (p - 1.0) < 0.0;
                assert_eq!(disc_neg, classify(&params).spiral, "N={n} p={p}");
            }
        }
    }

    #[test]
    fn subcritical_exponents_absent() {
        let params = Params::new(3, 2.0).unwrap();
        let e = compute_exponents(&params);
        assert!(e.a.is_none() && e.m.is_none() && e.alpha.is_none() && e.beta.is_none());
        assert!(e.q < 0.0);
        assert!(e.supercritical(&params).is_err());
    }

    #[test]
    fn cap_coefficients_limits() {
        let params = Params::new(3, 7.0).unwrap();
        let e = compute_exponents(&params);
        let (b0, b1) = cap_coefficients(-400.0, &e, 3).unwrap();
        assert!((0.0..1e-300).contains(&b0));
        assert!((0.0..1e-300).contains(&b1));
        let (_, b1) = cap_coefficients(0.0, &e, 3).unwrap();
        assert_relative_eq!(b1, 3.0 * 1.0 / 4.0, max_relative = 1e-14);
        // no overflow for huge |t|
        let (b0, b1) = cap_coefficients(1e6, &e, 3).unwrap();
        assert!(b0.is_infinite() || b0 > 0.0);
        assert!((0.0..1e-300).contains(&b1));
        // B1 is even in t
        let (_, b1a) = cap_coefficients(-1.3, &e, 3).unwrap();
        let (_, b1b) = cap_coefficients(1.3, &e, 3).unwrap();
        assert_relative_eq!(b1a, b1b, max_relative = 1e-15);
    }

    /// High-precision oracle for B0, B1 at (N=3, p=7, t=-1) and a
    /// non-integer-q case (N=5, p=4, t=-0.37).
    #[test]
    fn cap_coefficients_double_double_oracle() {
        for &(n, p, t) in &[(3u32, 7.0, -1.0), (5, 4.0, -0.37)] {
            let params = Params::new(n, p).unwrap();
            let e = compute_exponents(&params);
            let (b0, b1) = cap_coefficients(t, &e, n).unwrap();

            let nf = Dd::from(f64::from(n));
            let pd = Dd::from(p);
            let one = Dd::from(1.0);
            let two = Dd::from(2.0);
            let mu = two / (pd - one);
            let a = (mu * (nf - two - mu)).pow(mu / two);
            let m = a.pow(Dd::from(-0.5) * (pd - one));
            let q = (nf - two) * (pd - (nf + two) / (nf - two)) / two;
            let e2mt = (two * m * Dd::from(t)).exp();
            let b0_ref = (one + e2mt).pow(q) - one;
            let b1_ref = nf * (nf - two) * e2mt / ((one + e2mt) * (one + e2mt));
            assert_relative_eq!(b0, b0_ref.to_f64(), max_relative = 1e-13);
            assert_relative_eq!(b1, b1_ref.to_f64(), max_relative = 1e-13);
        }
    }

    #[test]
    fn stereo_point_hemisphere() {
        // theta = pi/2 -> r = 1, A = 1, u = U
        let (r, v, _) = stereo_point_from_sphere(3, std::f64::consts::FRAC_PI_2, 2.5, -1.0);
        assert_relative_eq!(r, 1.0, max_relative = 1e-15);
        assert_relative_eq!(v, 2.5, max_relative = 1e-15);
    }

    #[test]
    fn stereo_origin_matches_gamma_scaling() {
        // theta -> 0: u -> 2^{(N-2)/2} U(0)
        for n in [3u32, 4, 7] {
            let params = Params::new(n, 2.0).unwrap();
            let (_, v, _) = stereo_point_from_sphere(n, 1e-9, 3.0, 0.0);
            assert_relative_eq!(v, params.gamma_stereo_of_sphere(3.0), max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_theta_at_pi() {
        let mut prof = RadialProfile::empty(Frame::ThetaOnSphere);
        prof.push(1.0, 1.0, -0.1);
        prof.push(std::f64::consts::PI, 0.5, -0.1);
        assert!(stereographic_u_from_capital(3, &prof).is_err());
    }

    #[test]
    fn emden_asymptote_recovers_center_value() {
        // a e^{-m mu t} y(t) 2^{q/(p-1)} -> gamma as t -> -infinity
        let params = Params::new(3, 7.0).unwrap();
        let e = compute_exponents(&params);
        let (a, m, _) = e.supercritical(&params).unwrap();
        let gamma = 2.0;
        let cfg = crate::integrate::IntegratorConfig::default();
        let prof = crate::integrate::integrate_stereo_regular(&params, gamma, 1.0, &cfg).unwrap();
        let orbit = emden_from_u(&params, &e, &prof).unwrap();
        let scale = 2f64.powf(e.q / (params.p - 1.0)) * a;
        for k in 0..orbit.len() {
            if orbit.t[k] < -6.0 && orbit.t[k] > -9.0 {
                let recovered = scale * (-m * e.mu * orbit.t[k]).exp() * orbit.y[k];
                assert_relative_eq!(recovered, gamma, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn emden_of_flat_singular_is_one_at_criticality() {
        // At p = p_S the transform applied to a r^{-mu} gives y = 1 exactly.
        let params = Params::new(3, 5.0).unwrap();
        let e = compute_exponents(&params);
        let a = e.a.unwrap();
        let mut prof = RadialProfile::empty(Frame::RStereographic);
        for i in 1..60 {
            let r = 0.05 * i as f64;
            prof.push(r, a * r.powf(-e.mu), -e.mu * a * r.powf(-e.mu - 1.0));
        }
        let orbit = emden_from_u(&params, &e, &prof).unwrap();
        for (y, z) in orbit.y.iter().zip(orbit.z.iter()) {
            assert_relative_eq!(*y, 1.0, max_relative = 1e-13);
            assert_abs_diff_eq!(*z, 0.0, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn identity_m2_mu_nm2mmu(n in 3u32..=12, frac in 1e-6f64..1.0) {
            let params0 = Params::new(n, 2.0).unwrap();
            let p = params0.p_critical() + 10.0 * frac;
            let params = Params::new(n, p).unwrap();
            let e = compute_exponents(&params);
            let m = e.m.unwrap();
            let ident = m * m * e.mu * (params.nf() - 2.0 - e.mu);
            prop_assert!((ident - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn spiral_always_below_dimension_eleven(n in 3u32..=10, frac in 1e-6f64..1.0) {
            let params0 = Params::new(n, 2.0).unwrap();
            let p = params0.p_critical() + 30.0 * frac;
            let regime = classify(&Params::new(n, p).unwrap());
            prop_assert!(regime.spiral);
        }

        #[test]
        fn round_trip_sphere_stereo(n in 3u32..=12, theta in 1e-6f64..3.1, val in -5.0f64..5.0, der in -5.0f64..5.0) {
            let (r, v, dv) = stereo_point_from_sphere(n, theta, val, der);
            let (theta2, val2, der2) = sphere_point_from_stereo(n, r, v, dv);
            prop_assert!((theta2 - theta).abs() <= 1e-12 * theta.max(1.0));
            prop_assert!((val2 - val).abs() <= 1e-12 * val.abs().max(1.0));
            prop_assert!((der2 - der).abs() <= 1e-12 * der.abs().max(1.0));
        }

        #[test]
        fn cap_b1_increasing_for_negative_t(t1 in -300.0f64..-0.01, scale in 0.01f64..0.99) {
            let params = Params::new(3, 7.0).unwrap();
            let e = compute_exponents(&params);
            let t2 = t1 * scale; // t1 < t2 < 0
            let (_, b1a) = cap_coefficients(t1, &e, 3).unwrap();
            let (_, b1b) = cap_coefficients(t2, &e, 3).unwrap();
            prop_assert!(b1a < b1b || (b1a == 0.0 && b1b == 0.0));
        }
    }
}
