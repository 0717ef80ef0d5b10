//! Test-only helpers. Not part of the public API.

/// Double-double (~106-bit) arithmetic used as an independent high-precision
/// oracle in unit tests. Only the handful of operations the oracles need.
pub mod dd {
    /// Unevaluated sum hi + lo with |lo| <= ulp(hi)/2.
    #[derive(Debug, Clone, Copy)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        (s, err)
    }

    fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let err = b - (s - a);
        (s, err)
    }

    fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        let err = a.mul_add(b, -p);
        (p, err)
    }

    impl From<f64> for Dd {
        fn from(x: f64) -> Self {
            Dd { hi: x, lo: 0.0 }
        }
    }

    impl Dd {
        pub const LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.3190468138462996e-17 };

        pub fn to_f64(self) -> f64 {
            self.hi + self.lo
        }

        /// exp(x) by range reduction x = k ln2 + r and a Taylor series in r.
        pub fn exp(self) -> Dd {
            let k = (self.hi / Dd::LN2.hi).round();
            let r = self - Dd::LN2 * Dd::from(k);
            let mut sum = Dd::from(1.0);
            let mut term = Dd::from(1.0);
            for i in 1..40 {
                term = term * r / Dd::from(i as f64);
                sum = sum + term;
                if term.hi.abs() < 1e-40 * sum.hi.abs() {
                    break;
                }
            }
            let scale = 2f64.powi(k as i32);
            Dd { hi: sum.hi * scale, lo: sum.lo * scale }
        }

        /// ln(x) by a Newton correction of the f64 logarithm.
        pub fn ln(self) -> Dd {
            assert!(self.hi > 0.0);
            let mut y = Dd::from(self.hi.ln());
            for _ in 0..3 {
                // y += x e^{-y} - 1
                let e = (Dd::from(0.0) - y).exp();
                y = y + self * e - Dd::from(1.0);
            }
            y
        }

        pub fn pow(self, s: Dd) -> Dd {
            (self.ln() * s).exp()
        }

        /// sin(x) for |x| < 1 by Taylor series.
        pub fn sin_small(self) -> Dd {
            assert!(self.hi.abs() < 1.0);
            let x2 = self * self;
            let mut term = self;
            let mut sum = self;
            let mut k = 1.0f64;
            for _ in 0..25 {
                term = Dd::from(0.0) - term * x2 / Dd::from((k + 1.0) * (k + 2.0));
                sum = sum + term;
                k += 2.0;
                if term.hi.abs() < 1e-40 * sum.hi.abs().max(1e-300) {
                    break;
                }
            }
            sum
        }

        /// cos(x) for |x| < 1 by Taylor series.
        pub fn cos_small(self) -> Dd {
            assert!(self.hi.abs() < 1.0);
            let x2 = self * self;
            let mut term = Dd::from(1.0);
            let mut sum = Dd::from(1.0);
            let mut k = 0.0f64;
            for _ in 0..25 {
                term = Dd::from(0.0) - term * x2 / Dd::from((k + 1.0) * (k + 2.0));
                sum = sum + term;
                k += 2.0;
                if term.hi.abs() < 1e-40 * sum.hi.abs() {
                    break;
                }
            }
            sum
        }

        pub fn tan_small(self) -> Dd {
            self.sin_small() / self.cos_small()
        }
    }

    impl std::ops::Add for Dd {
        type Output = Dd;
        fn add(self, rhs: Dd) -> Dd {
            let (s, e) = two_sum(self.hi, rhs.hi);
            let e = e + self.lo + rhs.lo;
            let (hi, lo) = quick_two_sum(s, e);
            Dd { hi, lo }
        }
    }

    impl std::ops::Sub for Dd {
        type Output = Dd;
        fn sub(self, rhs: Dd) -> Dd {
            self + Dd { hi: -rhs.hi, lo: -rhs.lo }
        }
    }

    impl std::ops::Mul for Dd {
        type Output = Dd;
        fn mul(self, rhs: Dd) -> Dd {
            let (p, e) = two_prod(self.hi, rhs.hi);
            let e = e + self.hi * rhs.lo + self.lo * rhs.hi;
            let (hi, lo) = quick_two_sum(p, e);
            Dd { hi, lo }
        }
    }

    impl std::ops::Div for Dd {
        type Output = Dd;
        fn div(self, rhs: Dd) -> Dd {
            let q1 = self.hi / rhs.hi;
            let r = self - rhs * Dd::from(q1);
            let q2 = r.hi / rhs.hi;
            let r2 = r - rhs * Dd::from(q2);
            let q3 = r2.hi / rhs.hi;
            let (hi, lo) = quick_two_sum(q1, q2);
            Dd { hi, lo } + Dd::from(q3)
        }
    }

    #[cfg(test)]
    mod tests {
        use super::Dd;

        #[test]
        fn dd_basics() {
            let x = Dd::from(2.0).ln();
            assert!((x.to_f64() - std::f64::consts::LN_2).abs() < 1e-16);
            let y = Dd::from(1.0).exp();
            assert!((y.to_f64() - std::f64::consts::E).abs() < 1e-15);
            // (2/9)^{1/6} round trip through pow
            let a = (Dd::from(2.0) / Dd::from(9.0)).pow(Dd::from(1.0) / Dd::from(6.0));
            let a6 = a.pow(Dd::from(6.0));
            assert!((a6.to_f64() - 2.0 / 9.0).abs() < 1e-25);
            let s = Dd::from(0.5).sin_small();
            assert!((s.to_f64() - 0.5f64.sin()).abs() < 1e-16);
            let c = Dd::from(0.5).cos_small();
            assert!((c.to_f64() - 0.5f64.cos()).abs() < 1e-16);
        }
    }
}
