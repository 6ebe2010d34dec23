//! Third-order Taylor jets.
//!
//! A [`Jet`] carries a value together with its first three derivatives with
//! respect to a single independent variable. Every geometry field and every
//! potential profile is evaluated on jets, so derivatives such as `∇f`, `Δf`
//! and `∇Δf` are exact up to rounding rather than finite-difference estimates.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet {
    pub const fn new(v: f64, d1: f64, d2: f64, d3: f64) -> Self {
        Self { v, d1, d2, d3 }
    }

    pub const fn constant(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0)
    }

    /// The independent variable evaluated at `x`.
    pub const fn variable(x: f64) -> Self {
        Self::new(x, 1.0, 0.0, 0.0)
    }

    /// Chain rule: `g(self)` where `g` and its first three derivatives at
    /// `self.v` are `[g0, g1, g2, g3]`.
    pub fn compose(self, g: [f64; 4]) -> Self {
        let [g0, g1, g2, g3] = g;
        let (u1, u2, u3) = (self.d1, self.d2, self.d3);
        Self {
            v: g0,
            d1: g1 * u1,
            d2: g2 * u1 * u1 + g1 * u2,
            d3: g3 * u1 * u1 * u1 + 3.0 * g2 * u1 * u2 + g1 * u3,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose([e, e, e, e])
    }

    pub fn ln(self) -> Self {
        let x = self.v;
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    pub fn powf(self, p: f64) -> Self {
        let x = self.v;
        if p == 0.0 {
            return Self::constant(1.0);
        }
        let g0 = x.powf(p);
        let g1 = p * x.powf(p - 1.0);
        let g2 = p * (p - 1.0) * x.powf(p - 2.0);
        let g3 = p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0);
        self.compose([g0, g1, g2, g3])
    }

    pub fn powi(self, n: i32) -> Self {
        let x = self.v;
        let p = n as f64;
        let g = |k: i32| -> f64 {
            if n - k < 0 && x == 0.0 {
                return f64::INFINITY;
            }
            x.powi(n - k)
        };
        self.compose([
            g(0),
            p * g(1),
            p * (p - 1.0) * g(2),
            p * (p - 1.0) * (p - 2.0) * g(3),
        ])
    }

    /// Jet power with a jet exponent, `self^e = exp(e ln self)`.
    pub fn pow(self, e: Jet) -> Self {
        if e.d1 == 0.0 && e.d2 == 0.0 && e.d3 == 0.0 {
            let p = e.v;
            if p.fract() == 0.0 && p.abs() < 64.0 {
                return self.powi(p as i32);
            }
            return self.powf(p);
        }
        (e * self.ln()).exp()
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(self) -> Self {
        let x = self.v;
        let x2 = x * x;
        self.compose([1.0 / x, -1.0 / x2, 2.0 / (x2 * x), -6.0 / (x2 * x2)])
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.v * k, self.d1 * k, self.d2 * k, self.d3 * k)
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2, self.d3 + o.d3)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2, self.d3 - o.d3)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet::new(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
            self.d3 * o.v + 3.0 * self.d2 * o.d1 + 3.0 * self.d1 * o.d2 + self.v * o.d3,
        )
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, o: f64) -> Jet {
        Jet::new(self.v + o, self.d1, self.d2, self.d3)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, o: f64) -> Jet {
        Jet::new(self.v - o, self.d1, self.d2, self.d3)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, o: f64) -> Jet {
        self.scale(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_matches_symbolic_derivatives() {
        // Reference derivatives of the same expression computed symbolically.
        let expected = [
            (0.7, [0.6220718681097183, 1.738666298041681, -0.3173636687657213, 8.2832818997857]),
            (1.3, [1.8130105138940862, 2.4406561764656027, 1.6926224205577878, -2.8844802160856977]),
            (2.9, [1.4110851859255025, -1.3178818150037042, 5.82967906231077, -8.406303621588311]),
        ];
        let g = |x: Jet| (x.powf(1.5) * x.sin()).exp() / (x * x + 1.0) + x.ln();
        for (x, want) in expected {
            let j = g(Jet::variable(x));
            for (got, want) in [j.v, j.d1, j.d2, j.d3].into_iter().zip(want) {
                assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn integer_powers_are_exact() {
        let j = Jet::variable(2.0).powi(3);
        assert_eq!(j, Jet::new(8.0, 12.0, 12.0, 6.0));
    }
}
