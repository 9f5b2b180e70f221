//! Second-order forward-mode jets: a value with its first two derivatives
//! along one parameter. Used for analytic residuals of solution formulas.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub fn new(v: f64, d1: f64, d2: f64) -> Self {
        Jet2 { v, d1, d2 }
    }

    pub fn constant(v: f64) -> Self {
        Jet2::new(v, 0.0, 0.0)
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        Jet2::new(
            r,
            -self.d1 * r * r,
            (2.0 * self.d1 * self.d1 * r - self.d2) * r * r,
        )
    }

    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        let d1 = self.d1 / (2.0 * s);
        Jet2::new(s, d1, (self.d2 - 2.0 * d1 * d1) / (2.0 * s))
    }

    pub fn powi(self, k: i32) -> Self {
        let f = self.v.powi(k);
        let kf = k as f64;
        let fp = kf * self.v.powi(k - 1);
        let fpp = kf * (kf - 1.0) * self.v.powi(k - 2);
        self.chain(f, fp, fpp)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    /// `g(self)` given `g`, `g'`, `g''` at `self.v`.
    pub fn chain(self, g: f64, gp: f64, gpp: f64) -> Self {
        Jet2::new(g, gp * self.d1, gpp * self.d1 * self.d1 + gp * self.d2)
    }

    /// Reparametrise: `self` is a jet in `s`, `s` is a jet in the new
    /// variable (with `s.v` ignored).
    pub fn reparam(self, s: Jet2) -> Self {
        Jet2::new(
            self.v,
            self.d1 * s.d1,
            self.d2 * s.d1 * s.d1 + self.d1 * s.d2,
        )
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2::new(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        )
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2::new(-self.v, -self.d1, -self.d2)
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        Jet2::new(self.v * c, self.d1 * c, self.d2 * c)
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, c: f64) -> Jet2 {
        Jet2::new(self.v + c, self.d1, self.d2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_and_sqrt_match_closed_forms() {
        // f(s) = sqrt(1 + s^2) / s at s = 0.8
        let s = Jet2::new(0.8, 1.0, 0.0);
        let f = (s * s + 1.0).sqrt() / s;
        let x: f64 = 0.8;
        let r = (1.0 + x * x).sqrt();
        let d1 = -1.0 / (x * x * r);
        let d2 = (2.0 + 3.0 * x * x) / (x.powi(3) * r.powi(3));
        assert!((f.v - r / x).abs() < 1e-14);
        assert!((f.d1 - d1).abs() < 1e-13);
        assert!((f.d2 - d2).abs() < 1e-12);
    }
}
