//! Sparse Laurent polynomials with exact rational coefficients.
//!
//! Variables are indexed `0..nvars`. Only variable 0 may carry a negative
//! exponent; every other exponent is non-negative. Terms are kept in a
//! `BTreeMap`, so the lexicographic order on exponent vectors is the
//! canonical order and structural equality is mathematical equality.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<i32>);

impl Monomial {
    /// Panics if any exponent other than the first is negative.
    pub fn new(exps: Vec<i32>) -> Self {
        assert!(
            exps.iter().skip(1).all(|&e| e >= 0),
            "only the first variable may carry a negative exponent: {exps:?}"
        );
        Monomial(exps)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    /// Plane monomial `x^xexp v^vexp`.
    pub fn plane(xexp: i32, vexp: i32) -> Self {
        Monomial::new(vec![xexp, vexp])
    }

    pub fn exps(&self) -> &[i32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

/// Canonical sparse polynomial; no zero coefficient is ever stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LaurentPoly {
    nvars: usize,
    terms: BTreeMap<Monomial, BigRational>,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl LaurentPoly {
    pub fn zero(nvars: usize) -> Self {
        LaurentPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        Self::term(c, Monomial::one(nvars))
    }

    pub fn term(c: BigRational, m: Monomial) -> Self {
        let mut p = LaurentPoly::zero(m.nvars());
        p.add_term(m, c);
        p
    }

    /// `c * x^i * v^j` in the plane.
    pub fn plane_term(c: BigRational, xexp: i32, vexp: i32) -> Self {
        Self::term(c, Monomial::plane(xexp, vexp))
    }

    /// The single variable `var` with coefficient one.
    pub fn var(nvars: usize, var: usize) -> Self {
        let mut e = vec![0; nvars];
        e[var] = 1;
        Self::term(BigRational::one(), Monomial::new(e))
    }

    pub fn from_terms<I>(nvars: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, BigRational)>,
    {
        let mut p = LaurentPoly::zero(nvars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        assert_eq!(m.nvars(), self.nvars, "monomial arity mismatch");
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
        }
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return LaurentPoly::zero(self.nvars);
        }
        LaurentPoly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    /// Exact partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> Self {
        let mut out = LaurentPoly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[var];
            if e == 0 {
                continue;
            }
            let mut exps = m.0.clone();
            exps[var] -= 1;
            out.add_term(Monomial(exps), c * int(e as i64));
        }
        out
    }

    /// Integer power with non-negative exponent.
    pub fn pow(&self, k: u32) -> Self {
        let mut acc = LaurentPoly::constant(self.nvars, BigRational::one());
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Evaluates at a real point (for numeric consumers).
    pub fn eval_f64(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mono: f64 = m.0.iter().zip(point).map(|(&e, &p)| p.powi(e)).product();
                rat_to_f64(c) * mono
            })
            .sum()
    }
}

pub fn rat_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Continued-fraction approximation of `x` with relative accuracy `tol`
/// (absolute below magnitude one).
pub fn rationalize(x: f64, tol: f64) -> BigRational {
    assert!(x.is_finite(), "cannot rationalize a non-finite value");
    let target = tol * x.abs().max(1.0);
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        let approx = BigRational::new(h1.clone(), k1.clone());
        if (rat_to_f64(&approx) - x).abs() <= target {
            return approx;
        }
        let frac = r - a;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
        if !r.is_finite() || r.abs() > 1e15 {
            break;
        }
    }
    BigRational::new(h1, k1)
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        self.scale(&-BigRational::one())
    }
}

impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

/// Names used by the plane printer; other arities fall back to `u0, u1, ...`.
pub(crate) fn var_names(nvars: usize) -> Vec<String> {
    match nvars {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "v".into()],
        3 => vec!["y".into(), "vy".into(), "ay".into()],
        n => (0..n).map(|i| format!("u{i}")).collect(),
    }
}

pub(crate) fn fmt_monomial(m: &Monomial, names: &[String]) -> String {
    let mut num = Vec::new();
    let mut den = Vec::new();
    for (e, name) in m.0.iter().zip(names) {
        match *e {
            0 => {}
            1 => num.push(name.clone()),
            -1 => den.push(name.clone()),
            e if e > 0 => num.push(format!("{name}^{e}")),
            e => den.push(format!("{name}^{}", -e)),
        }
    }
    let mut s = num.join("*");
    if !den.is_empty() {
        if s.is_empty() {
            s.push('1');
        }
        s.push('/');
        s.push_str(&den.join("/"));
    }
    s
}

pub(crate) fn fmt_coeff_monomial(c: &BigRational, m: &Monomial, names: &[String]) -> String {
    let mono = fmt_monomial(m, names);
    if mono.is_empty() {
        return c.to_string();
    }
    if c.is_one() {
        mono
    } else if (-c).is_one() {
        format!("-{mono}")
    } else {
        format!("{c}*{mono}")
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = var_names(self.nvars);
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let piece = fmt_coeff_monomial(&c.abs(), m, &names);
            if i == 0 {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else if c.is_negative() {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            write!(f, "{piece}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficients_are_dropped() {
        let mut p = LaurentPoly::plane_term(int(2), 1, 0);
        p.add_term(Monomial::plane(1, 0), int(-2));
        assert!(p.is_zero());
    }

    #[test]
    fn partial_of_laurent_term() {
        // d/dx (v^2/x) = -v^2/x^2
        let p = LaurentPoly::plane_term(int(1), -1, 2);
        assert_eq!(p.partial(0), LaurentPoly::plane_term(int(-1), -2, 2));
        assert_eq!(p.partial(1), LaurentPoly::plane_term(int(2), -1, 1));
        // constants differentiate to nothing
        assert!(LaurentPoly::constant(2, int(7)).partial(1).is_zero());
    }

    #[test]
    #[should_panic]
    fn negative_v_exponent_rejected() {
        let _ = Monomial::plane(0, -1);
    }

    #[test]
    fn rationalize_recovers_simple_fractions() {
        assert_eq!(rationalize(0.75, 1e-12), rat(3, 4));
        assert_eq!(rationalize(-1.0 / 3.0, 1e-12), rat(-1, 3));
        assert_eq!(rationalize(2.0, 1e-12), int(2));
        let pi = rationalize(std::f64::consts::PI, 1e-12);
        assert!((rat_to_f64(&pi) - std::f64::consts::PI).abs() <= 1e-11);
    }

    #[test]
    fn display_is_canonical() {
        let p =
            &LaurentPoly::plane_term(rat(3, 2), -1, 2) + &LaurentPoly::plane_term(int(-2), 3, 0);
        assert_eq!(p.to_string(), "3/2*v^2/x - 2*x^3");
    }
}
