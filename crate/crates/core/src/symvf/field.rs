use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_rational::BigRational;
use num_traits::{One, Signed};

use super::poly::{fmt_coeff_monomial, var_names, LaurentPoly, Monomial};

/// Polynomial vector field `sum_i comps[i] d/du_i` on an `n`-variable space.
///
/// The plane case (`x`, `v`) is the one used for Gambier fields; the
/// three-variable case carries the linear system `(y, v_y, a_y)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VectorField {
    comps: Vec<LaurentPoly>,
}

/// A field on the punctured plane `(x, v)`, `x != 0`.
pub type PlaneVectorField = VectorField;

impl VectorField {
    pub fn zero(nvars: usize) -> Self {
        VectorField {
            comps: (0..nvars).map(|_| LaurentPoly::zero(nvars)).collect(),
        }
    }

    pub fn from_components(comps: Vec<LaurentPoly>) -> Self {
        let n = comps.len();
        assert!(
            comps.iter().all(|c| c.nvars() == n),
            "component arity mismatch"
        );
        VectorField { comps }
    }

    /// `px d/dx + pv d/dv`.
    pub fn plane(px: LaurentPoly, pv: LaurentPoly) -> Self {
        Self::from_components(vec![px, pv])
    }

    /// Single-term plane field `c x^i v^j d/d(var)`.
    pub fn plane_mono(var: usize, c: BigRational, xexp: i32, vexp: i32) -> Self {
        let mut f = VectorField::zero(2);
        f.comps[var] = LaurentPoly::plane_term(c, xexp, vexp);
        f
    }

    pub fn nvars(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, i: usize) -> &LaurentPoly {
        &self.comps[i]
    }

    pub fn components(&self) -> &[LaurentPoly] {
        &self.comps
    }

    pub fn px(&self) -> &LaurentPoly {
        &self.comps[0]
    }

    pub fn pv(&self) -> &LaurentPoly {
        &self.comps[1]
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(LaurentPoly::is_zero)
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        VectorField {
            comps: self.comps.iter().map(|p| p.scale(c)).collect(),
        }
    }

    /// Directional derivative of a function along the field.
    pub fn apply(&self, f: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::zero(self.nvars());
        for (k, ck) in self.comps.iter().enumerate() {
            if ck.is_zero() {
                continue;
            }
            let d = f.partial(k);
            if !d.is_zero() {
                out = &out + &(ck * &d);
            }
        }
        out
    }

    /// Numeric value of the field at a point.
    pub fn eval_f64(&self, point: &[f64]) -> Vec<f64> {
        self.comps.iter().map(|p| p.eval_f64(point)).collect()
    }

    /// `(component index, monomial, coefficient)` in canonical order.
    pub fn coordinates(&self) -> impl Iterator<Item = (usize, &Monomial, &BigRational)> {
        self.comps
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.terms().map(move |(m, c)| (i, m, c)))
    }
}

/// `[A, B]` computed componentwise: `[A,B]^i = A(B^i) - B(A^i)`.
pub fn lie_bracket(a: &VectorField, b: &VectorField) -> VectorField {
    assert_eq!(a.nvars(), b.nvars(), "fields live on different spaces");
    let comps = (0..a.nvars())
        .map(|i| &a.apply(&b.comps[i]) - &b.apply(&a.comps[i]))
        .collect();
    VectorField { comps }
}

/// `ad_A^j B = [A, [A, ..., [A, B]...]]` with `j` applications.
pub fn ad_power(a: &VectorField, b: &VectorField, j: u32) -> VectorField {
    assert!(j >= 1, "ad_power needs j >= 1");
    (0..j).fold(b.clone(), |acc, _| lie_bracket(a, &acc))
}

/// Exact linear combination `sum c_i F_i`.
pub fn combination<'a, I>(nvars: usize, terms: I) -> VectorField
where
    I: IntoIterator<Item = (BigRational, &'a VectorField)>,
{
    terms
        .into_iter()
        .fold(VectorField::zero(nvars), |acc, (c, f)| &acc + &f.scale(&c))
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        assert_eq!(self.nvars(), rhs.nvars());
        VectorField {
            comps: self
                .comps
                .iter()
                .zip(&rhs.comps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        assert_eq!(self.nvars(), rhs.nvars());
        VectorField {
            comps: self
                .comps
                .iter()
                .zip(&rhs.comps)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &VectorField {
    type Output = VectorField;
    fn neg(self) -> VectorField {
        VectorField {
            comps: self.comps.iter().map(|p| -p).collect(),
        }
    }
}

/// Prints a sum of `c*x^i*v^j d/dx` terms, components in variable order,
/// monomials in canonical order, e.g. `v^2/x d/dv`.
impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let names = var_names(self.nvars());
        let mut first = true;
        for (i, m, c) in self.coordinates() {
            let constant = m.exps().iter().all(|&e| e == 0);
            let piece = if constant && c.abs().is_one() {
                String::new()
            } else {
                format!("{} ", fmt_coeff_monomial(&c.abs(), m, &names))
            };
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else {
                write!(f, " {sign} ")?;
            }
            write!(f, "{piece}d/d{}", names[i])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::poly::{int, rat};
    use super::*;

    fn y3() -> VectorField {
        VectorField::plane_mono(1, int(1), 1, 1)
    }

    fn y6() -> VectorField {
        VectorField::plane_mono(1, int(1), 3, 0)
    }

    #[test]
    fn bracket_is_antisymmetric_on_sample() {
        let a = &VectorField::plane_mono(0, int(1), 0, 1)
            + &VectorField::plane_mono(1, rat(3, 2), -1, 2);
        let b = y3();
        let ab = lie_bracket(&a, &b);
        let ba = lie_bracket(&b, &a);
        assert!((&ab + &ba).is_zero());
        assert!(lie_bracket(&a, &a).is_zero());
    }

    #[test]
    fn ad_power_of_y3_on_y6() {
        // [Y3, Y6] = -x^4 d/dv; second application gives +x^5 d/dv.
        assert_eq!(
            ad_power(&y3(), &y6(), 1),
            VectorField::plane_mono(1, int(-1), 4, 0)
        );
        assert_eq!(
            ad_power(&y3(), &y6(), 2),
            VectorField::plane_mono(1, int(1), 5, 0)
        );
    }

    #[test]
    fn printer_format() {
        let y2 = VectorField::plane_mono(1, int(1), -1, 2);
        assert_eq!(y2.to_string(), "v^2/x d/dv");
        let y9 = VectorField::plane_mono(1, int(1), 0, 0);
        assert_eq!(y9.to_string(), "d/dv");
        let f = &VectorField::plane_mono(0, int(1), 0, 1)
            + &VectorField::plane_mono(1, rat(-3, 2), 1, 0);
        assert_eq!(f.to_string(), "v d/dx - 3/2*x d/dv");
        let g = VectorField::plane_mono(1, int(-2), 0, 0);
        assert_eq!(g.to_string(), "-2 d/dv");
        assert_eq!(VectorField::zero(2).to_string(), "0");
    }
}
