//! Named generators used throughout the crate.
//!
//! * `Y1..Y17`: the Gambier generators; `Y1..Y11` span `V_G` and
//!   `Y12..Y17` extend it to `V'_G`.
//! * `X1..X8`: the `sl(3, R)` algebra of the second-order Riccati family.
//! * `Z1..Z6`: the six-dimensional subalgebra reached from `X1`,
//!   `(X3 + X7)/2`, `(X8 - 2 X4)/4`.
//! * `W1..W4`: fields of the linear system on `(y, v_y, a_y)`.
//!
//! The Kummer–Schwarz algebra depends on a constant and is provided by
//! [`ks2_algebra`] rather than by identifier.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use thiserror::Error;

use super::field::VectorField;
use super::poly::{int, rat, LaurentPoly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisId {
    Y(u8),
    X(u8),
    Z(u8),
    W(u8),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown basis identifier `{0}`")]
pub struct UnknownBasis(pub String);

impl FromStr for BasisId {
    type Err = UnknownBasis;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UnknownBasis(s.to_string());
        let mut chars = s.chars();
        let family = chars.next().ok_or_else(err)?;
        let idx: u8 = chars.as_str().parse().map_err(|_| err())?;
        let (id, max) = match family {
            'Y' => (BasisId::Y(idx), 17),
            'X' => (BasisId::X(idx), 8),
            'Z' => (BasisId::Z(idx), 6),
            'W' => (BasisId::W(idx), 4),
            _ => return Err(err()),
        };
        if idx == 0 || idx > max {
            return Err(err());
        }
        Ok(id)
    }
}

impl fmt::Display for BasisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisId::Y(i) => write!(f, "Y{i}"),
            BasisId::X(i) => write!(f, "X{i}"),
            BasisId::Z(i) => write!(f, "Z{i}"),
            BasisId::W(i) => write!(f, "W{i}"),
        }
    }
}

fn dx(c: BigRational, i: i32, j: i32) -> VectorField {
    VectorField::plane_mono(0, c, i, j)
}

fn dv(c: BigRational, i: i32, j: i32) -> VectorField {
    VectorField::plane_mono(1, c, i, j)
}

fn y_field(i: u8) -> VectorField {
    let one = || int(1);
    match i {
        1 => dx(one(), 0, 1),
        2 => dv(one(), -1, 2),
        3 => dv(one(), 1, 1),
        4 => dv(one(), 0, 1),
        5 => dv(one(), -1, 1),
        6 => dv(one(), 3, 0),
        7 => dv(one(), 2, 0),
        8 => dv(one(), 1, 0),
        9 => dv(one(), 0, 0),
        10 => dv(one(), -1, 0),
        11 => dx(one(), 1, 0),
        12 => dx(one(), 0, 0),
        13 => dx(one(), 2, 0),
        14 => dx(one(), 1, 1),
        15 => dx(one(), 3, 0),
        16 => dv(one(), 4, 0),
        17 => dv(one(), 0, 2),
        _ => unreachable!("validated by BasisId parsing"),
    }
}

fn plane(px: &[(i64, i32, i32)], pv: &[(i64, i32, i32)]) -> VectorField {
    let poly = |terms: &[(i64, i32, i32)]| {
        terms.iter().fold(LaurentPoly::zero(2), |acc, &(c, i, j)| {
            &acc + &LaurentPoly::plane_term(int(c), i, j)
        })
    };
    VectorField::plane(poly(px), poly(pv))
}

fn x_field(i: u8) -> VectorField {
    match i {
        1 => plane(&[(1, 0, 1)], &[(-3, 1, 1), (-1, 3, 0)]),
        2 => plane(&[], &[(1, 0, 0)]),
        3 => plane(&[(-1, 0, 0)], &[(3, 1, 0)]),
        4 => plane(&[(1, 1, 0)], &[(-2, 2, 0)]),
        5 => plane(&[(1, 0, 1), (2, 2, 0)], &[(-1, 1, 1), (-3, 3, 0)]),
        6 => plane(&[(2, 1, 1), (2, 3, 0)], &[(2, 0, 2), (-2, 4, 0)]),
        7 => plane(&[(1, 0, 0)], &[(-1, 1, 0)]),
        8 => plane(&[(2, 1, 0)], &[(4, 0, 1)]),
        _ => unreachable!("validated by BasisId parsing"),
    }
}

fn z_field(i: u8) -> VectorField {
    match i {
        1 => x_field(1),
        2 => (&x_field(3) + &x_field(7)).scale(&rat(1, 2)),
        3 => (&x_field(8) - &x_field(4).scale(&int(2))).scale(&rat(1, 4)),
        4 => x_field(4),
        5 => x_field(5),
        6 => x_field(6),
        _ => unreachable!("validated by BasisId parsing"),
    }
}

fn w_field(i: u8) -> VectorField {
    // variables: 0 = y, 1 = v_y, 2 = a_y
    let var = |k: usize| LaurentPoly::var(3, k);
    let zero = || LaurentPoly::zero(3);
    let comps = match i {
        1 => vec![var(1), var(2), zero()],
        2 => vec![zero(), zero(), var(2)],
        3 => vec![zero(), var(2).scale(&int(2)), zero()],
        4 => vec![var(2).scale(&int(-2)), zero(), zero()],
        _ => unreachable!("validated by BasisId parsing"),
    };
    VectorField::from_components(comps)
}

/// The exact field for a named generator.
pub fn basis(id: BasisId) -> VectorField {
    match id {
        BasisId::Y(i) => y_field(i),
        BasisId::X(i) => x_field(i),
        BasisId::Z(i) => z_field(i),
        BasisId::W(i) => w_field(i),
    }
}

/// Looks up a generator by name (`"Y3"`, `"X8"`, ...).
pub fn basis_by_name(name: &str) -> Result<VectorField, UnknownBasis> {
    Ok(basis(name.parse()?))
}

/// `Y_i` for `i` in `1..=17`.
pub fn y(i: u8) -> VectorField {
    basis(BasisId::Y(i))
}

/// `Y1..Y11`, the generators of `V_G`.
pub fn v_g() -> Vec<VectorField> {
    (1..=11).map(y).collect()
}

/// `Y1..Y17`, the generators of `V'_G`.
pub fn v_g_extended() -> Vec<VectorField> {
    (1..=17).map(y).collect()
}

/// `Y4, Y8, Y11`.
pub fn w_g() -> Vec<VectorField> {
    vec![y(4), y(8), y(11)]
}

/// Kummer–Schwarz generators `2x d/dv`, `x d/dx + 2v d/dv`,
/// `v d/dx + (3/2 v^2/x - 2 c0 x^3) d/dv`.
pub fn ks2_algebra(c0: &BigRational) -> [VectorField; 3] {
    let x1 = dv(int(2), 1, 0);
    let x2 = &dx(int(1), 1, 0) + &dv(int(2), 0, 1);
    let x3 = &(&dx(int(1), 0, 1) + &dv(rat(3, 2), -1, 2)) + &dv(c0 * int(-2), 3, 0);
    [x1, x2, x3]
}

/// Abel scheme pair: `W = <d/dx, x d/dx>`, `V = <d/dx, x d/dx, x^2 d/dx, x^3 d/dx>`
/// on the line, represented as one-variable fields.
pub fn abel_pair() -> (Vec<VectorField>, Vec<VectorField>) {
    let f = |k: i32| {
        VectorField::from_components(vec![LaurentPoly::term(
            int(1),
            super::poly::Monomial::new(vec![k]),
        )])
    };
    (vec![f(0), f(1)], vec![f(0), f(1), f(2), f(3)])
}
