//! Exact span membership and bounded bracket closure.
//!
//! Fields are flattened to sparse coordinate vectors over the keys
//! `(component, monomial)`. Membership is decided by fraction-free
//! (Bareiss) elimination on an integer matrix whose rows are the
//! coordinate rows of the generators, each row scaled by the lcm of its
//! denominators.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::field::{lie_bracket, VectorField};
use super::poly::Monomial;

/// Coordinates of a field relative to an ordered generator list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordVector {
    pub coords: Vec<BigRational>,
}

impl CoordVector {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(super::poly::rat_to_f64).collect()
    }
}

type Key = (usize, Monomial);

fn keys_of<'a>(fields: impl IntoIterator<Item = &'a VectorField>) -> BTreeMap<Key, usize> {
    let mut keys = BTreeMap::new();
    for f in fields {
        for (i, m, _) in f.coordinates() {
            keys.entry((i, m.clone())).or_insert(0);
        }
    }
    for (n, slot) in keys.values_mut().enumerate() {
        *slot = n;
    }
    keys
}

/// Builds the integer system whose rows are the coordinate equations
/// `sum_j c_j gens_j[key] = target[key]`, one row per key, each row cleared
/// of denominators. The last column holds the right-hand side.
fn integer_system(target: &VectorField, gens: &[VectorField]) -> Vec<Vec<BigInt>> {
    let keys = keys_of(gens.iter().chain(std::iter::once(target)));
    let ncols = gens.len() + 1;
    let mut rows: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); ncols]; keys.len()];
    for (j, g) in gens.iter().enumerate() {
        for (i, m, c) in g.coordinates() {
            rows[keys[&(i, m.clone())]][j] = c.clone();
        }
    }
    for (i, m, c) in target.coordinates() {
        rows[keys[&(i, m.clone())]][ncols - 1] = c.clone();
    }
    rows.into_iter()
        .map(|row| {
            let lcm = row.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
            row.into_iter()
                .map(|r| (r * BigRational::from_integer(lcm.clone())).to_integer())
                .collect()
        })
        .collect()
}

/// Bareiss elimination in place. Returns the pivot columns of the
/// leading `nvars` columns (the right-hand side column is never a pivot
/// candidate, so an inconsistent row shows up as a non-zero rhs on a
/// row with no pivot).
fn bareiss(m: &mut [Vec<BigInt>], nvars: usize) -> Vec<usize> {
    let nrows = m.len();
    let mut pivots = Vec::new();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..nvars {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        for i in (r + 1)..nrows {
            for k in (c + 1)..m[i].len() {
                let v = &m[r][c] * &m[i][k] - &m[i][c] * &m[r][k];
                m[i][k] = v / &prev;
            }
            m[i][c] = BigInt::zero();
        }
        // Columns left of `c` below the pivot are already zero; keep the
        // Bareiss divisor chain consistent.
        prev = m[r][c].clone();
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Exact coordinates of `target` in the rational span of `gens`, or `None`
/// if it is not in the span. With dependent generators the free
/// coordinates are set to zero.
pub fn coords_in_span(target: &VectorField, gens: &[VectorField]) -> Option<CoordVector> {
    assert!(
        !gens.is_empty(),
        "coords_in_span needs at least one generator"
    );
    let nvars = gens.len();
    let mut m = integer_system(target, gens);
    let pivots = bareiss(&mut m, nvars);
    let rank = pivots.len();
    if m.iter().skip(rank).any(|row| !row[nvars].is_zero()) {
        return None;
    }
    let mut x = vec![BigRational::zero(); nvars];
    for (r, &c) in pivots.iter().enumerate().rev() {
        let mut acc = BigRational::from_integer(m[r][nvars].clone());
        for k in (c + 1)..nvars {
            if !x[k].is_zero() {
                acc -= BigRational::from_integer(m[r][k].clone()) * &x[k];
            }
        }
        x[c] = acc / BigRational::from_integer(m[r][c].clone());
    }
    Some(CoordVector { coords: x })
}

/// Rank of a family of fields over the rationals.
pub fn rank(fields: &[VectorField]) -> usize {
    if fields.is_empty() {
        return 0;
    }
    let zero = VectorField::zero(fields[0].nvars());
    let mut m = integer_system(&zero, fields);
    bareiss(&mut m, fields.len()).len()
}

pub fn is_independent(fields: &[VectorField]) -> bool {
    rank(fields) == fields.len()
}

/// Outcome of [`bracket_closure`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClosureReport {
    Closed {
        dimension: usize,
        #[serde(serialize_with = "ser_fields")]
        basis: Vec<VectorField>,
    },
    CapExceeded {
        dimension: usize,
        cap: usize,
    },
}

fn ser_fields<S: serde::Serializer>(fields: &[VectorField], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(fields.len()))?;
    for f in fields {
        seq.serialize_element(&f.to_string())?;
    }
    seq.end()
}

impl ClosureReport {
    pub fn dimension(&self) -> usize {
        match self {
            ClosureReport::Closed { dimension, .. }
            | ClosureReport::CapExceeded { dimension, .. } => *dimension,
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, ClosureReport::Closed { .. })
    }
}

/// Adjoins brackets not in the current span until the span is closed under
/// brackets or its dimension exceeds `dim_cap`.
pub fn bracket_closure(gens: &[VectorField], dim_cap: usize) -> ClosureReport {
    assert!(
        dim_cap >= gens.len(),
        "dim_cap must be at least the number of generators"
    );
    let mut basis: Vec<VectorField> = Vec::new();
    for g in gens {
        if basis.is_empty() && g.is_zero() {
            continue;
        }
        if basis.is_empty() || coords_in_span(g, &basis).is_none() {
            basis.push(g.clone());
        }
    }
    // Pairs (i, j) with i < j already bracketed.
    let mut done = 0usize;
    loop {
        let n = basis.len();
        if n > dim_cap {
            return ClosureReport::CapExceeded {
                dimension: n,
                cap: dim_cap,
            };
        }
        if done == n {
            return ClosureReport::Closed {
                dimension: n,
                basis,
            };
        }
        // Bracket the new element `done` against every earlier one.
        let j = done;
        for i in 0..j {
            let b = lie_bracket(&basis[i], &basis[j]);
            if b.is_zero() || coords_in_span(&b, &basis).is_some() {
                continue;
            }
            basis.push(b);
            if basis.len() > dim_cap {
                return ClosureReport::CapExceeded {
                    dimension: basis.len(),
                    cap: dim_cap,
                };
            }
        }
        done += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::super::poly::{int, rat};
    use super::*;

    #[test]
    fn member_of_own_span() {
        let y1 = VectorField::plane_mono(0, int(1), 0, 1);
        let c = coords_in_span(&y1, std::slice::from_ref(&y1)).unwrap();
        assert_eq!(c.coords, vec![int(1)]);
    }

    #[test]
    fn rational_combination_recovered() {
        let a = VectorField::plane_mono(1, int(1), 1, 0);
        let b = VectorField::plane_mono(1, int(1), -1, 2);
        let target = &a.scale(&rat(2, 3)) - &b.scale(&rat(5, 7));
        let c = coords_in_span(&target, &[a, b]).unwrap();
        assert_eq!(c.coords, vec![rat(2, 3), rat(-5, 7)]);
    }

    #[test]
    fn outside_span_is_none() {
        let a = VectorField::plane_mono(1, int(1), 1, 0);
        let b = VectorField::plane_mono(1, int(1), 2, 0);
        assert!(coords_in_span(&b, &[a]).is_none());
    }

    #[test]
    fn zero_field_has_zero_coords() {
        let a = VectorField::plane_mono(1, int(3), 1, 0);
        let c = coords_in_span(&VectorField::zero(2), &[a]).unwrap();
        assert_eq!(c.coords, vec![int(0)]);
    }

    #[test]
    fn rank_detects_dependence() {
        let a = VectorField::plane_mono(1, int(1), 1, 0);
        let b = a.scale(&rat(-4, 9));
        assert_eq!(rank(&[a.clone(), b]), 1);
        assert!(is_independent(&[
            a,
            VectorField::plane_mono(0, int(1), 1, 0)
        ]));
    }
}
