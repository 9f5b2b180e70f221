//! Golden bracket tables for `[Y_i, Y_j]` with `i` in `{4, 8, 11}`.
//!
//! The entries are transcribed as data, independently of the bracket
//! routine, so that [`check_tables`] is a genuine regression oracle.

use num_rational::BigRational;
use serde::Serialize;

use super::basis::y;
use super::field::{lie_bracket, VectorField};
use super::poly::int;

/// One table cell: `[Y_row, Y_col] = sum coef * Y_k`.
#[derive(Clone, Debug)]
pub struct GoldenEntry {
    pub row: u8,
    pub col: u8,
    pub terms: &'static [(i64, u8)],
}

const ROWS: [u8; 3] = [4, 8, 11];

/// Brackets against `Y1..Y11`.
const TABLE1: [[&[(i64, u8)]; 11]; 3] = [
    // Y4
    [
        &[(1, 1)],
        &[(1, 2)],
        &[],
        &[],
        &[],
        &[(-1, 6)],
        &[(-1, 7)],
        &[(-1, 8)],
        &[(-1, 9)],
        &[(-1, 10)],
        &[],
    ],
    // Y8
    [
        &[(1, 11), (-1, 4)],
        &[(2, 4)],
        &[(1, 7)],
        &[(1, 8)],
        &[(1, 9)],
        &[],
        &[],
        &[],
        &[],
        &[],
        &[(-1, 8)],
    ],
    // Y11
    [
        &[(-1, 1)],
        &[(-1, 2)],
        &[(1, 3)],
        &[],
        &[(-1, 5)],
        &[(3, 6)],
        &[(2, 7)],
        &[(1, 8)],
        &[],
        &[(-1, 10)],
        &[],
    ],
];

/// Brackets against `Y12..Y17`.
const TABLE2: [[&[(i64, u8)]; 6]; 3] = [
    // Y4
    [&[], &[], &[(1, 14)], &[], &[(-1, 16)], &[(1, 17)]],
    // Y8
    [
        &[(-1, 9)],
        &[(-1, 7)],
        &[(1, 13), (-1, 3)],
        &[(-1, 6)],
        &[],
        &[(2, 3)],
    ],
    // Y11
    [&[(-1, 12)], &[(1, 13)], &[], &[(2, 15)], &[(4, 16)], &[]],
];

pub fn table1() -> Vec<GoldenEntry> {
    let mut out = Vec::with_capacity(33);
    for (r, row) in ROWS.iter().enumerate() {
        for (c, terms) in TABLE1[r].iter().enumerate() {
            out.push(GoldenEntry {
                row: *row,
                col: c as u8 + 1,
                terms,
            });
        }
    }
    out
}

pub fn table2() -> Vec<GoldenEntry> {
    let mut out = Vec::with_capacity(18);
    for (r, row) in ROWS.iter().enumerate() {
        for (c, terms) in TABLE2[r].iter().enumerate() {
            out.push(GoldenEntry {
                row: *row,
                col: c as u8 + 12,
                terms,
            });
        }
    }
    out
}

impl GoldenEntry {
    pub fn expected(&self) -> VectorField {
        self.terms
            .iter()
            .fold(VectorField::zero(2), |acc, &(c, k)| {
                &acc + &y(k).scale(&int(c))
            })
    }

    pub fn computed(&self) -> VectorField {
        lie_bracket(&y(self.row), &y(self.col))
    }

    /// Textual form of the golden entry, e.g. `Y11 - Y4`.
    pub fn expected_text(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, &(c, k)) in self.terms.iter().enumerate() {
            let sign = if c < 0 { "-" } else { "+" };
            if i == 0 {
                if c < 0 {
                    s.push('-');
                }
            } else {
                s.push_str(&format!(" {sign} "));
            }
            if c.abs() != 1 {
                s.push_str(&c.abs().to_string());
            }
            s.push_str(&format!("Y{k}"));
        }
        s
    }
}

/// One row of a bracket-table report.
#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub bracket: String,
    pub expected: String,
    pub computed: String,
    pub matches: bool,
}

/// Recomputes every golden entry; returns the per-entry comparison.
pub fn check_tables() -> (Vec<TableRow>, Vec<TableRow>) {
    let run = |entries: Vec<GoldenEntry>| {
        entries
            .into_iter()
            .map(|e| {
                let computed = e.computed();
                TableRow {
                    bracket: format!("[Y{},Y{}]", e.row, e.col),
                    expected: e.expected_text(),
                    computed: computed.to_string(),
                    matches: computed == e.expected(),
                }
            })
            .collect()
    };
    (run(table1()), run(table2()))
}

/// Coefficient vector of a golden entry over `Y1..Y17` (used in reports).
pub fn entry_coefficients(e: &GoldenEntry) -> Vec<BigRational> {
    let mut v = vec![int(0); 17];
    for &(c, k) in e.terms {
        v[k as usize - 1] = int(c);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sizes() {
        assert_eq!(table1().len(), 33);
        assert_eq!(table2().len(), 18);
    }

    #[test]
    fn every_golden_entry_reproduces() {
        let (t1, t2) = check_tables();
        for row in t1.iter().chain(&t2) {
            assert!(
                row.matches,
                "{} expected {} got {}",
                row.bracket, row.expected, row.computed
            );
        }
    }

    #[test]
    fn entry_text() {
        let e = &table1()[11]; // [Y8, Y1]
        assert_eq!(e.expected_text(), "Y11 - Y4");
        assert_eq!(entry_coefficients(e)[10], int(1));
    }
}
