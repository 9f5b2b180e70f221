//! Time-dependent coefficient functions.
//!
//! A [`TimeFn`] carries an expression and its symbolic derivative. Closed
//! forms come from the parser; functions defined by quadratures or ODE
//! solutions are expression leaves backed by a dense trajectory, so the
//! derivative is always exact in terms of the data that defines it.

mod expr;
mod parse;
mod timefn;

pub use expr::{Expr, Node};
pub use parse::{parse_expr, ParseError};
pub use timefn::{
    build_monotone, cumint, grid, integral_fn, MonotoneMap, OdeSystem, TfunError, TimeFn, CERT_GRID,
};

/// Symbolic derivative of an expression.
pub fn differentiate(e: &Expr) -> Expr {
    e.differentiate()
}
