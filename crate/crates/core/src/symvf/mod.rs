//! Exact algebra of polynomial vector fields.
//!
//! Coefficients are arbitrary-precision rationals; nothing in this module
//! touches floating point except the explicit `eval_f64` helpers used by
//! numeric consumers.

mod basis;
mod field;
mod poly;
mod span;
pub mod tables;

pub use basis::{
    abel_pair, basis, basis_by_name, ks2_algebra, v_g, v_g_extended, w_g, y, BasisId, UnknownBasis,
};
pub use field::{ad_power, combination, lie_bracket, PlaneVectorField, VectorField};
pub use poly::{int, rat, rat_to_f64, rationalize, LaurentPoly, Monomial};
pub use span::{bracket_closure, coords_in_span, is_independent, rank, ClosureReport, CoordVector};
