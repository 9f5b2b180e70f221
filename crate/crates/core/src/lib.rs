//! Quasi-Lie scheme toolkit for second-order Gambier equations.

// `!(a <= b)` is used on purpose so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(
    clippy::should_implement_trait,
    clippy::redundant_guards,
    clippy::needless_range_loop
)]

pub mod invariants;
pub mod jet;
pub mod models;
pub mod odeint;
pub mod scheme;
pub mod superpose;
pub mod symvf;
pub mod tfun;
pub mod transforms;
pub mod verify;
