//! Quantitative equational reasoning over metric arities.

pub mod algebra;
pub mod error;
pub mod extreal;
pub mod freemodel;
pub mod kernel;
pub mod metric;
pub mod prover;
pub mod syntax;
pub mod theories;

pub use extreal::{ExtReal, Rational, INF};
