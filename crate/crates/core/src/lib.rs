//! Exact symbolic analysis of Pfaffian fibrations in coordinates.
//!
//! Everything is computed over the field of rational functions of chart
//! coordinates with arbitrary-precision rational coefficients, so all rank,
//! kernel and involutivity verdicts are exact and reproducible.

pub mod error;
pub mod expr;
pub mod exterior;
pub mod fibration;
pub mod jets;
pub mod linalg;
pub(crate) mod par;
pub mod relalg;
pub mod symmetry;
pub mod tableau;

pub use error::Error;
pub use expr::{Chart, ChartRef, Coordinate, Expr, Point};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
