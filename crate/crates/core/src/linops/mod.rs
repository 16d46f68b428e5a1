//! Structured linear algebra: sparse and banded matrices, the Sherman–Woodbury
//! inversion routine, the proximal metric `H`, and the per-strategy solvers
//! for `L(u) = B H⁻¹ Bᵀ + Aᵀ block(u)⁻¹ A`.

mod banded;
mod csr;
mod lop;
mod metric;
mod structured;
mod swinv;

use thiserror::Error;

pub use banded::{BandLdl, SymBanded};
pub use csr::Csr;
pub(crate) use lop::pattern;
pub use lop::{
    build_l, build_l_with, dense_atxa, dense_fallback_count, dense_l, DenseSolve, LOperator,
    MAX_BAND, MAX_BORDER,
};
pub use metric::{DplrMetric, Metric};
pub use structured::StructuredMatrix;
pub use swinv::{swinv, DiagSolve, Dplr, Middle, SwTriple};

use crate::cones::ConeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinopsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular {0}")]
    Singular(String),
    #[error("not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("strategy does not fit the operator: {0}")]
    Strategy(String),
    #[error(transparent)]
    Cone(#[from] ConeError),
}

/// An operator that can solve linear systems with itself.
pub trait SolveOp {
    fn dim(&self) -> usize;
    fn solve(&self, b: &[f64]) -> Vec<f64>;
}
