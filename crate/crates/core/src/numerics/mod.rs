//! Linear-algebra substrate: dense and compressed-row matrices, direct
//! factorizations, bordered solves for singular symmetric systems, conjugate
//! gradients and Lanczos spectrum estimates from CG coefficients.

mod bordered;
mod cg;
mod dense;
mod eigen;
mod lanczos;
mod skyline;
mod sparse;
pub mod vector;

pub use bordered::{orthogonality_defect, solve_bordered, BorderedFactorization, BorderedSystem};
pub use cg::{cg_solve, CgError, CgHistory, CgOptions, CgOutcome};
pub use dense::{solve_dense, Cholesky, DenseMatrix, Lu};
pub use eigen::{generalized_eigenvalues, null_space, numerical_rank, symmetric_eigenvalues};
pub use lanczos::{lanczos_condition_estimate, lanczos_tridiagonal, ConditionEstimate};
pub use skyline::SkylineCholesky;
pub use sparse::{SparseMatrix, TripletBuilder};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix: pivot {pivot:e} at step {step} below tolerance {tolerance:e}")]
    SingularMatrix { step: usize, pivot: f64, tolerance: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("singular bordered system: {0}")]
    SingularBorderedSystem(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("insufficient CG history: {0} iterations recorded")]
    InsufficientHistory(usize),
}

pub type Result<T> = std::result::Result<T, NumericsError>;
