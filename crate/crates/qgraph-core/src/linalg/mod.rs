//! Sparse direct linear algebra for the discretized operators.
//!
//! Everything here is deterministic: compressed-column storage with sorted
//! row indices, a left-looking sparse LU with partial pivoting (ties broken
//! by smallest row index), and a deflated shift-invert iteration for interior
//! eigenvalues. Factorizations remember the identity and version of the
//! matrix they came from and refuse to solve against anything else, so a
//! factorization can never silently outlive a matrix update.

pub mod eigs;
pub mod lu;
pub mod sparse;

pub use eigs::eigs_shift_invert;
pub use lu::Factorization;
pub use sparse::{Scalar, SparseMatrix};

use thiserror::Error;

/// Errors from sparse construction, factorization and eigensolves.
#[derive(Debug, Error, PartialEq)]
pub enum LinAlgError {
    #[error("entry ({row}, {col}) is outside a {nrows}x{ncols} matrix")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrices do not share a sparsity pattern")]
    PatternMismatch,
    #[error("matrix has no stored diagonal entry in column {col}")]
    MissingDiagonal { col: usize },
    #[error("matrix is singular: no usable pivot in column {col}")]
    Singular { col: usize },
    #[error("factorization is stale: the matrix changed (or is not the factored one)")]
    StaleFactorization,
    #[error("eigenvalue count k = {k} must satisfy 1 <= k <= n/4 = {max} (n = {n})")]
    InvalidEigCount { k: usize, n: usize, max: usize },
    #[error("eigenpair iteration stalled at residual {residual:.3e} (tolerance {tolerance:.3e})")]
    NotConverged { residual: f64, tolerance: f64 },
    #[error("iteration stalled on a complex conjugate pair near {re:.6e} ± {im:.6e}i")]
    ComplexPair { re: f64, im: f64 },
}
