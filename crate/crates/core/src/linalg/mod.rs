//! Dense and sparse symmetric kernels.

pub mod dense;
pub mod ldl;
pub mod mm;
pub mod ordering;
pub mod saddle;
pub mod sparse;

pub use dense::{
    dense_cholesky, dense_sym_eig, numerical_rank, pseudoinverse_psd, reduced_qr_rows, reduced_qr_rows_abs, DenseEig,
    DEFAULT_PINV_DROP_TOL, DEFAULT_QR_RANK_TOL,
};
pub use ldl::SparseLdl;
pub use saddle::{factor_saddle, DenseLdlt, SaddleSolver};
pub use sparse::{CsrMatrix, SymSparseMatrix};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("singular matrix (zero pivot at step {pivot})")]
    Singular { pivot: usize },
    #[error("all eigenvalues dropped; matrix is numerically zero")]
    ZeroMatrix,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Euclidean dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
