//! Dense complex linear algebra for small matrices.
//!
//! Everything here targets d up to a few dozen: Hermitian eigendecomposition
//! by cyclic Jacobi rotations, the unitary exponential `exp(iH)` built on top
//! of it, the exact directional derivative of that exponential
//! (Daleckii–Krein), and singular values for numerical rank.

mod eig;
mod expm;
mod matrix;
mod svd;

pub use eig::{hermitian_eig, EigenDecomposition, JACOBI_MAX_SWEEPS};
pub use expm::{
    degeneracy_threshold, dexpm_i_from_eig, dexpm_i_hermitian, expm_i_from_eig,
    expm_i_hermitian,
};
pub(crate) use expm::divided_differences;
pub use matrix::{ComplexMatrix, Matrix};
pub use num_complex::Complex;
pub use svd::{singular_values, singular_values_gram};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(String, String),

    #[error("matrix is not Hermitian (asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("Jacobi iteration did not converge in {sweeps} sweeps (off-diagonal mass {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("eigendecomposition residual {residual:e} exceeds tolerance {tol:e}")]
    Inaccurate { residual: f64, tol: f64 },

    #[error("empty matrix")]
    Empty,

    #[error("matrix too large: dimension {0} exceeds {1}")]
    TooLarge(usize, usize),

    #[error("non-finite entry in input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, LinalgError>;
