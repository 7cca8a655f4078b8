//! The SU(d) unitary pooling map.
//!
//! A real vector `x ∈ R^{d²−1}` is read as coordinates in su(d), exponentiated
//! to `U(x) = exp(i·Σ x_k G_k) ∈ SU(d)`, applied to the reference state `|0⟩`,
//! and the resulting state is flattened to `Φ(x) ∈ R^{2d}` as
//! `[Re ψ_0, Im ψ_0, Re ψ_1, Im ψ_1, …]`. `‖Φ(x)‖ = 1` always.
//!
//! The backward pass is exact: one Daleckii–Krein directional derivative per
//! generator, sharing a single eigendecomposition of `H(x)`.

mod basis;
mod pool;

pub use basis::{generator_basis, GeneratorBasis, GeneratorKind, MAX_DIM, MIN_DIM};
pub use pool::{
    assemble_hamiltonian, jacobian, numerical_rank, pool_backward, pool_forward, PoolCache,
    PoolOutput, SuPool,
};

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("su(d) dimension {0} outside supported range 2..=16")]
    UnsupportedDimension(usize),

    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("pool cache does not belong to this input")]
    StaleCache,

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, PoolError>;
