//! SU(d) unitary pooling for convolutional networks.
//!
//! A feature vector `x ∈ R^{d²−1}` is mapped to the Hermitian matrix
//! `H(x) = Σ x_k G_k` over the generalized Gell-Mann basis, exponentiated
//! to `U = exp(iH) ∈ SU(d)`, and applied to the reference state `|0⟩`. The
//! real and imaginary parts of `ψ = U|0⟩` form a unit vector of length
//! `2d`. The backward pass differentiates the matrix exponential exactly
//! through the eigendecomposition of `H`.
//!
//! Modules, bottom up:
//!
//! - [`linalg`]: dense complex matrices, Hermitian Jacobi eigensolver,
//!   `exp(iH)` and its directional derivative, singular values.
//! - [`supool`]: generator basis, the pooling map, its backward pass and
//!   Jacobian.
//! - [`nn`]: tensors, convolution, pooling, dense and ReLU layers, softmax
//!   cross-entropy, Adam, and the [`nn::Network`] container.
//! - [`zoo`]: the five benchmark architectures.
//! - [`data`]: the MSTF file format and a synthetic multispectral dataset.
//! - [`harness`]: training, metrics, multi-seed experiments, reports.
//! - [`verify`]: property suites over the pooling geometry and layer
//!   gradients.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the precisions the harness uses.

pub mod data;
pub mod harness;
pub mod linalg;
pub mod nn;
mod scalar;
pub mod supool;
pub mod verify;
pub mod zoo;

pub use scalar::Scalar;

/// Training precision.
pub type Network32 = nn::Network<f32>;
pub type Network64 = nn::Network<f64>;
pub type Tensor32 = nn::Tensor4<f32>;
pub type Tensor64 = nn::Tensor4<f64>;
/// Precision of the pooling map and its linear algebra.
pub type ComplexMatrix64 = linalg::ComplexMatrix<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type GeneratorBasis64 = supool::GeneratorBasis<f64>;
pub type SuPool64 = supool::SuPool<f64>;
