use num_complex::Complex;

use super::{GeneratorBasis, PoolError, Result};
use crate::linalg::{
    degeneracy_threshold, divided_differences, expm_i_from_eig, hermitian_eig, singular_values, ComplexMatrix,
    EigenDecomposition, Matrix,
};
use crate::Scalar;

/// Pooled representation `Φ(x)`, length `2d`, unit Euclidean norm.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolOutput<T> {
    pub phi: Vec<T>,
}

impl<T: Scalar> PoolOutput<T> {
    pub fn norm(&self) -> T {
        self.phi.iter().map(|&v| v * v).sum::<T>().sqrt()
    }
}

/// Everything [`pool_backward`] needs from the forward pass of one sample.
#[derive(Clone, Debug)]
pub struct PoolCache<T> {
    x: Vec<T>,
    h_norm: T,
    eig: EigenDecomposition<T>,
    u: ComplexMatrix<T>,
    psi: Vec<Complex<T>>,
}

impl<T: Scalar> PoolCache<T> {
    pub fn input(&self) -> &[T] {
        &self.x
    }

    pub fn eigen(&self) -> &EigenDecomposition<T> {
        &self.eig
    }

    pub fn unitary(&self) -> &ComplexMatrix<T> {
        &self.u
    }

    /// `ψ(x) = U(x)·|0⟩`.
    pub fn state(&self) -> &[Complex<T>] {
        &self.psi
    }

    pub fn d(&self) -> usize {
        self.psi.len()
    }

    /// Errors with [`PoolError::StaleCache`] unless `x` is bit-identical to
    /// the input this cache was built from.
    pub fn check_input(&self, x: &[T]) -> Result<()> {
        if self.x.as_slice() == x {
            Ok(())
        } else {
            Err(PoolError::StaleCache)
        }
    }

    /// `∂ψ/∂x_k = (d/dt exp(i(H + tG_k)))·|0⟩`, evaluated without forming the
    /// full directional derivative matrix: `V·(K_k·(V†e₀))`.
    fn state_derivative(
        &self,
        generator: &ComplexMatrix<T>,
        kernel: &[Complex<T>],
        ref_coeffs: &[Complex<T>],
    ) -> Vec<Complex<T>> {
        let v = &self.eig.eigenvectors;
        let d = self.d();
        let zero = Complex::new(T::zero(), T::zero());
        // Ẽ = V†·G·V
        let gv = generator * v;
        let mut e_tilde = vec![zero; d * d];
        for a in 0..d {
            for b in 0..d {
                e_tilde[a * d + b] = (0..d).fold(zero, |acc, r| acc + v[(r, a)].conj() * gv[(r, b)]);
            }
        }
        let inner: Vec<Complex<T>> = (0..d)
            .map(|a| {
                (0..d).fold(zero, |acc, b| {
                    acc + e_tilde[a * d + b] * kernel[a * d + b] * ref_coeffs[b]
                })
            })
            .collect();
        v.mul_vec(&inner)
    }

    fn kernel(&self) -> Vec<Complex<T>> {
        divided_differences(&self.eig.eigenvalues, degeneracy_threshold(self.h_norm))
    }

    /// `V†·e₀`, i.e. the conjugated first row of `V`.
    fn reference_coefficients(&self) -> Vec<Complex<T>> {
        let v = &self.eig.eigenvectors;
        (0..self.d()).map(|a| v[(0, a)].conj()).collect()
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(PoolError::LengthMismatch { expected, actual })
    }
}

/// `H(x) = Σ_k x_k·G_k`.
pub fn assemble_hamiltonian<T: Scalar>(
    x: &[T],
    basis: &GeneratorBasis<T>,
) -> Result<ComplexMatrix<T>> {
    check_len(basis.len(), x.len())?;
    let d = basis.d();
    let mut h = ComplexMatrix::zeros(d, d);
    for (&xk, g) in x.iter().zip(basis.generators()) {
        if xk == T::zero() {
            continue;
        }
        for i in 0..d {
            for j in 0..d {
                let entry = g[(i, j)];
                if entry.re != T::zero() || entry.im != T::zero() {
                    h[(i, j)] += entry * xk;
                }
            }
        }
    }
    Ok(h)
}

fn eig_tol<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

pub fn pool_forward<T: Scalar>(
    x: &[T],
    basis: &GeneratorBasis<T>,
) -> Result<(PoolOutput<T>, PoolCache<T>)> {
    let h = assemble_hamiltonian(x, basis)?;
    let h_norm = h.frobenius_norm();
    let eig = hermitian_eig(&h, eig_tol())?;
    let u = expm_i_from_eig(&eig);
    let psi = u.column(0);
    let phi = psi.iter().flat_map(|z| [z.re, z.im]).collect();
    let cache = PoolCache {
        x: x.to_vec(),
        h_norm,
        eig,
        u,
        psi,
    };
    Ok((PoolOutput { phi }, cache))
}

/// Vector-Jacobian product: `∂L/∂x` given `∂L/∂Φ = upstream`.
pub fn pool_backward<T: Scalar>(
    cache: &PoolCache<T>,
    upstream: &[T],
    basis: &GeneratorBasis<T>,
) -> Result<Vec<T>> {
    if cache.d() != basis.d() || cache.x.len() != basis.len() {
        return Err(PoolError::StaleCache);
    }
    check_len(2 * basis.d(), upstream.len())?;
    if upstream.iter().all(|&u| u == T::zero()) {
        return Ok(vec![T::zero(); basis.len()]);
    }
    let kernel = cache.kernel();
    let refs = cache.reference_coefficients();
    Ok(basis
        .generators()
        .iter()
        .map(|g| {
            let dpsi = cache.state_derivative(g, &kernel, &refs);
            dpsi.iter()
                .enumerate()
                .map(|(j, z)| upstream[2 * j] * z.re + upstream[2 * j + 1] * z.im)
                .sum()
        })
        .collect())
}

/// Full Jacobian `∂Φ/∂x`, shape `2d × (d²−1)`.
pub fn jacobian<T: Scalar>(x: &[T], basis: &GeneratorBasis<T>) -> Result<Matrix<T>> {
    let (_, cache) = pool_forward(x, basis)?;
    Ok(jacobian_from_cache(&cache, basis))
}

fn jacobian_from_cache<T: Scalar>(cache: &PoolCache<T>, basis: &GeneratorBasis<T>) -> Matrix<T> {
    let d = basis.d();
    let kernel = cache.kernel();
    let refs = cache.reference_coefficients();
    let mut j = Matrix::zeros(2 * d, basis.len());
    for (k, g) in basis.generators().iter().enumerate() {
        let dpsi = cache.state_derivative(g, &kernel, &refs);
        let col: Vec<T> = dpsi.iter().flat_map(|z| [z.re, z.im]).collect();
        j.set_column(k, &col);
    }
    j
}

/// Number of singular values above `tol·σ_max`.
pub fn numerical_rank<T: Scalar>(j: &Matrix<T>, tol: T) -> Result<usize> {
    let sigma = singular_values(j)?;
    let floor = T::min_positive_value().max(T::lit(1e-300));
    let sigma_max = sigma.first().copied().unwrap_or(T::zero()).max(floor);
    Ok(sigma.iter().filter(|&&s| s > tol * sigma_max).count())
}

/// The pooling map bound to its generator basis.
#[derive(Clone, Debug)]
pub struct SuPool<T> {
    basis: GeneratorBasis<T>,
}

impl<T: Scalar> SuPool<T> {
    pub fn new(d: usize) -> Result<Self> {
        Ok(Self {
            basis: GeneratorBasis::new(d)?,
        })
    }

    pub fn d(&self) -> usize {
        self.basis.d()
    }

    pub fn basis(&self) -> &GeneratorBasis<T> {
        &self.basis
    }

    /// `d² − 1`.
    pub fn input_width(&self) -> usize {
        self.basis.len()
    }

    /// `2d`.
    pub fn output_width(&self) -> usize {
        2 * self.basis.d()
    }

    pub fn forward(&self, x: &[T]) -> Result<(PoolOutput<T>, PoolCache<T>)> {
        pool_forward(x, &self.basis)
    }

    pub fn backward(&self, cache: &PoolCache<T>, upstream: &[T]) -> Result<Vec<T>> {
        pool_backward(cache, upstream, &self.basis)
    }

    pub fn jacobian(&self, x: &[T]) -> Result<Matrix<T>> {
        jacobian(x, &self.basis)
    }

    pub fn jacobian_from_cache(&self, cache: &PoolCache<T>) -> Matrix<T> {
        jacobian_from_cache(cache, &self.basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn basis(d: usize) -> GeneratorBasis<f64> {
        GeneratorBasis::new(d).unwrap()
    }

    fn phi(x: &[f64], b: &GeneratorBasis<f64>) -> Vec<f64> {
        pool_forward(x, b).unwrap().0.phi
    }

    #[test]
    fn hamiltonian_examples() {
        let b3 = basis(3);
        assert_eq!(assemble_hamiltonian(&[0.0; 8], &b3).unwrap().max_abs(), 0.0);

        let b2 = basis(2);
        let theta = 0.37;
        let h = assemble_hamiltonian(&[0.0, 0.0, theta], &b2).unwrap();
        assert_eq!(h, ComplexMatrix::from_real_diag(&[theta, -theta]));
    }

    #[test]
    fn hamiltonian_projection_recovers_coordinates() {
        let b = basis(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let h = assemble_hamiltonian(&x, &b).unwrap();
        assert!(h.is_hermitian(1e-12));
        assert!(h.trace().norm() < 1e-12);
        for (k, g) in b.generators().iter().enumerate() {
            let proj = (&h * g).trace() * 0.5;
            assert!((proj.re - x[k]).abs() < 1e-12 && proj.im.abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch() {
        let b = basis(3);
        assert_eq!(
            assemble_hamiltonian(&[0.0; 7], &b).unwrap_err(),
            PoolError::LengthMismatch { expected: 8, actual: 7 }
        );
        let (_, cache) = pool_forward(&[0.0; 8], &b).unwrap();
        assert!(matches!(
            pool_backward(&cache, &[0.0; 5], &b),
            Err(PoolError::LengthMismatch { expected: 6, actual: 5 })
        ));
    }

    #[test]
    fn forward_at_origin_is_reference_state() {
        assert_eq!(phi(&[0.0; 8], &basis(3)), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn forward_su2_quarter_turn() {
        // U = iσx, ψ = (0, i)
        let p = phi(&[FRAC_PI_2, 0.0, 0.0], &basis(2));
        let expected = [0.0, 0.0, 0.0, 1.0];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn forward_has_unit_norm() {
        let b = basis(3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (out, cache) = pool_forward(&x, &b).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
        let col0 = cache.unitary().column(0);
        assert_eq!(cache.state(), col0.as_slice());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let b = basis(3);
        let (_, cache) = pool_forward(&[0.3; 8], &b).unwrap();
        assert_eq!(pool_backward(&cache, &[0.0; 6], &b).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn stabilizer_gradients_vanish_at_origin() {
        let b = basis(3);
        let (_, cache) = pool_forward(&[0.0; 8], &b).unwrap();
        let g = pool_backward(&cache, &[0.4, -1.0, 2.0, 0.5, -0.3, 0.9], &b).unwrap();
        for k in b.stabilizer_indices() {
            assert_eq!(g[k], 0.0);
        }
    }

    #[test]
    fn backward_matches_central_difference() {
        let h = 1e-5;
        for d in [2usize, 3, 4] {
            let b = basis(d);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + d as u64);
            let x: Vec<f64> = (0..d * d - 1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let up: Vec<f64> = (0..2 * d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, cache) = pool_forward(&x, &b).unwrap();
            let g = pool_backward(&cache, &up, &b).unwrap();
            let loss = |x: &[f64]| -> f64 { phi(x, &b).iter().zip(&up).map(|(p, u)| p * u).sum() };
            let fd: Vec<f64> = (0..x.len())
                .map(|k| {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    (loss(&xp) - loss(&xm)) / (2.0 * h)
                })
                .collect();
            let err: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(err / scale <= 1e-6, "d={d} rel err {}", err / scale);
        }
    }

    #[test]
    fn jacobian_at_origin() {
        let b = basis(3);
        let j = jacobian(&[0.0; 8], &b).unwrap();
        for k in b.stabilizer_indices() {
            assert!(j.column(k).iter().all(|&v| v == 0.0));
        }
        assert_eq!(numerical_rank(&j, 1e-8).unwrap(), 5);
    }

    #[test]
    fn jacobian_is_tangent_and_consistent_with_backward() {
        let b = basis(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (out, cache) = pool_forward(&x, &b).unwrap();
        let j = jacobian(&x, &b).unwrap();
        let tangent = j.transpose_mul_vec(&out.phi);
        assert!(tangent.iter().all(|v| v.abs() < 1e-9));
        let up: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let vjp = pool_backward(&cache, &up, &b).unwrap();
        for (a, b) in vjp.iter().zip(j.transpose_mul_vec(&up)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn numerical_rank_trivial_cases() {
        assert_eq!(numerical_rank(&Matrix::<f64>::zeros(6, 8), 1e-8).unwrap(), 0);
        assert_eq!(numerical_rank(&Matrix::<f64>::identity(6), 1e-8).unwrap(), 6);
    }

    #[test]
    fn stale_cache_is_detected() {
        let b = basis(3);
        let (_, cache) = pool_forward(&[0.1; 8], &b).unwrap();
        assert!(cache.check_input(&[0.1; 8]).is_ok());
        assert_eq!(cache.check_input(&[0.2; 8]), Err(PoolError::StaleCache));
        let b2 = basis(2);
        assert_eq!(pool_backward(&cache, &[0.0; 4], &b2).unwrap_err(), PoolError::StaleCache);
    }
}
