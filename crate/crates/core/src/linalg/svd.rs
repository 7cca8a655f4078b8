use num_complex::Complex;

use super::{hermitian_eig, ComplexMatrix, LinalgError, Matrix, Result};
use crate::Scalar;

const MAX_DIM: usize = 64;
const MAX_SWEEPS: usize = 60;

fn check_shape<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(LinalgError::Empty);
    }
    let big = m.rows().max(m.cols());
    if big > MAX_DIM {
        return Err(LinalgError::TooLarge(big, MAX_DIM));
    }
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    Ok(())
}

/// Singular values, descending, by one-sided (Hestenes) Jacobi.
///
/// Small singular values come out with absolute error near `ε·‖M‖`, which is
/// what rank decisions at relative tolerances like `1e-8` need.
pub fn singular_values<T: Scalar>(m: &Matrix<T>) -> Result<Vec<T>> {
    check_shape(m)?;
    // Orthogonalize the columns of whichever orientation has fewer of them.
    let work = if m.cols() > m.rows() { m.transpose() } else { m.clone() };
    let (rows, cols) = (work.rows(), work.cols());
    let mut columns: Vec<Vec<T>> = (0..cols).map(|j| work.column(j)).collect();

    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in i + 1..cols {
                let (alpha, beta, gamma) = (0..rows).fold(
                    (T::zero(), T::zero(), T::zero()),
                    |(a, b, g), r| {
                        let (x, y) = (columns[i][r], columns[j][r]);
                        (a + x * x, b + y * y, g + x * y)
                    },
                );
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (head, tail) = columns.split_at_mut(j);
                for (x, y) in head[i].iter_mut().zip(tail[0].iter_mut()) {
                    (*x, *y) = (c * *x - s * *y, s * *x + c * *y);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<T> = columns
        .iter()
        .map(|col| col.iter().map(|&v| v * v).sum::<T>().sqrt())
        .collect();
    sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sigma)
}

/// Singular values as square roots of the eigenvalues of the smaller Gram
/// matrix (`MᵀM` or `MMᵀ`), reusing [`hermitian_eig`].
///
/// Independent of [`singular_values`]; values below `√ε·σ_max` are not
/// resolved by this route.
pub fn singular_values_gram<T: Scalar>(m: &Matrix<T>) -> Result<Vec<T>> {
    check_shape(m)?;
    let (rows, cols) = (m.rows(), m.cols());
    let k = rows.min(cols);
    let gram = ComplexMatrix::from_fn(k, k, |a, b| {
        let v = if cols <= rows {
            (0..rows).map(|r| m[(r, a)] * m[(r, b)]).sum::<T>()
        } else {
            (0..cols).map(|c| m[(a, c)] * m[(b, c)]).sum::<T>()
        };
        Complex::new(v, T::zero())
    });
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(64.0));
    let eig = hermitian_eig(&gram, tol)?;
    let mut sigma: Vec<T> = eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(T::zero()).sqrt())
        .collect();
    sigma.reverse();
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal() {
        let m = Matrix::from_vec(3, 3, vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(singular_values(&m).unwrap(), vec![3.0, 1.0, 0.0]);
    }

    #[test]
    fn rank_one_outer_product() {
        let u = [0.6, 0.8, 0.0];
        let v = [0.0, 1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt(), 0.0];
        let m = Matrix::from_fn(3, 4, |i, j| u[i] * v[j]);
        let s = singular_values(&m).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15);
        assert!(s[1..].iter().all(|&x| x < 1e-15));
    }

    #[test]
    fn frobenius_identity_on_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let m = Matrix::from_fn(6, 8, |_, _| rng.random_range(-1.0..1.0));
        let s = singular_values(&m).unwrap();
        let sum_sq: f64 = s.iter().map(|x| x * x).sum();
        let fro = m.frobenius_norm();
        assert!((sum_sq - fro * fro).abs() <= 1e-10);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let gram = singular_values_gram(&m).unwrap();
        for (a, b) in s.iter().zip(&gram) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_is_an_error() {
        let m = Matrix::<f64>::zeros(0, 3);
        assert_eq!(singular_values(&m), Err(LinalgError::Empty));
        assert_eq!(singular_values_gram(&m), Err(LinalgError::Empty));
    }
}
