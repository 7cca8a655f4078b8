use num_complex::Complex;

use super::{ComplexMatrix, LinalgError, Result};
use crate::Scalar;

/// Sweep budget for the cyclic Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;

const MAX_DIM: usize = 64;

/// Eigenpairs of a Hermitian matrix. Column `k` of `eigenvectors` belongs to
/// `eigenvalues[k]`; eigenvalues are ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: ComplexMatrix<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V·diag(λ)·V†`.
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let v = &self.eigenvectors;
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
                acc + v[(i, k)] * v[(j, k)].conj() * self.eigenvalues[k]
            })
        })
    }

    /// `‖H·V − V·diag(λ)‖_F`.
    pub fn residual(&self, h: &ComplexMatrix<T>) -> T {
        let v = &self.eigenvectors;
        let hv = h * v;
        let n = self.dim();
        let mut acc = T::zero();
        for i in 0..n {
            for k in 0..n {
                acc += (hv[(i, k)] - v[(i, k)] * self.eigenvalues[k]).norm_sqr();
            }
        }
        acc.sqrt()
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
///
/// Each rotation first removes the phase of the pivot `a_pq`, then applies a
/// real Givens rotation that annihilates it. Iteration stops once the
/// off-diagonal Frobenius mass falls below `1e-14·‖H‖_F` (or the scalar
/// type's precision floor), and fails after [`JACOBI_MAX_SWEEPS`] sweeps.
/// The result is then checked against `tol·max(‖H‖_F, 1)`.
pub fn hermitian_eig<T: Scalar>(h: &ComplexMatrix<T>, tol: T) -> Result<EigenDecomposition<T>> {
    if !h.is_square() {
        return Err(LinalgError::NotSquare {
            rows: h.rows(),
            cols: h.cols(),
        });
    }
    let n = h.rows();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    if n > MAX_DIM {
        return Err(LinalgError::TooLarge(n, MAX_DIM));
    }
    if h.data().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let norm = h.frobenius_norm();
    let defect = h.hermitian_defect();
    if defect > T::lit(1e-10) * norm.max(T::one()) {
        return Err(LinalgError::NotHermitian(defect.as_f64()));
    }

    // Symmetrize so rounding in the input cannot leak into the rotations.
    let mut a = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex::new(h[(i, i)].re, T::zero())
        } else {
            (h[(i, j)] + h[(j, i)].conj()).scale(T::lit(0.5))
        }
    });
    let mut v = ComplexMatrix::<T>::identity(n);

    let stop = (T::lit(1e-14).max(T::epsilon() * T::lit(8.0))) * norm;
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= stop {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    let off = off_diagonal_norm(&a);
    if !converged && off > stop {
        return Err(LinalgError::NoConvergence {
            sweeps: JACOBI_MAX_SWEEPS,
            off: off.as_f64(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    let eig = EigenDecomposition {
        eigenvalues,
        eigenvectors,
    };

    let residual = eig.residual(h);
    let bound = tol * norm.max(T::one());
    if residual > bound {
        return Err(LinalgError::Inaccurate {
            residual: residual.as_f64(),
            tol: bound.as_f64(),
        });
    }
    Ok(eig)
}

fn off_diagonal_norm<T: Scalar>(a: &ComplexMatrix<T>) -> T {
    let n = a.rows();
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Applies `A ← G†·A·G` and `V ← V·G` for the unitary `G` that zeroes
/// `A[p][q]`.
fn rotate<T: Scalar>(a: &mut ComplexMatrix<T>, v: &mut ComplexMatrix<T>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let r = apq.norm();
    if r == T::zero() {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Pivot negligible next to both diagonal entries: the rotation would be
    // the identity to working precision.
    let tiny = T::epsilon() * T::lit(0.01);
    if r <= tiny * app.abs() && r <= tiny * aqq.abs() {
        a[(p, q)] = Complex::new(T::zero(), T::zero());
        a[(q, p)] = Complex::new(T::zero(), T::zero());
        return;
    }

    let phase = apq / r; // e^{iφ}
    let theta = (aqq - app) / (T::lit(2.0) * r);
    let t = {
        let mag = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
        if theta < T::zero() {
            -mag
        } else {
            mag
        }
    };
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;

    // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
    let conj_phase = phase.conj();
    let g_pp = Complex::new(c, T::zero());
    let g_pq = Complex::new(s, T::zero());
    let g_qp = conj_phase * (-s);
    let g_qq = conj_phase * c;

    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * g_pp + akq * g_qp;
        a[(k, q)] = akp * g_pq + akq * g_qq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
    }
    a[(p, q)] = Complex::new(T::zero(), T::zero());
    a[(q, p)] = Complex::new(T::zero(), T::zero());
    a[(p, p)] = Complex::new(a[(p, p)].re, T::zero());
    a[(q, q)] = Complex::new(a[(q, q)].re, T::zero());

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * g_pp + vkq * g_qp;
        v[(k, q)] = vkp * g_pq + vkq * g_qq;
    }
}
