use num_complex::Complex;

use super::{hermitian_eig, ComplexMatrix, EigenDecomposition, LinalgError, Result};
use crate::Scalar;

/// Accuracy demanded from the eigendecomposition behind `exp(iH)`.
fn eig_tol<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// `exp(iH)` for Hermitian `H`, evaluated as `V·diag(e^{iλ})·V†`.
pub fn expm_i_hermitian<T: Scalar>(h: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let eig = hermitian_eig(h, eig_tol())?;
    Ok(expm_i_from_eig(&eig))
}

pub fn expm_i_from_eig<T: Scalar>(eig: &EigenDecomposition<T>) -> ComplexMatrix<T> {
    let n = eig.dim();
    let v = &eig.eigenvectors;
    let phases: Vec<Complex<T>> = eig
        .eigenvalues
        .iter()
        .map(|&l| Complex::new(l.cos(), l.sin()))
        .collect();
    ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
            acc + v[(i, k)] * phases[k] * v[(j, k)].conj()
        })
    })
}

/// Eigenvalue gap below which the Daleckii–Krein kernel switches to its
/// diagonal limit: `1e-9·max(1, ‖H‖_F)`.
pub fn degeneracy_threshold<T: Scalar>(h_norm: T) -> T {
    T::lit(1e-9) * h_norm.max(T::one())
}

/// Directional derivative `d/dt exp(i(H + tE))` at `t = 0`.
pub fn dexpm_i_hermitian<T: Scalar>(
    h: &ComplexMatrix<T>,
    e: &ComplexMatrix<T>,
) -> Result<ComplexMatrix<T>> {
    if !e.is_square() {
        return Err(LinalgError::NotSquare {
            rows: e.rows(),
            cols: e.cols(),
        });
    }
    if e.rows() != h.rows() || e.cols() != h.cols() {
        return Err(LinalgError::DimensionMismatch(
            format!("{}x{}", h.rows(), h.cols()),
            format!("{}x{}", e.rows(), e.cols()),
        ));
    }
    let defect = e.hermitian_defect();
    if defect > T::lit(1e-10) * e.frobenius_norm().max(T::one()) {
        return Err(LinalgError::NotHermitian(defect.as_f64()));
    }
    let eig = hermitian_eig(h, eig_tol())?;
    Ok(dexpm_i_from_eig(&eig, e, h.frobenius_norm()))
}

/// Daleckii–Krein evaluation given a precomputed eigendecomposition of `H`.
///
/// With `Ẽ = V†EV` the result is `V·K·V†`, `K[a][b] = Ẽ[a][b]·f[λ_a, λ_b]`
/// where `f[·,·]` is the first divided difference of `λ ↦ e^{iλ}`. The
/// divided difference is evaluated as `i·e^{i(λa+λb)/2}·sinc((λa−λb)/2)`,
/// algebraically identical to `(e^{iλa} − e^{iλb})/(λa − λb)` but free of
/// cancellation for close eigenvalues.
pub fn dexpm_i_from_eig<T: Scalar>(
    eig: &EigenDecomposition<T>,
    e: &ComplexMatrix<T>,
    h_norm: T,
) -> ComplexMatrix<T> {
    let v = &eig.eigenvectors;
    let vh = v.adjoint();
    let e_tilde = &(&vh * e) * v;
    let kernel = divided_differences(&eig.eigenvalues, degeneracy_threshold(h_norm));
    let n = eig.dim();
    let k = ComplexMatrix::from_fn(n, n, |a, b| e_tilde[(a, b)] * kernel[a * n + b]);
    &(v * &k) * &vh
}

/// Row-major table of `f[λ_a, λ_b]` for `f(λ) = e^{iλ}`.
pub(crate) fn divided_differences<T: Scalar>(lambda: &[T], degenerate: T) -> Vec<Complex<T>> {
    let n = lambda.len();
    let i = Complex::new(T::zero(), T::one());
    let mut out = Vec::with_capacity(n * n);
    for &la in lambda {
        for &lb in lambda {
            let value = if (la - lb).abs() < degenerate {
                let m = (la + lb) * T::lit(0.5);
                i * Complex::new(m.cos(), m.sin())
            } else {
                let m = (la + lb) * T::lit(0.5);
                let half = (la - lb) * T::lit(0.5);
                i * Complex::new(m.cos(), m.sin()) * (half.sin() / half)
            };
            out.push(value);
        }
    }
    out
}
