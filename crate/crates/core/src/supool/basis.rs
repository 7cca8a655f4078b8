use num_complex::Complex;

use super::{PoolError, Result};
use crate::linalg::ComplexMatrix;
use crate::Scalar;

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 16;

/// Which family a generator belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    /// `E_jk + E_kj`
    Symmetric { j: usize, k: usize },
    /// `−i(E_jk − E_kj)`
    Antisymmetric { j: usize, k: usize },
    /// `√(2/(l(l+1)))·(Σ_{m<l} E_mm − l·E_ll)`
    Diagonal { l: usize },
}

impl GeneratorKind {
    /// True when the generator has no entry in row or column 0, i.e. it
    /// annihilates the reference state `|0⟩`.
    pub fn fixes_reference(&self) -> bool {
        match *self {
            GeneratorKind::Symmetric { j, .. } | GeneratorKind::Antisymmetric { j, .. } => j > 0,
            GeneratorKind::Diagonal { .. } => false,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            GeneratorKind::Symmetric { j, k } => format!("S{j}{k}"),
            GeneratorKind::Antisymmetric { j, k } => format!("A{j}{k}"),
            GeneratorKind::Diagonal { l } => format!("D{l}"),
        }
    }
}

/// Generalized Gell-Mann basis of su(d), normalized so that
/// `Tr(G_j·G_k) = 2·δ_jk`.
///
/// Order: all symmetric pairs `(j<k)` lexicographically, then the
/// antisymmetric pairs in the same order, then the `d−1` diagonal
/// generators. For `d = 2` this is `(σx, σy, σz)`.
#[derive(Clone, Debug)]
pub struct GeneratorBasis<T> {
    d: usize,
    kinds: Vec<GeneratorKind>,
    generators: Vec<ComplexMatrix<T>>,
}

impl<T: Scalar> GeneratorBasis<T> {
    pub fn new(d: usize) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&d) {
            return Err(PoolError::UnsupportedDimension(d));
        }
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|j| (j + 1..d).map(move |k| (j, k)))
            .collect();
        let mut kinds = Vec::with_capacity(d * d - 1);
        kinds.extend(pairs.iter().map(|&(j, k)| GeneratorKind::Symmetric { j, k }));
        kinds.extend(pairs.iter().map(|&(j, k)| GeneratorKind::Antisymmetric { j, k }));
        kinds.extend((1..d).map(|l| GeneratorKind::Diagonal { l }));

        let generators = kinds.iter().map(|kind| build(d, *kind)).collect();
        Ok(Self {
            d,
            kinds,
            generators,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `d² − 1`.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[ComplexMatrix<T>] {
        &self.generators
    }

    pub fn generator(&self, k: usize) -> &ComplexMatrix<T> {
        &self.generators[k]
    }

    pub fn kinds(&self) -> &[GeneratorKind] {
        &self.kinds
    }

    /// Indices of the off-diagonal generators that do not touch index 0.
    pub fn stabilizer_indices(&self) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, kind)| kind.fixes_reference())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn diagonal_indices(&self) -> Vec<usize> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, kind)| matches!(kind, GeneratorKind::Diagonal { .. }))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Convenience wrapper matching the free-function surface of the module.
pub fn generator_basis<T: Scalar>(d: usize) -> Result<GeneratorBasis<T>> {
    GeneratorBasis::new(d)
}

fn build<T: Scalar>(d: usize, kind: GeneratorKind) -> ComplexMatrix<T> {
    let zero = T::zero();
    let one = T::one();
    let mut g = ComplexMatrix::zeros(d, d);
    match kind {
        GeneratorKind::Symmetric { j, k } => {
            g[(j, k)] = Complex::new(one, zero);
            g[(k, j)] = Complex::new(one, zero);
        }
        GeneratorKind::Antisymmetric { j, k } => {
            g[(j, k)] = Complex::new(zero, -one);
            g[(k, j)] = Complex::new(zero, one);
        }
        GeneratorKind::Diagonal { l } => {
            let lf = T::from_usize_lossy(l);
            let norm = (T::lit(2.0) / (lf * (lf + one))).sqrt();
            for m in 0..l {
                g[(m, m)] = Complex::new(norm, zero);
            }
            g[(l, l)] = Complex::new(-lf * norm, zero);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn su2_is_pauli() {
        let b = GeneratorBasis::<f64>::new(2).unwrap();
        let sx = ComplexMatrix::from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)]]);
        let sy = ComplexMatrix::from_rows(&[&[(0.0, 0.0), (0.0, -1.0)], &[(0.0, 1.0), (0.0, 0.0)]]);
        let sz = ComplexMatrix::from_rows(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]);
        assert_eq!(b.generators(), &[sx, sy, sz]);
    }

    #[test]
    fn su3_matches_gell_mann_set() {
        let b = GeneratorBasis::<f64>::new(3).unwrap();
        assert_eq!(b.len(), 8);
        let labels: Vec<String> = b.kinds().iter().map(|k| k.label()).collect();
        assert_eq!(labels, ["S01", "S02", "S12", "A01", "A02", "A12", "D1", "D2"]);
        // λ8 = diag(1, 1, −2)/√3
        let l8 = b.generator(7);
        let s3 = 1.0 / 3f64.sqrt();
        assert!((l8[(0, 0)].re - s3).abs() < 1e-15);
        assert!((l8[(1, 1)].re - s3).abs() < 1e-15);
        assert!((l8[(2, 2)].re + 2.0 * s3).abs() < 1e-15);
        // λ6, λ7 in the standard numbering are S12 and A12.
        assert_eq!(b.stabilizer_indices(), vec![2, 5]);
        assert_eq!(b.diagonal_indices(), vec![6, 7]);
    }

    #[test]
    fn invariants_hold_up_to_d16() {
        for d in [2, 3, 5, 16] {
            let b = GeneratorBasis::<f64>::new(d).unwrap();
            assert_eq!(b.len(), d * d - 1);
            for (j, gj) in b.generators().iter().enumerate() {
                assert!(gj.is_hermitian(1e-14));
                assert!(gj.trace().norm() <= 1e-14);
                for (k, gk) in b.generators().iter().enumerate().skip(j) {
                    let tr = (gj * gk).trace();
                    let expected = if j == k { 2.0 } else { 0.0 };
                    assert!((tr.re - expected).abs() <= 1e-12 && tr.im.abs() <= 1e-12);
                }
            }
            assert_eq!(b.stabilizer_indices().len(), (d - 1) * (d - 2));
        }
    }

    #[test]
    fn dimension_bounds() {
        assert!(matches!(GeneratorBasis::<f64>::new(1), Err(PoolError::UnsupportedDimension(1))));
        assert!(matches!(GeneratorBasis::<f64>::new(17), Err(PoolError::UnsupportedDimension(17))));
    }
}
