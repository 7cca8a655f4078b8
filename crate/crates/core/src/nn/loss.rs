use super::{NnError, Result, Tensor4};
use crate::Scalar;

/// Mean softmax cross-entropy over the batch and its gradient
/// `(softmax − onehot)/n` with respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor4<T>,
    labels: &[usize],
) -> Result<(T, Tensor4<T>)> {
    let n = logits.n();
    let classes = logits.sample_len();
    if labels.len() != n {
        return Err(NnError::Shape(format!("{} labels for batch of {n}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(NnError::LabelOutOfRange { label: bad, classes });
    }
    let inv_n = T::one() / T::from_usize_lossy(n.max(1));
    let mut grad = Tensor4::zeros(logits.shape());
    let mut total = T::zero();
    for (s, &label) in labels.iter().enumerate() {
        let z = logits.sample(s);
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let g = grad.sample_mut(s);
        let mut sum = T::zero();
        for (gi, &zi) in g.iter_mut().zip(z) {
            *gi = (zi - max).exp();
            sum += *gi;
        }
        total += sum.ln() - (z[label] - max);
        for gi in g.iter_mut() {
            *gi = *gi / sum * inv_n;
        }
        g[label] -= inv_n;
    }
    Ok((total * inv_n, grad))
}

/// Index of the largest logit per sample (first on ties).
pub fn argmax_rows<T: Scalar>(logits: &Tensor4<T>) -> Vec<usize> {
    (0..logits.n())
        .map(|s| {
            let z = logits.sample(s);
            let mut best = 0;
            for (i, &v) in z.iter().enumerate() {
                if v > z[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_classes() {
        let logits = Tensor4::<f64>::from_rows(2, 10, vec![0.3; 20]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 7]).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn loss_vanishes_with_margin() {
        let mut prev = f64::INFINITY;
        for margin in [1.0, 5.0, 20.0, 50.0] {
            let logits = Tensor4::<f64>::from_rows(1, 3, vec![0.0, margin, 0.0]).unwrap();
            let (loss, _) = softmax_cross_entropy(&logits, &[1]).unwrap();
            assert!(loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = Tensor4::<f32>::from_rows(3, 4, (0..12).map(|i| (i as f32 * 0.7).sin() * 3.0).collect()).unwrap();
        let (_, g) = softmax_cross_entropy(&logits, &[0, 3, 1]).unwrap();
        for s in 0..3 {
            assert!(g.sample(s).iter().sum::<f32>().abs() < 1e-6);
        }
    }

    #[test]
    fn large_logits_stay_finite() {
        let logits = Tensor4::<f32>::from_rows(1, 2, vec![1e30, -1e30]).unwrap();
        let (loss, g) = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert!(loss.is_finite() && g.data().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor4::<f32>::from_rows(1, 3, vec![0.0; 3]).unwrap();
        assert_eq!(
            softmax_cross_entropy(&logits, &[3]).unwrap_err(),
            NnError::LabelOutOfRange { label: 3, classes: 3 }
        );
    }
}
