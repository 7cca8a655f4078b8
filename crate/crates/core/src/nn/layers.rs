//! Max pooling, dense, ReLU and flatten: forward and exact backward.

use super::kernels::{axpy, dot};
use super::{NnError, Result, Tensor4};
use crate::Scalar;

/// 2×2, stride-2 max pooling. Returns the pooled tensor and, per output
/// cell, the flat index of the winning input cell. Ties go to the first
/// cell in row-major window order.
pub fn maxpool2_forward<T: Scalar>(input: &Tensor4<T>) -> Result<(Tensor4<T>, Vec<usize>)> {
    let [n, c, h, w] = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(NnError::OddSpatial { h, w });
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let src = input.data();
    let dst = out.data_mut();
    let mut o = 0;
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let candidates = [top, top + 1, top + w, top + w + 1];
                let mut best = candidates[0];
                for &idx in &candidates[1..] {
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                dst[o] = src[best];
                argmax.push(best);
                o += 1;
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2_backward<T: Scalar>(
    input_shape: [usize; 4],
    argmax: &[usize],
    upstream: &Tensor4<T>,
) -> Result<Tensor4<T>> {
    if upstream.len() != argmax.len() {
        return Err(NnError::Shape(format!(
            "maxpool upstream has {} values, forward produced {}",
            upstream.len(),
            argmax.len()
        )));
    }
    let mut d_input = Tensor4::zeros(input_shape);
    let dst = d_input.data_mut();
    for (&idx, &g) in argmax.iter().zip(upstream.data()) {
        dst[idx] += g;
    }
    Ok(d_input)
}

/// `y = x·W + b` with `x: n×f_in`, `W: f_in×f_out` row-major, `b: f_out`.
pub fn dense_forward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &[T],
    bias: Option<&[T]>,
    out_features: usize,
) -> Result<Tensor4<T>> {
    let n = input.n();
    let f_in = input.sample_len();
    if weights.len() != f_in * out_features {
        return Err(NnError::Shape(format!(
            "dense weights: expected {f_in}x{out_features}, got {} values",
            weights.len()
        )));
    }
    if bias.is_some_and(|b| b.len() != out_features) {
        return Err(NnError::Shape(format!("dense bias: expected {out_features} values")));
    }
    let mut out = Tensor4::zeros([n, out_features, 1, 1]);
    for s in 0..n {
        let x = input.sample(s);
        let y = out.sample_mut(s);
        if let Some(b) = bias {
            y.copy_from_slice(b);
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi != T::zero() {
                axpy(xi, &weights[i * out_features..(i + 1) * out_features], y);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub d_input: Tensor4<T>,
    pub d_weights: Vec<T>,
    pub d_bias: Vec<T>,
}

pub fn dense_backward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &[T],
    out_features: usize,
    upstream: &Tensor4<T>,
) -> Result<DenseGrads<T>> {
    let n = input.n();
    let f_in = input.sample_len();
    if weights.len() != f_in * out_features {
        return Err(NnError::Shape(format!(
            "dense weights: expected {f_in}x{out_features}, got {} values",
            weights.len()
        )));
    }
    if upstream.n() != n || upstream.sample_len() != out_features {
        return Err(NnError::Shape(format!(
            "dense upstream: expected {n}x{out_features}, got {:?}",
            upstream.shape()
        )));
    }
    let mut d_input = Tensor4::zeros(input.shape());
    let mut d_weights = vec![T::zero(); weights.len()];
    let mut d_bias = vec![T::zero(); out_features];
    for s in 0..n {
        let x = input.sample(s);
        let g = upstream.sample(s);
        for (db, &gv) in d_bias.iter_mut().zip(g) {
            *db += gv;
        }
        let dx = d_input.sample_mut(s);
        for (i, &xi) in x.iter().enumerate() {
            let wrow = &weights[i * out_features..(i + 1) * out_features];
            dx[i] = dot(wrow, g);
            if xi != T::zero() {
                axpy(xi, g, &mut d_weights[i * out_features..(i + 1) * out_features]);
            }
        }
    }
    Ok(DenseGrads {
        d_input,
        d_weights,
        d_bias,
    })
}

/// NaN passes through so divergence stays visible downstream.
pub fn relu_forward<T: Scalar>(input: &Tensor4<T>) -> Tensor4<T> {
    input.map(|v| if v < T::zero() { T::zero() } else { v })
}

/// Subgradient 0 at 0.
pub fn relu_backward<T: Scalar>(input: &Tensor4<T>, upstream: &Tensor4<T>) -> Result<Tensor4<T>> {
    if input.shape() != upstream.shape() {
        return Err(NnError::Shape(format!(
            "relu upstream {:?} vs input {:?}",
            upstream.shape(),
            input.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor4::from_vec(input.shape(), data)
}

/// `(n, c, h, w) → (n, c·h·w, 1, 1)`, preserving row-major order.
pub fn flatten<T: Scalar>(input: Tensor4<T>) -> Tensor4<T> {
    let shape = [input.n(), input.sample_len(), 1, 1];
    input.reshape(shape).expect("flatten preserves element count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxpool_single_window() {
        let x = Tensor4::<f32>::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, arg) = maxpool2_forward(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        let up = Tensor4::from_vec([1, 1, 1, 1], vec![1.0]).unwrap();
        let dx = maxpool2_backward(x.shape(), &arg, &up).unwrap();
        assert_eq!(dx.data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn maxpool_ties_pick_first() {
        let x = Tensor4::<f32>::from_vec([1, 1, 2, 2], vec![5.0, 5.0, 5.0, 5.0]).unwrap();
        let (_, arg) = maxpool2_forward(&x).unwrap();
        assert_eq!(arg, vec![0]);
    }

    #[test]
    fn maxpool_halves_and_rejects_odd() {
        let x = Tensor4::<f32>::zeros([1, 40, 64, 64]);
        assert_eq!(maxpool2_forward(&x).unwrap().0.shape(), [1, 40, 32, 32]);
        let odd = Tensor4::<f32>::zeros([1, 1, 3, 4]);
        assert!(matches!(maxpool2_forward(&odd), Err(NnError::OddSpatial { h: 3, w: 4 })));
    }

    #[test]
    fn dense_identity() {
        let x = Tensor4::<f64>::from_rows(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, 4.0]).unwrap();
        let mut w = vec![0.0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let y = dense_forward(&x, &w, Some(&[0.0; 3]), 3).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn dense_shape_errors() {
        let x = Tensor4::<f64>::from_rows(1, 3, vec![0.0; 3]).unwrap();
        assert!(dense_forward(&x, &[0.0; 5], None, 2).is_err());
        assert!(dense_forward(&x, &[0.0; 6], Some(&[0.0]), 2).is_err());
        let up = Tensor4::<f64>::from_rows(1, 3, vec![0.0; 3]).unwrap();
        assert!(dense_backward(&x, &[0.0; 6], 2, &up).is_err());
    }

    #[test]
    fn relu_values_and_subgradient() {
        let x = Tensor4::<f32>::from_rows(1, 3, vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu_forward(&x).data(), &[0.0, 0.0, 2.0]);
        let up = Tensor4::from_rows(1, 3, vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(relu_backward(&x, &up).unwrap().data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn flatten_width() {
        let x = Tensor4::<f32>::from_vec([1, 64, 8, 8], (0..4096).map(|i| i as f32).collect()).unwrap();
        let y = flatten(x.clone());
        assert_eq!(y.shape(), [1, 4096, 1, 1]);
        assert_eq!(y.data(), x.data());
    }
}
