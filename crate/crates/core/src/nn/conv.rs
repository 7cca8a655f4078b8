//! 3×3 convolution with padding 1, direct (im2col) evaluation.

use super::kernels::{axpy, dot};
use super::{NnError, Result, Tensor4};
use crate::Scalar;

pub const KERNEL: usize = 3;
pub const PADDING: usize = 1;

/// Output side length for a 3×3, padding-1 convolution.
pub fn conv_output_len(len: usize, stride: usize) -> usize {
    (len + 2 * PADDING - KERNEL) / stride + 1
}

#[derive(Clone, Debug)]
pub struct Conv2dGrads<T> {
    pub d_input: Tensor4<T>,
    pub d_weights: Vec<T>,
    pub d_bias: Vec<T>,
}

fn check<T: Scalar>(input: &Tensor4<T>, weights_len: usize, out_channels: usize, stride: usize) -> Result<()> {
    if !(1..=2).contains(&stride) {
        return Err(NnError::Shape(format!("conv stride must be 1 or 2, got {stride}")));
    }
    let expected = out_channels * input.c() * KERNEL * KERNEL;
    if weights_len != expected {
        return Err(NnError::Shape(format!(
            "conv weights: expected {out_channels}x{}x3x3 = {expected}, got {weights_len}",
            input.c()
        )));
    }
    Ok(())
}

/// Unfolds one sample `(c, h, w)` into a `(c·9) × (oh·ow)` row-major matrix.
fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, stride: usize, cols: &mut [T]) {
    let (oh, ow) = (conv_output_len(h, stride), conv_output_len(w, stride));
    let plane = oh * ow;
    for ci in 0..c {
        let src = &x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ci * KERNEL + ky) * KERNEL + kx;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - PADDING as isize;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let srow = &src[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - PADDING as isize;
                        *v = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            srow[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back onto a `(c, h, w)` sample.
fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, stride: usize, x: &mut [T]) {
    let (oh, ow) = (conv_output_len(h, stride), conv_output_len(w, stride));
    let plane = oh * ow;
    for ci in 0..c {
        let dst = &mut x[ci * h * w..(ci + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ci * KERNEL + ky) * KERNEL + kx;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - PADDING as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let drow = &mut dst[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - PADDING as isize;
                        if ix >= 0 && ix < w as isize {
                            drow[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `weights` is `(out_channels, in_channels, 3, 3)` row-major.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &[T],
    bias: Option<&[T]>,
    out_channels: usize,
    stride: usize,
) -> Result<Tensor4<T>> {
    check(input, weights.len(), out_channels, stride)?;
    if let Some(b) = bias {
        if b.len() != out_channels {
            return Err(NnError::Shape(format!(
                "conv bias: expected {out_channels}, got {}",
                b.len()
            )));
        }
    }
    let [n, c, h, w] = input.shape();
    let (oh, ow) = (conv_output_len(h, stride), conv_output_len(w, stride));
    let plane = oh * ow;
    let k = c * KERNEL * KERNEL;
    let mut out = Tensor4::zeros([n, out_channels, oh, ow]);
    let mut cols = vec![T::zero(); k * plane];
    for s in 0..n {
        im2col(input.sample(s), c, h, w, stride, &mut cols);
        let dst = out.sample_mut(s);
        for co in 0..out_channels {
            let orow = &mut dst[co * plane..(co + 1) * plane];
            if let Some(b) = bias {
                orow.fill(b[co]);
            }
            let wrow = &weights[co * k..(co + 1) * k];
            for (r, &wv) in wrow.iter().enumerate() {
                axpy(wv, &cols[r * plane..(r + 1) * plane], orow);
            }
        }
    }
    Ok(out)
}

pub fn conv2d_backward<T: Scalar>(
    input: &Tensor4<T>,
    weights: &[T],
    out_channels: usize,
    stride: usize,
    upstream: &Tensor4<T>,
) -> Result<Conv2dGrads<T>> {
    check(input, weights.len(), out_channels, stride)?;
    let [n, c, h, w] = input.shape();
    let (oh, ow) = (conv_output_len(h, stride), conv_output_len(w, stride));
    if upstream.shape() != [n, out_channels, oh, ow] {
        return Err(NnError::Shape(format!(
            "conv upstream: expected {:?}, got {:?}",
            [n, out_channels, oh, ow],
            upstream.shape()
        )));
    }
    let plane = oh * ow;
    let k = c * KERNEL * KERNEL;
    let mut d_input = Tensor4::zeros(input.shape());
    let mut d_weights = vec![T::zero(); weights.len()];
    let mut d_bias = vec![T::zero(); out_channels];
    let mut cols = vec![T::zero(); k * plane];
    let mut d_cols = vec![T::zero(); k * plane];
    for s in 0..n {
        im2col(input.sample(s), c, h, w, stride, &mut cols);
        d_cols.fill(T::zero());
        let up = upstream.sample(s);
        for co in 0..out_channels {
            let urow = &up[co * plane..(co + 1) * plane];
            d_bias[co] += urow.iter().copied().sum::<T>();
            let wrow = &weights[co * k..(co + 1) * k];
            let dwrow = &mut d_weights[co * k..(co + 1) * k];
            for r in 0..k {
                let col = &cols[r * plane..(r + 1) * plane];
                dwrow[r] += dot(urow, col);
                axpy(wrow[r], urow, &mut d_cols[r * plane..(r + 1) * plane]);
            }
        }
        col2im(&d_cols, c, h, w, stride, d_input.sample_mut(s));
    }
    Ok(Conv2dGrads {
        d_input,
        d_weights,
        d_bias,
    })
}
