use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::conv::{conv2d_backward, conv2d_forward, conv_output_len, KERNEL};
use super::init::he_uniform;
use super::layers::{
    dense_backward, dense_forward, flatten, maxpool2_backward, maxpool2_forward, relu_backward,
    relu_forward,
};
use super::{NnError, Result, Tensor4};
use crate::supool::{PoolCache, SuPool};
use crate::Scalar;

/// Declarative layer description. Convolutions are always 3×3 with
/// padding 1; convolution and dense layers always carry a bias.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv2d { out_channels: usize, stride: usize },
    MaxPool2,
    Relu,
    Flatten,
    Dense { out_features: usize },
    SuPool { d: usize },
}

/// Activation shape of one sample: `(c, h, w)`, flat vectors are `(f, 1, 1)`.
pub type SampleShape = [usize; 3];

/// A trainable array with its gradient accumulator and optimizer state.
#[derive(Clone, Debug)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub adam: AdamState<T>,
}

impl<T: Scalar> Param<T> {
    fn new(value: Vec<T>) -> Self {
        let len = value.len();
        Self {
            value,
            grad: vec![T::zero(); len],
            adam: AdamState::new(len),
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

#[derive(Clone, Debug)]
enum Cache<T> {
    None,
    Input(Tensor4<T>),
    Argmax([usize; 4], Vec<usize>),
    Shape([usize; 4]),
    Pool(Vec<PoolCache<f64>>),
}

#[derive(Clone, Debug)]
enum Layer<T> {
    Conv {
        out_channels: usize,
        stride: usize,
        weight: Param<T>,
        bias: Param<T>,
    },
    MaxPool,
    Relu,
    Flatten,
    Dense {
        out_features: usize,
        weight: Param<T>,
        bias: Param<T>,
    },
    SuPool(SuPool<f64>),
}

/// Output shape of `spec` applied to `input`, or an error when the layer
/// cannot accept it.
pub fn infer_shape(spec: &LayerSpec, input: SampleShape) -> Result<SampleShape> {
    let [c, h, w] = input;
    match *spec {
        LayerSpec::Conv2d { out_channels, stride } => {
            if !(1..=2).contains(&stride) || out_channels == 0 {
                return Err(NnError::InvalidSpec(format!("{spec:?}")));
            }
            if h == 0 || w == 0 {
                return Err(NnError::Shape(format!("conv on empty spatial dims {input:?}")));
            }
            Ok([out_channels, conv_output_len(h, stride), conv_output_len(w, stride)])
        }
        LayerSpec::MaxPool2 => {
            if h % 2 != 0 || w % 2 != 0 || h == 0 || w == 0 {
                return Err(NnError::OddSpatial { h, w });
            }
            Ok([c, h / 2, w / 2])
        }
        LayerSpec::Relu => Ok(input),
        LayerSpec::Flatten => Ok([c * h * w, 1, 1]),
        LayerSpec::Dense { out_features } => {
            if out_features == 0 {
                return Err(NnError::InvalidSpec(format!("{spec:?}")));
            }
            if h != 1 || w != 1 {
                return Err(NnError::Shape(format!("dense needs a flat input, got {input:?}")));
            }
            Ok([out_features, 1, 1])
        }
        LayerSpec::SuPool { d } => {
            if h != 1 || w != 1 || c != d * d - 1 {
                return Err(NnError::Shape(format!(
                    "SU({d}) pooling needs a flat input of width {}, got {input:?}",
                    d * d - 1
                )));
            }
            Ok([2 * d, 1, 1])
        }
    }
}

/// Trainable parameter count of `spec` given its input shape.
pub fn spec_param_count(spec: &LayerSpec, input: SampleShape) -> usize {
    match *spec {
        LayerSpec::Conv2d { out_channels, .. } => out_channels * input[0] * KERNEL * KERNEL + out_channels,
        LayerSpec::Dense { out_features } => input[0] * out_features + out_features,
        _ => 0,
    }
}

/// An instantiated stack of layers with parameters, optimizer state, and
/// the forward caches of the most recent training pass.
#[derive(Clone, Debug)]
pub struct Network<T> {
    input_shape: SampleShape,
    specs: Vec<LayerSpec>,
    shapes: Vec<SampleShape>,
    layers: Vec<Layer<T>>,
    caches: Vec<Cache<T>>,
}

impl<T: Scalar> Network<T> {
    /// Validates the layer chain against `input_shape` and draws He-uniform
    /// weights (zero biases) from a ChaCha8 stream seeded with `seed`.
    pub fn new(input_shape: SampleShape, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shapes = Vec::with_capacity(specs.len());
        let mut layers = Vec::with_capacity(specs.len());
        let mut current = input_shape;
        for spec in specs {
            let next = infer_shape(spec, current)?;
            let layer = match *spec {
                LayerSpec::Conv2d { out_channels, stride } => {
                    let fan_in = current[0] * KERNEL * KERNEL;
                    Layer::Conv {
                        out_channels,
                        stride,
                        weight: Param::new(he_uniform(out_channels * fan_in, fan_in, &mut rng)),
                        bias: Param::new(vec![T::zero(); out_channels]),
                    }
                }
                LayerSpec::Dense { out_features } => {
                    let fan_in = current[0];
                    Layer::Dense {
                        out_features,
                        weight: Param::new(he_uniform(fan_in * out_features, fan_in, &mut rng)),
                        bias: Param::new(vec![T::zero(); out_features]),
                    }
                }
                LayerSpec::MaxPool2 => Layer::MaxPool,
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Flatten => Layer::Flatten,
                LayerSpec::SuPool { d } => Layer::SuPool(SuPool::new(d)?),
            };
            layers.push(layer);
            shapes.push(next);
            current = next;
        }
        Ok(Self {
            input_shape,
            specs: specs.to_vec(),
            shapes,
            caches: vec![Cache::None; layers.len()],
            layers,
        })
    }

    pub fn input_shape(&self) -> SampleShape {
        self.input_shape
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Output shape of every layer, in order.
    pub fn layer_shapes(&self) -> &[SampleShape] {
        &self.shapes
    }

    pub fn output_width(&self) -> usize {
        self.shapes
            .last()
            .map_or(self.input_shape.iter().product(), |s| s.iter().product())
    }

    pub fn param_count(&self) -> usize {
        self.params().map(Param::len).sum()
    }

    /// Parameter arrays in layer order (weight before bias).
    pub fn params(&self) -> impl Iterator<Item = &Param<T>> {
        self.layers.iter().flat_map(|l| match l {
            Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => vec![weight, bias],
            _ => vec![],
        })
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| match l {
            Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias, .. } => vec![weight, bias],
            _ => vec![],
        })
    }

    /// Per-array lengths, for structural comparisons between networks.
    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().map(Param::len).collect()
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        let [_, c, h, w] = x.shape();
        if [c, h, w] != self.input_shape {
            return Err(NnError::Shape(format!(
                "network expects samples of shape {:?}, got {:?}",
                self.input_shape,
                [c, h, w]
            )));
        }
        Ok(())
    }

    /// Inference pass; does not touch the training caches.
    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(x)?;
        let mut act = x.clone();
        for layer in &self.layers {
            act = layer_forward(layer, act, None)?;
        }
        Ok(act)
    }

    /// Training pass; keeps what [`Network::backward`] needs.
    pub fn forward_train(&mut self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        self.check_input(x)?;
        let mut act = x.clone();
        for (layer, cache) in self.layers.iter().zip(self.caches.iter_mut()) {
            act = layer_forward(layer, act, Some(cache))?;
        }
        Ok(act)
    }

    /// Back-propagates `d_out`, accumulating into every parameter's `grad`,
    /// and returns the gradient with respect to the network input.
    pub fn backward(&mut self, d_out: &Tensor4<T>) -> Result<Tensor4<T>> {
        let mut grad = d_out.clone();
        for (layer, cache) in self.layers.iter_mut().zip(self.caches.iter_mut()).rev() {
            let taken = std::mem::replace(cache, Cache::None);
            grad = layer_backward(layer, taken, grad)?;
        }
        Ok(grad)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(T::zero());
        }
    }

    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        for p in self.params_mut() {
            adam_step(&mut p.value, &p.grad, &mut p.adam, cfg);
        }
    }
}

fn layer_forward<T: Scalar>(
    layer: &Layer<T>,
    input: Tensor4<T>,
    cache: Option<&mut Cache<T>>,
) -> Result<Tensor4<T>> {
    let (out, saved) = match layer {
        Layer::Conv {
            out_channels,
            stride,
            weight,
            bias,
        } => {
            let out = conv2d_forward(&input, &weight.value, Some(&bias.value), *out_channels, *stride)?;
            (out, Cache::Input(input))
        }
        Layer::Dense {
            out_features,
            weight,
            bias,
        } => {
            let out = dense_forward(&input, &weight.value, Some(&bias.value), *out_features)?;
            (out, Cache::Input(input))
        }
        Layer::MaxPool => {
            let shape = input.shape();
            let (out, argmax) = maxpool2_forward(&input)?;
            (out, Cache::Argmax(shape, argmax))
        }
        Layer::Relu => (relu_forward(&input), Cache::Input(input)),
        Layer::Flatten => {
            let shape = input.shape();
            (flatten(input), Cache::Shape(shape))
        }
        Layer::SuPool(pool) => {
            let n = input.n();
            let width = input.sample_len();
            if width != pool.input_width() {
                return Err(NnError::Shape(format!(
                    "SU({}) pooling expects width {}, got {width}",
                    pool.d(),
                    pool.input_width()
                )));
            }
            let mut out = Tensor4::zeros([n, pool.output_width(), 1, 1]);
            let mut caches = Vec::with_capacity(if cache.is_some() { n } else { 0 });
            for s in 0..n {
                let x: Vec<f64> = input.sample(s).iter().map(|v| v.as_f64()).collect();
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(NnError::NonFinite("SU pooling input"));
                }
                let (phi, pc) = pool.forward(&x)?;
                for (o, &p) in out.sample_mut(s).iter_mut().zip(&phi.phi) {
                    *o = T::lit(p);
                }
                if cache.is_some() {
                    caches.push(pc);
                }
            }
            (out, Cache::Pool(caches))
        }
    };
    if let Some(slot) = cache {
        *slot = saved;
    }
    Ok(out)
}

fn layer_backward<T: Scalar>(
    layer: &mut Layer<T>,
    cache: Cache<T>,
    upstream: Tensor4<T>,
) -> Result<Tensor4<T>> {
    match (layer, cache) {
        (
            Layer::Conv {
                out_channels,
                stride,
                weight,
                bias,
            },
            Cache::Input(input),
        ) => {
            let g = conv2d_backward(&input, &weight.value, *out_channels, *stride, &upstream)?;
            accumulate(&mut weight.grad, &g.d_weights);
            accumulate(&mut bias.grad, &g.d_bias);
            Ok(g.d_input)
        }
        (
            Layer::Dense {
                out_features,
                weight,
                bias,
            },
            Cache::Input(input),
        ) => {
            let g = dense_backward(&input, &weight.value, *out_features, &upstream)?;
            accumulate(&mut weight.grad, &g.d_weights);
            accumulate(&mut bias.grad, &g.d_bias);
            Ok(g.d_input)
        }
        (Layer::MaxPool, Cache::Argmax(shape, argmax)) => maxpool2_backward(shape, &argmax, &upstream),
        (Layer::Relu, Cache::Input(input)) => relu_backward(&input, &upstream),
        (Layer::Flatten, Cache::Shape(shape)) => upstream.reshape(shape),
        (Layer::SuPool(pool), Cache::Pool(caches)) => {
            let n = upstream.n();
            if caches.len() != n {
                return Err(NnError::Shape(format!(
                    "SU pooling backward for {n} samples, forward cached {}",
                    caches.len()
                )));
            }
            let mut d_input = Tensor4::zeros([n, pool.input_width(), 1, 1]);
            for (s, pc) in caches.iter().enumerate() {
                let up: Vec<f64> = upstream.sample(s).iter().map(|v| v.as_f64()).collect();
                let g = pool.backward(pc, &up)?;
                for (o, &v) in d_input.sample_mut(s).iter_mut().zip(&g) {
                    *o = T::lit(v);
                }
            }
            Ok(d_input)
        }
        _ => Err(NnError::MissingForwardCache),
    }
}

fn accumulate<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
