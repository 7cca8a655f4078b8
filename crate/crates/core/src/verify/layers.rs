//! Backward passes of the network layers against central finite
//! differences. The 32-bit analytic gradient is compared with differences
//! of the same function evaluated in 64-bit, so the oracle is not limited
//! by 32-bit rounding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PropertyResult, Tally};
use crate::nn::gradcheck::{central_difference, relative_error};
use crate::nn::{softmax_cross_entropy, LayerSpec, Network, Tensor4};
use crate::Scalar;

const STEP: f64 = 1e-6;
const TOL_32: f64 = 1e-4;
const TOL_64: f64 = 1e-7;
const TRIALS_PER_CASE: usize = 5;

struct Case {
    name: &'static str,
    input: [usize; 4],
    specs: Vec<LayerSpec>,
}

fn cases() -> Vec<Case> {
    use LayerSpec::*;
    vec![
        Case {
            name: "conv2d_stride1",
            input: [1, 2, 4, 4],
            specs: vec![Conv2d { out_channels: 3, stride: 1 }],
        },
        Case {
            name: "conv2d_stride2",
            input: [2, 2, 5, 5],
            specs: vec![Conv2d { out_channels: 3, stride: 2 }],
        },
        Case {
            name: "maxpool2",
            input: [2, 2, 4, 4],
            specs: vec![MaxPool2],
        },
        Case {
            name: "relu",
            input: [2, 3, 2, 2],
            specs: vec![Relu],
        },
        Case {
            name: "flatten",
            input: [2, 2, 3, 3],
            specs: vec![Flatten],
        },
        Case {
            name: "dense",
            input: [3, 6, 1, 1],
            specs: vec![Dense { out_features: 4 }],
        },
        Case {
            name: "su_pool",
            input: [2, 8, 1, 1],
            specs: vec![SuPool { d: 3 }],
        },
        Case {
            name: "small_network",
            input: [2, 2, 8, 8],
            specs: vec![
                Conv2d { out_channels: 3, stride: 2 },
                Relu,
                MaxPool2,
                Flatten,
                Dense { out_features: 8 },
                SuPool { d: 3 },
                Dense { out_features: 4 },
            ],
        },
    ]
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn to<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn set_params(net: &mut Network<f64>, theta: &[f64]) {
    let mut offset = 0;
    for p in net.params_mut() {
        let len = p.value.len();
        p.value.copy_from_slice(&theta[offset..offset + len]);
        offset += len;
    }
}

/// Analytic gradient of `Σ w ⊙ net(x)` with respect to `[x, params]`.
fn analytic<T: Scalar>(net: &mut Network<T>, x: &Tensor4<T>, w: &[T]) -> Option<Vec<f64>> {
    let out = net.forward_train(x).ok()?;
    let upstream = Tensor4::from_vec(out.shape(), w.to_vec()).ok()?;
    net.zero_grad();
    let dx = net.backward(&upstream).ok()?;
    let mut g: Vec<f64> = dx.data().iter().map(|v| v.as_f64()).collect();
    for p in net.params() {
        g.extend(p.grad.iter().map(|v| v.as_f64()));
    }
    Some(g)
}

fn check_case(case: &Case, seed: u64) -> [PropertyResult; 2] {
    let [n, c, h, w] = case.input;
    let mut t32 = Tally::new(case.name, None, TOL_32);
    let mut t64 = Tally::new(case.name, None, TOL_64);
    for trial in 0..TRIALS_PER_CASE {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((trial as u64) << 32));
        let Ok(mut net32) = Network::<f32>::new([c, h, w], &case.specs, rng.random()) else {
            t32.record_error();
            t64.record_error();
            continue;
        };
        let mut net64 = Network::<f64>::new([c, h, w], &case.specs, 0).expect("same specs");
        // Share the 32-bit parameters so both precisions compute one function.
        let theta_params: Vec<f64> = net32.params().flat_map(|p| p.value.iter().map(|&v| v as f64)).collect();
        set_params(&mut net64, &theta_params);

        let x: Vec<f64> = to::<f32>(&uniform(&mut rng, n * c * h * w)).iter().map(|&v| v as f64).collect();
        let out_len = n * net32.output_width();
        let weights: Vec<f64> = to::<f32>(&uniform(&mut rng, out_len)).iter().map(|&v| v as f64).collect();

        let x32 = Tensor4::from_vec(case.input, to::<f32>(&x)).expect("sized");
        let x64 = Tensor4::from_vec(case.input, x.clone()).expect("sized");
        let g32 = analytic(&mut net32, &x32, &to::<f32>(&weights));
        let g64 = analytic(&mut net64, &x64, &weights);

        let mut theta = x.clone();
        theta.extend(&theta_params);
        let input_len = x.len();
        let mut oracle_net = net64.clone();
        let fd = central_difference(
            |t| {
                set_params(&mut oracle_net, &t[input_len..]);
                let xi = Tensor4::from_vec(case.input, t[..input_len].to_vec()).expect("sized");
                oracle_net
                    .forward(&xi)
                    .map_or(f64::NAN, |o| o.data().iter().zip(&weights).map(|(a, b)| a * b).sum())
            },
            &theta,
            STEP,
        );
        match g32 {
            Some(g) => t32.record(relative_error(&g, &fd, 1e-12)),
            None => t32.record_error(),
        }
        match g64 {
            Some(g) => t64.record(relative_error(&g, &fd, 1e-12)),
            None => t64.record_error(),
        }
    }
    let mut r32 = t32.finish();
    let mut r64 = t64.finish();
    r32.name = format!("layer_{}_f32", case.name);
    r64.name = format!("layer_{}_f64", case.name);
    [r32, r64]
}

fn check_loss(seed: u64) -> [PropertyResult; 2] {
    let mut t32 = Tally::new("", None, TOL_32);
    let mut t64 = Tally::new("", None, TOL_64);
    let (n, k) = (3, 5);
    for trial in 0..TRIALS_PER_CASE {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((trial as u64) << 32) ^ 0xce);
        let logits: Vec<f64> = to::<f32>(&uniform(&mut rng, n * k)).iter().map(|&v| 3.0 * v as f64).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let fd = central_difference(
            |z| {
                let t = Tensor4::from_rows(n, k, z.to_vec()).expect("sized");
                softmax_cross_entropy(&t, &labels).map_or(f64::NAN, |(l, _)| l)
            },
            &logits,
            STEP,
        );
        let g32 = softmax_cross_entropy(&Tensor4::from_rows(n, k, to::<f32>(&logits)).expect("sized"), &labels)
            .map(|(_, g)| g.data().iter().map(|&v| v as f64).collect::<Vec<_>>());
        let g64 = softmax_cross_entropy(&Tensor4::from_rows(n, k, logits.clone()).expect("sized"), &labels)
            .map(|(_, g)| g.into_data());
        match g32 {
            Ok(g) => t32.record(relative_error(&g, &fd, 1e-12)),
            Err(_) => t32.record_error(),
        }
        match g64 {
            Ok(g) => t64.record(relative_error(&g, &fd, 1e-12)),
            Err(_) => t64.record_error(),
        }
    }
    let mut r32 = t32.finish();
    let mut r64 = t64.finish();
    r32.name = "layer_softmax_cross_entropy_f32".into();
    r64.name = "layer_softmax_cross_entropy_f64".into();
    [r32, r64]
}

/// Gradient checks for every layer kind, the loss, and a small mixed
/// network: relative error ≤ 1e-4 at 32-bit and ≤ 1e-7 at 64-bit.
pub fn layer_gradient_checks(seed: u64) -> Vec<PropertyResult> {
    let mut out: Vec<PropertyResult> = cases().iter().flat_map(|c| check_case(c, seed)).collect();
    out.extend(check_loss(seed));
    out
}
