use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::metrics::{EpochRecord, RunMetrics, RunSettings, RunStatus};
use super::{HarnessError, Result, TrainConfig};
use crate::data::{read_tensor_file, split_dataset, standardize, synth_dataset, Dataset, Standardization};
use crate::nn::{argmax_rows, softmax_cross_entropy, AdamConfig, Network, NnError, Tensor4};
use crate::zoo::{build_model, ModelId, ModelSpec};

const EVAL_BATCH: usize = 256;

/// Train/test sets shared by every run of an experiment.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub standardization: Option<Standardization>,
    /// Where the data came from, echoed into run settings.
    pub description: String,
}

/// Loads or generates the dataset, splits it, and standardizes it.
pub fn prepare_data(cfg: &TrainConfig) -> Result<PreparedData> {
    let (full, description) = match &cfg.dataset {
        Some(path) => (read_tensor_file(path)?, path.display().to_string()),
        None => {
            let s = &cfg.synth;
            let description = format!(
                "synth:{}x{}/class,{}x{}x{},noise={}/{},seed={}",
                s.num_classes, s.samples_per_class, s.channels, s.height, s.width, s.spectral_noise, s.spatial_noise, s.seed
            );
            (synth_dataset(s)?, description)
        }
    };
    let (train, test) = split_dataset(&full, cfg.train_fraction, cfg.split_seed)?;
    let (train, test, standardization) = if cfg.standardize {
        let (a, b, s) = standardize(&train, &test)?;
        (a, b, Some(s))
    } else {
        (train, test, None)
    };
    Ok(PreparedData {
        train,
        test,
        standardization,
        description,
    })
}

/// Fraction of `data` classified correctly.
pub fn evaluate(net: &Network<f32>, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_BATCH) {
        let logits = net.forward(&data.images().select(chunk))?;
        correct += argmax_rows(&logits)
            .iter()
            .zip(chunk)
            .filter(|(p, &i)| **p == data.labels()[i])
            .count();
    }
    Ok(correct as f64 / data.len() as f64)
}

fn model_spec(cfg: &TrainConfig, model: ModelId, data: &PreparedData) -> ModelSpec {
    ModelSpec::new(model)
        .with_d(cfg.d)
        .with_input(data.train.sample_shape())
        .with_classes(data.train.num_classes())
}

/// One seeded training run of `model`. Non-finite losses end the run with
/// [`RunStatus::Diverged`]; other failures are errors.
pub fn train(cfg: &TrainConfig, model: ModelId, seed: u64, data: &PreparedData) -> Result<RunMetrics> {
    train_observed(cfg, model, seed, data, &mut |_, _| {})
}

/// As [`train`], calling `on_epoch(epoch, record)` after each epoch.
pub fn train_observed(
    cfg: &TrainConfig,
    model: ModelId,
    seed: u64,
    data: &PreparedData,
    on_epoch: &mut dyn FnMut(usize, &EpochRecord),
) -> Result<RunMetrics> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(HarnessError::Config("training set is empty".into()));
    }
    let spec = model_spec(cfg, model, data);
    let mut net: Network<f32> = build_model(&spec, seed)?;
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut order_rng = ChaCha8Rng::seed_from_u64(seed);
    order_rng.set_stream(1);

    let mut metrics = RunMetrics {
        model,
        d: cfg.d,
        seed,
        param_count: net.param_count(),
        settings: Some(RunSettings {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            lr: cfg.lr,
            train_fraction: cfg.train_fraction,
            split_seed: cfg.split_seed,
            standardize: cfg.standardize,
            dataset: data.description.clone(),
            input_shape: spec.input_shape,
            num_classes: spec.num_classes,
            train_size: data.train.len(),
            test_size: data.test.len(),
        }),
        status: RunStatus::Completed,
        history: Vec::with_capacity(cfg.epochs),
        max_test_accuracy: None,
        peak_epoch: None,
        thresholds: Vec::new(),
    };

    let mut order: Vec<usize> = (0..data.train.len()).collect();
    'epochs: for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(cfg.batch_size) {
            match train_step(&mut net, &data.train, batch, &adam) {
                Ok((loss, hits)) => {
                    loss_sum += loss * batch.len() as f64;
                    correct += hits;
                }
                Err(HarnessError::Nn(NnError::NonFinite(_))) | Err(HarnessError::Diverged) => {
                    metrics.status = RunStatus::Diverged { epoch };
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let test_accuracy = evaluate(&net, &data.test)?;
        let record = EpochRecord {
            train_loss: loss_sum / data.train.len() as f64,
            train_accuracy: correct as f64 / data.train.len() as f64,
            test_accuracy,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(epoch, &record);
        metrics.history.push(record);
    }
    metrics.derive(&cfg.thresholds);
    Ok(metrics)
}

fn train_step(net: &mut Network<f32>, data: &Dataset, batch: &[usize], adam: &AdamConfig) -> Result<(f64, usize)> {
    let x: Tensor4<f32> = data.images().select(batch);
    let labels: Vec<usize> = batch.iter().map(|&i| data.labels()[i]).collect();
    let logits = net.forward_train(&x)?;
    let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
    if !loss.is_finite() {
        return Err(HarnessError::Diverged);
    }
    let hits = argmax_rows(&logits).iter().zip(&labels).filter(|(p, l)| p == l).count();
    net.zero_grad();
    net.backward(&grad)?;
    net.adam_step(adam);
    Ok((loss as f64, hits))
}

/// Prepares the configured data and trains `cfg.model` once.
pub fn train_single(cfg: &TrainConfig, seed: u64) -> Result<RunMetrics> {
    let data = prepare_data(cfg)?;
    train(cfg, cfg.model, seed, &data)
}
