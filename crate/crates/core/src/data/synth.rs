//! Synthetic multispectral scenes for desk-scale experiments.
//!
//! Class `k` has a spectral signature `μ_k ∈ [0,1]^c` and a low-frequency
//! spatial pattern `p_k(y, x) = 1 + a·sin(2π(f_y·y/h + f_x·x/w) + φ)`. A
//! sample of class `k` is
//!
//! ```text
//! img[ch, y, x] = (μ_k[ch] + ε[ch]) · p_k(y, x) + η[ch, y, x]
//! ε ~ N(0, spectral_noise²) per sample,  η ~ N(0, spatial_noise²) per pixel
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result};
use crate::nn::Tensor4;

/// Signature draws per class before restarting the whole set.
const MAX_SIGNATURE_DRAWS: usize = 2_000;
const MAX_RESTARTS: usize = 50;
const PATTERN_AMPLITUDE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub spectral_noise: f64,
    pub spatial_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_classes: 4,
            samples_per_class: 500,
            channels: 13,
            height: 16,
            width: 16,
            spectral_noise: 0.1,
            spatial_noise: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("num_classes", self.num_classes),
            ("samples_per_class", self.samples_per_class),
            ("channels", self.channels),
            ("height", self.height),
            ("width", self.width),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(DataError::Config(format!("{name} must be positive")));
        }
        if self.num_classes > 1 << 16 {
            return Err(DataError::Config("num_classes must fit in 16 bits".into()));
        }
        for (name, v) in [("spectral_noise", self.spectral_noise), ("spatial_noise", self.spatial_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(DataError::Config(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Minimum pairwise signature distance the generator aims for, `0.5·√c`.
    pub fn target_separation(&self) -> f64 {
        0.5 * (self.channels as f64).sqrt()
    }
}

/// Diagnostics from signature drawing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthStats {
    /// Rejected signature draws, summed over classes.
    pub retries: usize,
    /// Smallest pairwise distance between the final signatures.
    pub min_separation: f64,
    /// Whether every pair reached [`SynthConfig::target_separation`].
    pub separated: bool,
}

struct Pattern {
    fy: f64,
    fx: f64,
    phase: f64,
}

impl Pattern {
    fn at(&self, y: usize, x: usize, h: usize, w: usize) -> f64 {
        let t = self.fy * y as f64 / h as f64 + self.fx * x as f64 / w as f64;
        1.0 + PATTERN_AMPLITUDE * (std::f64::consts::TAU * t + self.phase).sin()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Draws each class signature in turn, redrawing until it is at least the
/// target distance from all earlier ones. A class that cannot be placed
/// within the draw cap restarts the whole set; after the restart cap the
/// set with the largest minimum distance is kept.
fn draw_signatures(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, usize) {
    let target = cfg.target_separation();
    let mut retries = 0;
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for _ in 0..MAX_RESTARTS {
        let mut signatures: Vec<Vec<f64>> = Vec::with_capacity(cfg.num_classes);
        let mut closest_overall = f64::INFINITY;
        for _ in 0..cfg.num_classes {
            let mut class_best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..MAX_SIGNATURE_DRAWS {
                let candidate: Vec<f64> = (0..cfg.channels).map(|_| rng.random::<f64>()).collect();
                let closest = signatures
                    .iter()
                    .map(|s| distance(s, &candidate))
                    .fold(f64::INFINITY, f64::min);
                let accepted = closest >= target;
                if class_best.as_ref().is_none_or(|(d, _)| closest > *d) {
                    class_best = Some((closest, candidate));
                }
                if accepted {
                    break;
                }
                retries += 1;
            }
            let (closest, signature) = class_best.expect("at least one draw");
            closest_overall = closest_overall.min(closest);
            signatures.push(signature);
        }
        if closest_overall >= target {
            return (signatures, retries);
        }
        if best.as_ref().is_none_or(|(d, _)| closest_overall > *d) {
            best = Some((closest_overall, signatures));
        }
    }
    (best.expect("at least one restart").1, retries)
}

pub fn synth_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    synth_dataset_with_stats(cfg).map(|(ds, _)| ds)
}

/// Samples are ordered by class. Bit-identical for equal configs.
pub fn synth_dataset_with_stats(cfg: &SynthConfig) -> Result<(Dataset, SynthStats)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (signatures, retries) = draw_signatures(cfg, &mut rng);
    let patterns: Vec<Pattern> = (0..cfg.num_classes)
        .map(|_| Pattern {
            fy: rng.random_range(0..=2) as f64,
            fx: rng.random_range(1..=2) as f64,
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        })
        .collect();

    let (c, h, w) = (cfg.channels, cfg.height, cfg.width);
    let n = cfg.num_classes * cfg.samples_per_class;
    let spectral = Normal::new(0.0, cfg.spectral_noise).expect("validated");
    let spatial = Normal::new(0.0, cfg.spatial_noise).expect("validated");
    let mut data = Vec::with_capacity(n * c * h * w);
    let mut labels = Vec::with_capacity(n);
    let mut signature = vec![0.0; c];
    for (k, (mu, pattern)) in signatures.iter().zip(&patterns).enumerate() {
        let modulation: Vec<f64> = (0..h * w).map(|i| pattern.at(i / w, i % w, h, w)).collect();
        for _ in 0..cfg.samples_per_class {
            for (s, &m) in signature.iter_mut().zip(mu) {
                *s = m + spectral.sample(&mut rng);
            }
            for &s in &signature {
                for &p in &modulation {
                    data.push((s * p + spatial.sample(&mut rng)) as f32);
                }
            }
            labels.push(k);
        }
    }

    let mut min_separation = f64::INFINITY;
    for (i, a) in signatures.iter().enumerate() {
        for b in &signatures[i + 1..] {
            min_separation = min_separation.min(distance(a, b));
        }
    }
    let stats = SynthStats {
        retries,
        min_separation,
        separated: min_separation >= cfg.target_separation(),
    };
    let images = Tensor4::from_vec([n, c, h, w], data).expect("sized above");
    let names = (0..cfg.num_classes).map(|k| format!("class{k}")).collect();
    Ok((Dataset::new(images, labels, cfg.num_classes, names)?, stats))
}

/// Training accuracy of a nearest-centroid classifier on per-sample channel
/// means. A cheap learnability check for a dataset.
pub fn nearest_centroid_accuracy(ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let [c, h, w] = ds.sample_shape();
    let features: Vec<Vec<f64>> = (0..ds.len())
        .map(|i| {
            ds.images()
                .sample(i)
                .chunks_exact(h * w)
                .map(|plane| plane.iter().map(|&v| v as f64).sum::<f64>() / (h * w) as f64)
                .collect()
        })
        .collect();
    let k = ds.num_classes();
    let mut centroids = vec![vec![0.0; c]; k];
    let counts = ds.class_counts();
    for (f, &l) in features.iter().zip(ds.labels()) {
        for (acc, v) in centroids[l].iter_mut().zip(f) {
            *acc += v / counts[l] as f64;
        }
    }
    let correct = features
        .iter()
        .zip(ds.labels())
        .filter(|(f, &l)| {
            let pred = (0..k)
                .filter(|&j| counts[j] > 0)
                .min_by(|&a, &b| distance(f, &centroids[a]).total_cmp(&distance(f, &centroids[b])))
                .expect("non-empty dataset has a class");
            pred == l
        })
        .count();
    correct as f64 / ds.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(spectral: f64, spatial: f64) -> SynthConfig {
        SynthConfig {
            samples_per_class: 20,
            height: 8,
            width: 8,
            spectral_noise: spectral,
            spatial_noise: spatial,
            seed: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn noiseless_classes_are_constant() {
        let ds = synth_dataset(&small(0.0, 0.0)).unwrap();
        let first = ds.images().sample(0).to_vec();
        for i in 1..20 {
            assert_eq!(ds.images().sample(i), first.as_slice());
        }
        assert_ne!(ds.images().sample(20), first.as_slice());
    }

    #[test]
    fn deterministic() {
        let a = synth_dataset(&small(0.1, 0.1)).unwrap();
        let b = synth_dataset(&small(0.1, 0.1)).unwrap();
        assert!(a
            .images()
            .data()
            .iter()
            .zip(b.images().data())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(a.labels(), b.labels());
        let other = synth_dataset(&SynthConfig { seed: 4, ..small(0.1, 0.1) }).unwrap();
        assert_ne!(a.images().data(), other.images().data());
    }

    #[test]
    fn four_class_signatures_are_separated() {
        let (_, stats) = synth_dataset_with_stats(&small(0.1, 0.1)).unwrap();
        assert!(stats.separated, "{stats:?}");
        assert!(stats.min_separation >= 0.5 * 13f64.sqrt());
    }

    #[test]
    fn default_noise_is_learnable() {
        let cfg = SynthConfig {
            samples_per_class: 100,
            ..SynthConfig::default()
        };
        let ds = synth_dataset(&cfg).unwrap();
        assert_eq!(ds.class_counts(), vec![100; 4]);
        assert!(nearest_centroid_accuracy(&ds) >= 0.95);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(synth_dataset(&SynthConfig { channels: 0, ..SynthConfig::default() }).is_err());
        assert!(synth_dataset(&SynthConfig { spatial_noise: f64::NAN, ..SynthConfig::default() }).is_err());
        assert!(synth_dataset(&SynthConfig { spectral_noise: -1.0, ..SynthConfig::default() }).is_err());
    }
}
