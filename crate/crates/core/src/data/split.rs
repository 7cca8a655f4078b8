use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Result};

pub const STD_FLOOR: f64 = 1e-6;

/// Stratified train/test indices. Each class contributes
/// `round(fraction·n_k)` training samples, clamped to `1..n_k`, so both
/// sides see every class. Both index lists are shuffled.
pub fn split_indices(labels: &[usize], num_classes: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Invalid(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        match members.len() {
            0 => continue,
            1 => return Err(DataError::ClassTooSmall { class, count: 1 }),
            n => {
                members.shuffle(&mut rng);
                let k = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
                train.extend_from_slice(&members[..k]);
                test.extend_from_slice(&members[k..]);
            }
        }
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((train, test))
}

pub fn split_dataset(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(dataset.labels(), dataset.num_classes(), train_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Per-channel affine normalization fitted on a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    /// Population mean and standard deviation of each channel over all
    /// samples and pixels, accumulated in f64.
    pub fn fit(train: &Dataset) -> Result<Self> {
        if train.is_empty() {
            return Err(DataError::Invalid("cannot standardize on an empty training set".into()));
        }
        let [c, h, w] = train.sample_shape();
        let plane = h * w;
        let count = (train.len() * plane) as f64;
        let mut mean = vec![0.0; c];
        let mut sq = vec![0.0; c];
        for i in 0..train.len() {
            for (ch, values) in train.images().sample(i).chunks_exact(plane).enumerate() {
                mean[ch] += values.iter().map(|&v| v as f64).sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        for i in 0..train.len() {
            for (ch, values) in train.images().sample(i).chunks_exact(plane).enumerate() {
                sq[ch] += values.iter().map(|&v| (v as f64 - mean[ch]).powi(2)).sum::<f64>();
            }
        }
        let std = sq.iter().map(|s| (s / count).sqrt()).collect();
        Ok(Self { mean, std })
    }

    /// `(x − μ_c) / max(σ_c, STD_FLOOR)` in place.
    pub fn apply(&self, dataset: &mut Dataset) -> Result<()> {
        let [c, h, w] = dataset.sample_shape();
        if c != self.mean.len() {
            return Err(DataError::Invalid(format!(
                "dataset has {c} channels, statistics have {}",
                self.mean.len()
            )));
        }
        let plane = h * w;
        let scale: Vec<f64> = self.std.iter().map(|s| 1.0 / s.max(STD_FLOOR)).collect();
        let data = dataset.images_mut().data_mut();
        // Planes cycle through the channels sample by sample.
        for (idx, chunk) in data.chunks_exact_mut(plane).enumerate() {
            let ch = idx % c;
            for v in chunk {
                *v = ((*v as f64 - self.mean[ch]) * scale[ch]) as f32;
            }
        }
        Ok(())
    }
}

/// Fits on `train` and transforms both sets with the training statistics.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Standardization)> {
    let stats = Standardization::fit(train)?;
    let mut train = train.clone();
    let mut test = test.clone();
    stats.apply(&mut train)?;
    stats.apply(&mut test)?;
    Ok((train, test, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor4;

    fn labelled(per_class: &[usize]) -> Dataset {
        let labels: Vec<usize> = per_class
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n))
            .collect();
        let n = labels.len();
        let images = Tensor4::from_vec([n, 1, 1, 1], (0..n).map(|i| i as f32).collect()).unwrap();
        Dataset::from_parts(images, labels, vec![]).unwrap()
    }

    #[test]
    fn eighty_twenty_per_class() {
        let ds = labelled(&[100, 100, 100]);
        let (train, test) = split_dataset(&ds, 0.8, 1).unwrap();
        assert_eq!(train.class_counts(), vec![80; 3]);
        assert_eq!(test.class_counts(), vec![20; 3]);
    }

    #[test]
    fn disjoint_exhaustive_deterministic() {
        let ds = labelled(&[7, 13, 2]);
        let (a, b) = split_indices(ds.labels(), 3, 0.7, 9).unwrap();
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..22).collect::<Vec<_>>());
        assert_eq!(split_indices(ds.labels(), 3, 0.7, 9).unwrap(), (a, b));
    }

    #[test]
    fn rejects_singleton_class_and_bad_fraction() {
        let ds = labelled(&[5, 1]);
        assert!(matches!(split_dataset(&ds, 0.8, 0), Err(DataError::ClassTooSmall { class: 1, count: 1 })));
        assert!(split_dataset(&labelled(&[5]), 1.0, 0).is_err());
        assert!(split_dataset(&labelled(&[5]), 0.0, 0).is_err());
    }

    #[test]
    fn standardize_uses_train_statistics() {
        let train_px: Vec<f32> = (0..40).map(|i| if i % 2 == 0 { i as f32 } else { 3.0 }).collect();
        let train = Dataset::from_parts(Tensor4::from_vec([10, 2, 1, 2], train_px).unwrap(), vec![0; 10], vec![]).unwrap();
        // Test set shifted by +100 in channel 0.
        let test_px: Vec<f32> = (0..40).map(|i| if i % 4 < 2 { i as f32 + 100.0 } else { 3.0 }).collect();
        let test = Dataset::from_parts(Tensor4::from_vec([10, 2, 1, 2], test_px).unwrap(), vec![0; 10], vec![]).unwrap();
        let (tr, te, stats) = standardize(&train, &test).unwrap();

        let fitted = Standardization::fit(&tr).unwrap();
        assert!(fitted.mean[0].abs() < 1e-5 && (fitted.std[0] - 1.0).abs() < 1e-3);
        // Channel 1 of train is not constant (it mixes i and 3); both checks hold.
        assert!(fitted.mean[1].abs() < 1e-5 && (fitted.std[1] - 1.0).abs() < 1e-3);

        let te_mean = Standardization::fit(&te).unwrap().mean[0];
        assert!(te_mean > 1.0, "test set must keep its shift, got mean {te_mean}");
        assert!(stats.std.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let train = Dataset::from_parts(Tensor4::from_vec([3, 1, 1, 1], vec![5.0; 3]).unwrap(), vec![0, 0, 0], vec![]).unwrap();
        let (tr, _, stats) = standardize(&train, &train).unwrap();
        assert_eq!(stats.std, vec![0.0]);
        assert!(tr.images().data().iter().all(|&v| v == 0.0));
    }
}
