use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::zoo::ModelId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Non-finite loss in the given 1-based epoch; the history stops before it.
    Diverged { epoch: usize },
    /// The run could not start or aborted with an error.
    Failed { message: String },
}

/// Epochs to reach one accuracy level; `None` if never reached.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdHit {
    pub threshold: f64,
    pub epoch: Option<usize>,
}

/// Training settings echoed into every run so results are self-describing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub standardize: bool,
    pub dataset: String,
    pub input_shape: [usize; 3],
    pub num_classes: usize,
    pub train_size: usize,
    pub test_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub model: ModelId,
    pub d: usize,
    pub seed: u64,
    pub param_count: usize,
    pub settings: Option<RunSettings>,
    pub status: RunStatus,
    pub history: Vec<EpochRecord>,
    pub max_test_accuracy: Option<f64>,
    pub peak_epoch: Option<usize>,
    pub thresholds: Vec<ThresholdHit>,
}

impl RunMetrics {
    pub fn failed(model: ModelId, d: usize, seed: u64, message: impl Into<String>) -> Self {
        Self {
            model,
            d,
            seed,
            param_count: 0,
            settings: None,
            status: RunStatus::Failed { message: message.into() },
            history: Vec::new(),
            max_test_accuracy: None,
            peak_epoch: None,
            thresholds: Vec::new(),
        }
    }

    pub fn test_accuracies(&self) -> Vec<f64> {
        self.history.iter().map(|e| e.test_accuracy).collect()
    }

    pub fn is_completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Epochs to `threshold` as recorded for this run.
    pub fn epochs_to(&self, threshold: f64) -> Option<usize> {
        self.thresholds
            .iter()
            .find(|h| h.threshold == threshold)
            .and_then(|h| h.epoch)
    }

    /// The history with wall times removed, for determinism comparisons.
    pub fn history_without_timing(&self) -> Vec<[f64; 3]> {
        self.history
            .iter()
            .map(|e| [e.train_loss, e.train_accuracy, e.test_accuracy])
            .collect()
    }

    /// Recomputes the derived fields from `history`.
    pub(crate) fn derive(&mut self, thresholds: &[f64]) {
        let acc = self.test_accuracies();
        self.peak_epoch = peak_epoch(&acc);
        self.max_test_accuracy = self.peak_epoch.map(|p| acc[p - 1]);
        self.thresholds = thresholds
            .iter()
            .map(|&threshold| ThresholdHit {
                threshold,
                epoch: epochs_to_threshold(&acc, threshold).ok().flatten(),
            })
            .collect();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Report(format!("bad run file: {e}")))
    }
}

/// 1-based index of the first epoch with accuracy `≥ threshold`.
pub fn epochs_to_threshold(history: &[f64], threshold: f64) -> Result<Option<usize>> {
    if history.is_empty() {
        return Err(HarnessError::EmptyHistory);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(HarnessError::Config(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(history.iter().position(|&a| a >= threshold).map(|i| i + 1))
}

/// 1-based index of the first maximum.
pub fn peak_epoch(history: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &a) in history.iter().enumerate() {
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    best.map(|(i, _)| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        assert_eq!(epochs_to_threshold(&[0.5, 0.85, 0.92], 0.9).unwrap(), Some(3));
        assert_eq!(epochs_to_threshold(&[0.95, 0.2], 0.9).unwrap(), Some(1));
        assert_eq!(epochs_to_threshold(&[0.1, 0.2], 0.9).unwrap(), None);
        assert!(matches!(epochs_to_threshold(&[], 0.9), Err(HarnessError::EmptyHistory)));
        assert!(epochs_to_threshold(&[0.5], 1.0).is_err());
    }

    #[test]
    fn peak_is_first_maximum() {
        assert_eq!(peak_epoch(&[0.1, 0.7, 0.7, 0.3]), Some(2));
        assert_eq!(peak_epoch(&[]), None);
    }

    #[test]
    fn derive_is_consistent() {
        let mut m = RunMetrics::failed(ModelId::M4, 3, 1, "");
        m.status = RunStatus::Completed;
        m.history = [0.4, 0.85, 0.91, 0.88]
            .iter()
            .map(|&a| EpochRecord {
                train_loss: 1.0,
                train_accuracy: a,
                test_accuracy: a,
                seconds: 0.0,
            })
            .collect();
        m.derive(&[0.8, 0.9]);
        assert_eq!(m.peak_epoch, Some(3));
        assert_eq!(m.max_test_accuracy, Some(0.91));
        assert_eq!(m.epochs_to(0.8), Some(2));
        assert_eq!(m.epochs_to(0.9), Some(3));
        let back = RunMetrics::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }
}
