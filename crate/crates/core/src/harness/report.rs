//! Aggregation of stored runs into per-model summaries, a model
//! comparison, and a CSV summary. Everything here is a pure function of
//! the run records, so re-aggregating stored runs reproduces the report
//! byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{RunMetrics, RunSettings, RunStatus};
use crate::zoo::{ModelId, ModelSpec, DEFAULT_INPUT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (`n − 1` denominator); 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        // Shifting by the first value keeps a constant series exactly constant.
        let shift = values[0];
        let mean_offset = values.iter().map(|v| v - shift).sum::<f64>() / n as f64;
        let mean = shift + mean_offset;
        let std = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - shift - mean_offset).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Some(Self {
            n,
            mean,
            median,
            std,
            min: sorted[0],
            max: sorted[n - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub threshold: f64,
    /// Completed runs that reached the threshold.
    pub reached: usize,
    /// Completed runs that never reached it; excluded from `epochs`.
    pub not_reached: usize,
    pub epochs: Option<Stats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelId,
    pub description: String,
    pub d: usize,
    pub param_count: usize,
    /// Count reported in the reference table, when the model is at the
    /// reference configuration (13×64×64, d = 3, 10 classes).
    pub reference_param_count: Option<usize>,
    pub seeds: Vec<u64>,
    pub completed: usize,
    pub diverged: usize,
    pub failed: usize,
    pub max_test_accuracy: Option<Stats>,
    pub thresholds: Vec<ThresholdSummary>,
    pub peak_epoch: Option<Stats>,
    pub epoch_seconds: Option<Stats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub model: ModelId,
    pub d: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Distinct settings across runs, normally exactly one.
    pub settings: Vec<RunSettings>,
    pub models: Vec<ModelSummary>,
    pub failures: Vec<FailedRun>,
}

fn at_reference_config(d: usize, settings: Option<&RunSettings>) -> bool {
    d == 3 && settings.is_some_and(|s| s.input_shape == DEFAULT_INPUT && s.num_classes == 10)
}

/// Groups runs by `(model, d)` and summarizes each group. Divergent and
/// failed runs are counted but excluded from every statistic.
pub fn aggregate(runs: &[RunMetrics]) -> ExperimentReport {
    let mut groups: BTreeMap<(ModelId, usize), Vec<&RunMetrics>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.model, r.d)).or_default().push(r);
    }
    let mut settings: Vec<RunSettings> = Vec::new();
    let mut failures = Vec::new();
    let mut models = Vec::new();
    for ((model, d), mut group) in groups {
        group.sort_by_key(|r| r.seed);
        for r in &group {
            if let Some(s) = &r.settings {
                if !settings.contains(s) {
                    settings.push(s.clone());
                }
            }
            if let RunStatus::Failed { message } = &r.status {
                failures.push(FailedRun {
                    model,
                    d,
                    seed: r.seed,
                    message: message.clone(),
                });
            }
        }
        let done: Vec<&RunMetrics> = group.iter().copied().filter(|r| r.is_completed()).collect();
        let threshold_levels: Vec<f64> = done
            .first()
            .map(|r| r.thresholds.iter().map(|t| t.threshold).collect())
            .unwrap_or_default();
        let thresholds = threshold_levels
            .iter()
            .map(|&t| {
                let hits: Vec<f64> = done.iter().filter_map(|r| r.epochs_to(t)).map(|e| e as f64).collect();
                ThresholdSummary {
                    threshold: t,
                    reached: hits.len(),
                    not_reached: done.len() - hits.len(),
                    epochs: Stats::of(&hits),
                }
            })
            .collect();
        let collect = |f: &dyn Fn(&RunMetrics) -> Option<f64>| -> Vec<f64> { done.iter().filter_map(|r| f(r)).collect() };
        let seconds: Vec<f64> = done.iter().flat_map(|r| r.history.iter().map(|e| e.seconds)).collect();
        let param_count = group.iter().map(|r| r.param_count).max().unwrap_or(0);
        let first_settings = group.iter().find_map(|r| r.settings.as_ref());
        models.push(ModelSummary {
            model,
            description: model.description().to_string(),
            d,
            param_count,
            reference_param_count: at_reference_config(d, first_settings).then(|| model.reference_param_count()),
            seeds: group.iter().map(|r| r.seed).collect(),
            completed: done.len(),
            diverged: group
                .iter()
                .filter(|r| matches!(r.status, RunStatus::Diverged { .. }))
                .count(),
            failed: group.iter().filter(|r| matches!(r.status, RunStatus::Failed { .. })).count(),
            max_test_accuracy: Stats::of(&collect(&|r| r.max_test_accuracy)),
            thresholds,
            peak_epoch: Stats::of(&collect(&|r| r.peak_epoch.map(|p| p as f64))),
            epoch_seconds: Stats::of(&seconds),
        });
    }
    ExperimentReport {
        settings,
        models,
        failures,
    }
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn opt(value: Option<f64>, precision: usize) -> String {
    value.map_or_else(|| "-".into(), |v| format!("{v:.precision$}"))
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary(&self, model: ModelId) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model == model)
    }

    /// Comparison table with the reference table's columns: parameters,
    /// mean best test accuracy, mean epochs to each threshold, mean peak
    /// epoch. Threshold cells show `(k/n)` when only k of n runs got there.
    pub fn table(&self) -> String {
        let levels: Vec<f64> = self
            .models
            .iter()
            .flat_map(|m| m.thresholds.iter().map(|t| t.threshold))
            .fold(Vec::new(), |mut acc, t| {
                if !acc.contains(&t) {
                    acc.push(t);
                }
                acc
            });
        let mut header = vec![
            "Model".to_string(),
            "# Params".to_string(),
            "Max Test Acc (%)".to_string(),
        ];
        header.extend(levels.iter().map(|t| format!("{}%", (t * 100.0).round())));
        header.push("Peak Epoch".into());
        header.push("Runs".into());

        let mut rows = vec![header];
        for m in &self.models {
            let mut name = format!("Model {} ({})", &m.model.to_string()[1..], m.description);
            if m.d != 3 {
                name.push_str(&format!(" d={}", m.d));
            }
            let mut row = vec![
                name,
                thousands(m.param_count),
                opt(m.max_test_accuracy.as_ref().map(|s| 100.0 * s.mean), 2),
            ];
            for &t in &levels {
                let cell = match m.thresholds.iter().find(|s| s.threshold == t) {
                    None => "-".into(),
                    Some(s) => {
                        let mean = opt(s.epochs.as_ref().map(|e| e.mean), 2);
                        if s.not_reached > 0 {
                            format!("{mean} ({}/{})", s.reached, s.reached + s.not_reached)
                        } else {
                            mean
                        }
                    }
                };
                row.push(cell);
            }
            row.push(opt(m.peak_epoch.as_ref().map(|s| s.mean), 2));
            row.push(format!("{}/{}", m.completed, m.seeds.len()));
            rows.push(row);
        }

        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in rows.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| {
                    if c == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                let _ = writeln!(out, "{}", rule.join("-|-"));
            }
        }

        let notes: Vec<String> = self
            .models
            .iter()
            .filter_map(|m| {
                let reference = m.reference_param_count?;
                (reference != m.param_count).then(|| {
                    format!(
                        "note: {} has {} parameters as built from its layer diagram; the reference table lists {}.",
                        m.model,
                        thousands(m.param_count),
                        thousands(reference)
                    )
                })
            })
            .collect();
        for n in notes {
            let _ = writeln!(out, "{n}");
        }
        if !self.failures.is_empty() {
            let _ = writeln!(out, "failed runs: {}", self.failures.len());
        }
        out
    }

    /// One row per model with mean, median, and std of every metric.
    pub fn csv(&self) -> String {
        let levels: Vec<f64> = self
            .models
            .first()
            .map(|m| m.thresholds.iter().map(|t| t.threshold).collect())
            .unwrap_or_default();
        let mut out = String::from(
            "model,d,params,reference_params,runs,completed,diverged,failed,\
             max_acc_mean,max_acc_median,max_acc_std",
        );
        for t in &levels {
            let _ = write!(
                out,
                ",epochs_{t}_mean,epochs_{t}_median,epochs_{t}_std,epochs_{t}_reached,epochs_{t}_not_reached"
            );
        }
        out.push_str(",peak_epoch_mean,peak_epoch_median,peak_epoch_std,epoch_seconds_mean\n");
        let stat = |s: Option<&Stats>| -> [String; 3] {
            match s {
                Some(s) => [s.mean.to_string(), s.median.to_string(), s.std.to_string()],
                None => [String::new(), String::new(), String::new()],
            }
        };
        for m in &self.models {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{}",
                m.model,
                m.d,
                m.param_count,
                m.reference_param_count.map(|r| r.to_string()).unwrap_or_default(),
                m.seeds.len(),
                m.completed,
                m.diverged,
                m.failed
            );
            for v in stat(m.max_test_accuracy.as_ref()) {
                let _ = write!(out, ",{v}");
            }
            for &t in &levels {
                let s = m.thresholds.iter().find(|s| s.threshold == t);
                for v in stat(s.and_then(|s| s.epochs.as_ref())) {
                    let _ = write!(out, ",{v}");
                }
                let (r, n) = s.map_or((0, 0), |s| (s.reached, s.not_reached));
                let _ = write!(out, ",{r},{n}");
            }
            for v in stat(m.peak_epoch.as_ref()) {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", opt(m.epoch_seconds.as_ref().map(|s| s.mean), 6));
        }
        out
    }
}

/// Reference-table parameter counts next to the counts of the models as
/// built, at the reference configuration.
pub fn param_count_table() -> String {
    let mut out = String::from("model | built | reference | match\n");
    for id in ModelId::ALL {
        let built = ModelSpec::new(id).param_count().expect("reference models build");
        let reference = id.reference_param_count();
        let _ = writeln!(
            out,
            "{id} | {} | {} | {}",
            thousands(built),
            thousands(reference),
            if built == reference { "yes" } else { "no" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::metrics::EpochRecord;

    fn run(model: ModelId, seed: u64, acc: &[f64]) -> RunMetrics {
        let mut r = RunMetrics::failed(model, 3, seed, "");
        r.status = RunStatus::Completed;
        r.param_count = 10;
        r.history = acc
            .iter()
            .map(|&a| EpochRecord {
                train_loss: 0.5,
                train_accuracy: a,
                test_accuracy: a,
                seconds: 1.0,
            })
            .collect();
        r.derive(&[0.8, 0.9]);
        r
    }

    #[test]
    fn stats_basics() {
        let s = Stats::of(&[0.9; 3]).unwrap();
        assert_eq!((s.mean, s.std, s.median), (0.9, 0.0, 0.9));
        let s = Stats::of(&[1.0, 2.0, 3.0, 10.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 4.0);
        assert!((s.std - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!(Stats::of(&[]).is_none());
    }

    #[test]
    fn aggregation_per_seed() {
        let runs = vec![
            run(ModelId::M4, 2, &[0.85, 0.95]),
            run(ModelId::M4, 1, &[0.5, 0.92]),
            run(ModelId::M4, 3, &[0.6, 0.7]),
            RunMetrics::failed(ModelId::M1, 3, 1, "boom"),
        ];
        let report = aggregate(&runs);
        let m4 = report.summary(ModelId::M4).unwrap();
        assert_eq!(m4.seeds, vec![1, 2, 3]);
        assert_eq!(m4.completed, 3);
        let t90 = &m4.thresholds[1];
        assert_eq!((t90.reached, t90.not_reached), (2, 1));
        assert_eq!(t90.epochs.as_ref().unwrap().mean, 2.0);
        let t80 = &m4.thresholds[0];
        assert_eq!(t80.epochs.as_ref().unwrap().median, 1.5);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.summary(ModelId::M1).unwrap().failed, 1);
        // Order of inputs does not matter.
        let mut shuffled = runs.clone();
        shuffled.reverse();
        assert_eq!(aggregate(&shuffled).to_json(), report.to_json());
    }

    #[test]
    fn table_and_csv_render() {
        let report = aggregate(&[run(ModelId::M5, 1, &[0.95]), run(ModelId::M5, 2, &[0.85, 0.93])]);
        let table = report.table();
        assert!(table.contains("Model 5 (Deep Quantum Inspired)"), "{table}");
        assert!(table.contains("90%"));
        let csv = report.csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("model,d,params"));
    }

    #[test]
    fn thousands_separator() {
        assert_eq!(thousands(1_426_762), "1,426,762");
        assert_eq!(thousands(650), "650");
        assert_eq!(thousands(93_074), "93,074");
    }
}
