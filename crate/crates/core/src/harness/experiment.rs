use std::fs;
use std::path::{Path, PathBuf};

use super::metrics::RunMetrics;
use super::report::{aggregate, ExperimentReport};
use super::train::{prepare_data, train_observed, PreparedData};
use super::{HarnessError, Result, TrainConfig};
use crate::zoo::ModelId;

pub const RUNS_DIR: &str = "runs";
pub const REPORT_JSON: &str = "report.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const TABLE_TXT: &str = "table.txt";
pub const CONFIG_TXT: &str = "config.txt";

/// Progress notifications from long-running experiment calls.
#[derive(Clone, Debug)]
pub enum Progress<'a> {
    RunStarted { model: ModelId, seed: u64 },
    Epoch { model: ModelId, seed: u64, epoch: usize, test_accuracy: f64, train_loss: f64 },
    RunFinished { metrics: &'a RunMetrics },
}

/// File name of a stored run.
pub fn run_file_name(metrics: &RunMetrics) -> String {
    format!("{}-d{}-seed{}.json", metrics.model, metrics.d, metrics.seed)
}

/// Trains `model` once per configured seed. A seed whose run errors is
/// recorded as failed and the remaining seeds still run.
pub fn multi_seed(
    cfg: &TrainConfig,
    model: ModelId,
    data: &PreparedData,
    progress: &mut dyn FnMut(Progress<'_>),
) -> Result<Vec<RunMetrics>> {
    if cfg.seeds.len() < 2 {
        return Err(HarnessError::TooFewSeeds(cfg.seeds.len()));
    }
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        progress(Progress::RunStarted { model, seed });
        let result = train_observed(cfg, model, seed, data, &mut |epoch, rec| {
            progress(Progress::Epoch {
                model,
                seed,
                epoch,
                test_accuracy: rec.test_accuracy,
                train_loss: rec.train_loss,
            })
        });
        let metrics = result.unwrap_or_else(|e| RunMetrics::failed(model, cfg.d, seed, e.to_string()));
        progress(Progress::RunFinished { metrics: &metrics });
        runs.push(metrics);
    }
    Ok(runs)
}

pub fn write_run(dir: &Path, metrics: &RunMetrics) -> Result<PathBuf> {
    let runs = dir.join(RUNS_DIR);
    fs::create_dir_all(&runs)?;
    let path = runs.join(run_file_name(metrics));
    fs::write(&path, metrics.to_json())?;
    Ok(path)
}

/// Every `*.json` run file under `dir/runs`, in file-name order.
pub fn load_runs(dir: &Path) -> Result<Vec<RunMetrics>> {
    let runs_dir = dir.join(RUNS_DIR);
    let mut paths: Vec<PathBuf> = fs::read_dir(&runs_dir)
        .map_err(|e| HarnessError::Report(format!("{}: {e}", runs_dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(HarnessError::Report(format!("no run files in {}", runs_dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            RunMetrics::from_json(&text).map_err(|e| HarnessError::Report(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Writes the JSON report, CSV summary, and comparison table into `dir`.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(REPORT_JSON), report.to_json())?;
    fs::write(dir.join(SUMMARY_CSV), report.csv())?;
    fs::write(dir.join(TABLE_TXT), report.table())?;
    Ok(())
}

/// Re-aggregates the stored runs in `dir` and rewrites the report files.
pub fn report_from_dir(dir: &Path) -> Result<ExperimentReport> {
    let report = aggregate(&load_runs(dir)?);
    write_report(dir, &report)?;
    Ok(report)
}

/// Every configured model over every configured seed on one shared split.
/// Runs are stored as they finish; the report is then built from the
/// stored files exactly as [`report_from_dir`] would.
pub fn run_experiment(cfg: &TrainConfig, progress: &mut dyn FnMut(Progress<'_>)) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_TXT), cfg.to_text())?;
    let data = prepare_data(cfg)?;
    for &model in &cfg.models {
        let runs = multi_seed(cfg, model, &data, &mut |p| {
            if let Progress::RunFinished { metrics } = &p {
                // Best effort here; a write failure surfaces when the report loads.
                let _ = write_run(dir, metrics);
            }
            progress(p)
        })?;
        debug_assert_eq!(runs.len(), cfg.seeds.len());
    }
    report_from_dir(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SynthConfig;

    fn cfg(dir: &Path) -> TrainConfig {
        TrainConfig {
            models: vec![ModelId::M1, ModelId::M4],
            seeds: vec![1, 2],
            epochs: 2,
            batch_size: 8,
            synth: SynthConfig {
                num_classes: 2,
                samples_per_class: 6,
                height: 8,
                width: 8,
                ..SynthConfig::default()
            },
            output_dir: dir.to_path_buf(),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn experiment_then_report_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let c = cfg(tmp.path());
        let report = run_experiment(&c, &mut |_| {}).unwrap();
        assert_eq!(report.models.len(), 2);
        assert_eq!(report.summary(ModelId::M4).unwrap().seeds, vec![1, 2]);
        let read = |f: &str| fs::read(tmp.path().join(f)).unwrap();
        let before = [read(REPORT_JSON), read(SUMMARY_CSV), read(TABLE_TXT)];
        let again = report_from_dir(tmp.path()).unwrap();
        assert_eq!(again, report);
        assert_eq!([read(REPORT_JSON), read(SUMMARY_CSV), read(TABLE_TXT)], before);
        assert_eq!(load_runs(tmp.path()).unwrap().len(), 4);
    }

    #[test]
    fn needs_two_seeds() {
        let tmp = tempfile::tempdir().unwrap();
        let c = TrainConfig { seeds: vec![1], ..cfg(tmp.path()) };
        let data = prepare_data(&c).unwrap();
        assert!(matches!(
            multi_seed(&c, ModelId::M4, &data, &mut |_| {}),
            Err(HarnessError::TooFewSeeds(1))
        ));
    }

    #[test]
    fn failed_seed_is_recorded() {
        let tmp = tempfile::tempdir().unwrap();
        // M2 cannot take 6x6 inputs; every seed fails, none aborts the experiment.
        let mut c = TrainConfig { models: vec![ModelId::M2], ..cfg(tmp.path()) };
        c.synth.height = 6;
        c.synth.width = 6;
        let report = run_experiment(&c, &mut |_| {}).unwrap();
        assert_eq!(report.failures.len(), 2);
        assert_eq!(report.summary(ModelId::M2).unwrap().failed, 2);
    }

    #[test]
    fn report_on_empty_dir_errors() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(report_from_dir(tmp.path()).is_err());
    }
}
