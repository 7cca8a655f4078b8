//! `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! model = M4
//! models = M1,M4
//! d = 3
//! dataset = synth            # or a path to an MSTF file
//! synth.num_classes = 4
//! synth.samples_per_class = 500
//! epochs = 30
//! seeds = 1..5               # or 1,2,3
//! thresholds = 0.8,0.9
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::data::SynthConfig;
use crate::zoo::ModelId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Model for single runs.
    pub model: ModelId,
    /// Models compared by an experiment.
    pub models: Vec<ModelId>,
    pub d: usize,
    /// MSTF file to train on; `None` generates data from `synth`.
    pub dataset: Option<PathBuf>,
    pub synth: SynthConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seeds: Vec<u64>,
    pub thresholds: Vec<f64>,
    pub train_fraction: f64,
    /// Seed of the stratified split, shared by all runs of an experiment.
    pub split_seed: u64,
    pub standardize: bool,
    pub output_dir: PathBuf,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelId::M4,
            models: ModelId::ALL.to_vec(),
            d: 3,
            dataset: None,
            synth: SynthConfig::default(),
            epochs: 100,
            batch_size: 64,
            lr: 1e-3,
            seeds: (1..=15).collect(),
            thresholds: vec![0.80, 0.90],
            train_fraction: 0.8,
            split_seed: 0,
            standardize: true,
            output_dir: PathBuf::from("runs"),
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{key} = {value:?}: {why}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..") {
        let lo: u64 = parse("seeds", a.trim())?;
        let hi: u64 = parse("seeds", b.trim())?;
        if hi < lo {
            return Err(bad("seeds", value, "empty range"));
        }
        return Ok((lo..=hi).collect());
    }
    parse_list("seeds", value)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl TrainConfig {
    /// Defaults overridden by the contents of a config file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.as_ref().display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_override(line)
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        self.validate()
    }

    /// Applies one `key=value` assignment.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(field) = key.strip_prefix("synth.") {
            let synth = &mut self.synth;
            match field {
                "num_classes" => synth.num_classes = parse(key, value)?,
                "samples_per_class" => synth.samples_per_class = parse(key, value)?,
                "channels" => synth.channels = parse(key, value)?,
                "height" => synth.height = parse(key, value)?,
                "width" => synth.width = parse(key, value)?,
                "spectral_noise" => synth.spectral_noise = parse(key, value)?,
                "spatial_noise" => synth.spatial_noise = parse(key, value)?,
                "seed" => synth.seed = parse(key, value)?,
                _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
            }
            return Ok(());
        }
        match key {
            "model" => self.model = value.parse().map_err(|e| bad(key, value, e))?,
            "models" => {
                self.models = value
                    .split(',')
                    .map(|s| s.trim().parse::<ModelId>().map_err(|e| bad(key, value, e)))
                    .collect::<Result<_>>()?
            }
            "d" => self.d = parse(key, value)?,
            "dataset" => {
                self.dataset = (!value.eq_ignore_ascii_case("synth")).then(|| PathBuf::from(value))
            }
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "thresholds" => self.thresholds = parse_list(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "split_seed" => self.split_seed = parse(key, value)?,
            "standardize" => self.standardize = parse_bool(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.epochs == 0 {
            return fail("epochs must be ≥ 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be ≥ 1".into());
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.models.is_empty() {
            return fail("models must not be empty".into());
        }
        if self.thresholds.is_empty() {
            return fail("at least one threshold is required".into());
        }
        if self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return fail(format!("thresholds must lie in (0, 1): {:?}", self.thresholds));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return fail(format!("thresholds must be strictly ascending: {:?}", self.thresholds));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.dataset.is_none() {
            self.synth.validate()?;
        }
        Ok(())
    }

    /// Canonical `key = value` rendering; [`TrainConfig::apply_text`] on the
    /// output reproduces this config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("model", self.model.to_string());
        line("models", join(&self.models));
        line("d", self.d.to_string());
        match &self.dataset {
            Some(p) => line("dataset", p.display().to_string()),
            None => line("dataset", "synth".into()),
        }
        let s = &self.synth;
        line("synth.num_classes", s.num_classes.to_string());
        line("synth.samples_per_class", s.samples_per_class.to_string());
        line("synth.channels", s.channels.to_string());
        line("synth.height", s.height.to_string());
        line("synth.width", s.width.to_string());
        line("synth.spectral_noise", s.spectral_noise.to_string());
        line("synth.spatial_noise", s.spatial_noise.to_string());
        line("synth.seed", s.seed.to_string());
        line("epochs", self.epochs.to_string());
        line("batch_size", self.batch_size.to_string());
        line("lr", self.lr.to_string());
        line("seeds", join(&self.seeds));
        line("thresholds", join(&self.thresholds));
        line("train_fraction", self.train_fraction.to_string());
        line("split_seed", self.split_seed.to_string());
        line("standardize", self.standardize.to_string());
        line("output_dir", self.output_dir.display().to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.lr), (100, 64, 1e-3));
        assert_eq!(c.seeds.len(), 15);
        assert_eq!(c.thresholds, vec![0.8, 0.9]);
        c.validate().unwrap();
    }

    #[test]
    fn parse_file_text() {
        let mut c = TrainConfig::default();
        c.apply_text(
            "# desk run\nmodel = m1\nmodels = M1, M4\nepochs=3\nseeds = 2..4\nsynth.samples_per_class = 7 # small\nstandardize = no\n",
        )
        .unwrap();
        assert_eq!(c.model, ModelId::M1);
        assert_eq!(c.models, vec![ModelId::M1, ModelId::M4]);
        assert_eq!(c.epochs, 3);
        assert_eq!(c.seeds, vec![2, 3, 4]);
        assert!(!c.standardize);
        assert!(c.dataset.is_none());
        assert_eq!(c.synth.samples_per_class, 7);
    }

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::default();
        c.apply_text("dataset = /tmp/x.mstf\nlr = 0.0005\nthresholds = 0.5,0.75").unwrap();
        let mut back = TrainConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_invalid() {
        let mut c = TrainConfig::default();
        assert!(c.apply_text("epochs = 0").is_err());
        let mut c = TrainConfig::default();
        assert!(c.apply_text("thresholds = 0.9,0.8").is_err());
        let mut c = TrainConfig::default();
        assert!(c.apply_text("colour = blue").is_err());
        let mut c = TrainConfig::default();
        assert!(c.apply_text("model = M9").is_err());
        let mut c = TrainConfig::default();
        assert!(c.apply_text("just words").is_err());
    }
}
