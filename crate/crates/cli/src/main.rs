//! `unipool` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use unipool::data::{synth_dataset_with_stats, write_tensor_file};
use unipool::harness::{
    param_count_table, report_from_dir, run_experiment, train_observed, prepare_data, write_run, Progress,
    TrainConfig,
};
use unipool::verify::{layer_gradient_checks, run_suite};

#[derive(Parser)]
#[command(name = "unipool", version, about = "SU(d) pooling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// key=value configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set epochs=30`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::from_file(path)?,
            None => TrainConfig::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (synth.* keys) to an MSTF file.
    GenData {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train one model for one seed and store its metrics.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Seed for this run; defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Train every configured model over every configured seed and report.
    Experiment {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Run the pooling property suite and the layer gradient checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dimensions to check, e.g. `2..6` or `2,3,5`.
        #[arg(long, default_value = "2..6")]
        dims: String,
        /// Also write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Re-aggregate the stored runs of an output directory.
    Report {
        dir: PathBuf,
    },
    /// Parameter counts of the five models next to the reference values.
    Params,
}

fn parse_dims(text: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = text.split_once("..") {
        let lo: usize = a.trim().parse().context("bad dims range")?;
        let hi: usize = b.trim().parse().context("bad dims range")?;
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<usize>().context("bad dims list"))
        .collect()
}

fn gen_data(cfg: &TrainConfig, out: &Path) -> Result<()> {
    let (ds, stats) = synth_dataset_with_stats(&cfg.synth)?;
    write_tensor_file(out, &ds)?;
    println!(
        "wrote {} samples of shape {:?} ({} classes) to {}; signature redraws {}, min separation {:.3}",
        ds.len(),
        ds.sample_shape(),
        ds.num_classes(),
        out.display(),
        stats.retries,
        stats.min_separation
    );
    Ok(())
}

fn train(cfg: &TrainConfig, seed: Option<u64>, quiet: bool) -> Result<()> {
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let data = prepare_data(cfg)?;
    let model = cfg.model;
    let metrics = train_observed(cfg, model, seed, &data, &mut |epoch, rec| {
        if !quiet {
            eprintln!(
                "{model} seed {seed} epoch {epoch}: loss {:.4} train {:.4} test {:.4} ({:.1}s)",
                rec.train_loss, rec.train_accuracy, rec.test_accuracy, rec.seconds
            );
        }
    })?;
    let path = write_run(&cfg.output_dir, &metrics)?;
    println!(
        "{model} seed {seed}: status {:?}, max test accuracy {}, peak epoch {}, params {}",
        metrics.status,
        metrics.max_test_accuracy.map_or("-".into(), |a| format!("{a:.4}")),
        metrics.peak_epoch.map_or("-".into(), |p| p.to_string()),
        metrics.param_count
    );
    for t in &metrics.thresholds {
        println!(
            "  epochs to {}: {}",
            t.threshold,
            t.epoch.map_or("not reached".into(), |e| e.to_string())
        );
    }
    println!("metrics: {}", path.display());
    Ok(())
}

fn experiment(cfg: &TrainConfig, quiet: bool) -> Result<()> {
    let report = run_experiment(cfg, &mut |p| {
        if quiet {
            return;
        }
        match p {
            Progress::RunStarted { model, seed } => eprintln!("{model} seed {seed}: start"),
            Progress::Epoch { model, seed, epoch, test_accuracy, train_loss } => {
                eprintln!("{model} seed {seed} epoch {epoch}: loss {train_loss:.4} test {test_accuracy:.4}")
            }
            Progress::RunFinished { metrics } => eprintln!(
                "{} seed {}: {:?}, max test accuracy {}",
                metrics.model,
                metrics.seed,
                metrics.status,
                metrics.max_test_accuracy.map_or("-".into(), |a| format!("{a:.4}"))
            ),
        }
    })?;
    print!("{}", report.table());
    println!("report: {}", cfg.output_dir.display());
    Ok(())
}

fn verify(seed: u64, dims: &str, json: Option<&Path>) -> Result<bool> {
    let dims = parse_dims(dims)?;
    let suite = run_suite(seed, &dims)?;
    let layers = layer_gradient_checks(seed);
    print!("{}", suite.to_text());
    for r in &layers {
        println!("{r}");
    }
    let passed = suite.passed() && layers.iter().all(|r| r.passed);
    println!("{}", if passed { "verify: PASS" } else { "verify: FAIL" });
    if let Some(path) = json {
        let doc = serde_json::json!({ "suite": suite, "layers": layers, "passed": passed });
        std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(passed)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenData { config, out } => gen_data(&config.load()?, &out)?,
        Command::Train { config, seed, quiet } => train(&config.load()?, seed, quiet)?,
        Command::Experiment { config, quiet } => {
            let cfg = config.load()?;
            if cfg.seeds.len() < 2 {
                bail!("experiment needs at least 2 seeds");
            }
            experiment(&cfg, quiet)?
        }
        Command::Verify { seed, dims, json } => return verify(seed, &dims, json.as_deref()),
        Command::Report { dir } => {
            let report = report_from_dir(&dir)?;
            print!("{}", report.table());
        }
        Command::Params => print!("{}", param_count_table()),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
