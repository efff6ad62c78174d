//! `maskshift`: run one experiment (or the four-mode ablation) and print the
//! result table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use maskshift_core::decorrelation::WeightVector;
use maskshift_core::harness::{run_experiment, write_results, ArmOutput, ExperimentOutput};
use maskshift_core::predictor::{write_checkpoint, write_loss_trace};
use maskshift_core::{Error, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "maskshift", version, about = "Prediction under missing-pattern shift: synthetic experiments")]
struct Cli {
    /// key = value file applied before any flag
    #[arg(long)]
    config: Option<PathBuf>,
    /// gaussian | gaussian-ind | gaussian-mix | duplicated-pair
    #[arg(long)]
    feature: Option<String>,
    /// mcar-ind | mcar | mar, for both train and test
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    train_pattern: Option<String>,
    #[arg(long)]
    test_pattern: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    train_n: Option<String>,
    #[arg(long)]
    test_n: Option<String>,
    /// one of 0.1, ..., 0.9
    #[arg(long)]
    train_level: Option<String>,
    /// comma list of levels
    #[arg(long)]
    test_levels: Option<String>,
    /// full | intra | inter | none
    #[arg(long)]
    mode: Option<String>,
    /// run all four modes on shared data
    #[arg(long)]
    ablation: bool,
    #[arg(long)]
    gamma: Option<String>,
    /// random Fourier features per variable
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    weight_lr: Option<String>,
    #[arg(long)]
    weight_iters: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// consecutive master seeds starting at --seed
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    coeff_std: Option<String>,
    #[arg(long)]
    mar_scale: Option<String>,
    /// 1-based comma list, or "random"
    #[arg(long)]
    mar_anchors: Option<String>,
    /// write 0 in wall_time_ms for byte-reproducible output
    #[arg(long)]
    no_timing: bool,
    /// result CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// directory for per-arm weights, loss traces and checkpoints
    #[arg(long)]
    artifacts: Option<PathBuf>,
    /// print the resolved configuration and exit
    #[arg(long)]
    print_config: bool,
}

impl Cli {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |key: &'static str, v: &Option<String>| {
            if let Some(v) = v {
                out.push((key, v.clone()));
            }
        };
        push("feature", &self.feature);
        push("pattern", &self.pattern);
        push("train-pattern", &self.train_pattern);
        push("test-pattern", &self.test_pattern);
        push("dim", &self.dim);
        push("train-n", &self.train_n);
        push("test-n", &self.test_n);
        push("train-level", &self.train_level);
        push("test-levels", &self.test_levels);
        push("mode", &self.mode);
        push("gamma", &self.gamma);
        push("q", &self.q);
        push("depth", &self.depth);
        push("width", &self.width);
        push("epochs", &self.epochs);
        push("batch-size", &self.batch_size);
        push("lr", &self.lr);
        push("weight-lr", &self.weight_lr);
        push("weight-iters", &self.weight_iters);
        push("seed", &self.seed);
        push("seeds", &self.seeds);
        push("snr", &self.snr);
        push("coeff-std", &self.coeff_std);
        push("mar-scale", &self.mar_scale);
        push("mar-anchors", &self.mar_anchors);
        if self.ablation {
            out.push(("ablation", "true".into()));
        }
        if self.no_timing {
            out.push(("timing", "false".into()));
        }
        if let Some(p) = &self.out {
            out.push(("out", p.display().to_string()));
        }
        out
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for (key, value) in cli.overrides() {
        cfg.set(key, &value).map_err(|e| match e {
            Error::Usage(msg) => Error::Usage(format!("--{key}: {msg}")),
            other => other,
        })?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_artifacts(dir: &Path, arms: &[ArmOutput]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for arm in arms {
        let stem = format!("{}_seed{}", arm.mode.name(), arm.seed);
        let open = |suffix: &str| {
            let path = dir.join(format!("{stem}_{suffix}"));
            fs::File::create(&path).with_context(|| format!("creating {}", path.display()))
        };
        write_weights(&arm.weights, open("weights.csv")?)?;
        write_loss_trace(&arm.loss_trace, open("loss.csv")?)?;
        write_checkpoint(&arm.model, open("model.txt")?)?;
    }
    Ok(())
}

fn write_weights(w: &WeightVector, file: fs::File) -> Result<()> {
    let mut out = std::io::BufWriter::new(file);
    w.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn report(cfg: &ExperimentConfig, cli: &Cli, out: &ExperimentOutput) -> Result<()> {
    println!("{}", out.table);
    if let Some(path) = &cfg.out {
        write_results(&out.table, path).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(dir) = &cli.artifacts {
        write_artifacts(dir, &out.arms)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("maskshift: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        print!("{}", cfg.to_text());
        return ExitCode::SUCCESS;
    }
    match run_experiment(&cfg) {
        Ok(out) => match report(&cfg, &cli, &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("maskshift: {e:#}");
                ExitCode::from(1)
            }
        },
        Err(failure) => {
            eprintln!("maskshift: {failure}");
            if let Err(e) = report(&cfg, &cli, &failure.partial) {
                eprintln!("maskshift: {e:#}");
            }
            ExitCode::from(if matches!(failure.error, Error::Usage(_)) { 2 } else { 1 })
        }
    }
}
