//! End-to-end experiments: instance, masked splits, weights, predictor,
//! RMSE against the optimal predictor, and the CSV result table.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::decorrelation::{optimize_weights, DecorrMode, RffBanks, WeightOptConfig, WeightVector};
use crate::error::{Error, Result};
use crate::masks::{apply_masks, calibrate_mar, make_mar_model, make_mar_model_with_anchors, MaskGenerator, MaskPattern, MaskedDataset, MissingLevel, RateSource};
use crate::oracle::optimal_predict;
use crate::predictor::{predict, train_predictor, PredictorModel, TrainConfig};
use crate::rng::{stream_rng, Stream};
use crate::synthetic::{make_gaussian_spec, make_label_model_with_std, sample_dataset, FeatureKind, FeatureSpec, LabelModel};

/// Which features drive MAR missingness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnchorChoice {
    Random,
    /// Zero-based feature indices.
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub feature: FeatureKind,
    pub train_pattern: MaskPattern,
    pub test_pattern: MaskPattern,
    pub dim: usize,
    pub train_n: usize,
    pub test_n: usize,
    pub train_level: MissingLevel,
    pub test_levels: Vec<MissingLevel>,
    pub mode: DecorrMode,
    pub ablation: bool,
    pub gamma: f64,
    pub q: usize,
    pub depth: usize,
    pub width: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_lr: f64,
    pub weight_iters: usize,
    pub seed: u64,
    pub seeds: u32,
    pub snr: f64,
    pub coeff_std: f64,
    pub mar_scale: f64,
    pub mar_anchors: AnchorChoice,
    /// When false every `wall_time_ms` is written as 0, making output bytes reproducible.
    pub timing: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            feature: FeatureKind::Gaussian,
            train_pattern: MaskPattern::McarInd,
            test_pattern: MaskPattern::McarInd,
            dim: 50,
            train_n: 16384,
            test_n: 16384,
            train_level: MissingLevel::from_tenths(5).expect("grid level"),
            test_levels: MissingLevel::all().collect(),
            mode: DecorrMode::Full,
            ablation: false,
            gamma: 1.0,
            q: 5,
            depth: 2,
            width: 256,
            epochs: 1000,
            batch_size: 64,
            lr: 1e-3,
            weight_lr: 0.05,
            weight_iters: 500,
            seed: 0,
            seeds: 1,
            snr: 10.0,
            coeff_std: 1.0,
            mar_scale: 1.0,
            mar_anchors: AnchorChoice::Random,
            timing: true,
            out: None,
        }
    }
}

/// Keys accepted in config files; flags use the same names with `--`.
pub const CONFIG_KEYS: &[&str] = &[
    "feature",
    "pattern",
    "train-pattern",
    "test-pattern",
    "dim",
    "train-n",
    "test-n",
    "train-level",
    "test-levels",
    "mode",
    "ablation",
    "gamma",
    "q",
    "depth",
    "width",
    "epochs",
    "batch-size",
    "lr",
    "weight-lr",
    "weight-iters",
    "seed",
    "seeds",
    "snr",
    "coeff-std",
    "mar-scale",
    "mar-anchors",
    "timing",
    "out",
];

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| usage(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(usage(format!("invalid boolean '{value}' for {key}"))),
    }
}

fn parse_feature(value: &str) -> Result<FeatureKind> {
    FeatureKind::parse(value.trim()).ok_or_else(|| usage(format!("unknown feature kind '{value}'")))
}

fn parse_pattern(value: &str) -> Result<MaskPattern> {
    MaskPattern::parse(value.trim()).ok_or_else(|| usage(format!("unknown missing pattern '{value}'")))
}

impl ExperimentConfig {
    /// Sets one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "feature" => self.feature = parse_feature(v)?,
            "pattern" => {
                let p = parse_pattern(v)?;
                self.train_pattern = p;
                self.test_pattern = p;
            }
            "train-pattern" => self.train_pattern = parse_pattern(v)?,
            "test-pattern" => self.test_pattern = parse_pattern(v)?,
            "dim" => self.dim = parse_num(key, v)?,
            "train-n" => self.train_n = parse_num(key, v)?,
            "test-n" => self.test_n = parse_num(key, v)?,
            "train-level" => self.train_level = MissingLevel::parse(v)?,
            "test-levels" => {
                self.test_levels = v.split(',').map(MissingLevel::parse).collect::<Result<_>>()?;
            }
            "mode" => self.mode = DecorrMode::parse(v).ok_or_else(|| usage(format!("unknown mode '{v}'")))?,
            "ablation" => self.ablation = parse_bool(key, v)?,
            "gamma" => self.gamma = parse_num(key, v)?,
            "q" => self.q = parse_num(key, v)?,
            "depth" => self.depth = parse_num(key, v)?,
            "width" => self.width = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "batch-size" => self.batch_size = parse_num(key, v)?,
            "lr" => self.lr = parse_num(key, v)?,
            "weight-lr" => self.weight_lr = parse_num(key, v)?,
            "weight-iters" => self.weight_iters = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "seeds" => self.seeds = parse_num(key, v)?,
            "snr" => self.snr = parse_num(key, v)?,
            "coeff-std" => self.coeff_std = parse_num(key, v)?,
            "mar-scale" => self.mar_scale = parse_num(key, v)?,
            "mar-anchors" => {
                self.mar_anchors = if v == "random" {
                    AnchorChoice::Random
                } else {
                    let idx = v
                        .split(',')
                        .map(|s| parse_num::<usize>(key, s))
                        .collect::<Result<Vec<_>>>()?;
                    if idx.contains(&0) {
                        return Err(usage("mar-anchors are 1-based feature indices"));
                    }
                    AnchorChoice::Fixed(idx.into_iter().map(|i| i - 1).collect())
                }
            }
            "timing" => self.timing = parse_bool(key, v)?,
            "out" => self.out = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            _ => return Err(usage(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("line {}: expected key = value", no + 1)))?;
            self.set(key.trim(), value).map_err(|e| usage(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes every key; `from_text(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let levels: Vec<String> = self.test_levels.iter().map(|l| l.rate().to_string()).collect();
        let anchors = match &self.mar_anchors {
            AnchorChoice::Random => "random".to_string(),
            AnchorChoice::Fixed(v) => v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(","),
        };
        let entries: Vec<(&str, String)> = vec![
            ("feature", self.feature.name().into()),
            ("train-pattern", self.train_pattern.name().into()),
            ("test-pattern", self.test_pattern.name().into()),
            ("dim", self.dim.to_string()),
            ("train-n", self.train_n.to_string()),
            ("test-n", self.test_n.to_string()),
            ("train-level", self.train_level.rate().to_string()),
            ("test-levels", levels.join(",")),
            ("mode", self.mode.name().into()),
            ("ablation", self.ablation.to_string()),
            ("gamma", self.gamma.to_string()),
            ("q", self.q.to_string()),
            ("depth", self.depth.to_string()),
            ("width", self.width.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch-size", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            ("weight-lr", self.weight_lr.to_string()),
            ("weight-iters", self.weight_iters.to_string()),
            ("seed", self.seed.to_string()),
            ("seeds", self.seeds.to_string()),
            ("snr", self.snr.to_string()),
            ("coeff-std", self.coeff_std.to_string()),
            ("mar-scale", self.mar_scale.to_string()),
            ("mar-anchors", anchors),
            ("timing", self.timing.to_string()),
            ("out", self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
        ];
        entries.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(usage(msg)) };
        check(self.dim > 0, "dim must be positive")?;
        check(self.train_n > 0 && self.test_n > 0, "sample sizes must be positive")?;
        check(!self.test_levels.is_empty(), "at least one test level is required")?;
        check(self.gamma >= 0.0 && self.gamma.is_finite(), "gamma must be finite and nonnegative")?;
        check(self.q > 0, "q must be positive")?;
        check(self.width > 0, "width must be positive")?;
        check(self.batch_size > 0, "batch size must be positive")?;
        check(self.lr > 0.0 && self.weight_lr > 0.0, "learning rates must be positive")?;
        check(self.seeds > 0, "seeds must be positive")?;
        check(self.snr > 0.0, "snr must be positive")?;
        check(self.coeff_std > 0.0, "coeff-std must be positive")?;
        check(
            self.feature != FeatureKind::DuplicatedPair || self.dim >= 2,
            "duplicated-pair features need dim >= 2",
        )?;
        let mar = self.train_pattern == MaskPattern::Mar || self.test_pattern == MaskPattern::Mar;
        check(!mar || self.dim >= 10, "MAR masks need dim >= 10")?;
        if let AnchorChoice::Fixed(idx) = &self.mar_anchors {
            check(idx.iter().all(|&i| i < self.dim), "mar-anchors index exceeds dim")?;
            check(!idx.is_empty() && idx.len() < self.dim, "mar-anchors must leave some feature modeled")?;
        }
        Ok(())
    }

    pub fn modes(&self) -> Vec<DecorrMode> {
        if self.ablation {
            DecorrMode::ALL.to_vec()
        } else {
            vec![self.mode]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub mode: DecorrMode,
    pub train_level: MissingLevel,
    pub test_level: MissingLevel,
    pub rmse: f64,
    pub optimal_rmse: f64,
    pub gap: f64,
    pub seed: u64,
    pub wall_time_ms: u64,
    /// Test level and pattern equal the training ones.
    pub in_distribution: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const RESULT_HEADER: &str = "mode,train_level,test_level,rmse,optimal_rmse,gap,seed,wall_time_ms";

fn mode_rank(m: DecorrMode) -> usize {
    DecorrMode::ALL.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

impl ResultTable {
    /// Orders rows by (mode, train level, test level, seed).
    pub fn sort(&mut self) {
        self.rows.sort_by_key(|r| (mode_rank(r.mode), r.train_level, r.test_level, r.seed));
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut sorted = self.clone();
        sorted.sort();
        writeln!(out, "{RESULT_HEADER}")?;
        for r in &sorted.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.mode.name(),
                r.train_level.rate(),
                r.test_level.rate(),
                r.rmse,
                r.optimal_rmse,
                r.gap,
                r.seed,
                r.wall_time_ms
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }
}

/// Human-readable table; in-distribution rows carry a `*` after the test level.
impl fmt::Display for ResultTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut sorted = self.clone();
        sorted.sort();
        writeln!(f, "{:<6} {:>5} {:>6} {:>10} {:>10} {:>10} {:>6}", "mode", "train", "test", "rmse", "optimal", "gap", "seed")?;
        for r in &sorted.rows {
            let test = format!("{}{}", r.test_level.rate(), if r.in_distribution { "*" } else { "" });
            writeln!(
                f,
                "{:<6} {:>5} {:>6} {:>10.5} {:>10.5} {:>10.5} {:>6}",
                r.mode.name(),
                r.train_level.rate(),
                test,
                r.rmse,
                r.optimal_rmse,
                r.gap,
                r.seed
            )?;
        }
        Ok(())
    }
}

/// Writes the CSV, creating parent directories.
pub fn write_results(table: &ResultTable, path: &std::path::Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn rmse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(Error::Structural(format!(
            "rmse needs equal nonempty inputs, got {} and {}",
            predictions.len(),
            labels.len()
        )));
    }
    let sse: f64 = predictions.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok((sse / predictions.len() as f64).sqrt())
}

/// A sampled problem: feature law, labels, and mask mechanisms.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: FeatureSpec,
    pub labels: LabelModel,
    pub train_masks: MaskGenerator,
    pub test_masks: MaskGenerator,
}

fn generator(pattern: MaskPattern, mar: &Option<MaskGenerator>) -> MaskGenerator {
    match pattern {
        MaskPattern::McarInd => MaskGenerator::McarInd,
        MaskPattern::Mcar => MaskGenerator::McarWindow,
        MaskPattern::Mar => mar.clone().expect("MAR model built when a MAR pattern is requested"),
    }
}

pub fn build_instance(config: &ExperimentConfig, master_seed: u64) -> Result<Instance> {
    config.validate()?;
    let mut rng = stream_rng(master_seed, Stream::Instance, 0);
    let spec = match config.feature {
        FeatureKind::DuplicatedPair => FeatureSpec::duplicated_pair(config.dim)?,
        kind => make_gaussian_spec(config.dim, kind, &mut rng)?,
    };
    let labels = make_label_model_with_std(&spec, config.snr, config.coeff_std, &mut rng)?;
    let mar = if config.train_pattern == MaskPattern::Mar || config.test_pattern == MaskPattern::Mar {
        let mut mrng = stream_rng(master_seed, Stream::MaskModel, 0);
        let model = match &config.mar_anchors {
            AnchorChoice::Random => make_mar_model(config.dim, config.mar_scale, &mut mrng)?,
            AnchorChoice::Fixed(idx) => make_mar_model_with_anchors(config.dim, idx.clone(), config.mar_scale, &mut mrng)?,
        };
        let mut crng = stream_rng(master_seed, Stream::Calibration, 0);
        Some(MaskGenerator::Mar(calibrate_mar(model, &spec, &mut crng)?))
    } else {
        None
    };
    Ok(Instance {
        train_masks: generator(config.train_pattern, &mar),
        test_masks: generator(config.test_pattern, &mar),
        spec,
        labels,
    })
}

/// Masked training split at the configured level.
pub fn training_set(config: &ExperimentConfig, instance: &Instance, master_seed: u64) -> Result<MaskedDataset> {
    let complete = sample_dataset(&instance.spec, &instance.labels, config.train_n, &mut stream_rng(master_seed, Stream::TrainData, 0))?;
    apply_masks(
        &complete,
        &instance.train_masks,
        RateSource::Level(config.train_level),
        &mut stream_rng(master_seed, Stream::TrainData, 1),
    )
}

/// Masked test split for one level; the same for every mode.
pub fn test_set(config: &ExperimentConfig, instance: &Instance, master_seed: u64, level: MissingLevel) -> Result<MaskedDataset> {
    let idx = level.tenths() as u32;
    let complete = sample_dataset(&instance.spec, &instance.labels, config.test_n, &mut stream_rng(master_seed, Stream::TestData, 2 * idx))?;
    apply_masks(
        &complete,
        &instance.test_masks,
        RateSource::Level(level),
        &mut stream_rng(master_seed, Stream::TestData, 2 * idx + 1),
    )
}

pub fn optimal_rmse(instance: &Instance, data: &MaskedDataset) -> Result<f64> {
    let preds = (0..data.len())
        .map(|i| optimal_predict(&instance.spec, &instance.labels, data.x(i), data.mask(i)))
        .collect::<Result<Vec<_>>>()?;
    rmse(&preds, data.labels())
}

pub fn model_rmse(model: &PredictorModel, data: &MaskedDataset) -> Result<f64> {
    let preds = (0..data.len()).map(|i| predict(model, data.x(i), data.mask(i))).collect::<Result<Vec<_>>>()?;
    rmse(&preds, data.labels())
}

/// Per-arm by-products of a run.
#[derive(Debug, Clone)]
pub struct ArmOutput {
    pub seed: u64,
    pub mode: DecorrMode,
    pub weights: WeightVector,
    pub loss_trace: Vec<f64>,
    pub model: PredictorModel,
    pub train_checksum: u64,
    pub test_checksums: Vec<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub arms: Vec<ArmOutput>,
}

/// A failed run with whatever rows finished before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: ExperimentOutput,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} rows completed)", self.error, self.partial.table.rows.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn elapsed_ms(config: &ExperimentConfig, start: Instant) -> u64 {
    if config.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

struct Split {
    train: MaskedDataset,
    tests: Vec<(MissingLevel, MaskedDataset, f64)>,
}

fn prepare(config: &ExperimentConfig, master: u64) -> Result<(Instance, Split, RffBanks)> {
    let instance = build_instance(config, master)?;
    let train = training_set(config, &instance, master)?;
    let tests = config
        .test_levels
        .par_iter()
        .map(|&level| {
            let data = test_set(config, &instance, master, level)?;
            let opt = optimal_rmse(&instance, &data)?;
            Ok((level, data, opt))
        })
        .collect::<Result<Vec<_>>>()?;
    let banks = RffBanks::draw(config.dim, config.q, &mut stream_rng(master, Stream::RffBanks, 0));
    Ok((instance, Split { train, tests }, banks))
}

fn run_arm(config: &ExperimentConfig, master: u64, mode: DecorrMode, split: &Split, banks: &RffBanks) -> Result<(Vec<ResultRow>, ArmOutput)> {
    let start = Instant::now();
    let weight_cfg = WeightOptConfig { iterations: config.weight_iters, lr: config.weight_lr };
    let fit = optimize_weights(&split.train, mode, config.gamma, &weight_cfg, banks)?;
    let mut model = PredictorModel::linear_head(config.dim, config.depth, config.width, &mut stream_rng(master, Stream::PredictorInit, 0))?;
    let train_cfg = TrainConfig { epochs: config.epochs, batch_size: config.batch_size, lr: config.lr };
    let loss_trace = train_predictor(
        &mut model,
        &split.train,
        Some(fit.weights.weights()),
        &train_cfg,
        &mut stream_rng(master, Stream::Shuffle, 0),
    )?;
    let fitted_ms = elapsed_ms(config, start);
    let mut rows = Vec::with_capacity(split.tests.len());
    for (level, data, opt) in &split.tests {
        let eval_start = Instant::now();
        let r = model_rmse(&model, data)?;
        rows.push(ResultRow {
            mode,
            train_level: config.train_level,
            test_level: *level,
            rmse: r,
            optimal_rmse: *opt,
            gap: r - opt,
            seed: master,
            wall_time_ms: fitted_ms + elapsed_ms(config, eval_start),
            in_distribution: *level == config.train_level && config.train_pattern == config.test_pattern,
        });
    }
    let arm = ArmOutput {
        seed: master,
        mode,
        weights: fit.weights,
        loss_trace,
        model,
        train_checksum: split.train.checksum(),
        test_checksums: split.tests.iter().map(|t| t.1.checksum()).collect(),
    };
    Ok((rows, arm))
}

/// Runs every configured seed and mode. Arms run in parallel but land in
/// fixed slots, so the output does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<ExperimentOutput, RunFailure> {
    if let Err(error) = config.validate() {
        return Err(RunFailure { error, partial: ExperimentOutput::default() });
    }
    let modes = config.modes();
    let mut output = ExperimentOutput::default();
    for s in 0..config.seeds {
        let master = config.seed.wrapping_add(s as u64);
        let (_, split, banks) = match prepare(config, master) {
            Ok(p) => p,
            Err(error) => return Err(RunFailure { error, partial: output }),
        };
        let arms: Vec<Result<(Vec<ResultRow>, ArmOutput)>> =
            modes.par_iter().map(|&mode| run_arm(config, master, mode, &split, &banks)).collect();
        let mut failure = None;
        for arm in arms {
            match arm {
                Ok((rows, out)) => {
                    output.table.rows.extend(rows);
                    output.arms.push(out);
                }
                Err(e) => {
                    failure.get_or_insert(e);
                }
            }
        }
        if let Some(error) = failure {
            output.table.sort();
            return Err(RunFailure { error, partial: output });
        }
    }
    output.table.sort();
    Ok(output)
}

/// All four decorrelation modes on shared data.
pub fn run_ablation(config: &ExperimentConfig) -> std::result::Result<ExperimentOutput, RunFailure> {
    let mut cfg = config.clone();
    cfg.ablation = true;
    run_experiment(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[3.5, 0.5, 1.5], &[1.0, -2.0, -1.0]).unwrap() - 2.5).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0, 0.0], &[1.0, 2.0, 2.0]).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert!(rmse(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default();
        assert_eq!((c.dim, c.train_n, c.test_n, c.q, c.epochs, c.batch_size), (50, 16384, 16384, 5, 1000, 64));
        assert_eq!(c.test_levels.len(), 9);
        assert_eq!(c.lr, 0.001);
        assert_eq!(c.gamma, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.set("gamma", "0.2").unwrap();
        c.set("test-levels", "0.1,30%,0.9").unwrap();
        c.set("mar-anchors", "1,3").unwrap();
        c.set("out", "results/run.csv").unwrap();
        c.set("train-pattern", "mar").unwrap();
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn config_file_syntax() {
        let text = "# comment\n\ngamma = 5 # trailing\nmode=intra\n";
        let c = ExperimentConfig::from_text(text).unwrap();
        assert_eq!(c.gamma, 5.0);
        assert_eq!(c.mode, DecorrMode::IntraOnly);
        assert!(matches!(ExperimentConfig::from_text("colour = red"), Err(Error::Usage(_))));
        assert!(matches!(ExperimentConfig::from_text("gamma 5"), Err(Error::Usage(_))));
        assert!(matches!(ExperimentConfig::from_text("gamma = -1"), Err(Error::Usage(_))));
        assert!(matches!(ExperimentConfig::from_text("train-level = 0.35"), Err(Error::Usage(_))));
        for key in CONFIG_KEYS {
            assert!(ExperimentConfig::default().to_text().contains(key) || *key == "pattern");
        }
    }

    #[test]
    fn csv_sorted_with_header() {
        let lvl = |t| MissingLevel::from_tenths(t).unwrap();
        let row = |mode, test, seed| ResultRow {
            mode,
            train_level: lvl(5),
            test_level: lvl(test),
            rmse: 1.5,
            optimal_rmse: 1.25,
            gap: 0.25,
            seed,
            wall_time_ms: 0,
            in_distribution: test == 5,
        };
        let table = ResultTable {
            rows: vec![row(DecorrMode::None, 1, 0), row(DecorrMode::Full, 9, 0), row(DecorrMode::Full, 5, 0)],
        };
        let csv = table.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], RESULT_HEADER);
        assert_eq!(lines[1], "full,0.5,0.5,1.5,1.25,0.25,0,0");
        assert_eq!(lines[2], "full,0.5,0.9,1.5,1.25,0.25,0,0");
        assert_eq!(lines[3], "none,0.5,0.1,1.5,1.25,0.25,0,0");
        assert!(table.to_string().contains("0.5*"));
    }
}
