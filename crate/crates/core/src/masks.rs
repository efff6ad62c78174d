//! Missing-pattern generators (MCAR-Ind, MCAR window, MAR) and the masked
//! dataset view the learner sees.

use std::io::Write;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{structural, Error, Result};
use crate::synthetic::{sample_dataset, CompleteDataset, FeatureSpec, LabelModel};

/// One of the nine missing levels 10%, 20%, ..., 90%.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MissingLevel(u8);

impl MissingLevel {
    pub const COUNT: usize = 9;

    pub fn from_tenths(tenths: u8) -> Result<Self> {
        if (1..=9).contains(&tenths) {
            Ok(Self(tenths))
        } else {
            Err(Error::Usage(format!("missing level {tenths}0% is not on the 10%..90% grid")))
        }
    }

    /// Accepts `0.3`, `30` or `30%`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().trim_end_matches('%');
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Usage(format!("cannot parse missing level '{s}'")))?;
        Self::from_rate(if v > 1.0 { v / 100.0 } else { v })
    }

    pub fn from_rate(rate: f64) -> Result<Self> {
        let tenths = (rate * 10.0).round();
        if (rate * 10.0 - tenths).abs() > 1e-9 || !(1.0..=9.0).contains(&tenths) {
            return Err(Error::Usage(format!("missing level {rate} is not on the 10%..90% grid")));
        }
        Ok(Self(tenths as u8))
    }

    pub fn all() -> impl Iterator<Item = MissingLevel> {
        (1..=9).map(MissingLevel)
    }

    pub fn rate(self) -> f64 {
        self.0 as f64 / 10.0
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    /// Zero-based position on the grid.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

/// Per-sample rate: the level itself with probability 0.8, otherwise one of
/// the other eight levels (0.025 each).
pub fn sample_missing_rate<R: Rng + ?Sized>(level: MissingLevel, rng: &mut R) -> MissingLevel {
    if rng.random::<f64>() < 0.8 {
        return level;
    }
    let k = rng.random_range(0..8u8) + 1;
    MissingLevel(if k >= level.0 { k + 1 } else { k })
}

/// `true` marks an observed entry. Each entry is missing independently with probability `rate`.
pub fn mcar_ind_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.random::<f64>() >= rate).collect()
}

/// Length of the missing window for `n` features at `rate`.
pub fn window_length(n: usize, rate: f64) -> usize {
    (((n as f64) * rate + 1e-9).floor() as usize).min(n)
}

/// A run of `floor(n * rate)` consecutive missing entries starting uniformly
/// in `0..=n - L`.
pub fn mcar_window_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<bool> {
    let len = window_length(n, rate);
    let start = rng.random_range(0..=n - len);
    (0..n).map(|i| !(start..start + len).contains(&i)).collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Monte Carlo draws used to calibrate MAR offsets.
pub const MAR_CALIBRATION_DRAWS: usize = 10_000;

/// Logistic MAR mechanism: `floor(0.1 n)` anchor features are always
/// observed, every other feature is missing with probability
/// `sigmoid(scale * (w_i . x_anchor + b_i) + offset_r)`.
///
/// `w_i` and `b_i` are standardized against the feature distribution during
/// calibration so the pre-offset logit has mean 0 and unit variance; one
/// shared offset per missing level is then fit by bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct MarModel {
    pub dim: usize,
    pub anchors: Vec<usize>,
    pub modeled: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub scale: f64,
    /// Calibrated offset per missing level, indexed by [`MissingLevel::index`].
    pub offsets: Option<[f64; MissingLevel::COUNT]>,
}

pub fn make_mar_model<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> Result<MarModel> {
    if n < 10 {
        return Err(structural("MAR masks need at least 10 features for a nonempty anchor set"));
    }
    let anchors = sample_indices(rng, n, n / 10).into_vec();
    make_mar_model_with_anchors(n, anchors, scale, rng)
}

/// MAR model with a caller-chosen anchor set.
pub fn make_mar_model_with_anchors<R: Rng + ?Sized>(
    n: usize,
    mut anchors: Vec<usize>,
    scale: f64,
    rng: &mut R,
) -> Result<MarModel> {
    anchors.sort_unstable();
    anchors.dedup();
    if anchors.is_empty() || anchors.len() >= n || anchors.iter().any(|&a| a >= n) {
        return Err(structural("MAR anchors must be a nonempty proper subset of the features"));
    }
    let modeled: Vec<usize> = (0..n).filter(|i| !anchors.contains(i)).collect();
    let weights = modeled
        .iter()
        .map(|_| anchors.iter().map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    Ok(MarModel {
        dim: n,
        biases: vec![0.0; modeled.len()],
        anchors,
        modeled,
        weights,
        scale,
        offsets: None,
    })
}

impl MarModel {
    /// Pre-offset logit of every modeled feature at complete row `x`.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| {
                let lin: f64 = w.iter().zip(&self.anchors).map(|(wi, &a)| wi * x[a]).sum();
                self.scale * (lin + b)
            })
            .collect()
    }

    /// Missing probability per modeled feature.
    pub fn missing_probabilities(&self, x: &[f64], offset: f64) -> Vec<f64> {
        self.logits(x).into_iter().map(|z| sigmoid(z + offset)).collect()
    }

    fn calibration_draws<R: Rng + ?Sized>(spec: &FeatureSpec, rng: &mut R) -> Result<CompleteDataset> {
        let lm = LabelModel::new(0.0, vec![0.0; spec.dim()], 0.0)?;
        sample_dataset(spec, &lm, MAR_CALIBRATION_DRAWS, rng)
    }

    fn logits_over(&self, draws: &CompleteDataset) -> Vec<Vec<f64>> {
        (0..draws.len()).map(|i| self.logits(draws.row(i))).collect()
    }

    /// Offset whose Monte Carlo missing fraction among modeled features is `rate`.
    pub fn calibrate_offset<R: Rng + ?Sized>(&self, spec: &FeatureSpec, rate: f64, rng: &mut R) -> Result<f64> {
        let draws = Self::calibration_draws(spec, rng)?;
        bisect_offset(&self.logits_over(&draws), rate)
    }

    pub fn offset(&self, level: MissingLevel) -> Result<f64> {
        self.offsets
            .map(|o| o[level.index()])
            .ok_or_else(|| Error::Calibration("MAR model used before calibration".into()))
    }

    pub fn sample_mask<R: Rng + ?Sized>(&self, x: &[f64], level: MissingLevel, rng: &mut R) -> Result<Vec<bool>> {
        let offset = self.offset(level)?;
        let mut mask = vec![true; self.dim];
        for (&i, p) in self.modeled.iter().zip(self.missing_probabilities(x, offset)) {
            mask[i] = rng.random::<f64>() >= p;
        }
        Ok(mask)
    }
}

fn bisect_offset(logits: &[Vec<f64>], rate: f64) -> Result<f64> {
    let count = (logits.len() * logits.first().map_or(0, Vec::len)) as f64;
    if count == 0.0 {
        return Err(Error::Calibration("no modeled features to calibrate".into()));
    }
    let rate_at = |c: f64| {
        logits.iter().flatten().map(|z| sigmoid(z + c)).sum::<f64>() / count - rate
    };
    let (mut lo, mut hi) = (-40.0, 40.0);
    if !(rate_at(lo) < 0.0 && rate_at(hi) > 0.0) {
        return Err(Error::Calibration(format!("offset bisection does not bracket rate {rate}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate_at(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Standardizes the anchor logits against `spec` and fits an offset for
/// every missing level on one shared set of Monte Carlo draws.
pub fn calibrate_mar<R: Rng + ?Sized>(mut model: MarModel, spec: &FeatureSpec, rng: &mut R) -> Result<MarModel> {
    if spec.dim() != model.dim {
        return Err(structural("MAR model and feature spec dimensions differ"));
    }
    let draws = MarModel::calibration_draws(spec, rng)?;
    let total = draws.len() as f64;
    for j in 0..model.modeled.len() {
        let lin: Vec<f64> = (0..draws.len())
            .map(|i| {
                let x = draws.row(i);
                model.weights[j].iter().zip(&model.anchors).map(|(w, &a)| w * x[a]).sum()
            })
            .collect();
        let mean = lin.iter().sum::<f64>() / total;
        let var = lin.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / total;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        model.weights[j].iter_mut().for_each(|w| *w /= sd);
        model.biases[j] = -mean / sd;
    }
    let logits = model.logits_over(&draws);
    let mut offsets = [0.0; MissingLevel::COUNT];
    for level in MissingLevel::all() {
        offsets[level.index()] = bisect_offset(&logits, level.rate())?;
    }
    model.offsets = Some(offsets);
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskPattern {
    McarInd,
    /// MCAR with a contiguous missing window.
    Mcar,
    Mar,
}

impl MaskPattern {
    pub fn name(self) -> &'static str {
        match self {
            MaskPattern::McarInd => "mcar-ind",
            MaskPattern::Mcar => "mcar",
            MaskPattern::Mar => "mar",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::McarInd, Self::Mcar, Self::Mar].into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskGenerator {
    McarInd,
    McarWindow,
    Mar(MarModel),
}

impl MaskGenerator {
    pub fn pattern(&self) -> MaskPattern {
        match self {
            MaskGenerator::McarInd => MaskPattern::McarInd,
            MaskGenerator::McarWindow => MaskPattern::Mcar,
            MaskGenerator::Mar(_) => MaskPattern::Mar,
        }
    }
}

/// Where each sample's missing rate comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateSource {
    /// Drawn per sample with [`sample_missing_rate`].
    Level(MissingLevel),
    /// The same rate for every sample. MAR only accepts grid rates here.
    Fixed(f64),
}

/// Zero-imputed features, binary masks, labels and observation counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    dim: usize,
    features: Vec<f64>,
    masks: Vec<f64>,
    labels: Vec<f64>,
    observed: Vec<usize>,
    joint: Vec<usize>,
}

impl MaskedDataset {
    /// Builds the dataset, zero-imputing `features` wherever the mask is 0.
    pub fn new(dim: usize, mut features: Vec<f64>, masks: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        let rows = labels.len();
        if features.len() != rows * dim || masks.len() != rows * dim {
            return Err(structural("masked dataset buffers do not agree on shape"));
        }
        if masks.iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(structural("mask entries must be 0 or 1"));
        }
        for (x, m) in features.iter_mut().zip(&masks) {
            if *m == 0.0 {
                *x = 0.0;
            }
        }
        let mut observed = vec![0; dim];
        let mut joint = vec![0; dim * dim];
        for row in masks.chunks_exact(dim.max(1)).take(rows) {
            for k in 0..dim {
                if row[k] == 1.0 {
                    observed[k] += 1;
                    for l in 0..dim {
                        if row[l] == 1.0 {
                            joint[k * dim + l] += 1;
                        }
                    }
                }
            }
        }
        Ok(Self { dim, features, masks, labels, observed, joint })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Zero-imputed features of row `i`.
    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn mask(&self, i: usize) -> &[f64] {
        &self.masks[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// `N^k`: rows observing feature `k`.
    pub fn observed_count(&self, k: usize) -> usize {
        self.observed[k]
    }

    /// `N^{kl}`: rows observing both `k` and `l`.
    pub fn joint_count(&self, k: usize, l: usize) -> usize {
        self.joint[k * self.dim + l]
    }

    pub fn missing_fraction(&self) -> f64 {
        let missing = self.masks.iter().filter(|&&m| m == 0.0).count();
        missing as f64 / self.masks.len().max(1) as f64
    }

    /// FNV-1a over every stored bit pattern; equal datasets give equal sums.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.dim as u64);
        for v in self.features.iter().chain(&self.masks).chain(&self.labels) {
            eat(v.to_bits());
        }
        h
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let xs: Vec<String> = (1..=self.dim).map(|i| format!("x_{i}")).collect();
        let ms: Vec<String> = (1..=self.dim).map(|i| format!("m_{i}")).collect();
        writeln!(out, "{},{},y", xs.join(","), ms.join(","))?;
        for i in 0..self.len() {
            for v in self.x(i) {
                write!(out, "{v},")?;
            }
            for m in self.mask(i) {
                write!(out, "{},", *m as u8)?;
            }
            writeln!(out, "{}", self.labels[i])?;
        }
        Ok(())
    }
}

/// Masks every row of `data`: draw the sample rate, draw a mask for the
/// pattern, zero-impute.
pub fn apply_masks<R: Rng + ?Sized>(
    data: &CompleteDataset,
    generator: &MaskGenerator,
    rate: RateSource,
    rng: &mut R,
) -> Result<MaskedDataset> {
    let n = data.dim;
    if let MaskGenerator::Mar(model) = generator {
        if model.dim != n {
            return Err(structural("MAR model dimension differs from data"));
        }
    }
    let fixed_level = match rate {
        RateSource::Fixed(r) => {
            if !(0.0..=1.0).contains(&r) {
                return Err(structural(format!("missing rate {r} outside [0, 1]")));
            }
            MissingLevel::from_rate(r).ok()
        }
        RateSource::Level(l) => Some(l),
    };
    let mut masks = Vec::with_capacity(data.features.len());
    for i in 0..data.len() {
        let (level, r) = match rate {
            RateSource::Level(l) => {
                let s = sample_missing_rate(l, rng);
                (Some(s), s.rate())
            }
            RateSource::Fixed(r) => (fixed_level, r),
        };
        let mask = match generator {
            MaskGenerator::McarInd => mcar_ind_mask(n, r, rng),
            MaskGenerator::McarWindow => mcar_window_mask(n, r, rng),
            MaskGenerator::Mar(model) => {
                let level = level.ok_or_else(|| {
                    Error::Calibration(format!("MAR masks need a grid missing rate, got {r}"))
                })?;
                model.sample_mask(data.row(i), level, rng)?
            }
        };
        masks.extend(mask.into_iter().map(|o| if o { 1.0 } else { 0.0 }));
    }
    MaskedDataset::new(n, data.features.clone(), masks, data.labels.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::synthetic::{make_gaussian_spec, FeatureKind};

    #[test]
    fn level_parsing() {
        assert_eq!(MissingLevel::parse("0.3").unwrap().tenths(), 3);
        assert_eq!(MissingLevel::parse("70%").unwrap().tenths(), 7);
        assert_eq!(MissingLevel::parse("90").unwrap().rate(), 0.9);
        assert!(MissingLevel::parse("0.35").is_err());
        assert!(MissingLevel::parse("1.0").is_err());
        assert!(MissingLevel::from_tenths(0).is_err());
        assert_eq!(MissingLevel::all().count(), 9);
    }

    #[test]
    fn sampled_rates_stay_on_grid() {
        let mut rng = seeded(1);
        let level = MissingLevel::from_tenths(5).unwrap();
        for _ in 0..1000 {
            let r = sample_missing_rate(level, &mut rng);
            assert!((1..=9).contains(&r.tenths()));
        }
    }

    #[test]
    fn extreme_mcar_rates() {
        let mut rng = seeded(2);
        assert!(mcar_ind_mask(20, 0.0, &mut rng).iter().all(|&o| o));
        assert!(mcar_ind_mask(20, 1.0, &mut rng).iter().all(|&o| !o));
        assert!(mcar_window_mask(20, 0.0, &mut rng).iter().all(|&o| o));
        assert!(mcar_window_mask(20, 1.0, &mut rng).iter().all(|&o| !o));
    }

    #[test]
    fn window_of_five_in_ten() {
        let mut rng = seeded(3);
        for _ in 0..200 {
            let mask = mcar_window_mask(10, 0.5, &mut rng);
            let missing: Vec<usize> = (0..10).filter(|&i| !mask[i]).collect();
            assert_eq!(missing.len(), 5);
            assert_eq!(missing[4] - missing[0], 4);
        }
        // floor guards against 0.7 * 10 = 7.000000000000001 style products
        assert_eq!(window_length(10, 0.7), 7);
        assert_eq!(window_length(50, 0.3), 15);
        assert_eq!(window_length(7, 0.5), 3);
    }

    #[test]
    fn mar_needs_ten_features() {
        assert!(make_mar_model(9, 1.0, &mut seeded(0)).is_err());
        let m = make_mar_model(25, 1.0, &mut seeded(0)).unwrap();
        assert_eq!(m.anchors.len(), 2);
        assert_eq!(m.modeled.len(), 23);
    }

    #[test]
    fn mar_probabilities_depend_on_anchor_values() {
        let spec = make_gaussian_spec(10, FeatureKind::Gaussian, &mut seeded(4)).unwrap();
        let model = make_mar_model(10, 1.0, &mut seeded(5)).unwrap();
        let model = calibrate_mar(model, &spec, &mut seeded(6)).unwrap();
        let offset = model.offset(MissingLevel::from_tenths(5).unwrap()).unwrap();
        let mut x = vec![0.0; 10];
        let base = model.missing_probabilities(&x, offset);
        x[model.anchors[0]] += 1.0;
        let moved = model.missing_probabilities(&x, offset);
        assert!(base.iter().zip(&moved).all(|(a, b)| a != b));
        // non-anchor values do not matter
        x[model.modeled[0]] += 3.0;
        assert_eq!(model.missing_probabilities(&x, offset), moved);
    }

    #[test]
    fn mar_calibration_rejects_unreachable_rates() {
        let spec = make_gaussian_spec(10, FeatureKind::Gaussian, &mut seeded(4)).unwrap();
        let model = make_mar_model(10, 1.0, &mut seeded(5)).unwrap();
        assert!(matches!(model.calibrate_offset(&spec, 0.0, &mut seeded(1)), Err(Error::Calibration(_))));
        assert!(matches!(model.calibrate_offset(&spec, 1.0, &mut seeded(1)), Err(Error::Calibration(_))));
        let uncalibrated = MaskGenerator::Mar(model);
        let lm = LabelModel::new(0.0, vec![0.0; 10], 0.0).unwrap();
        let data = sample_dataset(&spec, &lm, 3, &mut seeded(2)).unwrap();
        let level = RateSource::Level(MissingLevel::from_tenths(2).unwrap());
        assert!(apply_masks(&data, &uncalibrated, level, &mut seeded(3)).is_err());
    }

    #[test]
    fn full_observation_keeps_features() {
        let spec = make_gaussian_spec(4, FeatureKind::Gaussian, &mut seeded(1)).unwrap();
        let lm = LabelModel::new(0.0, vec![1.0; 4], 0.1).unwrap();
        let data = sample_dataset(&spec, &lm, 50, &mut seeded(2)).unwrap();
        let masked = apply_masks(&data, &MaskGenerator::McarInd, RateSource::Fixed(0.0), &mut seeded(3)).unwrap();
        assert_eq!(masked.features, data.features);
        for k in 0..4 {
            assert_eq!(masked.observed_count(k), 50);
            assert_eq!(masked.joint_count(k, (k + 1) % 4), 50);
        }
    }

    #[test]
    fn constructor_zero_imputes() {
        let d = MaskedDataset::new(2, vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(d.x(0), &[1.0, 0.0]);
        assert_eq!(d.x(1), &[0.0, 4.0]);
        assert_eq!(d.observed_count(0), 1);
        assert_eq!(d.joint_count(0, 1), 0);
        assert!(MaskedDataset::new(2, vec![1.0; 4], vec![0.5; 4], vec![0.0; 2]).is_err());
    }

    #[test]
    fn csv_layout() {
        let d = MaskedDataset::new(2, vec![1.5, 2.0], vec![1.0, 0.0], vec![7.0]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x_1,x_2,m_1,m_2,y\n1.5,0,1,0,7\n");
    }
}
