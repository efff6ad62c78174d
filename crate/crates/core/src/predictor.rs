//! Mask-conditioned linear predictors `yhat = phi_0(m) + sum_i phi_i(m) (x . m)_i`,
//! their weighted training, and exact loss evaluation on finite instances.

use std::io::{BufRead, Write};

use num_rational::Rational64;
use num_traits::{Num, ToPrimitive};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{structural, Error, Result};
use crate::masks::MaskedDataset;
use crate::nn::{weighted_mse_step, AdamState, MlpParams, MlpTrace, Regressor, Sample};

/// A zero-imputed row and its mask, borrowed from a dataset.
#[derive(Debug, Clone, Copy)]
pub struct MaskedRow<'a> {
    pub x: &'a [f64],
    pub m: &'a [f64],
}

/// Dense `(n+1)^3` tensor indexed `[i][j][k]`; index 0 is the constant slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTensor<T = f64> {
    dim: usize,
    values: Vec<T>,
}

pub type QuadraticTheta = ThetaTensor<f64>;

impl<T: Num + Clone> ThetaTensor<T> {
    pub fn zeros(dim: usize) -> Self {
        let side = dim + 1;
        Self { dim, values: vec![T::zero(); side * side * side] }
    }

    pub fn from_values(dim: usize, values: Vec<T>) -> Result<Self> {
        let side = dim + 1;
        if values.len() != side * side * side {
            return Err(structural(format!("theta for n={dim} needs {} entries, got {}", side.pow(3), values.len())));
        }
        Ok(Self { dim, values })
    }

    /// Builds from the slices `theta[:, :, k]`, each given as rows `i` of columns `j`.
    pub fn from_slices(slices: &[Vec<Vec<T>>]) -> Result<Self> {
        let side = slices.len();
        if side == 0 || slices.iter().any(|s| s.len() != side || s.iter().any(|r| r.len() != side)) {
            return Err(structural("theta slices must be square and as many as their side"));
        }
        let mut t = Self::zeros(side - 1);
        for (k, slice) in slices.iter().enumerate() {
            for (i, row) in slice.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    *t.get_mut(i, j, k) = v.clone();
                }
            }
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let side = self.dim + 1;
        (i * side + j) * side + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &T {
        &self.values[self.index(i, j, k)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize, k: usize) -> &mut T {
        let idx = self.index(i, j, k);
        &mut self.values[idx]
    }

    /// `phi_k(m) = sum_{i,j} theta_ijk m_i m_j` with `m_0 = 1`.
    pub fn head_coefficients(&self, m: &[bool]) -> Vec<T> {
        let side = self.dim + 1;
        let on = |i: usize| i == 0 || m[i - 1];
        (0..side)
            .map(|k| {
                let mut acc = T::zero();
                for i in (0..side).filter(|&i| on(i)) {
                    for j in (0..side).filter(|&j| on(j)) {
                        acc = acc + self.get(i, j, k).clone();
                    }
                }
                acc
            })
            .collect()
    }

    /// `sum_{i,j,k} theta_ijk x_k m_i m_j m_k` with `x_0 = m_0 = 1`.
    pub fn predict_exact(&self, x: &[T], m: &[bool]) -> T {
        self.head_coefficients(m)
            .into_iter()
            .enumerate()
            .fold(T::zero(), |acc, (k, phi)| match k {
                0 => acc + phi,
                _ if m[k - 1] => acc + phi * x[k - 1].clone(),
                _ => acc,
            })
    }
}

/// Float version of [`ThetaTensor::predict_exact`] taking a 0/1 mask.
pub fn quadratic_predict(theta: &QuadraticTheta, x: &[f64], m: &[f64]) -> f64 {
    let side = theta.dim + 1;
    let aug = |v: &[f64], i: usize| if i == 0 { 1.0 } else { v[i - 1] };
    let mut y = 0.0;
    for k in 0..side {
        let xk = aug(x, k) * aug(m, k);
        if xk == 0.0 {
            continue;
        }
        for i in 0..side {
            let mi = aug(m, i);
            if mi == 0.0 {
                continue;
            }
            for j in 0..side {
                y += theta.values[(i * side + j) * side + k] * xk * mi * aug(m, j);
            }
        }
    }
    y
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorModel {
    /// `phi = net([1; m])`, with `net` mapping `n+1` inputs to `n+1` coefficients.
    LinearHead(MlpParams),
    QuadraticTheta(QuadraticTheta),
}

#[derive(Debug, Clone, Default)]
pub struct PredictorTrace {
    mlp: MlpTrace,
}

impl PredictorModel {
    /// `depth` hidden ReLU layers of `width` units.
    pub fn linear_head<R: Rng + ?Sized>(dim: usize, depth: usize, width: usize, rng: &mut R) -> Result<Self> {
        let mut widths = vec![dim + 1];
        widths.extend(std::iter::repeat_n(width, depth));
        widths.push(dim + 1);
        Ok(Self::LinearHead(MlpParams::init(&widths, rng)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            PredictorModel::LinearHead(net) => net.input_width() - 1,
            PredictorModel::QuadraticTheta(t) => t.dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PredictorModel::LinearHead(_) => "linear-head",
            PredictorModel::QuadraticTheta(_) => "quadratic-theta",
        }
    }

    /// `phi(m)`, length `n+1`.
    pub fn head_coefficients(&self, m: &[f64]) -> Result<Vec<f64>> {
        self.check_width(m.len())?;
        match self {
            PredictorModel::LinearHead(net) => net.forward(&augment(m)),
            PredictorModel::QuadraticTheta(t) => {
                let bits: Vec<bool> = m.iter().map(|&v| v != 0.0).collect();
                Ok(t.head_coefficients(&bits))
            }
        }
    }

    fn check_width(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(structural(format!("model expects {} features, got {len}", self.dim())));
        }
        Ok(())
    }
}

fn augment(m: &[f64]) -> Vec<f64> {
    let mut a = Vec::with_capacity(m.len() + 1);
    a.push(1.0);
    a.extend_from_slice(m);
    a
}

pub fn predict(model: &PredictorModel, x: &[f64], m: &[f64]) -> Result<f64> {
    model.check_width(x.len())?;
    model.check_width(m.len())?;
    let mut trace = PredictorTrace::default();
    Ok(model.forward(&MaskedRow { x, m }, &mut trace))
}

impl<'a> Regressor<MaskedRow<'a>> for PredictorModel {
    type Trace = PredictorTrace;

    fn params(&self) -> &[f64] {
        match self {
            PredictorModel::LinearHead(net) => net.params(),
            PredictorModel::QuadraticTheta(t) => &t.values,
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            PredictorModel::LinearHead(net) => net.params_mut(),
            PredictorModel::QuadraticTheta(t) => &mut t.values,
        }
    }

    fn forward(&self, row: &MaskedRow<'a>, trace: &mut PredictorTrace) -> f64 {
        match self {
            PredictorModel::LinearHead(net) => {
                net.forward_trace(&augment(row.m), &mut trace.mlp);
                let phi = trace.mlp.output();
                phi[0] + row.x.iter().zip(row.m).zip(&phi[1..]).map(|((x, m), p)| p * x * m).sum::<f64>()
            }
            PredictorModel::QuadraticTheta(t) => quadratic_predict(t, row.x, row.m),
        }
    }

    fn backward(&self, row: &MaskedRow<'a>, trace: &PredictorTrace, upstream: f64, grad: &mut [f64]) {
        match self {
            PredictorModel::LinearHead(net) => {
                let mut g = Vec::with_capacity(row.x.len() + 1);
                g.push(upstream);
                g.extend(row.x.iter().zip(row.m).map(|(x, m)| upstream * x * m));
                net.backward(&trace.mlp, &g, grad);
            }
            PredictorModel::QuadraticTheta(t) => {
                let side = t.dim + 1;
                let aug = |v: &[f64], i: usize| if i == 0 { 1.0 } else { v[i - 1] };
                for k in 0..side {
                    let xk = upstream * aug(row.x, k) * aug(row.m, k);
                    if xk == 0.0 {
                        continue;
                    }
                    for i in (0..side).filter(|&i| aug(row.m, i) != 0.0) {
                        for j in 0..side {
                            grad[(i * side + j) * side + k] += xk * aug(row.m, i) * aug(row.m, j);
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 1000, batch_size: 64, lr: 1e-3 }
    }
}

/// Mini-batch Adam on the normalized weighted squared error, reshuffling the
/// rows every epoch. `weights = None` trains with unit weights. Returns the
/// weighted mean pre-step batch loss of every epoch.
pub fn train_predictor<R: Rng + ?Sized>(
    model: &mut PredictorModel,
    data: &MaskedDataset,
    weights: Option<&[f64]>,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if data.dim() != model.dim() {
        return Err(structural(format!("model expects {} features, data has {}", model.dim(), data.dim())));
    }
    if data.is_empty() {
        return Err(structural("cannot train on an empty dataset"));
    }
    if config.batch_size == 0 {
        return Err(structural("batch size must be positive"));
    }
    let unit;
    let weights = match weights {
        Some(w) if w.len() != data.len() => {
            return Err(structural(format!("{} weights for {} samples", w.len(), data.len())));
        }
        Some(w) => w,
        None => {
            unit = vec![1.0; data.len()];
            &unit
        }
    };
    let n_params = Regressor::<MaskedRow>::params(model).len();
    let mut adam = AdamState::new(n_params, config.lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut batch_w = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        order.shuffle(rng);
        let (mut acc, mut total) = (0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch_w.clear();
            for &i in chunk {
                batch.push(Sample { input: MaskedRow { x: data.x(i), m: data.mask(i) }, target: data.label(i) });
                batch_w.push(weights[i]);
            }
            let loss = weighted_mse_step(model, &mut adam, &batch, &batch_w).map_err(|e| match e {
                Error::Numerical(msg) => Error::Numerical(format!("epoch {epoch}: {msg}")),
                other => other,
            })?;
            let w: f64 = batch_w.iter().sum();
            acc += loss * w;
            total += w;
        }
        trace.push(acc / total);
    }
    Ok(trace)
}

/// CSV of `epoch,loss`.
pub fn write_loss_trace<W: Write>(trace: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "epoch,loss")?;
    for (e, l) in trace.iter().enumerate() {
        writeln!(out, "{e},{l}")?;
    }
    Ok(())
}

const CHECKPOINT_TAG: &str = "maskshift-predictor v1";

/// Text checkpoint: tag, kind, shape line, then one parameter per line.
pub fn write_checkpoint<W: Write>(model: &PredictorModel, mut out: W) -> Result<()> {
    writeln!(out, "{CHECKPOINT_TAG}")?;
    writeln!(out, "kind {}", model.kind_name())?;
    match model {
        PredictorModel::LinearHead(net) => {
            let w: Vec<String> = net.widths().iter().map(|w| w.to_string()).collect();
            writeln!(out, "widths {}", w.join(" "))?;
        }
        PredictorModel::QuadraticTheta(t) => writeln!(out, "dim {}", t.dim)?,
    }
    let params = Regressor::<MaskedRow>::params(model);
    writeln!(out, "params {}", params.len())?;
    for p in params {
        writeln!(out, "{p}")?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<PredictorModel> {
    let bad = |msg: &str| structural(format!("checkpoint: {msg}"));
    let mut lines = input.lines();
    let mut next = || -> Result<String> { lines.next().ok_or_else(|| bad("truncated"))?.map_err(Error::from) };
    if next()? != CHECKPOINT_TAG {
        return Err(bad("unknown version tag"));
    }
    let kind = next()?;
    let shape = next()?;
    let count_line = next()?;
    let count: usize = count_line
        .strip_prefix("params ")
        .and_then(|c| c.parse().ok())
        .ok_or_else(|| bad("bad parameter count"))?;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        params.push(next()?.trim().parse::<f64>().map_err(|_| bad("bad parameter value"))?);
    }
    match kind.as_str() {
        "kind linear-head" => {
            let widths = shape
                .strip_prefix("widths ")
                .ok_or_else(|| bad("missing widths"))?
                .split_whitespace()
                .map(|w| w.parse::<usize>().map_err(|_| bad("bad width")))
                .collect::<Result<Vec<_>>>()?;
            Ok(PredictorModel::LinearHead(MlpParams::from_parts(&widths, params)?))
        }
        "kind quadratic-theta" => {
            let dim = shape
                .strip_prefix("dim ")
                .and_then(|d| d.parse().ok())
                .ok_or_else(|| bad("missing dim"))?;
            Ok(PredictorModel::QuadraticTheta(ThetaTensor::from_values(dim, params)?))
        }
        _ => Err(bad("unknown model kind")),
    }
}

/// A finite population: feature support with probabilities and exact labels,
/// and separate train and test mask distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteInstance<T = Rational64> {
    pub dim: usize,
    /// `(x, p(x), y(x))`.
    pub features: Vec<(Vec<T>, T, T)>,
    pub train_masks: Vec<(Vec<bool>, T)>,
    pub test_masks: Vec<(Vec<bool>, T)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl<T: Num + Clone + PartialOrd + ToPrimitive> DiscreteInstance<T> {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, probs: Vec<&T>| -> Result<()> {
            if probs.is_empty() {
                return Err(structural(format!("{name} support is empty")));
            }
            if probs.iter().any(|p| **p < T::zero()) {
                return Err(structural(format!("{name} has a negative probability")));
            }
            let total = probs.into_iter().fold(T::zero(), |a, p| a + p.clone());
            let dev = (total - T::one()).to_f64().map_or(f64::INFINITY, f64::abs);
            if dev > 1e-12 {
                return Err(structural(format!("{name} probabilities do not sum to 1")));
            }
            Ok(())
        };
        check("feature", self.features.iter().map(|f| &f.1).collect())?;
        check("train mask", self.train_masks.iter().map(|m| &m.1).collect())?;
        check("test mask", self.test_masks.iter().map(|m| &m.1).collect())?;
        if self.features.iter().any(|f| f.0.len() != self.dim)
            || self.train_masks.iter().chain(&self.test_masks).any(|m| m.0.len() != self.dim)
        {
            return Err(structural("support point with the wrong dimension"));
        }
        Ok(())
    }

    pub fn masks(&self, split: Split) -> &[(Vec<bool>, T)] {
        match split {
            Split::Train => &self.train_masks,
            Split::Test => &self.test_masks,
        }
    }

    /// Floating-point copy of the instance.
    pub fn to_f64(&self) -> DiscreteInstance<f64> {
        let f = |v: &T| v.to_f64().unwrap_or(f64::NAN);
        DiscreteInstance {
            dim: self.dim,
            features: self.features.iter().map(|(x, p, y)| (x.iter().map(f).collect(), f(p), f(y))).collect(),
            train_masks: self.train_masks.iter().map(|(m, p)| (m.clone(), f(p))).collect(),
            test_masks: self.test_masks.iter().map(|(m, p)| (m.clone(), f(p))).collect(),
        }
    }
}

/// `sum_{x,m} p(x) p(m) (y(x) - yhat(x . m, m))^2`, enumerated.
pub fn enumerate_population_loss<T: Num + Clone>(
    predictor: impl Fn(&[T], &[bool]) -> T,
    instance: &DiscreteInstance<T>,
    split: Split,
) -> T {
    let masks = match split {
        Split::Train => &instance.train_masks,
        Split::Test => &instance.test_masks,
    };
    let mut loss = T::zero();
    for (x, px, y) in &instance.features {
        for (m, pm) in masks {
            let xm: Vec<T> = x.iter().zip(m).map(|(v, &o)| if o { v.clone() } else { T::zero() }).collect();
            let r = y.clone() - predictor(&xm, m);
            loss = loss + px.clone() * pm.clone() * r.clone() * r;
        }
    }
    loss
}

/// Population loss of a quadratic tensor.
pub fn theta_population_loss<T: Num + Clone>(theta: &ThetaTensor<T>, instance: &DiscreteInstance<T>, split: Split) -> T {
    enumerate_population_loss(|x, m| theta.predict_exact(x, m), instance, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::StandardNormal;

    #[test]
    fn all_missing_uses_bias_only() {
        let mut rng = seeded(1);
        let model = PredictorModel::linear_head(3, 2, 8, &mut rng).unwrap();
        let m = [0.0; 3];
        let phi = model.head_coefficients(&m).unwrap();
        let y = predict(&model, &[0.0; 3], &m).unwrap();
        assert_eq!(y, phi[0]);
    }

    #[test]
    fn missing_coordinates_do_not_matter() {
        let mut rng = seeded(2);
        let lin = PredictorModel::linear_head(4, 2, 16, &mut rng).unwrap();
        let vals: Vec<f64> = (0..4usize.pow(3) + 61).map(|_| rng.sample(StandardNormal)).collect();
        let quad = PredictorModel::QuadraticTheta(ThetaTensor::from_values(4, vals[..125].to_vec()).unwrap());
        let m = [1.0, 0.0, 1.0, 0.0];
        for model in [&lin, &quad] {
            let base = predict(model, &[0.3, 0.0, -1.2, 0.0], &m).unwrap();
            let pert = predict(model, &[0.3, 7.0, -1.2, -4.0], &m).unwrap();
            assert_eq!(base, pert);
        }
    }

    #[test]
    fn width_mismatch_is_structural() {
        let model = PredictorModel::QuadraticTheta(ThetaTensor::zeros(2));
        assert!(matches!(predict(&model, &[1.0], &[1.0]), Err(Error::Structural(_))));
    }

    #[test]
    fn quadratic_float_matches_exact() {
        let mut rng = seeded(3);
        let vals: Vec<f64> = (0..64).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = ThetaTensor::from_values(3, vals).unwrap();
        for bits in 0..8u8 {
            let m: Vec<bool> = (0..3).map(|i| bits >> i & 1 == 1).collect();
            let mf: Vec<f64> = m.iter().map(|&b| b as u8 as f64).collect();
            let x: Vec<f64> = mf.iter().map(|&o| o * rng.random_range(-1.0..1.0)).collect();
            let a = quadratic_predict(&t, &x, &mf);
            let b = t.predict_exact(&x, &m);
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(quadratic_predict(&ThetaTensor::zeros(3), &[1.0; 3], &[1.0; 3]), 0.0);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = seeded(4);
        let rows: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..12)
            .map(|_| {
                let m: Vec<f64> = (0..3).map(|_| if rng.random_bool(0.6) { 1.0 } else { 0.0 }).collect();
                let x: Vec<f64> = m.iter().map(|o| o * rng.sample::<f64, _>(StandardNormal)).collect();
                (x, m, rng.sample(StandardNormal))
            })
            .collect();
        let batch: Vec<Sample<MaskedRow>> =
            rows.iter().map(|(x, m, y)| Sample { input: MaskedRow { x, m }, target: *y }).collect();
        let w: Vec<f64> = (0..12).map(|_| rng.random_range(0.1..2.0)).collect();
        let lin = PredictorModel::linear_head(3, 2, 6, &mut rng).unwrap();
        let vals: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let quad = PredictorModel::QuadraticTheta(ThetaTensor::from_values(3, vals).unwrap());
        for model in [lin, quad] {
            let err = crate::nn::gradient_check(&model, &batch, &w, 1e-6).unwrap();
            assert!(err < 1e-4, "{} {err}", model.kind_name());
        }
    }

    fn toy_data(rows: usize, seed: u64) -> MaskedDataset {
        let mut rng = seeded(seed);
        let mut xs = Vec::new();
        let mut ms = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..rows {
            let x: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            ys.push(1.0 + x[0] - 2.0 * x[1]);
            xs.extend(x);
            ms.extend([1.0, if rng.random_bool(0.5) { 1.0 } else { 0.0 }]);
        }
        MaskedDataset::new(2, xs, ms, ys).unwrap()
    }

    #[test]
    fn zero_epochs_leave_model_unchanged() {
        let data = toy_data(20, 5);
        let mut rng = seeded(6);
        let mut model = PredictorModel::linear_head(2, 1, 4, &mut rng).unwrap();
        let before = model.clone();
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let trace = train_predictor(&mut model, &data, None, &cfg, &mut rng).unwrap();
        assert!(trace.is_empty());
        assert_eq!(model, before);
    }

    #[test]
    fn uniform_weights_match_unweighted_bitwise() {
        let data = toy_data(100, 7);
        let cfg = TrainConfig { epochs: 5, batch_size: 16, lr: 0.01 };
        let init = PredictorModel::linear_head(2, 2, 8, &mut seeded(8)).unwrap();
        let mut a = init.clone();
        let mut b = init.clone();
        let ta = train_predictor(&mut a, &data, None, &cfg, &mut seeded(9)).unwrap();
        let tb = train_predictor(&mut b, &data, Some(&[1.0; 100]), &cfg, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn training_reduces_loss() {
        let data = toy_data(512, 10);
        let mut model = PredictorModel::QuadraticTheta(ThetaTensor::zeros(2));
        let cfg = TrainConfig { epochs: 60, batch_size: 32, lr: 0.01 };
        let trace = train_predictor(&mut model, &data, None, &cfg, &mut seeded(11)).unwrap();
        // half the rows lose x_2, leaving irreducible loss 0.5 * 4
        let last = *trace.last().unwrap();
        assert!(last < 0.5 * trace[0]);
        assert!((last - 2.0).abs() < 0.3, "{last}");
        for pair in trace.windows(2) {
            assert!(pair[1] <= pair[0] * 1.05);
        }
    }

    #[test]
    fn non_finite_loss_aborts() {
        let xs = vec![1e200, 1e200];
        let data = MaskedDataset::new(1, xs, vec![1.0, 1.0], vec![1e200, -1e200]).unwrap();
        let mut model = PredictorModel::QuadraticTheta(ThetaTensor::from_values(1, vec![1.0; 8]).unwrap());
        let cfg = TrainConfig { epochs: 1, batch_size: 2, lr: 0.1 };
        let err = train_predictor(&mut model, &data, None, &cfg, &mut seeded(1)).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "{err:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = seeded(12);
        let lin = PredictorModel::linear_head(3, 2, 5, &mut rng).unwrap();
        let vals: Vec<f64> = (0..27).map(|_| rng.sample(StandardNormal)).collect();
        let quad = PredictorModel::QuadraticTheta(ThetaTensor::from_values(2, vals).unwrap());
        for model in [lin, quad] {
            let mut buf = Vec::new();
            write_checkpoint(&model, &mut buf).unwrap();
            let back = read_checkpoint(buf.as_slice()).unwrap();
            assert_eq!(back, model);
        }
        assert!(read_checkpoint("maskshift-predictor v0\n".as_bytes()).is_err());
    }

    #[test]
    fn loss_trace_csv() {
        let mut buf = Vec::new();
        write_loss_trace(&[2.5, 1.0], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,loss\n0,2.5\n1,1\n");
    }
}
