//! Sample reweighting that removes dependence among features, among mask
//! entries, and between the two, measured with random-Fourier-feature
//! partial cross-covariances restricted to the rows where each variable is
//! observed.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{structural, Error, Result};
use crate::masks::MaskedDataset;
use crate::nn::AdamState;

/// `q` random features `z -> sqrt(2) cos(omega z + beta)` for one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct RffBank {
    pub freqs: Vec<f64>,
    pub phases: Vec<f64>,
}

impl RffBank {
    pub fn draw<R: Rng + ?Sized>(q: usize, rng: &mut R) -> Self {
        let freqs = (0..q).map(|_| rng.sample(StandardNormal)).collect();
        let phases = (0..q).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self { freqs, phases }
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn apply_into(&self, z: f64, out: &mut [f64]) {
        for ((o, w), b) in out.iter_mut().zip(&self.freqs).zip(&self.phases) {
            *o = SQRT_2 * (w * z + b).cos();
        }
    }
}

pub fn rff_apply(bank: &RffBank, z: f64) -> Vec<f64> {
    let mut out = vec![0.0; bank.len()];
    bank.apply_into(z, &mut out);
    out
}

/// One bank per feature and one per mask entry, fixed for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RffBanks {
    pub q: usize,
    pub features: Vec<RffBank>,
    pub masks: Vec<RffBank>,
}

impl RffBanks {
    pub fn draw<R: Rng + ?Sized>(dim: usize, q: usize, rng: &mut R) -> Self {
        let features = (0..dim).map(|_| RffBank::draw(q, rng)).collect();
        let masks = (0..dim).map(|_| RffBank::draw(q, rng)).collect();
        Self { q, features, masks }
    }

    pub fn bank(&self, v: Variable) -> &RffBank {
        match v {
            Variable::Feature(k) => &self.features[k],
            Variable::Mask(k) => &self.masks[k],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    Feature(usize),
    Mask(usize),
}

/// A pair with fewer than two usable rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairSkipped;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecorrMode {
    Full,
    /// Feature-feature and mask-mask pairs only.
    IntraOnly,
    /// Feature-mask pairs only.
    InterOnly,
    None,
}

impl DecorrMode {
    pub const ALL: [DecorrMode; 4] = [Self::Full, Self::IntraOnly, Self::InterOnly, Self::None];

    pub fn name(self) -> &'static str {
        match self {
            DecorrMode::Full => "full",
            DecorrMode::IntraOnly => "intra",
            DecorrMode::InterOnly => "inter",
            DecorrMode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    fn intra(self) -> bool {
        matches!(self, Self::Full | Self::IntraOnly)
    }

    fn inter(self) -> bool {
        matches!(self, Self::Full | Self::InterOnly)
    }
}

/// Pairs entering the objective: `X_k, X_l` and `M_k, M_l` for `k < l`,
/// `X_k, M_l` for all `k, l`.
pub fn objective_pairs(dim: usize, mode: DecorrMode) -> Vec<(Variable, Variable)> {
    let mut pairs = Vec::new();
    if mode.intra() {
        for k in 0..dim {
            for l in k + 1..dim {
                pairs.push((Variable::Feature(k), Variable::Feature(l)));
            }
        }
        for k in 0..dim {
            for l in k + 1..dim {
                pairs.push((Variable::Mask(k), Variable::Mask(l)));
            }
        }
    }
    if mode.inter() {
        for k in 0..dim {
            for l in 0..dim {
                pairs.push((Variable::Feature(k), Variable::Mask(l)));
            }
        }
    }
    pairs
}

/// Per-row RFF lifts of every variable. Features are standardized on their
/// observed entries first; masks stay in {0, 1}.
#[derive(Debug, Clone)]
pub struct LiftedData {
    rows: usize,
    dim: usize,
    q: usize,
    masks: Vec<f64>,
    feature_lift: Vec<Vec<f64>>,
    mask_lift: Vec<Vec<f64>>,
}

impl LiftedData {
    pub fn new(data: &MaskedDataset, banks: &RffBanks) -> Result<Self> {
        let (rows, dim, q) = (data.len(), data.dim(), banks.q);
        if banks.features.len() != dim || banks.masks.len() != dim {
            return Err(structural("RFF banks do not match dataset dimension"));
        }
        let mut masks = Vec::with_capacity(rows * dim);
        for i in 0..rows {
            masks.extend_from_slice(data.mask(i));
        }
        let mut feature_lift = Vec::with_capacity(dim);
        let mut mask_lift = Vec::with_capacity(dim);
        for k in 0..dim {
            let observed: Vec<f64> = (0..rows).filter(|&i| data.mask(i)[k] == 1.0).map(|i| data.x(i)[k]).collect();
            let count = observed.len() as f64;
            let mean = if count > 0.0 { observed.iter().sum::<f64>() / count } else { 0.0 };
            let var = if count > 1.0 {
                observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            let mut fl = vec![0.0; rows * q];
            let mut ml = vec![0.0; rows * q];
            for i in 0..rows {
                let m = data.mask(i)[k];
                if m == 1.0 {
                    banks.features[k].apply_into((data.x(i)[k] - mean) / sd, &mut fl[i * q..(i + 1) * q]);
                }
                banks.masks[k].apply_into(m, &mut ml[i * q..(i + 1) * q]);
            }
            feature_lift.push(fl);
            mask_lift.push(ml);
        }
        Ok(Self { rows, dim, q, masks, feature_lift, mask_lift })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn available(&self, v: Variable, row: usize) -> bool {
        match v {
            Variable::Feature(k) => self.masks[row * self.dim + k] == 1.0,
            Variable::Mask(_) => true,
        }
    }

    fn lift(&self, v: Variable, row: usize) -> &[f64] {
        let q = self.q;
        match v {
            Variable::Feature(k) => &self.feature_lift[k][row * q..(row + 1) * q],
            Variable::Mask(k) => &self.mask_lift[k][row * q..(row + 1) * q],
        }
    }

    /// Row-major `q x q` partial cross-covariance of `a` and `b` under `weights`.
    pub fn partial_cov(&self, weights: &[f64], a: Variable, b: Variable) -> Result<Vec<f64>, PairSkipped> {
        self.pair(weights, a, b, None).map(|(c, _)| c)
    }

    /// `||C||_F^2` for the pair, accumulating its weight gradient into `grad` when given.
    fn pair(
        &self,
        w: &[f64],
        a: Variable,
        b: Variable,
        grad: Option<&mut [f64]>,
    ) -> Result<(Vec<f64>, f64), PairSkipped> {
        assert!(a != b, "a variable is not paired with itself");
        let q = self.q;
        let (mut count_a, mut count_b, mut count_s) = (0usize, 0usize, 0usize);
        let mut mean_a = vec![0.0; q];
        let mut mean_b = vec![0.0; q];
        for i in 0..self.rows {
            let (in_a, in_b) = (self.available(a, i), self.available(b, i));
            if in_a {
                count_a += 1;
                for (m, u) in mean_a.iter_mut().zip(self.lift(a, i)) {
                    *m += w[i] * u;
                }
            }
            if in_b {
                count_b += 1;
                for (m, v) in mean_b.iter_mut().zip(self.lift(b, i)) {
                    *m += w[i] * v;
                }
            }
            if in_a && in_b {
                count_s += 1;
            }
        }
        if count_s < 2 {
            return Err(PairSkipped);
        }
        mean_a.iter_mut().for_each(|m| *m /= count_a as f64);
        mean_b.iter_mut().for_each(|m| *m /= count_b as f64);

        let norm = 1.0 / (count_s as f64 - 1.0);
        let mut cov = vec![0.0; q * q];
        let mut sum_a = vec![0.0; q];
        let mut sum_b = vec![0.0; q];
        let mut ca = vec![0.0; q];
        let mut cb = vec![0.0; q];
        for i in 0..self.rows {
            if !(self.available(a, i) && self.available(b, i)) {
                continue;
            }
            let (u, v) = (self.lift(a, i), self.lift(b, i));
            for p in 0..q {
                ca[p] = w[i] * u[p] - mean_a[p];
                cb[p] = w[i] * v[p] - mean_b[p];
                sum_a[p] += ca[p];
                sum_b[p] += cb[p];
            }
            for p in 0..q {
                for r in 0..q {
                    cov[p * q + r] += ca[p] * cb[r];
                }
            }
        }
        cov.iter_mut().for_each(|c| *c *= norm);
        let frob: f64 = cov.iter().map(|c| c * c).sum();

        if let Some(grad) = grad {
            // dF/dw_j = 2 norm [ 1_S (u_j' C b_j + a_j' C v_j)
            //                    - 1_A u_j' C sum_b / N_A - 1_B sum_a' C v_j / N_B ]
            // with a_j = w_j u_j - mean_a, b_j = w_j v_j - mean_b; S = A n B.
            let from_b: Vec<f64> = mat_vec(&cov, &mean_b, q)
                .iter()
                .zip(mat_vec(&cov, &sum_b, q))
                .map(|(c, s)| c + s / count_a as f64)
                .collect();
            let from_a: Vec<f64> = vec_mat(&mean_a, &cov, q)
                .iter()
                .zip(vec_mat(&sum_a, &cov, q))
                .map(|(c, s)| c + s / count_b as f64)
                .collect();
            let only_a: Vec<f64> = mat_vec(&cov, &sum_b, q).iter().map(|s| s / count_a as f64).collect();
            let only_b: Vec<f64> = vec_mat(&sum_a, &cov, q).iter().map(|s| s / count_b as f64).collect();
            let scale = 2.0 * norm;
            let mut cv = vec![0.0; q];
            for j in 0..self.rows {
                let g = match (self.available(a, j), self.available(b, j)) {
                    (true, true) => {
                        let (u, v) = (self.lift(a, j), self.lift(b, j));
                        mat_vec_into(&cov, v, q, &mut cv);
                        2.0 * w[j] * dot(u, &cv) - dot(u, &from_b) - dot(v, &from_a)
                    }
                    (true, false) => -dot(self.lift(a, j), &only_a),
                    (false, true) => -dot(self.lift(b, j), &only_b),
                    (false, false) => continue,
                };
                grad[j] += scale * g;
            }
        }
        Ok((cov, frob))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec_into(m: &[f64], v: &[f64], q: usize, out: &mut [f64]) {
    for p in 0..q {
        out[p] = dot(&m[p * q..(p + 1) * q], v);
    }
}

fn mat_vec(m: &[f64], v: &[f64], q: usize) -> Vec<f64> {
    let mut out = vec![0.0; q];
    mat_vec_into(m, v, q, &mut out);
    out
}

fn vec_mat(v: &[f64], m: &[f64], q: usize) -> Vec<f64> {
    (0..q).map(|r| (0..q).map(|p| v[p] * m[p * q + r]).sum()).collect()
}

pub fn partial_cov(
    data: &MaskedDataset,
    weights: &[f64],
    a: Variable,
    b: Variable,
    banks: &RffBanks,
) -> Result<Result<Vec<f64>, PairSkipped>> {
    if weights.len() != data.len() {
        return Err(structural("weight count differs from dataset size"));
    }
    Ok(LiftedData::new(data, banks)?.partial_cov(weights, a, b))
}

/// Objective broken into its blocks; skipped pairs contribute 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObjectiveParts {
    pub feature_feature: f64,
    pub mask_mask: f64,
    pub feature_mask: f64,
    pub regularizer: f64,
}

impl ObjectiveParts {
    /// Covariance blocks selected by `mode`.
    pub fn covariance(&self, mode: DecorrMode) -> f64 {
        let mut c = 0.0;
        if mode.intra() {
            c += self.feature_feature + self.mask_mask;
        }
        if mode.inter() {
            c += self.feature_mask;
        }
        c
    }

    pub fn total(&self, mode: DecorrMode, gamma: f64) -> f64 {
        self.covariance(mode) + gamma * self.regularizer
    }
}

/// `Std(w) / mean(w)` with the population standard deviation.
pub fn weight_dispersion(w: &[f64]) -> f64 {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

fn dispersion_grad(w: &[f64], grad: &mut [f64], gamma: f64) {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for (g, wj) in grad.iter_mut().zip(w) {
        // the std is not differentiable at zero spread; use the zero subgradient
        let dsd = if sd > 0.0 { (wj - mean) / (n * sd) } else { 0.0 };
        *g += gamma * (dsd / mean - sd / (mean * mean * n));
    }
}

const PAIR_CHUNK: usize = 32;

impl LiftedData {
    /// Every block of the objective at `weights`, with its weight gradient
    /// when `want_grad` is set. Pair work is split into fixed chunks, so the
    /// result does not depend on the thread count.
    pub fn evaluate(&self, weights: &[f64], mode: DecorrMode, gamma: f64, want_grad: bool) -> (ObjectiveParts, Option<Vec<f64>>) {
        assert_eq!(weights.len(), self.rows, "weight count");
        let pairs = objective_pairs(self.dim, mode);
        let chunks: Vec<(f64, f64, f64, Option<Vec<f64>>)> = pairs
            .par_chunks(PAIR_CHUNK)
            .map(|chunk| {
                let mut grad = want_grad.then(|| vec![0.0; self.rows]);
                let (mut xx, mut mm, mut xm) = (0.0, 0.0, 0.0);
                for &(a, b) in chunk {
                    let Ok((_, f)) = self.pair(weights, a, b, grad.as_deref_mut()) else {
                        continue;
                    };
                    match (a, b) {
                        (Variable::Feature(_), Variable::Feature(_)) => xx += f,
                        (Variable::Mask(_), Variable::Mask(_)) => mm += f,
                        _ => xm += f,
                    }
                }
                (xx, mm, xm, grad)
            })
            .collect();
        let mut parts = ObjectiveParts {
            regularizer: weight_dispersion(weights),
            ..Default::default()
        };
        let mut grad = want_grad.then(|| vec![0.0; self.rows]);
        for (xx, mm, xm, g) in chunks {
            parts.feature_feature += xx;
            parts.mask_mask += mm;
            parts.feature_mask += xm;
            if let (Some(total), Some(g)) = (grad.as_mut(), g) {
                total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
            }
        }
        if let Some(g) = grad.as_mut() {
            dispersion_grad(weights, g, gamma);
        }
        (parts, grad)
    }
}

pub fn decorrelation_objective(
    data: &MaskedDataset,
    weights: &[f64],
    mode: DecorrMode,
    gamma: f64,
    banks: &RffBanks,
) -> Result<f64> {
    if weights.len() != data.len() {
        return Err(structural("weight count differs from dataset size"));
    }
    let lifted = LiftedData::new(data, banks)?;
    Ok(lifted.evaluate(weights, mode, gamma, false).0.total(mode, gamma))
}

fn softplus(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp().ln_1p()
    }
}

fn logistic(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Positive per-sample weights, `softplus(v)` rescaled to mean one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    free: Vec<f64>,
    weights: Vec<f64>,
}

/// `softplus^{-1}(1)`.
pub const UNIT_FREE_PARAM: f64 = 0.541_324_854_612_918_1;

impl WeightVector {
    pub fn uniform(n: usize) -> Self {
        Self { free: vec![UNIT_FREE_PARAM; n], weights: vec![1.0; n] }
    }

    pub fn from_free(free: Vec<f64>) -> Self {
        let s: Vec<f64> = free.iter().map(|&v| softplus(v)).collect();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let weights = s.iter().map(|v| v / mean).collect();
        Self { free, weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn free_params(&self) -> &[f64] {
        &self.free
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Pulls a weight-space gradient back to the free parameters.
    pub fn pullback(&self, grad_w: &[f64]) -> Vec<f64> {
        let n = self.weights.len() as f64;
        let s_total: f64 = self.free.iter().map(|&v| softplus(v)).sum();
        let proj = grad_w.iter().zip(&self.weights).map(|(g, w)| g * w).sum::<f64>() / n;
        self.free
            .iter()
            .zip(grad_w)
            .map(|(&v, g)| logistic(v) * (n / s_total) * (g - proj))
            .collect()
    }

    /// CSV of `sample_index,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sample_index,weight")?;
        for (i, w) in self.weights.iter().enumerate() {
            writeln!(out, "{i},{w}")?;
        }
        Ok(())
    }
}

/// Objective and its gradient with respect to the free parameters.
pub fn objective_free_grad(lifted: &LiftedData, free: &[f64], mode: DecorrMode, gamma: f64) -> (f64, Vec<f64>) {
    let wv = WeightVector::from_free(free.to_vec());
    let (parts, grad) = lifted.evaluate(wv.weights(), mode, gamma, true);
    (parts.total(mode, gamma), wv.pullback(&grad.unwrap()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightOptConfig {
    pub iterations: usize,
    pub lr: f64,
}

impl Default for WeightOptConfig {
    fn default() -> Self {
        Self { iterations: 500, lr: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct WeightFit {
    pub weights: WeightVector,
    pub initial: ObjectiveParts,
    pub best: ObjectiveParts,
    /// Objective value before each iteration.
    pub trace: Vec<f64>,
}

/// Adam on the free parameters starting from uniform weights. Returns the
/// best iterate seen, so the final objective never exceeds the initial one.
pub fn optimize_weights(
    data: &MaskedDataset,
    mode: DecorrMode,
    gamma: f64,
    config: &WeightOptConfig,
    banks: &RffBanks,
) -> Result<WeightFit> {
    if data.is_empty() {
        return Err(structural("cannot reweight an empty dataset"));
    }
    if !(gamma >= 0.0) {
        return Err(structural("gamma must be nonnegative"));
    }
    let lifted = LiftedData::new(data, banks)?;
    let uniform = WeightVector::uniform(data.len());
    let (initial, _) = lifted.evaluate(uniform.weights(), mode, gamma, false);
    let mut fit = WeightFit { weights: uniform.clone(), initial, best: initial, trace: Vec::new() };
    // the regularizer is already minimal at uniform weights
    if mode == DecorrMode::None {
        return Ok(fit);
    }
    let mut free = uniform.free_params().to_vec();
    let mut adam = AdamState::new(free.len(), config.lr);
    let mut best_total = initial.total(mode, gamma);
    for it in 0..=config.iterations {
        let wv = WeightVector::from_free(free.clone());
        let (parts, grad) = lifted.evaluate(wv.weights(), mode, gamma, it < config.iterations);
        let total = parts.total(mode, gamma);
        if !total.is_finite() {
            return Err(Error::Numerical(format!(
                "decorrelation objective became {total} at iteration {it} (weights in [{}, {}])",
                wv.weights().iter().cloned().fold(f64::INFINITY, f64::min),
                wv.weights().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )));
        }
        fit.trace.push(total);
        if total < best_total {
            best_total = total;
            fit.best = parts;
            fit.weights = wv.clone();
        }
        let Some(grad) = grad else { break };
        adam.step(&mut free, &wv.pullback(&grad));
    }
    Ok(fit)
}
