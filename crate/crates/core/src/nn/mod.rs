//! Numeric substrate: small MLPs with hand-written backprop, Adam, and the
//! weighted squared-error machinery shared by every trainable model here.

mod adam;
mod mlp;

pub use adam::AdamState;
pub use mlp::{MlpParams, MlpTrace};

use crate::error::{structural, Error, Result};

/// Stabilizer in the denominator of [`gradient_check`]'s relative error.
pub const GRADIENT_CHECK_EPS: f64 = 1e-8;

/// One regression example.
#[derive(Debug, Clone, Copy)]
pub struct Sample<I> {
    pub input: I,
    pub target: f64,
}

/// A scalar-output model with a flat parameter vector and a reverse-mode
/// gradient of its prediction.
pub trait Regressor<I> {
    type Trace: Default;

    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn forward(&self, input: &I, trace: &mut Self::Trace) -> f64;

    /// Accumulates `upstream * d(prediction)/d(params)` into `grad`, using the
    /// trace left by the matching [`forward`](Regressor::forward) call.
    fn backward(&self, input: &I, trace: &Self::Trace, upstream: f64, grad: &mut [f64]);
}

impl<I: AsRef<[f64]>> Regressor<I> for MlpParams {
    type Trace = MlpTrace;

    fn params(&self) -> &[f64] {
        MlpParams::params(self)
    }

    fn params_mut(&mut self) -> &mut [f64] {
        MlpParams::params_mut(self)
    }

    fn forward(&self, input: &I, trace: &mut MlpTrace) -> f64 {
        debug_assert_eq!(self.output_width(), 1, "scalar regression needs one output");
        self.forward_trace(input.as_ref(), trace);
        trace.output()[0]
    }

    fn backward(&self, _input: &I, trace: &MlpTrace, upstream: f64, grad: &mut [f64]) {
        MlpParams::backward(self, trace, &[upstream], grad);
    }
}

fn weight_total<I>(batch: &[Sample<I>], weights: &[f64]) -> Result<f64> {
    if batch.is_empty() {
        return Err(structural("empty batch"));
    }
    if weights.len() != batch.len() {
        return Err(structural(format!(
            "{} weights for a batch of {}",
            weights.len(),
            batch.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(structural("sample weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateBatch);
    }
    Ok(total)
}

/// `sum_i w_i (y_i - yhat_i)^2 / sum_i w_i`.
pub fn weighted_loss<I, R: Regressor<I>>(model: &R, batch: &[Sample<I>], weights: &[f64]) -> Result<f64> {
    let total = weight_total(batch, weights)?;
    let mut trace = R::Trace::default();
    let mut acc = 0.0;
    for (s, &w) in batch.iter().zip(weights) {
        let r = s.target - model.forward(&s.input, &mut trace);
        acc += w * r * r;
    }
    Ok(acc / total)
}

/// Normalized weighted loss and its gradient with respect to the flat parameters.
pub fn weighted_loss_and_grad<I, R: Regressor<I>>(
    model: &R,
    batch: &[Sample<I>],
    weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let total = weight_total(batch, weights)?;
    let mut grad = vec![0.0; model.params().len()];
    let mut trace = R::Trace::default();
    let mut acc = 0.0;
    for (s, &w) in batch.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let r = s.target - model.forward(&s.input, &mut trace);
        acc += w * r * r;
        model.backward(&s.input, &trace, -2.0 * w * r / total, &mut grad);
    }
    Ok((acc / total, grad))
}

/// One Adam step on the normalized weighted squared error. Returns the loss
/// measured before the update.
pub fn weighted_mse_step<I, R: Regressor<I>>(
    model: &mut R,
    adam: &mut AdamState,
    batch: &[Sample<I>],
    weights: &[f64],
) -> Result<f64> {
    let (loss, grad) = weighted_loss_and_grad(model, batch, weights)?;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {loss}")));
    }
    adam.step(model.params_mut(), &grad);
    Ok(loss)
}

/// Max over parameters of `|analytic - fd| / (|analytic| + |fd| + eps)` with
/// central differences of step `h`.
pub fn gradient_check<I, R: Regressor<I> + Clone>(
    model: &R,
    batch: &[Sample<I>],
    weights: &[f64],
    h: f64,
) -> Result<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let (_, analytic) = weighted_loss_and_grad(model, batch, weights)?;
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (p, &a) in analytic.iter().enumerate() {
        let orig = probe.params()[p];
        probe.params_mut()[p] = orig + h;
        let up = weighted_loss(&probe, batch, weights)?;
        probe.params_mut()[p] = orig - h;
        let down = weighted_loss(&probe, batch, weights)?;
        probe.params_mut()[p] = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((a - fd).abs() / (a.abs() + fd.abs() + GRADIENT_CHECK_EPS));
    }
    Ok(worst)
}
