//! Closed-form ground truth: conditional-Gaussian optimal predictors, the
//! mask-conditioned coefficients of the duplicated-feature example, and a
//! finite instance where two predictors tie on training masks only.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;

use crate::error::{structural, Result};
use crate::linalg::{cholesky_with_jitter, log_det, log_sum_exp, submatrix, subvector};
use crate::predictor::{DiscreteInstance, ThetaTensor};
use crate::synthetic::{FeatureSpec, GaussianComponent, LabelModel};

/// `E[X_miss | x_obs]` and `Cov[X_miss | x_obs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    pub missing: Vec<usize>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

fn split_indices(m: &[f64]) -> (Vec<usize>, Vec<usize>) {
    (0..m.len()).partition(|&i| m[i] != 0.0)
}

struct Conditioned {
    moments: ConditionalMoments,
    /// `log N(x_obs; mu_obs, Sigma_obs)`, 0 when nothing is observed.
    log_density: f64,
}

fn condition(mu: &DVector<f64>, sigma: &DMatrix<f64>, x: &[f64], m: &[f64]) -> Result<Conditioned> {
    let n = mu.len();
    if sigma.nrows() != n || sigma.ncols() != n || x.len() != n || m.len() != n {
        return Err(structural("mean, covariance, features and mask sizes differ"));
    }
    let (obs, miss) = split_indices(m);
    let mu_miss = subvector(mu, &miss);
    if obs.is_empty() {
        return Ok(Conditioned {
            moments: ConditionalMoments { missing: miss, mean: mu_miss, cov: sigma.clone() },
            log_density: 0.0,
        });
    }
    let s_oo = submatrix(sigma, &obs, &obs);
    let s_mo = submatrix(sigma, &miss, &obs);
    let s_mm = submatrix(sigma, &miss, &miss);
    let chol = cholesky_with_jitter(&s_oo)?;
    let resid = DVector::from_iterator(obs.len(), obs.iter().map(|&i| x[i] - mu[i]));
    let solved = chol.solve(&resid);
    let mean = mu_miss + &s_mo * &solved;
    let cov = s_mm - &s_mo * chol.solve(&s_mo.transpose());
    let log_density = -0.5 * (obs.len() as f64 * (2.0 * PI).ln() + log_det(&chol) + resid.dot(&solved));
    Ok(Conditioned { moments: ConditionalMoments { missing: miss, mean, cov }, log_density })
}

/// Conditional law of the missing block given the observed entries of `x`.
/// `m` is a 0/1 mask; entries of `x` where `m = 0` are ignored.
pub fn gaussian_conditional_moments(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    x: &[f64],
    m: &[f64],
) -> Result<ConditionalMoments> {
    condition(mu, sigma, x, m).map(|c| c.moments)
}

fn component_prediction(labels: &LabelModel, x: &[f64], m: &[f64], moments: &ConditionalMoments) -> f64 {
    let observed: f64 = (0..x.len()).filter(|&i| m[i] != 0.0).map(|i| labels.coeffs[i] * x[i]).sum();
    let missing: f64 = moments.missing.iter().zip(moments.mean.iter()).map(|(&i, e)| labels.coeffs[i] * e).sum();
    labels.intercept + observed + missing
}

/// `E[Y | x_obs, m]` under the known feature law and linear label model.
pub fn optimal_predict(spec: &FeatureSpec, labels: &LabelModel, x: &[f64], m: &[f64]) -> Result<f64> {
    if labels.coeffs.len() != spec.dim() {
        return Err(structural("label coefficients do not match feature dimension"));
    }
    let active: Vec<&GaussianComponent> = spec.components.iter().filter(|c| c.weight > 0.0).collect();
    if active.is_empty() {
        return Err(structural("feature distribution has no component with positive weight"));
    }
    if let [only] = active.as_slice() {
        let c = condition(&only.mean, &only.cov, x, m)?;
        return Ok(component_prediction(labels, x, m, &c.moments));
    }
    let mut preds = Vec::with_capacity(active.len());
    let mut logits = Vec::with_capacity(active.len());
    for comp in &active {
        let c = condition(&comp.mean, &comp.cov, x, m)?;
        preds.push(component_prediction(labels, x, m, &c.moments));
        logits.push(comp.weight.ln() + c.log_density);
    }
    let norm = log_sum_exp(&logits);
    Ok(preds.iter().zip(&logits).map(|(p, l)| p * (l - norm).exp()).sum())
}

/// Mixture responsibilities from direct densities, for comparison with the
/// log-space path.
pub fn direct_responsibilities(spec: &FeatureSpec, x: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    let mut dens = Vec::with_capacity(spec.components.len());
    for comp in &spec.components {
        let c = condition(&comp.mean, &comp.cov, x, m)?;
        dens.push(comp.weight * c.log_density.exp());
    }
    let total: f64 = dens.iter().sum();
    Ok(dens.into_iter().map(|d| d / total).collect())
}

/// Log-space mixture responsibilities used by [`optimal_predict`].
pub fn responsibilities(spec: &FeatureSpec, x: &[f64], m: &[f64]) -> Result<Vec<f64>> {
    let mut logits = Vec::with_capacity(spec.components.len());
    for comp in &spec.components {
        let c = condition(&comp.mean, &comp.cov, x, m)?;
        logits.push(comp.weight.ln() + c.log_density);
    }
    let norm = log_sum_exp(&logits);
    Ok(logits.into_iter().map(|l| (l - norm).exp()).collect())
}

/// `E[(Y - E[Y | x_obs, m])^2 | m]` for a single-Gaussian feature law.
pub fn optimal_residual_variance(spec: &FeatureSpec, labels: &LabelModel, m: &[f64]) -> Result<f64> {
    let [comp] = spec.components.as_slice() else {
        return Err(structural("residual variance is closed-form only for a single Gaussian"));
    };
    let c = condition(&comp.mean, &comp.cov, &vec![0.0; m.len()], m)?;
    let a = DVector::from_iterator(c.moments.missing.len(), c.moments.missing.iter().map(|&i| labels.coeffs[i]));
    Ok((&c.moments.cov * &a).dot(&a) + labels.noise_std * labels.noise_std)
}

/// Coefficients `phi_0..phi_n` of `E[Y | x_obs, m]` when `X_2 = X_1` and all
/// other features are independent, for `Y = alpha . X` without intercept.
pub fn example_phi(m: &[bool], alpha: &[f64], means: &[f64]) -> Result<Vec<f64>> {
    let n = m.len();
    if n < 2 || alpha.len() != n || means.len() != n {
        return Err(structural("example coefficients need n >= 2 and matching lengths"));
    }
    let on = |i: usize| if m[i] { 1.0 } else { 0.0 };
    let off = |i: usize| 1.0 - on(i);
    let mut phi = vec![0.0; n + 1];
    phi[0] = off(0) * off(1) * (alpha[0] * means[0] + alpha[1] * means[1])
        + (2..n).map(|i| off(i) * alpha[i] * means[i]).sum::<f64>();
    phi[1] = (alpha[0] + alpha[1] * off(1)) * on(0);
    phi[2] = (alpha[1] + alpha[0] * off(0)) * on(1);
    for i in 2..n {
        phi[i + 1] = alpha[i] * on(i);
    }
    Ok(phi)
}

/// The finite instance with its two tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub instance: DiscreteInstance<Rational64>,
    /// Optimal on every mask.
    pub theta_star: ThetaTensor<Rational64>,
    /// Ties with `theta_star` on training masks only.
    pub theta_hat: ThetaTensor<Rational64>,
}

fn r(num: i64, den: i64) -> Rational64 {
    Rational64::new(num, den)
}

fn slices(rows: [[[i64; 2]; 3]; 3]) -> Vec<Vec<Rational64>> {
    rows.iter().map(|row| row.iter().map(|&[n, d]| r(n, d)).collect()).collect()
}

/// `Y = X_1 + 2 X_2` with `X_1, X_2` i.i.d. Bernoulli(1/2); training masks
/// `(0,1)` and `(1,0)` with probability 1/2 each; test mask entries i.i.d.
/// Bernoulli(1/2).
pub fn counterexample_instance() -> Counterexample {
    let half = r(1, 2);
    let quarter = r(1, 4);
    let mut features = Vec::new();
    for x1 in 0..2 {
        for x2 in 0..2 {
            features.push((vec![r(x1, 1), r(x2, 1)], quarter, r(x1 + 2 * x2, 1)));
        }
    }
    let train_masks = vec![(vec![false, true], half), (vec![true, false], half)];
    let test_masks = [[false, false], [false, true], [true, false], [true, true]]
        .into_iter()
        .map(|m| (m.to_vec(), quarter))
        .collect();
    let instance = DiscreteInstance { dim: 2, features, train_masks, test_masks };

    let theta_star = ThetaTensor::from_slices(&[
        slices([[[3, 2], [-1, 2], [-1, 1]], [[0, 1], [0, 1], [0, 1]], [[0, 1], [0, 1], [0, 1]]]),
        slices([[[0, 1], [1, 1], [0, 1]], [[0, 1], [0, 1], [0, 1]], [[0, 1], [0, 1], [0, 1]]]),
        slices([[[0, 1], [0, 1], [2, 1]], [[0, 1], [0, 1], [0, 1]], [[0, 1], [0, 1], [0, 1]]]),
    ])
    .expect("3x3x3");
    let theta_hat = ThetaTensor::from_slices(&[
        slices([[[3, 2], [-1, 1], [-3, 2]], [[-1, 2], [1, 1], [0, 1]], [[-1, 2], [0, 1], [1, 1]]]),
        slices([[[0, 1], [3, 2], [1, 2]], [[1, 2], [-1, 1], [0, 1]], [[1, 2], [0, 1], [-1, 1]]]),
        slices([[[0, 1], [1, 1], [2, 1]], [[1, 1], [1, 1], [1, 1]], [[0, 1], [1, 1], [0, 1]]]),
    ])
    .expect("3x3x3");
    Counterexample { instance, theta_star, theta_hat }
}
