//! Complete-feature distributions and linear label processes.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{structural, Error, Result};
use crate::linalg::cholesky_with_jitter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    /// `N(mu, B B^T + D)`.
    Gaussian,
    /// `N(mu, D)` with diagonal `D`.
    GaussianInd,
    /// Three-component mixture of `Gaussian`-style components.
    GaussianMix,
    /// Independent standard normals except that the second feature copies the first.
    DuplicatedPair,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Gaussian => "gaussian",
            FeatureKind::GaussianInd => "gaussian-ind",
            FeatureKind::GaussianMix => "gaussian-mix",
            FeatureKind::DuplicatedPair => "duplicated-pair",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Gaussian, Self::GaussianInd, Self::GaussianMix, Self::DuplicatedPair]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    pub components: Vec<GaussianComponent>,
}

fn draw_component<R: Rng + ?Sized>(n: usize, diagonal_only: bool, rng: &mut R) -> GaussianComponent {
    let mean = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut cov = DMatrix::zeros(n, n);
    if !diagonal_only {
        let k = (7 * n) / 10;
        let b = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        cov = &b * b.transpose();
    }
    for i in 0..n {
        cov[(i, i)] += rng.random_range(1e-2..=1e-1);
    }
    GaussianComponent { weight: 1.0, mean, cov }
}

/// Single-Gaussian feature distribution of dimension `n`.
pub fn make_gaussian_spec<R: Rng + ?Sized>(n: usize, kind: FeatureKind, rng: &mut R) -> Result<FeatureSpec> {
    if n == 0 {
        return Err(structural("feature dimension must be positive"));
    }
    let diagonal_only = match kind {
        FeatureKind::Gaussian => false,
        FeatureKind::GaussianInd => true,
        FeatureKind::GaussianMix => return make_mixture_spec(n, rng),
        FeatureKind::DuplicatedPair => return FeatureSpec::duplicated_pair(n),
    };
    Ok(FeatureSpec {
        kind,
        components: vec![draw_component(n, diagonal_only, rng)],
    })
}

pub fn make_mixture_spec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<FeatureSpec> {
    if n == 0 {
        return Err(structural("feature dimension must be positive"));
    }
    let mut components: Vec<_> = (0..3).map(|_| draw_component(n, false, rng)).collect();
    let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    for (c, r) in components.iter_mut().zip(&raw) {
        c.weight = r / total;
    }
    Ok(FeatureSpec { kind: FeatureKind::GaussianMix, components })
}

impl FeatureSpec {
    /// Standard normal features with `X_2 = X_1` (needs `n >= 2`).
    pub fn duplicated_pair(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(structural("duplicated pair needs at least two features"));
        }
        let mut cov = DMatrix::identity(n, n);
        cov[(0, 1)] = 1.0;
        cov[(1, 0)] = 1.0;
        Ok(Self {
            kind: FeatureKind::DuplicatedPair,
            components: vec![GaussianComponent { weight: 1.0, mean: DVector::zeros(n), cov }],
        })
    }

    pub fn single(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self {
            kind: FeatureKind::Gaussian,
            components: vec![GaussianComponent { weight: 1.0, mean, cov }],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn is_single_gaussian(&self) -> bool {
        self.components.len() == 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.components.is_empty() {
            return Err(structural("feature spec without components"));
        }
        let mut total = 0.0;
        for c in &self.components {
            if c.mean.len() != n || c.cov.nrows() != n || c.cov.ncols() != n {
                return Err(structural("component dimensions disagree"));
            }
            if !(c.weight >= 0.0) {
                return Err(structural("negative mixture weight"));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(structural(format!("mixture weights sum to {total}")));
        }
        Ok(())
    }

    /// Overall mean `sum_i pi_i mu_i`.
    pub fn mean(&self) -> DVector<f64> {
        self.components
            .iter()
            .fold(DVector::zeros(self.dim()), |acc, c| acc + &c.mean * c.weight)
    }

    /// Overall covariance by the law of total variance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        self.components.iter().fold(DMatrix::zeros(self.dim(), self.dim()), |acc, c| {
            let d = &c.mean - &mu;
            acc + (&c.cov + &d * d.transpose()) * c.weight
        })
    }

    /// `Var(alpha^T X)`.
    pub fn linear_variance(&self, alpha: &[f64]) -> f64 {
        let a = DVector::from_column_slice(alpha);
        let mut second = 0.0;
        let mut first = 0.0;
        for c in &self.components {
            let m = a.dot(&c.mean);
            second += c.weight * ((&c.cov * &a).dot(&a) + m * m);
            first += c.weight * m;
        }
        second - first * first
    }

    /// Factors `L` with `L L^T = Sigma` per component, used for sampling.
    pub fn sampling_factors(&self) -> Result<Vec<DMatrix<f64>>> {
        if self.kind == FeatureKind::DuplicatedPair {
            let n = self.dim();
            let mut l = DMatrix::identity(n, n);
            l[(1, 1)] = 0.0;
            l[(1, 0)] = 1.0;
            return Ok(vec![l]);
        }
        self.components
            .iter()
            .map(|c| cholesky_with_jitter(&c.cov).map(|ch| ch.l()))
            .collect()
    }
}

/// `Y = intercept + coeffs . X + noise_std * N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelModel {
    pub intercept: f64,
    pub coeffs: Vec<f64>,
    pub noise_std: f64,
}

impl LabelModel {
    pub fn new(intercept: f64, coeffs: Vec<f64>, noise_std: f64) -> Result<Self> {
        if !(noise_std >= 0.0) || !intercept.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(structural("label model must be finite with nonnegative noise"));
        }
        Ok(Self { intercept, coeffs, noise_std })
    }

    pub fn signal(&self, x: &[f64]) -> f64 {
        self.intercept + self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// Coefficients i.i.d. standard normal; noise scaled so that
/// `Var(alpha^T X) / sigma^2 = snr`.
pub fn make_label_model<R: Rng + ?Sized>(spec: &FeatureSpec, snr: f64, rng: &mut R) -> Result<LabelModel> {
    make_label_model_with_std(spec, snr, 1.0, rng)
}

pub fn make_label_model_with_std<R: Rng + ?Sized>(
    spec: &FeatureSpec,
    snr: f64,
    coeff_std: f64,
    rng: &mut R,
) -> Result<LabelModel> {
    if !(snr > 0.0) {
        return Err(structural("signal-to-noise ratio must be positive"));
    }
    let intercept = coeff_std * rng.sample::<f64, _>(StandardNormal);
    let coeffs: Vec<f64> = (0..spec.dim())
        .map(|_| coeff_std * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let var = spec.linear_variance(&coeffs);
    if !(var > 0.0) {
        return Err(Error::DegenerateSignal);
    }
    LabelModel::new(intercept, coeffs, (var / snr).sqrt())
}

/// Fully observed samples, row-major features.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteDataset {
    pub dim: usize,
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    /// Mixture component each row was drawn from.
    pub components: Vec<usize>,
}

impl CompleteDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x_{i}")).collect();
        writeln!(out, "{},y", header.join(","))?;
        for i in 0..self.len() {
            for v in self.row(i) {
                write!(out, "{v},")?;
            }
            writeln!(out, "{}", self.labels[i])?;
        }
        Ok(())
    }
}

pub fn sample_dataset<R: Rng + ?Sized>(
    spec: &FeatureSpec,
    labels: &LabelModel,
    count: usize,
    rng: &mut R,
) -> Result<CompleteDataset> {
    spec.validate()?;
    let n = spec.dim();
    if labels.coeffs.len() != n {
        return Err(structural("label coefficients do not match feature dimension"));
    }
    let factors = spec.sampling_factors()?;
    let picker = if spec.components.len() > 1 {
        let w: Vec<f64> = spec.components.iter().map(|c| c.weight).collect();
        Some(WeightedIndex::new(&w).map_err(|e| structural(format!("mixture weights: {e}")))?)
    } else {
        None
    };
    let mut features = Vec::with_capacity(count * n);
    let mut ys = Vec::with_capacity(count);
    let mut comps = Vec::with_capacity(count);
    let mut z = DVector::zeros(n);
    for _ in 0..count {
        let k = picker.as_ref().map_or(0, |p| p.sample(rng));
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let x = &spec.components[k].mean + &factors[k] * &z;
        let eps: f64 = rng.sample(StandardNormal);
        ys.push(labels.signal(x.as_slice()) + labels.noise_std * eps);
        features.extend_from_slice(x.as_slice());
        comps.push(k);
    }
    Ok(CompleteDataset { dim: n, features, labels: ys, components: comps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn independent_kind_has_diagonal_covariance() {
        let spec = make_gaussian_spec(6, FeatureKind::GaussianInd, &mut seeded(1)).unwrap();
        let cov = &spec.components[0].cov;
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert_eq!(cov[(i, j)], 0.0);
                }
            }
            assert!((1e-2..=1e-1).contains(&cov[(i, i)]));
        }
    }

    #[test]
    fn general_kind_rank_structure() {
        // B has floor(0.7 n) columns: Sigma - D has rank 35 for n = 50
        let spec = make_gaussian_spec(50, FeatureKind::Gaussian, &mut seeded(2)).unwrap();
        let cov = &spec.components[0].cov;
        let sym = (cov - cov.transpose()).abs().max();
        assert_eq!(sym, 0.0);
        let eig = cov.clone().symmetric_eigen().eigenvalues;
        let small = eig.iter().filter(|&&e| e < 0.2).count();
        assert_eq!(small, 50 - 35);
        assert_eq!((7 * 50) / 10, 35);
        assert_eq!((7 * 7) / 10, 4);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(make_gaussian_spec(0, FeatureKind::Gaussian, &mut seeded(0)).is_err());
        assert!(make_mixture_spec(0, &mut seeded(0)).is_err());
    }

    #[test]
    fn specs_are_seed_deterministic() {
        let a = make_gaussian_spec(5, FeatureKind::Gaussian, &mut seeded(5)).unwrap();
        let b = make_gaussian_spec(5, FeatureKind::Gaussian, &mut seeded(5)).unwrap();
        assert_eq!(a, b);
        let a = make_mixture_spec(5, &mut seeded(5)).unwrap();
        let b = make_mixture_spec(5, &mut seeded(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mixture_weights_normalized() {
        let spec = make_mixture_spec(4, &mut seeded(11)).unwrap();
        assert_eq!(spec.components.len(), 3);
        let total: f64 = spec.components.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() <= f64::EPSILON);
        assert!(spec.components.iter().all(|c| c.weight >= 0.0));
    }

    #[test]
    fn noise_matches_snr_for_gaussian() {
        let spec = make_gaussian_spec(8, FeatureKind::Gaussian, &mut seeded(3)).unwrap();
        let lm = make_label_model(&spec, 10.0, &mut seeded(4)).unwrap();
        let a = DVector::from_column_slice(&lm.coeffs);
        let quad = (&spec.components[0].cov * &a).dot(&a);
        assert!((lm.noise_std.powi(2) - quad / 10.0).abs() < 1e-12 * quad);
    }

    #[test]
    fn zero_covariance_is_degenerate_signal() {
        let spec = FeatureSpec::single(DVector::zeros(3), DMatrix::zeros(3, 3));
        assert!(matches!(make_label_model(&spec, 10.0, &mut seeded(0)), Err(Error::DegenerateSignal)));
    }

    #[test]
    fn mixture_variance_matches_monte_carlo() {
        let spec = make_mixture_spec(3, &mut seeded(8)).unwrap();
        let alpha = [0.5, -1.0, 2.0];
        let analytic = spec.linear_variance(&alpha);
        let lm = LabelModel::new(0.0, alpha.to_vec(), 0.0).unwrap();
        let data = sample_dataset(&spec, &lm, 200_000, &mut seeded(9)).unwrap();
        let mean = data.labels.iter().sum::<f64>() / data.len() as f64;
        let var = data.labels.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (data.len() - 1) as f64;
        assert!((var - analytic).abs() < 0.03 * analytic, "{var} vs {analytic}");
    }

    #[test]
    fn empty_dataset() {
        let spec = make_gaussian_spec(3, FeatureKind::Gaussian, &mut seeded(1)).unwrap();
        let lm = make_label_model(&spec, 10.0, &mut seeded(1)).unwrap();
        let d = sample_dataset(&spec, &lm, 0, &mut seeded(1)).unwrap();
        assert!(d.is_empty());
        assert!(d.features.is_empty());
    }

    #[test]
    fn duplicated_pair_copies_exactly() {
        let spec = FeatureSpec::duplicated_pair(4).unwrap();
        let lm = LabelModel::new(0.0, vec![1.0; 4], 0.0).unwrap();
        let d = sample_dataset(&spec, &lm, 100, &mut seeded(1)).unwrap();
        for i in 0..d.len() {
            assert_eq!(d.row(i)[0], d.row(i)[1]);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let spec = FeatureSpec::duplicated_pair(2).unwrap();
        let lm = LabelModel::new(1.0, vec![1.0, 1.0], 0.0).unwrap();
        let d = sample_dataset(&spec, &lm, 3, &mut seeded(1)).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x_1,x_2,y");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 3);
    }
}
