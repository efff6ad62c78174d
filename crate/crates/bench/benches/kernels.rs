use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use maskshift_core::decorrelation::{DecorrMode, LiftedData, RffBanks, Variable};
use maskshift_core::masks::{apply_masks, MaskGenerator, MissingLevel, RateSource};
use maskshift_core::nn::{weighted_loss_and_grad, Sample};
use maskshift_core::oracle::optimal_predict;
use maskshift_core::predictor::{MaskedRow, PredictorModel};
use maskshift_core::rng::seeded;
use maskshift_core::synthetic::{make_gaussian_spec, make_label_model, sample_dataset, FeatureKind};

fn dataset(dim: usize, rows: usize, kind: FeatureKind) -> (maskshift_core::FeatureSpec, maskshift_core::LabelModel, maskshift_core::MaskedDataset) {
    let mut rng = seeded(0);
    let spec = make_gaussian_spec(dim, kind, &mut rng).unwrap();
    let labels = make_label_model(&spec, 10.0, &mut rng).unwrap();
    let complete = sample_dataset(&spec, &labels, rows, &mut rng).unwrap();
    let level = RateSource::Level(MissingLevel::from_tenths(5).unwrap());
    let data = apply_masks(&complete, &MaskGenerator::McarInd, level, &mut rng).unwrap();
    (spec, labels, data)
}

fn decorrelation(c: &mut Criterion) {
    let (_, _, data) = dataset(10, 2048, FeatureKind::Gaussian);
    let banks = RffBanks::draw(10, 5, &mut seeded(1));
    let lifted = LiftedData::new(&data, &banks).unwrap();
    let w = vec![1.0; data.len()];
    c.bench_function("partial_cov x-x n=2048", |b| {
        b.iter(|| lifted.partial_cov(black_box(&w), Variable::Feature(0), Variable::Feature(1)))
    });
    c.bench_function("objective+grad full d=10 n=2048", |b| {
        b.iter(|| lifted.evaluate(black_box(&w), DecorrMode::Full, 1.0, true))
    });
}

fn predictor(c: &mut Criterion) {
    let (_, _, data) = dataset(50, 64, FeatureKind::Gaussian);
    let model = PredictorModel::linear_head(50, 2, 256, &mut seeded(2)).unwrap();
    let batch: Vec<Sample<MaskedRow>> =
        (0..data.len()).map(|i| Sample { input: MaskedRow { x: data.x(i), m: data.mask(i) }, target: data.label(i) }).collect();
    let w = vec![1.0; batch.len()];
    c.bench_function("linear-head loss+grad d=50 batch=64", |b| {
        b.iter(|| weighted_loss_and_grad(black_box(&model), &batch, &w).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    for (kind, name) in [(FeatureKind::Gaussian, "gaussian"), (FeatureKind::GaussianMix, "mixture")] {
        let (spec, labels, data) = dataset(50, 16, kind);
        c.bench_function(&format!("optimal_predict {name} d=50"), |b| {
            b.iter(|| optimal_predict(&spec, &labels, black_box(data.x(0)), data.mask(0)).unwrap())
        });
    }
}

criterion_group!(benches, decorrelation, predictor, oracle);
criterion_main!(benches);
