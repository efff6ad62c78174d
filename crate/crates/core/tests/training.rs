use maskshift_core::harness::{model_rmse, rmse};
use maskshift_core::masks::{apply_masks, MaskGenerator, RateSource};
use maskshift_core::predictor::{predict, read_checkpoint, train_predictor, write_checkpoint, PredictorModel, TrainConfig};
use maskshift_core::rng::seeded;
use maskshift_core::synthetic::{make_gaussian_spec, make_label_model, sample_dataset, FeatureKind};

#[test]
fn defaults_follow_the_reference_setup() {
    let cfg = TrainConfig::default();
    assert_eq!((cfg.epochs, cfg.batch_size), (1000, 64));
    assert_eq!(cfg.lr, 1e-3);
}

#[test]
fn fully_observed_training_reaches_noise_level() {
    let mut rng = seeded(21);
    let spec = make_gaussian_spec(5, FeatureKind::Gaussian, &mut rng).unwrap();
    let labels = make_label_model(&spec, 10.0, &mut rng).unwrap();
    let sample = |count, rng: &mut _| {
        let complete = sample_dataset(&spec, &labels, count, rng).unwrap();
        apply_masks(&complete, &MaskGenerator::McarInd, RateSource::Fixed(0.0), rng).unwrap()
    };
    let train = sample(16384, &mut rng);
    let test = sample(16384, &mut rng);
    let mut model = PredictorModel::linear_head(5, 2, 64, &mut rng).unwrap();
    let cfg = TrainConfig { epochs: 30, lr: 3e-3, ..Default::default() };
    let trace = train_predictor(&mut model, &train, None, &cfg, &mut rng).unwrap();
    assert!(trace.last().unwrap() < &trace[0]);
    let got = model_rmse(&model, &test).unwrap();
    assert!((got / labels.noise_std - 1.0).abs() < 0.05, "rmse {got} noise {}", labels.noise_std);
}

#[test]
fn checkpoint_preserves_predictions() {
    let mut rng = seeded(22);
    let model = PredictorModel::linear_head(4, 2, 8, &mut rng).unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&model, &mut buf).unwrap();
    let back = read_checkpoint(buf.as_slice()).unwrap();
    let x = [0.3, 0.0, -1.2, 0.7];
    let m = [1.0, 0.0, 1.0, 1.0];
    assert_eq!(predict(&model, &x, &m).unwrap(), predict(&back, &x, &m).unwrap());
}

#[test]
fn rmse_hand_values() {
    assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert!((rmse(&[0.0, 0.0, 0.0], &[1.0, 2.0, 2.0]).unwrap() - 3f64.sqrt()).abs() < 1e-12);
}
