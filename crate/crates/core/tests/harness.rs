use maskshift_core::harness::{
    build_instance, optimal_rmse, run_ablation, run_experiment, test_set, ExperimentConfig, RESULT_HEADER,
};
use maskshift_core::masks::{MaskPattern, MissingLevel};
use maskshift_core::synthetic::FeatureKind;
use maskshift_core::DecorrMode;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.dim = 10;
    cfg.train_n = 512;
    cfg.test_n = 512;
    cfg.test_levels = vec![MissingLevel::from_tenths(2).unwrap(), MissingLevel::from_tenths(5).unwrap()];
    cfg.width = 16;
    cfg.epochs = 3;
    cfg.weight_iters = 10;
    cfg.timing = false;
    cfg
}

#[test]
fn modes_share_identical_data() {
    let out = run_ablation(&small()).unwrap();
    assert_eq!(out.arms.len(), 4);
    let first = &out.arms[0];
    for arm in &out.arms[1..] {
        assert_eq!(arm.train_checksum, first.train_checksum);
        assert_eq!(arm.test_checksums, first.test_checksums);
    }
}

#[test]
fn rows_satisfy_gap_accounting_and_marker() {
    let out = run_experiment(&small()).unwrap();
    let csv = out.table.to_csv_string();
    assert_eq!(csv.lines().next(), Some(RESULT_HEADER));
    assert_eq!(out.table.rows.len(), 2);
    for row in &out.table.rows {
        assert_eq!(row.gap, row.rmse - row.optimal_rmse);
        assert!(row.rmse >= 0.0);
        assert_eq!(row.in_distribution, row.test_level == row.train_level);
        assert_eq!(row.wall_time_ms, 0);
    }
    assert!(out.table.to_string().contains('*'));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = small();
    assert_eq!(run_experiment(&cfg).unwrap().table.to_csv_string(), run_experiment(&cfg).unwrap().table.to_csv_string());
}

#[test]
fn training_length_does_not_change_data() {
    let mut a = small();
    let mut b = small();
    a.epochs = 1;
    b.epochs = 4;
    b.mode = DecorrMode::None;
    let (oa, ob) = (run_experiment(&a).unwrap(), run_experiment(&b).unwrap());
    assert_eq!(oa.arms[0].train_checksum, ob.arms[0].train_checksum);
    assert_eq!(oa.arms[0].test_checksums, ob.arms[0].test_checksums);
}

#[test]
fn optimal_rmse_tracks_analytic_residual_variance() {
    let mut cfg = ExperimentConfig::default();
    cfg.test_n = 100_000;
    let instance = build_instance(&cfg, 3).unwrap();
    let level = MissingLevel::from_tenths(5).unwrap();
    let data = test_set(&cfg, &instance, 3, level).unwrap();
    let got = optimal_rmse(&instance, &data).unwrap();
    let mut var = 0.0;
    for i in 0..data.len() {
        var += maskshift_core::oracle::optimal_residual_variance(&instance.spec, &instance.labels, data.mask(i)).unwrap();
    }
    let want = (var / data.len() as f64).sqrt();
    assert!((got / want - 1.0).abs() < 0.03, "{got} vs {want}");
}

#[test]
fn unneeded_decorrelation_stays_close_to_none() {
    let mut cfg = ExperimentConfig::default();
    cfg.feature = FeatureKind::GaussianInd;
    cfg.train_pattern = MaskPattern::McarInd;
    cfg.test_pattern = MaskPattern::McarInd;
    cfg.dim = 10;
    cfg.train_n = 4096;
    cfg.test_n = 4096;
    cfg.test_levels = vec![MissingLevel::from_tenths(1).unwrap(), MissingLevel::from_tenths(9).unwrap()];
    cfg.width = 64;
    cfg.epochs = 30;
    cfg.weight_iters = 100;
    cfg.timing = false;
    let mut full = cfg.clone();
    full.mode = DecorrMode::Full;
    let mut none = cfg;
    none.mode = DecorrMode::None;
    let (f, n) = (run_experiment(&full).unwrap().table, run_experiment(&none).unwrap().table);
    for (a, b) in f.rows.iter().zip(&n.rows) {
        assert_eq!(a.test_level, b.test_level);
        assert!((a.gap - b.gap).abs() <= 0.15 * b.gap.abs().max(a.gap.abs()), "full {} none {}", a.gap, b.gap);
    }
}

#[test]
fn config_defaults_and_round_trip() {
    let cfg = ExperimentConfig::default();
    assert_eq!((cfg.dim, cfg.train_n, cfg.test_n), (50, 16384, 16384));
    assert_eq!(cfg.test_levels.len(), 9);
    assert_eq!((cfg.epochs, cfg.batch_size, cfg.lr), (1000, 64, 1e-3));
    let mut edited = ExperimentConfig::from_text("gamma = 0.3\nmode = intra\n# comment\n").unwrap();
    edited.set("gamma", "2.5").unwrap();
    assert_eq!(edited.gamma, 2.5);
    assert_eq!(ExperimentConfig::from_text(&edited.to_text()).unwrap(), edited);
    assert!(cfg.clone().set("no-such-key", "1").is_err());
}
