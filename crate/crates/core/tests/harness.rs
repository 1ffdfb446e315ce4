use std::collections::BTreeMap;

use bitdensity::besov::{make_test_density, TestDensity};
use bitdensity::estimators::CoefficientTree;
use bitdensity::harness::{fit_rate, lr_loss, run_trials, EstimatorId, ExperimentConfig};
use bitdensity::rng::stream;
use bitdensity::wavelet::{build_table, reconstruct, WaveletSpec};
use bitdensity::DensityGrid;
use rand::Rng;

#[test]
fn exact_reconstruction_has_no_loss() {
    let table = build_table(WaveletSpec::daubechies(3).unwrap(), 10).unwrap();
    let tree = CoefficientTree::linear(0, BTreeMap::new());
    let zero = bitdensity::besov::DensityModel::new(DensityGrid::constant(12, 1.0), "u").unwrap();
    // An empty tree against a density reconstructing to itself.
    let fitted = reconstruct(&tree, &table, 12);
    assert_eq!(fitted.sup_norm(), 0.0);
    let haar = build_table(WaveletSpec::haar(), 8).unwrap();
    let exact = CoefficientTree::linear(0, BTreeMap::from([(0, 1.0)]));
    // The haar father is half-open, so only the endpoint x = 1 misses.
    assert!(lr_loss(&exact, &zero, &haar, 2.0, 12).unwrap() < 1e-3);
}

#[test]
fn constant_offset_loss() {
    let haar = build_table(WaveletSpec::haar(), 8).unwrap();
    let truth = make_test_density(TestDensity::Uniform, 12);
    for (c, r) in [(0.25, 2.0), (-0.5, 1.0), (0.1, 3.0)] {
        let tree = CoefficientTree::linear(0, BTreeMap::from([(0, 1.0 + c)]));
        let loss = lr_loss(&tree, &truth, &haar, r, 14).unwrap();
        let expected = f64::abs(c).powf(r);
        assert!((loss - expected).abs() < 1e-3 * expected.max(1.0), "{loss} vs {expected}");
    }
}

#[test]
fn loss_agrees_with_a_finer_quadrature() {
    let table = build_table(WaveletSpec::daubechies(2).unwrap(), 12).unwrap();
    let truth = make_test_density(TestDensity::BetaLike, 14);
    let mut rng = stream(3);
    let mut tree = CoefficientTree::linear(3, table.translation_range(3).map(|k| (k, rng.random::<f64>())).collect());
    for k in table.translation_range(4) {
        tree.beta.insert((3, k), rng.random::<f64>() - 0.5);
    }
    let coarse = lr_loss(&tree, &truth, &table, 2.0, 12).unwrap();
    let fine = lr_loss(&tree, &truth, &table, 2.0, 14).unwrap();
    assert!((coarse - fine).abs() < 0.01 * fine, "{coarse} vs {fine}");
}

#[test]
fn runs_are_deterministic() {
    let config = ExperimentConfig { n: vec![2_048], trials: 3, seed: 17, ..Default::default() };
    let a = run_trials(&config).unwrap();
    let b = run_trials(&config).unwrap();
    assert_eq!(a, b);
    let p = &a.points[0];
    let losses = p.losses();
    assert_eq!(p.mean_risk.unwrap(), losses.iter().sum::<f64>() / losses.len() as f64);
    assert!(p.plan.is_some());
}

#[test]
fn trial_errors_are_recorded_not_fatal() {
    let config = ExperimentConfig {
        wavelet: "db4".into(),
        n: vec![40],
        bits: vec![1],
        trials: 2,
        level: Some(5),
        sim_mode: bitdensity::distsim::SimMode::Exact,
        ..Default::default()
    };
    let report = run_trials(&config).unwrap();
    let p = &report.points[0];
    assert!(p.mean_risk.is_none());
    assert!(p.trials.iter().all(|t| t.error.is_some()));
}

#[test]
fn central_linear_risk_vanishes_on_uniform() {
    let config = ExperimentConfig {
        density: "uniform".into(),
        wavelet: "haar".into(),
        estimator: EstimatorId::CentralLinear,
        n: (8..=14).map(|k| 1u64 << k).collect(),
        trials: 16,
        level: Some(3),
        ..Default::default()
    };
    let report = run_trials(&config).unwrap();
    let pts: Vec<_> = report.points.iter().map(|p| (p.mean_risk.unwrap(), p.standard_error.unwrap())).collect();
    for w in pts.windows(2) {
        assert!(w[1].0 <= w[0].0 + 2.0 * w[0].1.max(w[1].1), "{:?}", w);
    }
    assert!(pts.last().unwrap().0 < pts[0].0 / 10.0);
}

#[test]
fn noisy_power_law_fit() {
    let mut rng = stream(4);
    let pts: Vec<(f64, f64)> = (4..=14)
        .map(|k| {
            let n = (k as f64).exp2();
            let noise = 1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0);
            (n, 3.0 * n.powf(-2.0 / 3.0) * noise)
        })
        .collect();
    let fit = fit_rate(&pts).unwrap();
    assert!((fit.slope + 2.0 / 3.0).abs() < 0.05);
}

#[test]
fn reports_write_outputs() {
    let config = ExperimentConfig { n: vec![1_024, 4_096], trials: 2, ..Default::default() };
    let report = run_trials(&config).unwrap();
    let mut trials = Vec::new();
    report.write_trials_csv(&mut trials).unwrap();
    let text = String::from_utf8(trials).unwrap();
    assert!(text.starts_with("n,bits,trial,loss,yield,error\n"));
    assert_eq!(text.lines().count(), 5);
    let mut plot = Vec::new();
    report.write_plot_csv(&mut plot).unwrap();
    assert!(String::from_utf8(plot).unwrap().starts_with("bits,log2_n,log2_risk,se\n"));
    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(json["points"][0]["plan"]["estimator"], "single");
}
