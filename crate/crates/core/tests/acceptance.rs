//! Acceptance checks, one test per criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line (run with `--nocapture` to see them).

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use bitdensity::besov::{
    besov_norm, coefficient_decay, effective_smoothness, make_test_density, pairwise_distance, BesovParams,
    BumpFamily, BumpVariant, TestDensity,
};
use bitdensity::distsim::{assign_parts, chi_square_gof, expected_yield, player_message, transmit, SimMode, Transcript};
use bitdensity::estimators::{
    centralized_linear, plan_multi, run_multi, run_single, ChannelOptions, CoefficientTree, MultiConstants,
};
use bitdensity::harness::{fit_rate, run_point, run_trials, EstimatorId, Experiment, ExperimentConfig};
use bitdensity::quantize::{
    alphabet_size, decode, encode_sample, index_sets, sparsity_bound, vertex_quantize, GroupKind,
};
use bitdensity::rng::{derived_stream, stream};
use bitdensity::wavelet::{analyze_level, build_table, reconstruct, WaveletKind, WaveletSpec, WaveletTable};
use rand::Rng;

fn report(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration) {
    println!(
        "criterion {id} ({name}): {} {detail} [{:.1} s]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

fn families() -> Vec<WaveletSpec> {
    let mut out = vec![WaveletSpec::haar()];
    out.extend((2..=5).map(|k| WaveletSpec::daubechies(k).unwrap()));
    out
}

#[test]
fn criterion_01_quantizer_unbiasedness() {
    let start = Instant::now();
    let mut rng = stream(101);
    let draws = 100_000;
    let mut worst_ratio = 0.0_f64;
    for case in 0..100 {
        let d = rng.random_range(1..=12usize);
        let bound = rng.random_range(0.1..4.0);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-bound..=bound)).collect();
        let mut sums = vec![0.0; d];
        let mut qrng = derived_stream(102, &[case]);
        for _ in 0..draws {
            let code = vertex_quantize(&x, bound, &mut qrng).unwrap();
            sums[code.coordinate()] += code.sign() * bound * d as f64;
        }
        let tol = 4.0 * bound * d as f64 / (draws as f64).sqrt();
        for i in 0..d {
            worst_ratio = worst_ratio.max((sums[i] / draws as f64 - x[i]).abs() / tol);
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_ratio <= 1.0 && elapsed < Duration::from_secs(10);
    report(1, "quantizer unbiasedness", pass, format!("worst |mean - x| / tol = {worst_ratio:.3}"), elapsed);
    assert!(pass);
}

#[test]
fn criterion_02_sparsity() {
    let start = Instant::now();
    let mut violations = 0usize;
    let mut checked = 0usize;
    for spec in families() {
        let table = build_table(spec, 8).unwrap();
        let bound = sparsity_bound(&table);
        assert_eq!(bound, 2 * (spec.support_radius as usize + 2));
        for j in 0..=10 {
            for t in 0..(1u64 << j) {
                let sets = index_sets(&table, j, t);
                checked += 1;
                if sets.a_set.len() > bound || sets.b_set.len() > bound {
                    violations += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = violations == 0 && elapsed < Duration::from_secs(5);
    report(2, "sparsity", pass, format!("{violations} violations over {checked} (family, J, bin)"), elapsed);
    assert!(pass);
}

fn refinement_gap(table: &WaveletTable) -> f64 {
    let f = make_test_density(TestDensity::RaisedCosine, 14);
    let (low, high) = (2u32, 6u32);
    let fine = CoefficientTree::linear(high, analyze_level(table, f.grid(), high, WaveletKind::Father).unwrap().into_iter().collect());
    let mut coarse =
        CoefficientTree::linear(low, analyze_level(table, f.grid(), low, WaveletKind::Father).unwrap().into_iter().collect());
    for j in low..high {
        for (k, b) in analyze_level(table, f.grid(), j, WaveletKind::Mother).unwrap() {
            coarse.beta.insert((j, k), b);
        }
    }
    coarse.top_level = high - 1;
    reconstruct(&fine, table, 12).max_abs_diff(&reconstruct(&coarse, table, 12))
}

#[test]
fn criterion_03_wavelet_tables() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for spec in families() {
        let table = build_table(spec, 12).unwrap();
        let integral = (table.integral_phi - 1.0).abs();
        let gram = table.gram_deviation();
        let refine = refinement_gap(&table);
        pass &= integral <= 1e-3 && gram <= 1e-2 && refine <= 1e-2;
        details.push(format!("{}: |∫φ-1|={integral:.1e} gram={gram:.1e} refine={refine:.1e}", spec.family));
    }
    report(3, "wavelet table", pass, details.join("; "), start.elapsed());
    assert!(pass);
}

fn law(name: &str) -> Vec<f64> {
    let raw: Vec<f64> = match name {
        "uniform" => vec![1.0; 64],
        "geometric" => (0..64).map(|i| 0.93f64.powi(i)).collect(),
        _ => (0..64).map(|i| if i % 16 == 3 { 12.0 } else { 0.5 }).collect(),
    };
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

#[test]
fn criterion_04_simulation_exactness() {
    let start = Instant::now();
    let n = 1_000_000;
    let expected = expected_yield(n as u64, 64, 3, SimMode::Exact).unwrap() as f64;
    let mut pass = true;
    let mut details = Vec::new();
    for (i, name) in ["uniform", "geometric", "point-mixture"].into_iter().enumerate() {
        let probs = law(name);
        let cdf: Vec<f64> = probs.iter().scan(0.0, |a, p| {
            *a += p;
            Some(*a)
        }).collect();
        let mut rng = derived_stream(400, &[i as u64]);
        let symbols: Vec<u64> = (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                cdf.iter().position(|&c| u < c).unwrap_or(63) as u64
            })
            .collect();
        let r = transmit(&symbols, 64, 3, SimMode::Exact, &mut rng).unwrap();
        let gof = chi_square_gof(&r.symbols, &probs).unwrap();
        let m = r.yield_count() as f64;
        let ok = gof.p_value > 0.01 && m >= 5_000.0 && (m - expected).abs() <= 0.2 * expected;
        pass &= ok;
        details.push(format!("{name}: m={m} p={:.3}", gof.p_value));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    report(4, "simulation exactness", pass, format!("expected yield {expected}; {}", details.join(", ")), elapsed);
    assert!(pass);
}

#[test]
fn criterion_05_bit_budget_and_noninteractivity() {
    let start = Instant::now();
    let table = build_table(WaveletSpec::daubechies(3).unwrap(), 10).unwrap();
    let f = make_test_density(TestDensity::BetaLike, 12);
    let mut max_ratio = 0.0_f64;
    let mut messages = 0usize;
    let mut invariant = true;
    for bits in 1..=8u32 {
        let mut rng = derived_stream(500, &[bits as u64]);
        let samples = f.sample(20_000, &mut rng);
        for (level, kind) in [(3u32, GroupKind::Single), (2, GroupKind::Base), (4, GroupKind::Detail)] {
            let symbols: Vec<u64> = samples
                .iter()
                .map(|&x| encode_sample(x, level, kind, &table, &mut rng).unwrap().symbol(&table))
                .collect();
            let a = assign_parts(alphabet_size(&table, level, kind), bits).unwrap();
            let t = Transcript::from_symbols(&symbols, a, SimMode::Exact).unwrap();
            messages += t.len();
            let top = *t.messages().iter().max().unwrap();
            max_ratio = max_ratio.max(top as f64 / (1u64 << bits) as f64);
            // Player 11's message is unchanged when everyone else's data changes.
            let mut shuffled = symbols.clone();
            shuffled.reverse();
            shuffled[11] = symbols[11];
            invariant &= player_message(shuffled[11], 11, &a).unwrap() == t.messages()[11];
            invariant &= Transcript::from_symbols(&shuffled, a, SimMode::Exact).unwrap().messages()[11] == t.messages()[11];
        }
        // Full estimator runs route every message through the checked transcript.
        let single = run_single(&samples, bits, &table, 3, ChannelOptions::simulated(SimMode::Sequential), &mut rng);
        invariant &= single.is_ok();
        let constants = MultiConstants::with_default_kappa(2.0, 2, 5);
        if let Ok(plan) = plan_multi(samples.len() as u64, bits, &table, &constants, SimMode::Sequential) {
            invariant &= run_multi(&samples, bits, &table, &plan, ChannelOptions::default(), &mut rng).is_ok();
        }
    }
    let pass = max_ratio < 1.0 && invariant;
    report(
        5,
        "bit budget & noninteractivity",
        pass,
        format!("{messages} messages, max message / 2^b = {max_ratio:.3}, invariance {invariant}"),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_06_coupling_equivalence() {
    let start = Instant::now();
    let mut pass = true;
    let mut compared = 0;
    for spec in families() {
        let table = build_table(spec, 10).unwrap();
        for (i, density) in TestDensity::ALL.into_iter().enumerate() {
            let mut rng = derived_stream(600, &[i as u64]);
            let samples = make_test_density(density, 12).sample(4_000, &mut rng);
            for level in [0u32, 2, 5] {
                let central = centralized_linear(&samples, &table, level).unwrap();
                let coupled = run_single(&samples, 3, &table, level, ChannelOptions::coupling(), &mut stream(601)).unwrap();
                pass &= coupled.tree == central;
                compared += 1;
            }
        }
    }
    report(6, "coupling equivalence", pass, format!("{compared} bit-exact comparisons"), start.elapsed());
    assert!(pass);
}

#[test]
fn criterion_07_single_level_rate() {
    let start = Instant::now();
    let s = 1.5;
    let table = build_table(WaveletSpec::daubechies(3).unwrap(), 12).unwrap();
    let f = make_test_density(TestDensity::BetaLike, 14);
    let decay = coefficient_decay(f.grid(), &table, 2.0, 3..=9).unwrap();
    let s_eff = effective_smoothness(&decay, 2.0).unwrap();

    let config = ExperimentConfig {
        density: "beta_like".into(),
        wavelet: "db3".into(),
        estimator: EstimatorId::Single,
        n: (10..=17).map(|k| 1u64 << k).collect(),
        bits: vec![3],
        r: 2.0,
        trials: 32,
        seed: 7,
        smoothness: Some(s),
        ..Default::default()
    };
    let report_data = run_trials(&config).unwrap();
    let pts: Vec<(u64, f64, f64)> = report_data
        .points
        .iter()
        .map(|p| (p.n, p.mean_risk.unwrap(), p.standard_error.unwrap()))
        .collect();
    let fit = fit_rate(&pts.iter().map(|&(n, r, _)| (n as f64, r)).collect::<Vec<_>>()).unwrap();
    let (lo, hi) = (-2.0 * s / (2.0 * s + 1.0) - 0.2, -2.0 * s / (2.0 * s + 2.0) + 0.2);
    let slope_ok = (lo..=hi).contains(&fit.slope);
    let mut breaks = Vec::new();
    for w in pts.windows(2) {
        if w[1].1 > w[0].1 + 2.0 * w[0].2.max(w[1].2) {
            breaks.push(format!("n={} risk {:.3e} > n={} risk {:.3e}", w[1].0, w[1].1, w[0].0, w[0].1));
        }
    }
    let levels: Vec<String> = report_data
        .points
        .iter()
        .map(|p| match &p.plan {
            Some(bitdensity::harness::PlanEcho::Single { level }) => level.to_string(),
            _ => "?".into(),
        })
        .collect();
    let elapsed = start.elapsed();
    let pass = slope_ok && breaks.is_empty() && (s_eff - s).abs() < 0.25 && elapsed < Duration::from_secs(900);
    report(
        7,
        "single-level rate",
        pass,
        format!(
            "s_eff={s_eff:.3}; slope {:.3} in [{lo:.3}, {hi:.3}]: {slope_ok}; H by n = [{}]; monotone within 2 SE: {}",
            fit.slope,
            levels.join(","),
            if breaks.is_empty() { "yes".to_string() } else { format!("no ({})", breaks.join("; ")) }
        ),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_08_adaptivity() {
    let start = Instant::now();
    let base = ExperimentConfig {
        density: "beta_like".into(),
        wavelet: "db4".into(),
        n: vec![1 << 15],
        bits: vec![3],
        r: 2.0,
        trials: 32,
        seed: 8,
        ..Default::default()
    };
    let multi = ExperimentConfig { estimator: EstimatorId::Multi, smoothness: None, ..base.clone() };
    let single = ExperimentConfig { estimator: EstimatorId::Single, smoothness: Some(1.5), ..base };
    let m = run_trials(&multi).unwrap().points[0].mean_risk.unwrap();
    let s = run_trials(&single).unwrap().points[0].mean_risk.unwrap();
    let ratio = m / s;

    // Threshold sanity on the uniform density.
    let uniform = Experiment::new(ExperimentConfig {
        density: "uniform".into(),
        estimator: EstimatorId::Multi,
        n: vec![100_000],
        trials: 8,
        smoothness: None,
        ..multi.clone()
    })
    .unwrap();
    let point = run_point(&uniform, 100_000, 3);
    let plan = match point.plan.clone() {
        Some(bitdensity::harness::PlanEcho::Multi { plan }) => plan,
        other => panic!("unexpected plan {other:?}"),
    };
    let (mut kept, mut total) = (0usize, 0usize);
    for t in 0..8u64 {
        let mut rng = derived_stream(uniform.config.seed, &[100_000, 3, t]);
        let samples = uniform.density.sample(100_000, &mut rng);
        let est = run_multi(&samples, 3, &uniform.table, &plan, ChannelOptions::default(), &mut rng).unwrap();
        kept += est.tree.surviving_details();
        total += est.tree.beta.len();
    }
    let fraction = kept as f64 / total as f64;
    let pass = ratio <= 4.0 && fraction <= 0.02;
    report(
        8,
        "adaptivity",
        pass,
        format!(
            "multi {m:.4e} / single {s:.4e} = {ratio:.3} (<= 4); uniform surviving fraction {fraction:.4} (<= 0.02), L={} H={}",
            plan.base_level, plan.top_level
        ),
        start.elapsed(),
    );
    assert!(pass);
}

#[test]
fn criterion_09_lower_bound_fixtures() {
    let start = Instant::now();
    let table = build_table(WaveletSpec::haar(), 6).unwrap();
    let params = BesovParams::new(2.0, 2.0, 1.0).unwrap();
    let grid = 14;
    let j = 5;
    let mut pass = true;
    let mut details = Vec::new();
    for variant in [BumpVariant::P1, BumpVariant::P2] {
        let fam = BumpFamily::calibrated(variant, params, &table, j, grid, 200, &mut stream(900)).unwrap();
        let mut rng = derived_stream(901, &[variant as u64]);
        let (mut worst_integral, mut min_value, mut worst_norm, mut checked) = (0.0_f64, f64::INFINITY, 0.0_f64, 0);
        for _ in 0..200 {
            let z = fam.draw_prior(&mut rng);
            let fz = fam.density(&table, &z).unwrap();
            worst_integral = worst_integral.max((fz.grid().integral() - 1.0).abs());
            min_value = min_value.min(fz.grid().values().iter().cloned().fold(f64::INFINITY, f64::min));
            if variant == BumpVariant::P1 || fam.in_good_set(&z) {
                let norm = besov_norm(fz.grid(), &table, &params, fam.norm_j_max).unwrap().value / fam.radius;
                worst_norm = worst_norm.max(norm);
                checked += 1;
            }
        }
        pass &= worst_integral <= 1e-6 && min_value >= 0.0 && worst_norm <= 1.0;
        details.push(format!(
            "{variant:?}: d={} |∫-1|<={worst_integral:.1e} min={min_value:.3} max norm/radius={worst_norm:.3} over {checked}",
            fam.dimension()
        ));
    }
    let fam = BumpFamily::calibrated(BumpVariant::P1, params, &table, j, grid, 200, &mut stream(902)).unwrap();
    let mut rng = stream(903);
    let mut worst_rel = 0.0_f64;
    for _ in 0..20 {
        let z = fam.draw_prior(&mut rng);
        let zp = fam.draw_prior(&mut rng);
        let d = pairwise_distance(&fam, &table, &z, &zp, 2.0).unwrap();
        if d.hamming > 0 {
            worst_rel = worst_rel.max((d.quadrature - d.closed_form).abs() / d.closed_form);
        }
    }
    pass &= worst_rel <= 0.05;
    details.push(format!("pairwise quadrature vs closed form: worst rel. error {worst_rel:.2e}"));
    report(9, "lower-bound fixtures", pass, details.join("; "), start.elapsed());
    assert!(pass);
}

#[test]
fn criterion_10_more_bits_never_hurt() {
    let start = Instant::now();
    let config = ExperimentConfig {
        density: "beta_like".into(),
        wavelet: "db3".into(),
        estimator: EstimatorId::Single,
        n: vec![1 << 14],
        bits: vec![1, 8],
        trials: 32,
        seed: 10,
        smoothness: Some(1.5),
        ..Default::default()
    };
    let report_data = run_trials(&config).unwrap();
    let by_bits: BTreeMap<u32, (f64, f64)> = report_data
        .points
        .iter()
        .map(|p| (p.bits, (p.mean_risk.unwrap(), p.standard_error.unwrap())))
        .collect();
    let (r1, se1) = by_bits[&1];
    let (r8, se8) = by_bits[&8];
    let pass = r8 <= r1 + 2.0 * se1.max(se8);
    report(10, "more bits never hurt", pass, format!("risk b=8 {r8:.4e} vs b=1 {r1:.4e} (se {se1:.2e})"), start.elapsed());
    assert!(pass);
}

#[test]
fn decoded_vertices_have_bounded_second_moment() {
    let table = build_table(WaveletSpec::daubechies(2).unwrap(), 10).unwrap();
    let mut rng = stream(11);
    let d = GroupKind::Single.dimension(&table);
    for _ in 0..1_000 {
        let q = encode_sample(rng.random(), 4, GroupKind::Single, &table, &mut rng).unwrap();
        let v = decode(q.vertex, table.sup_bound(), d).unwrap();
        assert!(v.iter().all(|c| c * c <= (table.sup_bound() * d as f64).powi(2) * (1.0 + 1e-12)));
    }
}
