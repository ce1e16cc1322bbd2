use gosa_core::{
    estimate_index, estimate_index_sweep, pick_freeze_sobol, ContrastSpec, EstimatorConfig, InnerMode,
    LikelihoodFamily, MarginalSpec, ModelSpec,
};

fn cfg(n: usize, seed: u64, k: usize, b: usize) -> EstimatorConfig {
    EstimatorConfig::new(n, n, seed, vec![k]).with_replicates(b)
}

#[test]
fn example1_median_index() {
    let m = ModelSpec::<f64>::example1();
    let q = ContrastSpec::quantile(0.5).unwrap();
    let est = estimate_index(&m, &q, &cfg(4000, 0, 0, 1)).unwrap();
    let expect = (0.5 + 0.5 * 0.5f64.ln()) / 0.5;
    assert!((est.value - expect).abs() < 0.05, "{}", est.value);
    assert_eq!(est.contrast, "quantile");
    assert_eq!(est.contrast_param, Some(0.5));
}

#[test]
fn example2_symmetric_mean_index() {
    let m = ModelSpec::example2(1.0f64).unwrap();
    let est = estimate_index(&m, &ContrastSpec::Mean, &cfg(2000, 1, 0, 1)).unwrap();
    assert!((est.value - 0.5).abs() < 0.03, "{}", est.value);
}

#[test]
fn ishigami_mean_indices() {
    let m = ModelSpec::<f64>::ishigami();
    let s1 = estimate_index(&m, &ContrastSpec::Mean, &cfg(2000, 2, 0, 1)).unwrap();
    let s3 = estimate_index(&m, &ContrastSpec::Mean, &cfg(2000, 2, 2, 1)).unwrap();
    assert!((s1.value - 0.3139).abs() < 0.03, "{}", s1.value);
    assert!(s3.value.abs() < 0.03, "{}", s3.value);
}

#[test]
fn pick_freeze_reference_values() {
    let g = ModelSpec::gaussian_linear(1.0f64).unwrap();
    let v = pick_freeze_sobol(&g, 0, 100_000, 0).unwrap();
    assert!((v - 0.5).abs() < 0.02, "{v}");
    let e = ModelSpec::example2(2.0f64).unwrap();
    let v = pick_freeze_sobol(&e, 1, 100_000, 0).unwrap();
    assert!((v - 0.2).abs() < 0.02, "{v}");
}

#[test]
fn paired_mean_equals_pick_freeze() {
    let models = [ModelSpec::example2(0.7f64).unwrap(), ModelSpec::ishigami()];
    for m in &models {
        for k in 0..m.dim() {
            for seed in [0u64, 11] {
                let c = cfg(1000, seed, k, 1).with_mode(InnerMode::Paired);
                let est = estimate_index(m, &ContrastSpec::Mean, &c).unwrap();
                let pf = pick_freeze_sobol(m, k, 1000, seed).unwrap();
                assert!((est.value - pf).abs() < 1e-12, "{} k={k}: {} vs {pf}", m.name(), est.value);
            }
        }
    }
}

#[test]
fn full_dependence_gives_exactly_one() {
    let m = ModelSpec::new(
        "cubic-of-x2",
        vec![MarginalSpec::Normal { mean: 0.0, sd: 1.0 }, MarginalSpec::Uniform { lo: -1.0, hi: 2.0 }],
        |x: &[f64]| x[1].powi(3) - x[1],
    )
    .unwrap();
    let c = cfg(500, 4, 1, 3).with_mode(InnerMode::Paired);
    let est = estimate_index(&m, &ContrastSpec::Mean, &c).unwrap();
    assert_eq!(est.value, 1.0);
    assert!(est.replicate_values.iter().all(|&v| v == 1.0));
    let other = estimate_index(&m, &ContrastSpec::Mean, &cfg(500, 4, 0, 1).with_mode(InnerMode::Paired)).unwrap();
    assert!(other.value.abs() < 0.15, "{}", other.value);
}

#[test]
fn single_point_sweep_matches_estimate() {
    let m = ModelSpec::<f64>::example1();
    let c = ContrastSpec::quantile(0.3).unwrap();
    let config = cfg(300, 5, 1, 2);
    let one = estimate_index(&m, &c, &config).unwrap();
    let swept = estimate_index_sweep(&m, &[c], &config).unwrap().pop().unwrap().unwrap();
    assert_eq!(one, swept);
}

#[test]
fn sweep_shares_evaluations_with_individual_runs() {
    // A multi-point sweep sorts the inner samples once; results must equal
    // the selection-based single-contrast path exactly.
    let m = ModelSpec::<f64>::ishigami();
    let config = cfg(200, 8, 2, 1);
    let cs: Vec<_> = [0.1, 0.5, 0.95].iter().map(|&a| ContrastSpec::quantile(a).unwrap()).collect();
    let swept = estimate_index_sweep(&m, &cs, &config).unwrap();
    for (c, s) in cs.iter().zip(swept) {
        assert_eq!(estimate_index(&m, c, &config).unwrap(), s.unwrap());
    }
}

#[test]
fn example1_quantile_sweep_trends() {
    let m = ModelSpec::<f64>::example1();
    let cs: Vec<_> = (1..10).map(|i| ContrastSpec::quantile(i as f64 / 10.0).unwrap()).collect();
    let s1: Vec<f64> = estimate_index_sweep(&m, &cs, &cfg(1500, 3, 0, 1))
        .unwrap()
        .into_iter()
        .map(|r| r.unwrap().value)
        .collect();
    let s2: Vec<f64> = estimate_index_sweep(&m, &cs, &cfg(1500, 3, 1, 1))
        .unwrap()
        .into_iter()
        .map(|r| r.unwrap().value)
        .collect();
    assert!(s1.windows(2).all(|w| w[1] > w[0]), "{s1:?}");
    assert!(s2.windows(2).all(|w| w[1] < w[0]), "{s2:?}");
}

#[test]
fn deterministic_across_thread_counts() {
    let m = ModelSpec::<f64>::ishigami();
    let cs: Vec<_> = [0.2, 0.9].iter().map(|&a| ContrastSpec::quantile(a).unwrap()).collect();
    let config = cfg(300, 21, 1, 2);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_index_sweep(&m, &cs, &config).unwrap())
    };
    let base = run(1);
    for t in [2, 8] {
        assert_eq!(base, run(t), "threads {t}");
    }
}

#[test]
fn fresh_inner_mode_is_consistent() {
    let m = ModelSpec::example2(1.0f64).unwrap();
    let c = cfg(600, 9, 0, 1).with_mode(InnerMode::Fresh);
    let fresh = estimate_index(&m, &ContrastSpec::Mean, &c).unwrap();
    let shared = estimate_index(&m, &ContrastSpec::Mean, &cfg(600, 9, 0, 1)).unwrap();
    assert_ne!(fresh.value, shared.value);
    assert!((fresh.value - 0.5).abs() < 0.08, "{}", fresh.value);
}

#[test]
fn higher_order_subset_of_additive_model() {
    // For Y = X1 + X2 the pair (X1, X2) explains everything.
    let m = ModelSpec::example2(1.5f64).unwrap();
    let c = EstimatorConfig::new(400, 50, 3, vec![0, 1]).with_replicates(1);
    let est = estimate_index(&m, &ContrastSpec::Mean, &c).unwrap();
    assert!((est.value - 1.0).abs() < 1e-12, "{}", est.value);
    let q = estimate_index(&m, &ContrastSpec::quantile(0.8).unwrap(), &c).unwrap();
    assert!((q.value - 1.0).abs() < 1e-12, "{}", q.value);
}

#[test]
fn dummy_variable_index_vanishes() {
    let m = ModelSpec::dummy_augmented(&ModelSpec::<f64>::example1());
    let mut total = 0.0;
    let seeds = 5;
    for seed in 0..seeds {
        let est = estimate_index(&m, &ContrastSpec::quantile(0.7).unwrap(), &cfg(1000, seed, 2, 1)).unwrap();
        total += est.value.abs();
    }
    let avg = total / seeds as f64;
    assert!(avg < 0.05, "{avg}");
}

#[test]
fn ml_feature_recovers_variance_parameter() {
    // Sample from N(0, 2): the fitted theta satisfies theta^2 + 1 = mean(y^2).
    let m = ModelSpec::new(
        "n02",
        vec![MarginalSpec::Normal { mean: 0.0, sd: 2.0f64.sqrt() }],
        |x: &[f64]| x[0],
    )
    .unwrap();
    let x = gosa_core::sample_matrix(&m, 100_000, gosa_core::StreamKey::new(0, 0)).unwrap();
    let y: Vec<f64> = x.data.clone();
    let m2 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    for family in [
        LikelihoodFamily::gaussian_linear(10.0).unwrap(),
        LikelihoodFamily::gaussian_linear_constrained(10.0).unwrap(),
    ] {
        let c = ContrastSpec::max_likelihood(family);
        let th = c.empirical_feature(&y).unwrap().as_scalar().unwrap();
        assert!((th - 1.0).abs() < 0.02, "{th}");
        assert!((th * th + 1.0 - m2).abs() < 1e-7, "{th} {m2}");
    }
}

#[test]
fn ml_index_tracks_closed_form_at_unit_theta() {
    let m = ModelSpec::gaussian_linear(1.0f64).unwrap();
    let c = ContrastSpec::max_likelihood(LikelihoodFamily::gaussian_linear(20.0).unwrap());
    let oracle = gosa_core::oracle::gaussian_ml_indices(1.0f64).unwrap();
    for k in 0..2 {
        let est = estimate_index(&m, &c, &cfg(1000, 6, k, 1)).unwrap();
        assert!((est.value - oracle.s1).abs() < 0.06, "k={k}: {} vs {}", est.value, oracle.s1);
    }
}
