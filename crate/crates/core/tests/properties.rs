use gosa_core::sampling::{sample_matrix, StreamKey};
use gosa_core::{draw_marginal, ContrastSpec, FeatureValue, Grid, LikelihoodFamily, MarginalSpec, ModelSpec};
use proptest::prelude::*;

fn scalar_contrasts() -> Vec<ContrastSpec<f64>> {
    vec![
        ContrastSpec::Mean,
        ContrastSpec::Median,
        ContrastSpec::quantile(0.1).unwrap(),
        ContrastSpec::quantile(0.77).unwrap(),
        ContrastSpec::excess(0.3).unwrap(),
        ContrastSpec::max_likelihood(LikelihoodFamily::gaussian_linear(10.0).unwrap()),
        ContrastSpec::max_likelihood(LikelihoodFamily::gaussian_linear_constrained(10.0).unwrap()),
    ]
}

proptest! {
    #[test]
    fn pointwise_min_is_a_lower_bound(y in -20.0f64..20.0, th in -0.999f64..10.0) {
        prop_assume!(y != 0.0);
        for c in scalar_contrasts() {
            let th = match &c {
                ContrastSpec::MaxLikelihood { family } if !family.is_relaxed() => th.abs(),
                _ => th,
            };
            let min = c.pointwise_min(y).unwrap();
            let loss = c.pointwise_loss(y, &FeatureValue::Scalar(th)).unwrap();
            prop_assert!(min <= loss + 1e-12, "{}: min {} loss {}", c.id(), min, loss);
            if !matches!(c, ContrastSpec::MaxLikelihood { .. }) {
                prop_assert_eq!(min, 0.0);
            }
        }
    }

    #[test]
    fn scalar_features_minimize_empirical_contrast(sample in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let lo = sample.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let range = (hi - lo).max(1e-3);
        for c in scalar_contrasts().into_iter().filter(|c| !matches!(c, ContrastSpec::MaxLikelihood { .. })) {
            let theta = c.empirical_feature(&sample).unwrap();
            let best = c.average_loss(&sample, &theta).unwrap();
            // Probe grid spanning the sample range (and [0, 1] for probabilities).
            let (plo, phi) = if matches!(c, ContrastSpec::ExcessProb { .. }) { (0.0, 1.0) } else { (lo, hi) };
            let steps = 1000;
            for i in 0..=steps {
                let probe = plo + (phi - plo) * i as f64 / steps as f64;
                let v = c.average_loss(&sample, &FeatureValue::Scalar(probe)).unwrap();
                prop_assert!(best <= v + 1e-12 * (1.0 + v.abs()), "{} {} > {} at {}", c.id(), best, v, probe);
            }
            let _ = range;
        }
    }

    #[test]
    fn functional_features_minimize_empirical_contrast(
        sample in prop::collection::vec(-3.0f64..3.0, 2..30),
        bump in -0.2f64..0.2,
        node in 0usize..9,
    ) {
        let g = Grid::uniform(-4.0, 4.0, 9).unwrap();
        let ag = Grid::uniform(0.5, 0.95, 9).unwrap();
        let cs = [
            ContrastSpec::prob_tail(-4.0, g.clone()).unwrap(),
            ContrastSpec::kernel_density(0.8, g.clone()).unwrap(),
            ContrastSpec::quantile_tail(0.5, ag).unwrap(),
        ];
        for c in cs {
            let theta = c.empirical_feature(&sample).unwrap();
            let best = c.average_loss(&sample, &theta).unwrap();
            let perturbed = match &theta {
                FeatureValue::GridFunction { grid, values } => {
                    let mut v = values.clone();
                    v[node] += bump;
                    FeatureValue::GridFunction { grid: grid.clone(), values: v }
                }
                _ => unreachable!(),
            };
            let worse = c.average_loss(&sample, &perturbed).unwrap();
            prop_assert!(best <= worse + 1e-12, "{}", c.id());
        }
    }

    #[test]
    fn kernel_density_feature_integrates_to_one(
        sample in prop::collection::vec(-3.0f64..3.0, 1..30),
        r in 0.05f64..1.0,
    ) {
        let lo = sample.iter().cloned().fold(f64::INFINITY, f64::min) - 6.0 * r;
        let hi = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 6.0 * r;
        let g = Grid::uniform(lo, hi, 2001).unwrap();
        let c = ContrastSpec::kernel_density(r, g.clone()).unwrap();
        let integral = match c.empirical_feature(&sample).unwrap() {
            FeatureValue::GridFunction { values, .. } => g.integrate(|i, _| values[i]),
            _ => unreachable!(),
        };
        prop_assert!((integral - 1.0).abs() < 1e-3, "{}", integral);
    }

    #[test]
    fn basis_coefficients_minimize(sample in prop::collection::vec(0.0f64..2.0, 1..30), j in 0usize..5, bump in -0.3f64..0.3) {
        let c = ContrastSpec::basis_density(4, (0.0, 2.0)).unwrap();
        let theta = c.empirical_feature(&sample).unwrap();
        let best = c.average_loss(&sample, &theta).unwrap();
        let FeatureValue::Coefficients(mut v) = theta else { unreachable!() };
        v[j] += bump;
        let worse = c.average_loss(&sample, &FeatureValue::Coefficients(v)).unwrap();
        prop_assert!(best <= worse + 1e-12);
        prop_assert_eq!(c.pointwise_min(sample[0]).unwrap(), 0.0);
    }

    #[test]
    fn pointwise_loss_is_pure(y in -10.0f64..10.0, th in -10.0f64..10.0) {
        for c in scalar_contrasts() {
            let a = c.pointwise_loss(y, &FeatureValue::Scalar(th.abs())).unwrap();
            let b = c.pointwise_loss(y, &FeatureValue::Scalar(th.abs())).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn freeze_agrees_with_merged_evaluation(
        x in prop::collection::vec(-3.0f64..3.0, 3),
        mask in 1u8..7,
    ) {
        let m = ModelSpec::<f64>::ishigami();
        let subset: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
        let pinned: Vec<f64> = subset.iter().map(|&i| x[i]).collect();
        let free: Vec<f64> = (0..3).filter(|i| !subset.contains(i)).map(|i| x[i]).collect();
        let frozen = m.freeze(&subset, &pinned).unwrap();
        prop_assert_eq!(frozen.evaluate(&free).unwrap().to_bits(), m.evaluate(&x).unwrap().to_bits());
    }

    #[test]
    fn dummy_model_matches_base(x in prop::collection::vec(-3.0f64..3.0, 4)) {
        let base = ModelSpec::<f64>::ishigami();
        let aug = ModelSpec::dummy_augmented(&base);
        prop_assert_eq!(aug.evaluate(&x).unwrap(), base.evaluate(&x[..3]).unwrap());
    }

    #[test]
    fn inverse_cdf_monotone(u in 1e-12f64..0.999_999, du in 1e-12f64..1e-3) {
        let v = (u + du).min(1.0 - 1e-12);
        let marginals = [
            MarginalSpec::Uniform { lo: -1.0, hi: 3.0 },
            MarginalSpec::Exponential { rate: 0.7 },
            MarginalSpec::Normal { mean: 1.0, sd: 2.0 },
        ];
        for m in marginals {
            prop_assert!(draw_marginal(&m, u).unwrap() <= draw_marginal(&m, v).unwrap());
        }
        let neg = MarginalSpec::NegatedExponential { rate: 1.3 };
        prop_assert!(draw_marginal(&neg, u).unwrap() >= draw_marginal(&neg, v).unwrap());
    }

    #[test]
    fn row_partitions_reproduce_matrix(seed in any::<u64>(), split in 1usize..39) {
        let m = ModelSpec::<f64>::ishigami();
        let key = StreamKey::new(seed, 0);
        let full = sample_matrix(&m, 40, key).unwrap();
        let head = sample_matrix(&m, split, key).unwrap();
        prop_assert_eq!(&full.data[..head.data.len()], &head.data[..]);
        // Row j depends only on (key, j): recompute the tail row by row.
        for j in split..40 {
            for (i, marg) in m.marginals().iter().enumerate() {
                let u = gosa_core::uniform_at::<f64>(key, (j * 3 + i) as u64);
                prop_assert_eq!(full.row(j)[i], draw_marginal(marg, u).unwrap());
            }
        }
    }
}
