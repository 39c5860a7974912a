//! Property tests for the scalar estimators, distributions, and metrics.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use replica_cs::*;

fn families() -> impl Strategy<Value = EstimatorSpec> {
    prop_oneof![
        Just(EstimatorSpec::linear(1.0).unwrap()),
        Just(EstimatorSpec::lasso(1.0).unwrap()),
        Just(EstimatorSpec::zero_norm(1.0).unwrap()),
    ]
}

proptest! {
    #[test]
    fn scalar_map_is_argmin(
        spec in families(),
        z in -10.0f64..10.0,
        lambda in 0.01f64..10.0,
        probes in prop::collection::vec(-12.0f64..12.0, 64),
    ) {
        let xhat = scalar_map(&spec, z, lambda).unwrap();
        let fhat = map_objective(&spec, xhat, z, lambda).unwrap();
        for x in probes {
            let f = map_objective(&spec, x, z, lambda).unwrap();
            prop_assert!(fhat <= f + 1e-12, "F({x}) = {f} < F(xhat) = {fhat}");
        }
        // near-minimizer probes too
        for d in [-1e-4, 1e-4, -1e-2, 1e-2] {
            let f = map_objective(&spec, xhat + d, z, lambda).unwrap();
            prop_assert!(fhat <= f + 1e-12);
        }
    }

    #[test]
    fn thresholds_are_odd_and_contractive(z in -50.0f64..50.0, lam in 1e-6f64..10.0) {
        prop_assert_eq!(soft_threshold(-z, lam), -soft_threshold(z, lam));
        prop_assert_eq!(hard_threshold(-z, lam), -hard_threshold(z, lam));
        prop_assert!(soft_threshold(z, lam).abs() <= z.abs());
    }

    #[test]
    fn soft_threshold_nondecreasing(z1 in -20.0f64..20.0, dz in 0.0f64..20.0, lam in 1e-6f64..10.0) {
        prop_assert!(soft_threshold(z1 + dz, lam) >= soft_threshold(z1, lam));
    }

    #[test]
    fn expect_over_scale_of_one_is_one(
        raw in prop::collection::vec((1e-3f64..1.0, 1e-3f64..100.0), 1..12)
    ) {
        let total: f64 = raw.iter().map(|&(w, _)| w).sum();
        let atoms: Vec<(f64, f64)> = raw.iter().map(|&(w, s)| (w / total, s)).collect();
        let d = ScaleDist::discrete(atoms).unwrap();
        prop_assert!((d.expect(|_| 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mmse_pulls_toward_prior_mean_as_noise_grows(z in -5.0f64..5.0) {
        let g = Prior::gaussian(1.0).unwrap();
        // small noise: estimate hugs the observation
        prop_assert!((scalar_mmse(&g, z, 1e-9) - z).abs() <= 1e-8 * (1.0 + z.abs()));
        // large noise: estimate collapses to the prior mean (0)
        prop_assert!(scalar_mmse(&g, z, 1e9).abs() <= 1e-8 * (1.0 + z.abs()));
    }

    #[test]
    fn misdetect_probability_in_unit_interval(
        t in 0.0f64..20.0,
        gamma in 0.01f64..2.0,
        rho in 0.05f64..0.9,
    ) {
        let cfg = ProblemConfig::new(
            0.5,
            0.1,
            Prior::three_point(rho).unwrap(),
            ScaleDist::constant(1.0).unwrap(),
            EstimatorSpec::lasso(gamma).unwrap(),
        ).unwrap();
        // any positive levels are a valid probe point for the metric
        let lv = NoiseLevels::point(0.2, gamma);
        let rule = SupportRule::uniform(&cfg, t).unwrap();
        let p = misdetect_probability(&cfg, &lv, &rule, &QuadratureSpec::default()).unwrap();
        prop_assert!((0.0..=1.0).contains(&p), "p = {}", p);
    }
}

#[test]
fn matched_posterior_mse_never_exceeds_noise_in_expectation() {
    // E_z[mse(p, p, mu, mu, z)] <= mu: the posterior mean is at least as good
    // as the raw observation on average
    let priors = [
        Prior::gaussian(1.0).unwrap(),
        Prior::bernoulli_gaussian(0.1).unwrap(),
        Prior::three_point(0.2).unwrap(),
        Prior::gaussian_mixture(vec![
            MixtureComponent { weight: 0.4, mean: -1.0, variance: 0.3 },
            MixtureComponent { weight: 0.6, mean: 0.5, variance: 2.0 },
        ])
        .unwrap(),
    ];
    for prior in &priors {
        for &mu in &[0.01, 0.1, 1.0, 10.0] {
            // expectation over the true observation law via its mixture form
            let mut expect = 0.0;
            for c in prior.components() {
                let nu = (c.variance + mu).sqrt();
                let val = gaussian::gauss_expect(
                    |w| scalar_mmse_mse(prior, prior, mu, mu, c.mean + nu * w),
                    61,
                    1e-11,
                    1e-300,
                )
                .unwrap();
                expect += c.weight * val;
            }
            assert!(
                expect <= mu * (1.0 + 1e-9),
                "prior {prior:?} mu={mu}: E[mse] = {expect}"
            );
        }
    }
}

#[test]
fn sample_moments_match_for_random_mixtures() {
    let mut seed_rng = ChaCha12Rng::seed_from_u64(5150);
    for trial in 0..8u64 {
        use rand::Rng;
        let k = 1 + (trial as usize % 3);
        let mut comps = Vec::new();
        let mut total = 0.0;
        for _ in 0..=k {
            let w: f64 = seed_rng.gen_range(0.1..1.0);
            total += w;
            comps.push(MixtureComponent {
                weight: w,
                mean: seed_rng.gen_range(-2.0..2.0),
                variance: if seed_rng.gen_bool(0.3) {
                    0.0
                } else {
                    seed_rng.gen_range(0.0..3.0)
                },
            });
        }
        for c in &mut comps {
            c.weight /= total;
        }
        let prior = Prior::gaussian_mixture(comps).unwrap();

        let n = 200_000usize;
        let mut rng = ChaCha12Rng::seed_from_u64(9000 + trial);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let x = prior.sample(&mut rng);
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n as f64;
        let m2 = sum2 / n as f64;
        let var = prior.second_moment() - prior.mean() * prior.mean();
        let se_mean = (var / n as f64).sqrt();
        assert!(
            (mean - prior.mean()).abs() < 5.0 * se_mean + 1e-9,
            "trial {trial}: mean {mean} vs {}",
            prior.mean()
        );
        // generous bound on the fourth moment for the second-moment SE
        let se_m2 = ((prior.second_moment() * prior.second_moment() * 20.0) / n as f64).sqrt();
        assert!(
            (m2 - prior.second_moment()).abs() < 5.0 * se_m2 + 1e-9,
            "trial {trial}: m2 {m2} vs {}",
            prior.second_moment()
        );
    }
}

#[test]
fn optimized_thresholds_beat_random_rules() {
    let cfg = ProblemConfig::new(
        1.0,
        0.1,
        Prior::three_point(0.2).unwrap(),
        ScaleDist::uniform_db(6.0, 3).unwrap(),
        EstimatorSpec::linear(0.1).unwrap(),
    )
    .unwrap();
    let q = QuadratureSpec::default();
    let lv = solve_map_fixed_point(&cfg, &q).unwrap()[0];
    let (_, p_opt) = optimize_thresholds(&cfg, &lv, &q).unwrap();
    use rand::Rng;
    let mut rng = ChaCha12Rng::seed_from_u64(777);
    for _ in 0..100 {
        let rule = SupportRule::new(
            cfg.scale
                .atoms()
                .iter()
                .map(|&(_, s)| (s, rng.gen_range(0.0..5.0)))
                .collect(),
        )
        .unwrap();
        let p = misdetect_probability(&cfg, &lv, &rule, &q).unwrap();
        assert!(p_opt <= p + 1e-12, "random rule beat optimum: {p} < {p_opt}");
    }
}

#[test]
fn solved_levels_dominate_noise_floor() {
    let q = QuadratureSpec::default();
    for &beta in &[0.25, 1.0, 2.5] {
        for &gamma in &[0.02, 0.1, 0.6] {
            let cfg = ProblemConfig::new(
                beta,
                0.05,
                Prior::bernoulli_gaussian(0.15).unwrap(),
                ScaleDist::constant(1.0).unwrap(),
                EstimatorSpec::lasso(gamma).unwrap(),
            )
            .unwrap();
            for lv in solve_map_fixed_point(&cfg, &q).unwrap() {
                assert!(lv.sigma_eff_sq >= cfg.sigma0_sq - 1e-15);
                assert!(lv.gamma_p >= gamma - 1e-15);
                assert!(multiuser_efficiency(&lv, cfg.sigma0_sq) <= 1.0 + 1e-12);
            }
        }
    }
}
