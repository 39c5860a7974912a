//! Oracle equivalences: every closed-form path in the library is checked
//! against an independent numerical route (dense-grid posterior integration,
//! scalar Monte Carlo, orthogonal-design closed forms, indicator-integrand
//! quadrature) that shares no code with the implementation under test.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use replica_cs::*;

fn quad() -> QuadratureSpec {
    QuadratureSpec::default()
}

// ---------------------------------------------------------------------------
// Dense-grid posterior oracle for mixture priors.
// ---------------------------------------------------------------------------

/// Posterior mean and second moment by brute force: atoms handled exactly,
/// continuous components integrated by trapezoid on a dense x-grid.
fn posterior_oracle(prior: &Prior, z: f64, mu: f64, grid_points: usize) -> (f64, f64) {
    let pdf = |x: f64, m: f64, v: f64| -> f64 {
        (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
    };
    let mut mass = 0.0;
    let mut ex = 0.0;
    let mut ex2 = 0.0;
    for c in prior.components() {
        if c.variance == 0.0 {
            let w = c.weight * pdf(z, c.mean, mu);
            mass += w;
            ex += w * c.mean;
            ex2 += w * c.mean * c.mean;
        } else {
            // integrate w(x) = weight N(x; m, v) N(z - x; 0, mu) over a wide grid
            let sd = c.variance.sqrt();
            let lo = (c.mean - 12.0 * sd).min(z - 12.0 * mu.sqrt());
            let hi = (c.mean + 12.0 * sd).max(z + 12.0 * mu.sqrt());
            let h = (hi - lo) / (grid_points - 1) as f64;
            for i in 0..grid_points {
                let x = lo + i as f64 * h;
                let trap = if i == 0 || i == grid_points - 1 { 0.5 } else { 1.0 };
                let w = trap * h * c.weight * pdf(x, c.mean, c.variance) * pdf(z - x, 0.0, mu);
                mass += w;
                ex += w * x;
                ex2 += w * x * x;
            }
        }
    }
    (ex / mass, ex2 / mass)
}

#[test]
fn scalar_mmse_matches_dense_grid_oracle() {
    let bg = Prior::bernoulli_gaussian(0.1).unwrap();
    for &(z, mu) in &[(3.0, 0.1), (0.4, 0.05), (-1.2, 0.5), (7.0, 1.0)] {
        let (oex, _) = posterior_oracle(&bg, z, mu, 100_000);
        let got = scalar_mmse(&bg, z, mu);
        assert!(
            (got - oex).abs() < 1e-8,
            "z={z} mu={mu}: {got} vs oracle {oex}"
        );
    }

    // two-slab mixture with offset means
    let mix = Prior::gaussian_mixture(vec![
        MixtureComponent {
            weight: 0.3,
            mean: -1.0,
            variance: 0.5,
        },
        MixtureComponent {
            weight: 0.7,
            mean: 2.0,
            variance: 2.0,
        },
    ])
    .unwrap();
    for &(z, mu) in &[(0.0, 0.3), (2.5, 0.05)] {
        let (oex, _) = posterior_oracle(&mix, z, mu, 100_000);
        let got = scalar_mmse(&mix, z, mu);
        assert!((got - oex).abs() < 1e-8, "mix z={z}: {got} vs {oex}");
    }
}

#[test]
fn scalar_mmse_mse_matches_dense_grid_oracle() {
    let bg = Prior::bernoulli_gaussian(0.1).unwrap();
    // matched case at the exact point from the contract example
    let (z, mu) = (3.0, 0.1);
    let (oex, oex2) = posterior_oracle(&bg, z, mu, 100_000);
    let xhat = scalar_mmse(&bg, z, mu);
    let oracle_mse = oex2 - 2.0 * xhat * oex + xhat * xhat;
    let got = scalar_mmse_mse(&bg, &bg, mu, mu, z);
    assert!((got - oracle_mse).abs() < 1e-8, "{got} vs {oracle_mse}");

    // mismatched estimator prior and noise level
    let post = Prior::gaussian(2.0).unwrap();
    let (mu_true, mu_post) = (0.2, 0.35);
    for &z in &[-2.0, 0.1, 1.7] {
        let (oex, oex2) = posterior_oracle(&bg, z, mu_true, 100_000);
        let xh = scalar_mmse(&post, z, mu_post);
        let oracle = oex2 - 2.0 * xh * oex + xh * xh;
        let got = scalar_mmse_mse(&bg, &post, mu_true, mu_post, z);
        assert!((got - oracle).abs() < 1e-8, "z={z}: {got} vs {oracle}");
    }
}

// ---------------------------------------------------------------------------
// Scalar Monte Carlo oracle for the fixed-point expectation terms.
// ---------------------------------------------------------------------------

struct McMoments {
    mean: f64,
    std_err: f64,
}

fn scalar_mc<F: FnMut(&mut ChaCha12Rng) -> f64>(n: usize, seed: u64, mut f: F) -> McMoments {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..n {
        let v = f(&mut rng);
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum2 / n as f64 - mean * mean).max(0.0);
    McMoments {
        mean,
        std_err: (var / n as f64).sqrt(),
    }
}

#[test]
fn map_rhs_terms_match_scalar_monte_carlo() {
    let n = 10_000_000;
    let prior = Prior::bernoulli_gaussian(0.1).unwrap();
    let (sigma2, gp) = (0.03, 0.02);
    let mse_point = NoiseLevels::point(sigma2, gp);
    let quad = quad();

    for (fam_idx, estimator) in [
        EstimatorSpec::lasso(0.01).unwrap(),
        EstimatorSpec::zero_norm(0.01).unwrap(),
    ]
    .into_iter()
    .enumerate()
    {
        let cfg = ProblemConfig::new(
            1.0,
            0.01,
            prior.clone(),
            ScaleDist::constant(1.0).unwrap(),
            estimator.clone(),
        )
        .unwrap();

        // first equation term: E[s |x - xhat|^2]
        let analytic = predicted_mse_weighted(&cfg, &mse_point, &quad).unwrap();
        let est = estimator.clone();
        let mc = scalar_mc(n, 1000 + fam_idx as u64, |rng| {
            let x = prior.sample(rng);
            let g: f64 = StandardNormal.sample(rng);
            let z = x + sigma2.sqrt() * g;
            let xh = scalar_map(&est, z, gp).unwrap();
            (x - xh) * (x - xh)
        });
        let gap = (analytic - mc.mean).abs() / mc.std_err;
        assert!(gap < 4.0, "{} mse term: {gap:.2} SE", estimator.name());

        // second equation term: E[s sigma^2(z, lam)] = (rhs2 - gamma)/beta
        let (_, r2) = map_rhs(&cfg, &mse_point, &quad).unwrap();
        let term = r2 - 0.01;
        let est2 = estimator.clone();
        let mc2 = scalar_mc(n, 2000 + fam_idx as u64, |rng| {
            let x = prior.sample(rng);
            let g: f64 = StandardNormal.sample(rng);
            let z = x + sigma2.sqrt() * g;
            scalar_map_variance(&est2, z, gp).unwrap()
        });
        let gap2 = (term - mc2.mean).abs() / mc2.std_err;
        assert!(gap2 < 4.0, "{} var term: {gap2:.2} SE", estimator.name());
    }
}

#[test]
fn lasso_zero_prior_rhs_matches_scalar_monte_carlo() {
    // all-zero prior: first component reduces to E[s T_soft(sqrt(mu) v)^2]
    let cfg = ProblemConfig::new(
        1.0,
        0.04,
        Prior::point_mass(0.0),
        ScaleDist::constant(1.0).unwrap(),
        EstimatorSpec::lasso(0.05).unwrap(),
    )
    .unwrap();
    let (sigma2, gp) = (0.04, 0.05);
    let (r1, _) = map_rhs(&cfg, &NoiseLevels::point(sigma2, gp), &quad()).unwrap();
    let term = r1 - 0.04;
    let mc = scalar_mc(10_000_000, 7, |rng| {
        let g: f64 = StandardNormal.sample(rng);
        let t = soft_threshold(sigma2.sqrt() * g, gp);
        t * t
    });
    let gap = (term - mc.mean).abs() / mc.std_err;
    assert!(gap < 4.0, "gap {gap:.2} SE");
}

#[test]
fn predicted_mse_beta_zero_lasso_matches_monte_carlo() {
    let sigma0 = 0.09;
    let gamma = 0.12;
    let cfg = ProblemConfig::new(
        0.0,
        sigma0,
        Prior::point_mass(0.0),
        ScaleDist::constant(1.0).unwrap(),
        EstimatorSpec::lasso(gamma).unwrap(),
    )
    .unwrap();
    let lv = solve_map_fixed_point(&cfg, &quad()).unwrap()[0];
    let analytic = predicted_mse(&cfg, &lv, &quad()).unwrap();
    let mc = scalar_mc(10_000_000, 8, |rng| {
        let g: f64 = StandardNormal.sample(rng);
        let t = soft_threshold(sigma0.sqrt() * g, gamma);
        t * t
    });
    let gap = (analytic - mc.mean).abs() / mc.std_err;
    assert!(gap < 4.0, "gap {gap:.2} SE");
}

#[test]
fn misdetect_matches_scalar_monte_carlo() {
    // zero-norm (optimally regularized) with t = 0: declared nonzero iff
    // |z| > sqrt(2 lam)
    let prior = Prior::three_point(0.2).unwrap();
    let base = ProblemConfig::new(
        1.0,
        0.1,
        prior.clone(),
        ScaleDist::constant(1.0).unwrap(),
        EstimatorSpec::zero_norm(1.0).unwrap(),
    )
    .unwrap();
    let (gamma, lv) = optimize_regularization(&base, &quad()).unwrap();
    let cfg = ProblemConfig {
        estimator: base.estimator.with_gamma(gamma).unwrap(),
        ..base
    };
    let rule = SupportRule::uniform(&cfg, 0.0).unwrap();
    let p = misdetect_probability(&cfg, &lv, &rule, &quad()).unwrap();

    let est = cfg.estimator.clone();
    let (sigma2, gp) = (lv.sigma_eff_sq, lv.gamma_p);
    let mc = scalar_mc(10_000_000, 9, |rng| {
        let x = prior.sample(rng);
        let g: f64 = StandardNormal.sample(rng);
        let z = x + sigma2.sqrt() * g;
        let xh = scalar_map(&est, z, gp).unwrap();
        let declared = xh.abs() > 0.0;
        let truth = x != 0.0;
        if declared != truth {
            1.0
        } else {
            0.0
        }
    });
    let gap = (p - mc.mean).abs() / mc.std_err;
    assert!(gap < 4.0, "p={p} mc={} gap {gap:.2} SE", mc.mean);
}

// ---------------------------------------------------------------------------
// Indicator-integrand quadrature oracle for the Q-function specialization.
// ---------------------------------------------------------------------------

#[test]
fn tail_term_matches_indicator_quadrature() {
    // E[s sigma^2(z, lam)] from the solver (Gaussian tails) against Simpson
    // integration of the indicator integrand on a fine z-grid.
    let prior = Prior::bernoulli_gaussian(0.1).unwrap();
    let scale = ScaleDist::uniform_db(10.0, 4).unwrap();
    let (sigma2, gp) = (0.05, 0.03);
    let beta = 1.3;
    let gamma = 0.01;
    let cfg = ProblemConfig::new(
        beta,
        0.02,
        prior.clone(),
        scale.clone(),
        EstimatorSpec::lasso(gamma).unwrap(),
    )
    .unwrap();
    let (_, r2) = map_rhs(&cfg, &NoiseLevels::point(sigma2, gp), &quad()).unwrap();
    let analytic = (r2 - gamma) / beta;

    let gauss_pdf = |x: f64, v: f64| (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    let mut oracle = 0.0;
    for (ws, s) in scale.atoms() {
        let mu = sigma2 / s;
        let lam = gp / s;
        for c in prior.components() {
            let nu2 = c.variance + mu;
            // Simpson over z on +-14 std around the component mean
            let half = 14.0 * nu2.sqrt();
            let n = 40_001usize;
            let h = 2.0 * half / (n - 1) as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let z = c.mean - half + i as f64 * h;
                let w = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let indicator = if z.abs() > lam { lam } else { 0.0 };
                acc += w * indicator * gauss_pdf(z - c.mean, nu2);
            }
            oracle += ws * s * c.weight * acc * h / 3.0;
        }
    }
    assert!(
        (analytic - oracle).abs() < 1e-6,
        "{analytic} vs {oracle}"
    );
}

// ---------------------------------------------------------------------------
// Quadrature stability and prediction orderings.
// ---------------------------------------------------------------------------

#[test]
fn predictions_stable_in_base_node_count() {
    // the acceptance configurations, solved with base rules 31 and 61
    let prior = Prior::bernoulli_gaussian(0.1).unwrap();
    let scale = ScaleDist::constant(1.0).unwrap();
    let sigma0 = 0.01;
    for &beta in &[0.5, 1.0, 2.0, 3.0] {
        let qa = QuadratureSpec {
            n_hermite: 31,
            ..quad()
        };
        let qb = QuadratureSpec {
            n_hermite: 61,
            ..quad()
        };
        // posterior-mean path (adaptive quadrature)
        let cfg = ProblemConfig::new(
            beta,
            sigma0,
            prior.clone(),
            scale.clone(),
            EstimatorSpec::Mmse {
                postulated_prior: prior.clone(),
            },
        )
        .unwrap();
        let a = solve_mmse_fixed_point(&cfg, sigma0, &qa).unwrap()[0].sigma_eff_sq;
        let b = solve_mmse_fixed_point(&cfg, sigma0, &qb).unwrap()[0].sigma_eff_sq;
        assert!((a - b).abs() < 1e-8, "mmse beta={beta}: {a} vs {b}");

        // cost-minimizing path (closed form, must be bit-identical)
        let lcfg = ProblemConfig::new(
            beta,
            sigma0,
            prior.clone(),
            scale.clone(),
            EstimatorSpec::lasso(0.05).unwrap(),
        )
        .unwrap();
        let la = solve_map_fixed_point(&lcfg, &qa).unwrap()[0].sigma_eff_sq;
        let lb = solve_map_fixed_point(&lcfg, &qb).unwrap()[0].sigma_eff_sq;
        assert_eq!(la.to_bits(), lb.to_bits(), "map beta={beta}");
    }
}

#[test]
fn mmse_lower_bounds_map_predictions() {
    // among this library's own predictions, matched posterior-mean MSE is
    // the smallest at every beta
    let prior = Prior::bernoulli_gaussian(0.1).unwrap();
    let scale = ScaleDist::constant(1.0).unwrap();
    let sigma0 = 0.01;
    let q = quad();
    for &beta in &[0.5, 1.5, 3.0] {
        let mmse_cfg = ProblemConfig::new(
            beta,
            sigma0,
            prior.clone(),
            scale.clone(),
            EstimatorSpec::Mmse {
                postulated_prior: prior.clone(),
            },
        )
        .unwrap();
        let mmse_lv = solve_mmse_fixed_point(&mmse_cfg, sigma0, &q).unwrap()[0];
        let mmse_mse = predicted_mse(&mmse_cfg, &mmse_lv, &q).unwrap();

        for family in ["linear", "lasso", "zero_norm"] {
            let (cfg, lv) = match family {
                "linear" => {
                    let c = ProblemConfig::new(
                        beta,
                        sigma0,
                        prior.clone(),
                        scale.clone(),
                        EstimatorSpec::linear(sigma0).unwrap(),
                    )
                    .unwrap();
                    let l = solve_map_fixed_point(&c, &q).unwrap()[0];
                    (c, l)
                }
                _ => {
                    let est = if family == "lasso" {
                        EstimatorSpec::lasso(1.0).unwrap()
                    } else {
                        EstimatorSpec::zero_norm(1.0).unwrap()
                    };
                    let c = ProblemConfig::new(beta, sigma0, prior.clone(), scale.clone(), est)
                        .unwrap();
                    let (gamma, l) = optimize_regularization(&c, &q).unwrap();
                    let c = ProblemConfig {
                        estimator: c.estimator.with_gamma(gamma).unwrap(),
                        ..c
                    };
                    (c, l)
                }
            };
            let mse = predicted_mse(&cfg, &lv, &q).unwrap();
            assert!(
                mse >= mmse_mse * (1.0 - 1e-6),
                "beta={beta} {family}: {mse} < mmse {mmse_mse}"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Orthogonal-design lasso oracle.
// ---------------------------------------------------------------------------

#[test]
fn lasso_orthonormal_columns_closed_form() {
    // Gram-Schmidt an iid Gaussian 24 x 12 matrix into orthonormal columns;
    // the lasso solution is then soft thresholding of B'y exactly.
    let (m, n) = (24usize, 12usize);
    let mut rng = ChaCha12Rng::seed_from_u64(41);
    let mut cols: Vec<Array1<f64>> = (0..n)
        .map(|_| {
            Array1::from_shape_fn(m, |_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g
            })
        })
        .collect();
    for j in 0..n {
        for k in 0..j {
            let proj = cols[j].dot(&cols[k]);
            let prev = cols[k].clone();
            cols[j].scaled_add(-proj, &prev);
        }
        let norm = cols[j].dot(&cols[j]).sqrt();
        cols[j].mapv_inplace(|v| v / norm);
    }
    let mut a = Array2::zeros((m, n));
    for j in 0..n {
        for i in 0..m {
            a[(i, j)] = cols[j][i];
        }
    }
    let s = Array1::ones(n);
    let y = Array1::from_shape_fn(m, |_| {
        let g: f64 = StandardNormal.sample(&mut rng);
        2.0 * g
    });
    let gamma = 0.7;
    let (xh, status) = lasso_estimate(&a, &s, &y, gamma, &LassoOptions::default()).unwrap();
    assert_eq!(status, SolverStatus::Converged);
    let aty = a.t().dot(&y);
    for j in 0..n {
        let expect = soft_threshold(aty[j], gamma);
        assert!(
            (xh[j] - expect).abs() < 1e-8,
            "col {j}: {} vs {expect}",
            xh[j]
        );
    }
}

#[test]
fn lasso_kkt_random_instances() {
    let opts = LassoOptions::default();
    for seed in 0..5u64 {
        let cfg = TrialConfig {
            n: 40,
            beta: 1.6,
            prior: Prior::bernoulli_gaussian(0.2).unwrap(),
            scale: ScaleDist::uniform_db(8.0, 3).unwrap(),
            sigma0_sq: 0.02,
            estimator: EstimatorSpec::lasso(0.04).unwrap(),
            scale_known: true,
            master_seed: 1234 + seed,
            n_trials: 1,
            lasso: opts,
            support_rule: None,
        };
        let p = generate_problem(&cfg, 0);
        let gamma = 0.04;
        let (xh, status) = lasso_estimate(&p.a, &p.s_diag, &p.y, gamma, &opts).unwrap();
        assert_eq!(status, SolverStatus::Converged);
        let b = &p.a * &p.s_diag.mapv(f64::sqrt).view().insert_axis(ndarray::Axis(0));
        let resid = &p.y - &b.dot(&xh);
        let corr = b.t().dot(&resid);
        for j in 0..cfg.n {
            if xh[j] == 0.0 {
                assert!(corr[j].abs() <= gamma * (1.0 + 10.0 * opts.tol), "seed {seed} col {j}");
            } else {
                assert!(
                    (corr[j] - gamma * xh[j].signum()).abs() <= 10.0 * opts.tol,
                    "seed {seed} col {j}"
                );
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scale-distribution discretization convergence.
// ---------------------------------------------------------------------------

#[test]
fn uniform_db_predictions_converge_in_atom_count() {
    // the 10 dB power spread is discretized; predictions must stabilize as
    // the grid refines
    let prior = Prior::three_point(0.1).unwrap();
    let sigma0 = 0.1;
    let q = quad();
    let solve_with = |n_atoms: usize| {
        let cfg = ProblemConfig::new(
            1.0,
            sigma0,
            prior.clone(),
            ScaleDist::uniform_db(10.0, n_atoms).unwrap(),
            EstimatorSpec::lasso(0.1).unwrap(),
        )
        .unwrap();
        solve_map_fixed_point(&cfg, &q).unwrap()[0].sigma_eff_sq
    };
    let c32 = solve_with(32);
    let c64 = solve_with(64);
    let c128 = solve_with(128);
    assert!(
        (c64 - c128).abs() < (c32 - c64).abs() + 1e-12,
        "not converging: {c32} {c64} {c128}"
    );
    assert!((c64 - c128).abs() / c128 < 1e-4, "{c64} vs {c128}");
}
