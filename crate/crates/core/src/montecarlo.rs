//! Desk-scale simulation of the actual vector estimation problem, used to
//! validate the asymptotic predictions: seeded problem generation, the LMMSE
//! and lasso vector estimators, and per-sweep summary statistics.
//!
//! Every trial derives its own RNG stream from (master_seed, trial_index),
//! so any single trial is reproducible in isolation and results are
//! identical for any number of workers: trials may run on any thread, but
//! reduction happens in trial-index order.

use crate::error::{Error, Result};
use crate::metrics::SupportRule;
use crate::priors::{Prior, ScaleDist};
use crate::scalar::{EstimatorSpec, MapFamily};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Lasso solver controls.
#[derive(Debug, Clone, Copy)]
pub struct LassoOptions {
    /// Coordinate-update stopping tolerance (relative to 1 + ||x||_inf).
    pub tol: f64,
    /// Maximum number of full coordinate sweeps.
    pub max_iter: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-8,
            max_iter: 100_000,
        }
    }
}

/// Configuration for one batch of Monte Carlo trials.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub n: usize,
    /// Ratio n/m; the measurement count is m = round(n / beta).
    pub beta: f64,
    pub prior: Prior,
    pub scale: ScaleDist,
    pub sigma0_sq: f64,
    pub estimator: EstimatorSpec,
    /// When false, the scale factors are folded into the prior and the
    /// estimator runs with S = I (power variations unknown to the
    /// estimator). When true the estimator knows S and squared errors are
    /// measured on the physical signal sqrt(s) x.
    pub scale_known: bool,
    pub master_seed: u64,
    pub n_trials: usize,
    pub lasso: LassoOptions,
    /// Per-scale support thresholds; enables misdetection counting.
    pub support_rule: Option<SupportRule>,
}

impl TrialConfig {
    /// Measurement count m = round(n/beta), at least 1.
    pub fn m(&self) -> usize {
        ((self.n as f64 / self.beta).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta must be positive for simulation, got {}",
                self.beta
            )));
        }
        if self.n_trials == 0 {
            return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
        }
        if !(self.sigma0_sq >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma0_sq must be nonnegative, got {}",
                self.sigma0_sq
            )));
        }
        match self.estimator.family() {
            Some(MapFamily::Linear | MapFamily::Lasso) => Ok(()),
            // NP-hard / integral estimators are analyzed but never simulated
            _ => Err(Error::UnsupportedEstimator {
                estimator: self.estimator.name(),
                operation: "run_experiment",
            }),
        }
    }
}

/// One generated problem instance y = A S^{1/2} x + w.
#[derive(Debug, Clone)]
pub struct Problem {
    pub a: Array2<f64>,
    pub s_diag: Array1<f64>,
    pub x: Array1<f64>,
    pub y: Array1<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed derived from the master seed.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ trial_index)
}

/// Generate the trial's problem instance. Draw order is fixed (A row-major,
/// then s, then x, then w), so outputs are bit-identical for the same
/// (master_seed, trial_index).
pub fn generate_problem(cfg: &TrialConfig, trial_index: usize) -> Problem {
    let (n, m) = (cfg.n, cfg.m());
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(cfg.master_seed, trial_index as u64));
    let col_scale = 1.0 / (m as f64).sqrt();
    let a = Array2::from_shape_fn((m, n), |_| {
        let g: f64 = StandardNormal.sample(&mut rng);
        g * col_scale
    });
    let s_diag = Array1::from_shape_fn(n, |_| cfg.scale.sample(&mut rng));
    let x = Array1::from_shape_fn(n, |_| cfg.prior.sample(&mut rng));
    let noise_std = cfg.sigma0_sq.sqrt();
    let w = Array1::from_shape_fn(m, |_| {
        let g: f64 = StandardNormal.sample(&mut rng);
        g * noise_std
    });
    let sx = Array1::from_shape_fn(n, |j| s_diag[j].sqrt() * x[j]);
    let y = a.dot(&sx) + &w;
    Problem { a, s_diag, x, y }
}

/// Cholesky factorization of a symmetric positive-definite matrix, in place
/// (lower triangle). Fails with a condition estimate when a pivot collapses.
fn cholesky(mat: &mut Array2<f64>) -> Result<()> {
    let n = mat.nrows();
    let mut max_diag: f64 = 0.0;
    let mut min_diag = f64::INFINITY;
    for j in 0..n {
        let mut d = mat[(j, j)];
        for k in 0..j {
            d -= mat[(j, k)] * mat[(j, k)];
        }
        if d <= 0.0 {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        let l = d.sqrt();
        max_diag = max_diag.max(l);
        min_diag = min_diag.min(l);
        mat[(j, j)] = l;
        for i in (j + 1)..n {
            let mut v = mat[(i, j)];
            for k in 0..j {
                v -= mat[(i, k)] * mat[(j, k)];
            }
            mat[(i, j)] = v / l;
        }
    }
    let cond = (max_diag / min_diag).powi(2);
    if cond > 1.0 / f64::EPSILON {
        return Err(Error::IllConditioned { condition: cond });
    }
    Ok(())
}

fn cholesky_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut v = y[i];
        for k in 0..i {
            v -= l[(i, k)] * y[k];
        }
        y[i] = v / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v -= l[(k, i)] * y[k];
        }
        y[i] = v / l[(i, i)];
    }
    y
}

/// Regularized linear estimate xhat = S^{1/2} A' (A S A' + gamma I)^{-1} y,
/// by exact Cholesky solve of the m x m system.
pub fn lmmse_estimate(
    a: &Array2<f64>,
    s_diag: &Array1<f64>,
    y: &Array1<f64>,
    gamma: f64,
) -> Result<Array1<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lmmse gamma must be positive, got {gamma}"
        )));
    }
    let m = a.nrows();
    // A S A' + gamma I
    let a_s = a * &s_diag.view().insert_axis(ndarray::Axis(0));
    let mut mat = a_s.dot(&a.t());
    for i in 0..m {
        mat[(i, i)] += gamma;
    }
    cholesky(&mut mat)?;
    let u = cholesky_solve(&mat, y);
    let at_u = a.t().dot(&u);
    Ok(Array1::from_shape_fn(a.ncols(), |j| {
        s_diag[j].sqrt() * at_u[j]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Converged,
    MaxIter,
}

/// Lasso estimate argmin_x (1/(2 gamma)) ||y - A S^{1/2} x||^2 + ||x||_1 by
/// cyclic coordinate descent on the equivalent standard form
/// argmin 0.5 ||y - B x||^2 + gamma ||x||_1 with B = A S^{1/2}.
///
/// Sweeps run on the precomputed Gram matrix until the largest coordinate
/// update falls below tol (1 + ||x||_inf) and the subgradient conditions
/// hold within 10 tol per coordinate; hitting `max_iter` returns the current
/// iterate flagged `MaxIter` rather than discarding it.
pub fn lasso_estimate(
    a: &Array2<f64>,
    s_diag: &Array1<f64>,
    y: &Array1<f64>,
    gamma: f64,
    opts: &LassoOptions,
) -> Result<(Array1<f64>, SolverStatus)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "lasso gamma must be positive, got {gamma}"
        )));
    }
    let n = a.ncols();
    let b = a * &s_diag.mapv(f64::sqrt).view().insert_axis(ndarray::Axis(0));
    let gram = b.t().dot(&b);
    let q = b.t().dot(y);
    let diag: Vec<f64> = (0..n).map(|j| gram[(j, j)]).collect();

    let mut x = vec![0.0f64; n];
    let mut gx = vec![0.0f64; n]; // G x, maintained incrementally
    let mut tol = opts.tol;
    let mut status = SolverStatus::MaxIter;
    for _sweep in 0..opts.max_iter {
        let mut max_delta: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for j in 0..n {
            if diag[j] <= 0.0 {
                continue;
            }
            let r = q[j] - gx[j] + diag[j] * x[j];
            let new = if r.abs() <= gamma {
                0.0
            } else {
                (r - gamma * r.signum()) / diag[j]
            };
            let delta = new - x[j];
            if delta != 0.0 {
                let col = gram.row(j);
                for (gi, c) in gx.iter_mut().zip(col.iter()) {
                    *gi += delta * c;
                }
                x[j] = new;
            }
            max_delta = max_delta.max(delta.abs());
            max_abs = max_abs.max(new.abs());
        }
        if max_delta < tol * (1.0 + max_abs) {
            if kkt_satisfied(&x, &gx, &q, gamma, opts.tol) {
                status = SolverStatus::Converged;
                break;
            }
            // update criterion met but optimality not yet: tighten and continue
            tol = (tol * 0.1).max(f64::EPSILON);
        }
    }
    Ok((Array1::from(x), status))
}

/// Subgradient optimality: with c = B'(y - B xhat), require |c_j| <=
/// gamma (1 + 10 tol) on the inactive set and |c_j - gamma sign(x_j)| <=
/// 10 tol on the active set.
fn kkt_satisfied(x: &[f64], gx: &[f64], q: &Array1<f64>, gamma: f64, tol: f64) -> bool {
    let slack = 10.0 * tol;
    for j in 0..x.len() {
        let c = q[j] - gx[j];
        if x[j] == 0.0 {
            if c.abs() > gamma * (1.0 + slack) {
                return false;
            }
        } else if (c - gamma * x[j].signum()).abs() > slack {
            return false;
        }
    }
    true
}

/// Outcome of a single trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialResult {
    pub trial_index: usize,
    pub seed: u64,
    /// Normalized squared error 10 log10(||xhat - x||^2 / ||x||^2); `None`
    /// when the drawn signal is exactly zero.
    pub se_db: Option<f64>,
    pub misdetect_rate: Option<f64>,
    pub status: SolverStatus,
}

/// Empirical CDF of the per-trial SE on a fixed-size dB grid.
#[derive(Debug, Clone, Default)]
pub struct SeCdf {
    pub grid_db: Vec<f64>,
    pub cdf: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub n: usize,
    pub m: usize,
    /// Realized n/m after rounding m.
    pub realized_beta: f64,
    pub median_se_db: f64,
    /// Bootstrap 95% interval of the median (10^4 resamples).
    pub median_ci_db: (f64, f64),
    pub mean_misdetect: Option<f64>,
    pub se_cdf: SeCdf,
    /// Trials excluded from SE statistics because x was exactly zero.
    pub zero_signal_trials: usize,
    /// Trials whose lasso solve stopped at the sweep limit.
    pub max_iter_trials: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub trials: Vec<TrialResult>,
    pub summary: ExperimentSummary,
}

const CDF_GRID_POINTS: usize = 200;
const BOOTSTRAP_RESAMPLES: usize = 10_000;

/// Run `n_trials` independent trials and reduce them, in trial-index order,
/// into summary statistics. Parallel execution does not change any output
/// byte.
pub fn run_experiment(cfg: &TrialConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let gamma = cfg.estimator.gamma().expect("map estimator");
    // power variations unknown to the estimator fold into the prior
    let effective = if cfg.scale_known {
        cfg.clone()
    } else {
        TrialConfig {
            prior: cfg.prior.scaled_by(&cfg.scale),
            scale: ScaleDist::constant(1.0)?,
            ..cfg.clone()
        }
    };
    if let Some(rule) = &effective.support_rule {
        for (_, s) in effective.scale.atoms() {
            rule.threshold_for(s)?;
        }
    }
    let family = effective.estimator.family().expect("validated");
    let weighted = effective.scale_known && !matches!(effective.scale, ScaleDist::Constant(_));

    let trials: Vec<TrialResult> = (0..effective.n_trials)
        .into_par_iter()
        .map(|idx| run_trial(&effective, idx, family, gamma, weighted))
        .collect::<Result<Vec<_>>>()?;

    let mut ses: Vec<f64> = trials.iter().filter_map(|t| t.se_db).collect();
    ses.sort_by(f64::total_cmp);
    let zero_signal_trials = trials.len() - ses.len();
    let max_iter_trials = trials
        .iter()
        .filter(|t| t.status == SolverStatus::MaxIter)
        .count();
    let median_se_db = median_sorted(&ses);
    let median_ci_db = bootstrap_median_ci(&ses, cfg.master_seed);
    let mis: Vec<f64> = trials.iter().filter_map(|t| t.misdetect_rate).collect();
    let mean_misdetect = if mis.is_empty() {
        None
    } else {
        Some(mis.iter().sum::<f64>() / mis.len() as f64)
    };
    let m = cfg.m();
    let summary = ExperimentSummary {
        n: cfg.n,
        m,
        realized_beta: cfg.n as f64 / m as f64,
        median_se_db,
        median_ci_db,
        mean_misdetect,
        se_cdf: empirical_cdf(&ses),
        zero_signal_trials,
        max_iter_trials,
    };
    Ok(ExperimentOutput { trials, summary })
}

fn run_trial(
    cfg: &TrialConfig,
    idx: usize,
    family: MapFamily,
    gamma: f64,
    weighted: bool,
) -> Result<TrialResult> {
    let problem = generate_problem(cfg, idx);
    let (xhat, status) = match family {
        MapFamily::Linear => (
            lmmse_estimate(&problem.a, &problem.s_diag, &problem.y, gamma)?,
            SolverStatus::Converged,
        ),
        MapFamily::Lasso => {
            lasso_estimate(&problem.a, &problem.s_diag, &problem.y, gamma, &cfg.lasso)?
        }
        MapFamily::ZeroNorm => unreachable!("rejected by validate"),
    };

    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..cfg.n {
        let w = if weighted { problem.s_diag[j] } else { 1.0 };
        let d = xhat[j] - problem.x[j];
        num += w * d * d;
        den += w * problem.x[j] * problem.x[j];
    }
    let se_db = if den > 0.0 {
        Some(10.0 * (num / den).log10())
    } else {
        None
    };

    let misdetect_rate = match &cfg.support_rule {
        Some(rule) => {
            let mut errs = 0usize;
            for j in 0..cfg.n {
                let t = rule.threshold_for(problem.s_diag[j])?;
                let declared = xhat[j].abs() > t;
                let truth = problem.x[j] != 0.0;
                if declared != truth {
                    errs += 1;
                }
            }
            Some(errs as f64 / cfg.n as f64)
        }
        None => None,
    };

    Ok(TrialResult {
        trial_index: idx,
        seed: trial_seed(cfg.master_seed, idx as u64),
        se_db,
        misdetect_rate,
        status,
    })
}

fn median_sorted(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn bootstrap_median_ci(sorted: &[f64], master_seed: u64) -> (f64, f64) {
    if sorted.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    // distinct tagged stream so the CI does not depend on worker scheduling
    let mut rng = ChaCha12Rng::seed_from_u64(trial_seed(master_seed, u64::MAX));
    let n = sorted.len();
    let mut medians = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut resample = vec![0.0f64; n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for slot in resample.iter_mut() {
            *slot = sorted[rng.gen_range(0..n)];
        }
        resample.sort_by(f64::total_cmp);
        medians.push(median_sorted(&resample));
    }
    medians.sort_by(f64::total_cmp);
    let lo = medians[(0.025 * (BOOTSTRAP_RESAMPLES - 1) as f64).round() as usize];
    let hi = medians[(0.975 * (BOOTSTRAP_RESAMPLES - 1) as f64).round() as usize];
    (lo, hi)
}

fn empirical_cdf(sorted: &[f64]) -> SeCdf {
    if sorted.is_empty() {
        return SeCdf::default();
    }
    let lo = sorted[0] - 0.5;
    let hi = sorted[sorted.len() - 1] + 0.5;
    let mut grid_db = Vec::with_capacity(CDF_GRID_POINTS);
    let mut cdf = Vec::with_capacity(CDF_GRID_POINTS);
    for i in 0..CDF_GRID_POINTS {
        let g = lo + (hi - lo) * i as f64 / (CDF_GRID_POINTS - 1) as f64;
        let count = sorted.partition_point(|&v| v <= g);
        grid_db.push(g);
        cdf.push(count as f64 / sorted.len() as f64);
    }
    SeCdf { grid_db, cdf }
}

/// Interquantile width of the per-trial SE values (used to check
/// concentration with growing dimension).
pub fn quantile_width(trials: &[TrialResult], lo_q: f64, hi_q: f64) -> f64 {
    let mut ses: Vec<f64> = trials.iter().filter_map(|t| t.se_db).collect();
    ses.sort_by(f64::total_cmp);
    if ses.is_empty() {
        return f64::NAN;
    }
    let pick = |q: f64| ses[((q * (ses.len() - 1) as f64).round() as usize).min(ses.len() - 1)];
    pick(hi_q) - pick(lo_q)
}
