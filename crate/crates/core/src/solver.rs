//! Fixed-point solvers for the effective noise levels of the equivalent
//! scalar channel, for both cost-minimizing (linear / lasso / zero-norm)
//! estimators and posterior-mean estimation, plus the regularization
//! optimizer.
//!
//! The two coupled equations are
//!
//! ```text
//! sigma_eff^2 = sigma0^2 + beta * E[ s |x - xhat(z; gamma_p/s)|^2 ]
//! gamma_p     = gamma    + beta * E[ s sigma^2(z, gamma_p/s) ]
//! ```
//!
//! with z = x + sqrt(sigma_eff^2/s) v. Expectations factor exactly over the
//! prior mixture components and scale atoms. For the cost-minimizing
//! families the remaining Gaussian integrals are piecewise quadratic and are
//! evaluated in closed form from truncated normal moments; the indicator
//! terms reduce to Gaussian tail probabilities. Only the posterior-mean
//! (MMSE) path needs numerical integration, which uses the adaptive engine
//! in [`crate::gaussian`].

use crate::error::{Error, Result};
use crate::gaussian::{gauss_expect, prob_abs_exceeds, truncated_quadratic};
use crate::priors::{MixtureComponent, Prior, ScaleDist};
use crate::scalar::{scalar_mmse_mse, EstimatorSpec, MapFamily};

/// Full description of one asymptotic estimation problem.
#[derive(Debug, Clone)]
pub struct ProblemConfig {
    /// Limiting ratio n/m of unknowns to measurements.
    pub beta: f64,
    /// True measurement-noise variance.
    pub sigma0_sq: f64,
    pub prior: Prior,
    pub scale: ScaleDist,
    pub estimator: EstimatorSpec,
}

impl ProblemConfig {
    pub fn new(
        beta: f64,
        sigma0_sq: f64,
        prior: Prior,
        scale: ScaleDist,
        estimator: EstimatorSpec,
    ) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be >= 0, got {beta}")));
        }
        if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma0_sq must be positive, got {sigma0_sq}"
            )));
        }
        Ok(ProblemConfig {
            beta,
            sigma0_sq,
            prior,
            scale,
            estimator,
        })
    }

    fn map_family(&self, operation: &'static str) -> Result<(MapFamily, f64)> {
        match (self.estimator.family(), self.estimator.gamma()) {
            (Some(f), Some(g)) => Ok((f, g)),
            _ => Err(Error::UnsupportedEstimator {
                estimator: self.estimator.name(),
                operation,
            }),
        }
    }
}

/// A solution (or iterate) of the fixed-point equations.
///
/// For the posterior-mean solver `gamma_p` holds the postulated effective
/// noise level sigma_p-eff^2.
#[derive(Debug, Clone, Copy)]
pub struct NoiseLevels {
    pub sigma_eff_sq: f64,
    pub gamma_p: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Relative mismatch of the two equations at this point.
    pub residual: f64,
}

impl NoiseLevels {
    /// A bare evaluation point, for probing the right-hand sides.
    pub fn point(sigma_eff_sq: f64, gamma_p: f64) -> Self {
        NoiseLevels {
            sigma_eff_sq,
            gamma_p,
            converged: false,
            iterations: 0,
            residual: f64::INFINITY,
        }
    }
}

/// Numerical controls for the solvers.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    /// Base node budget for Gaussian expectations. The adaptive engine
    /// starts at this resolution and refines until its own tolerance, so
    /// results do not depend on the choice.
    pub n_hermite: usize,
    /// Damping of the successive-substitution update, in (0, 1].
    pub damping: f64,
    /// Relative convergence tolerance on the fixed-point residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting sigma_eff^2 values; empty selects the default grid
    /// {sigma0^2, 10 sigma0^2, sigma0^2 + beta E[s] E[x^2]}.
    pub init_grid: Vec<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            n_hermite: 61,
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            init_grid: Vec::new(),
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_hermite == 0 || self.n_hermite % 2 == 0 {
            return Err(Error::InvalidConfig(format!(
                "n_hermite must be odd and positive, got {}",
                self.n_hermite
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "damping must be in (0,1], got {}",
                self.damping
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        Ok(())
    }

    fn quad_rel_tol(&self) -> f64 {
        (self.tol * 1e-2).clamp(1e-14, 1e-6)
    }
}

// ---------------------------------------------------------------------------
// Exact expectation machinery for the cost-minimizing families.
// ---------------------------------------------------------------------------

/// One affine branch of a scalar estimator: xhat = kappa z + alpha on (z_lo, z_hi).
#[derive(Debug, Clone, Copy)]
struct Branch {
    z_lo: f64,
    z_hi: f64,
    kappa: f64,
    alpha: f64,
}

fn branches(family: MapFamily, lam: f64) -> ([Branch; 3], usize) {
    let inf = f64::INFINITY;
    match family {
        MapFamily::Linear => (
            [
                Branch {
                    z_lo: -inf,
                    z_hi: inf,
                    kappa: 1.0 / (1.0 + lam),
                    alpha: 0.0,
                },
                Branch {
                    z_lo: 0.0,
                    z_hi: 0.0,
                    kappa: 0.0,
                    alpha: 0.0,
                },
                Branch {
                    z_lo: 0.0,
                    z_hi: 0.0,
                    kappa: 0.0,
                    alpha: 0.0,
                },
            ],
            1,
        ),
        MapFamily::Lasso => (
            [
                Branch {
                    z_lo: -inf,
                    z_hi: -lam,
                    kappa: 1.0,
                    alpha: lam,
                },
                Branch {
                    z_lo: -lam,
                    z_hi: lam,
                    kappa: 0.0,
                    alpha: 0.0,
                },
                Branch {
                    z_lo: lam,
                    z_hi: inf,
                    kappa: 1.0,
                    alpha: -lam,
                },
            ],
            3,
        ),
        MapFamily::ZeroNorm => {
            let t = (2.0 * lam).sqrt();
            (
                [
                    Branch {
                        z_lo: -inf,
                        z_hi: -t,
                        kappa: 1.0,
                        alpha: 0.0,
                    },
                    Branch {
                        z_lo: -t,
                        z_hi: t,
                        kappa: 0.0,
                        alpha: 0.0,
                    },
                    Branch {
                        z_lo: t,
                        z_hi: inf,
                        kappa: 1.0,
                        alpha: 0.0,
                    },
                ],
                3,
            )
        }
    }
}

/// E[(x - xhat(z))^2] for one prior component under channel noise mu,
/// exact via truncated normal moments.
///
/// With x ~ N(m, tau^2) and z = x + sqrt(mu) v, the pair (x, z) is jointly
/// Gaussian, so E[x|z] = m + c (z - m) with c = tau^2/(tau^2 + mu) and the
/// conditional variance tau^2 mu / (tau^2 + mu) is constant. On each affine
/// branch of the estimator the inner expectation is a quadratic in the
/// standardized z.
fn component_map_mse(c: &MixtureComponent, mu: f64, family: MapFamily, lam: f64) -> f64 {
    let nu2 = c.variance + mu;
    let nu = nu2.sqrt();
    let shrink = c.variance / nu2;
    let mut e = c.variance * mu / nu2;
    let (brs, n) = branches(family, lam);
    for br in &brs[..n] {
        if br.z_lo >= br.z_hi {
            continue;
        }
        let w_lo = (br.z_lo - c.mean) / nu;
        let w_hi = (br.z_hi - c.mean) / nu;
        let p = c.mean * (1.0 - br.kappa) - br.alpha;
        let q = (shrink - br.kappa) * nu;
        e += truncated_quadratic(p, q, w_lo, w_hi);
    }
    e
}

/// E over (x, s, v) of s^pow * |x - xhat|^2; pow = 1 inside the fixed-point
/// equations, pow = 0 for the user-facing MSE.
pub(crate) fn map_mse_expectation(
    prior: &Prior,
    scale: &ScaleDist,
    sigma_eff_sq: f64,
    gamma_p: f64,
    family: MapFamily,
    weighted: bool,
) -> f64 {
    let comps = prior.components();
    scale.expect(|s| {
        let mu = sigma_eff_sq / s;
        let lam = gamma_p / s;
        let e: f64 = comps
            .iter()
            .map(|c| c.weight * component_map_mse(c, mu, family, lam))
            .sum();
        if weighted {
            s * e
        } else {
            e
        }
    })
}

/// Joint probability P(|z| > threshold(s)) with the family's dead-zone edge.
pub(crate) fn tail_probability(
    prior: &Prior,
    scale: &ScaleDist,
    sigma_eff_sq: f64,
    gamma_p: f64,
    family: MapFamily,
) -> f64 {
    let comps = prior.components();
    scale.expect(|s| {
        let mu = sigma_eff_sq / s;
        let lam = gamma_p / s;
        let thr = match family {
            MapFamily::Linear => 0.0,
            MapFamily::Lasso => lam,
            MapFamily::ZeroNorm => (2.0 * lam).sqrt(),
        };
        comps
            .iter()
            .map(|c| c.weight * prob_abs_exceeds(c.mean, (c.variance + mu).sqrt(), thr))
            .sum()
    })
}

/// E[s sigma^2(z, gamma_p/s)]: the curvature term of the second equation.
fn sigma_var_expectation(
    prior: &Prior,
    scale: &ScaleDist,
    sigma_eff_sq: f64,
    gamma_p: f64,
    family: MapFamily,
) -> f64 {
    match family {
        // sigma^2 = lam/(1+lam) independent of z; s * lam/(1+lam) = s gp/(s+gp)
        MapFamily::Linear => scale.expect(|s| s * gamma_p / (s + gamma_p)),
        // s * lam * P(|z| > edge) summed over atoms equals gp * P(joint)
        MapFamily::Lasso | MapFamily::ZeroNorm => {
            gamma_p * tail_probability(prior, scale, sigma_eff_sq, gamma_p, family)
        }
    }
}

/// Right-hand sides of the two fixed-point equations at the given levels.
pub fn map_rhs(
    config: &ProblemConfig,
    levels: &NoiseLevels,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    quad.validate()?;
    let (family, gamma) = config.map_family("map_rhs")?;
    if !(levels.sigma_eff_sq > 0.0 && levels.gamma_p > 0.0) {
        return Err(Error::InvalidConfig(
            "map_rhs requires positive noise levels".into(),
        ));
    }
    let r1 = config.sigma0_sq
        + config.beta
            * map_mse_expectation(
                &config.prior,
                &config.scale,
                levels.sigma_eff_sq,
                levels.gamma_p,
                family,
                true,
            );
    let r2 = gamma
        + config.beta
            * sigma_var_expectation(
                &config.prior,
                &config.scale,
                levels.sigma_eff_sq,
                levels.gamma_p,
                family,
            );
    if !r1.is_finite() || !r2.is_finite() {
        return Err(Error::Quadrature(format!(
            "non-finite fixed-point right-hand side ({r1}, {r2})"
        )));
    }
    Ok((r1, r2))
}

// ---------------------------------------------------------------------------
// Damped successive substitution.
// ---------------------------------------------------------------------------

struct IterationOutcome {
    levels: NoiseLevels,
}

fn damped_iterate<F>(
    mut sigma2: f64,
    mut gp: f64,
    quad: &QuadratureSpec,
    rhs: F,
    diverge_scale: f64,
) -> Result<IterationOutcome>
where
    F: Fn(f64, f64) -> Result<(f64, f64)>,
{
    let d = quad.damping;
    let mut best = f64::INFINITY;
    for it in 0..quad.max_iter {
        let (r1, r2) = rhs(sigma2, gp)?;
        let res = ((sigma2 - r1).abs() / sigma2.abs()).max((gp - r2).abs() / gp.abs());
        best = best.min(res);
        if res < quad.tol {
            return Ok(IterationOutcome {
                levels: NoiseLevels {
                    sigma_eff_sq: sigma2,
                    gamma_p: gp,
                    converged: true,
                    iterations: it,
                    residual: res,
                },
            });
        }
        sigma2 = (1.0 - d) * sigma2 + d * r1;
        gp = (1.0 - d) * gp + d * r2;
        if !sigma2.is_finite() || !gp.is_finite() || sigma2 > diverge_scale || gp > diverge_scale {
            return Ok(IterationOutcome {
                levels: NoiseLevels {
                    sigma_eff_sq: sigma2,
                    gamma_p: gp,
                    converged: false,
                    iterations: it,
                    residual: best,
                },
            });
        }
    }
    Ok(IterationOutcome {
        levels: NoiseLevels {
            sigma_eff_sq: sigma2,
            gamma_p: gp,
            converged: false,
            iterations: quad.max_iter,
            residual: best,
        },
    })
}

fn default_init_grid(config: &ProblemConfig) -> Vec<f64> {
    let s0 = config.sigma0_sq;
    let top = s0 + config.beta * config.scale.mean() * config.prior.second_moment();
    vec![s0, 10.0 * s0, top.max(s0 * 1.5)]
}

fn collect_solutions(
    runs: Vec<NoiseLevels>,
    quad: &QuadratureSpec,
) -> Result<Vec<NoiseLevels>> {
    let mut solutions: Vec<NoiseLevels> = Vec::new();
    let mut best_fail = f64::INFINITY;
    let mut fail_iters = 0;
    for lv in runs {
        if lv.converged {
            let dup = solutions.iter().any(|s| {
                let ds = (s.sigma_eff_sq - lv.sigma_eff_sq).abs()
                    / s.sigma_eff_sq.max(lv.sigma_eff_sq);
                let dg = (s.gamma_p - lv.gamma_p).abs() / s.gamma_p.max(lv.gamma_p);
                ds < 1e-6 && dg < 1e-6
            });
            if !dup {
                solutions.push(lv);
            }
        } else {
            best_fail = best_fail.min(lv.residual);
            fail_iters = fail_iters.max(lv.iterations);
        }
    }
    if solutions.is_empty() {
        return Err(Error::NoConvergence {
            best_residual: best_fail,
            iterations: fail_iters.max(quad.max_iter),
        });
    }
    solutions.sort_by(|a, b| a.sigma_eff_sq.total_cmp(&b.sigma_eff_sq));
    Ok(solutions)
}

/// Solve the fixed-point equations for a linear, lasso, or zero-norm
/// estimator. Returns every distinct converged solution found from the
/// initialization grid, sorted by `sigma_eff_sq` ascending.
pub fn solve_map_fixed_point(
    config: &ProblemConfig,
    quad: &QuadratureSpec,
) -> Result<Vec<NoiseLevels>> {
    quad.validate()?;
    let (_, gamma) = config.map_family("solve_map_fixed_point")?;
    let inits = if quad.init_grid.is_empty() {
        default_init_grid(config)
    } else {
        quad.init_grid.clone()
    };
    let diverge = 1e30 * config.sigma0_sq.max(gamma).max(1.0);
    let mut runs = Vec::new();
    for &s2 in &inits {
        let outcome = damped_iterate(s2.max(f64::MIN_POSITIVE), gamma, quad, |s, g| {
            map_rhs(config, &NoiseLevels::point(s, g), quad)
        }, diverge)?;
        runs.push(outcome.levels);
    }
    collect_solutions(runs, quad)
}

// ---------------------------------------------------------------------------
// Posterior-mean (MMSE) fixed point.
// ---------------------------------------------------------------------------

/// One 1-D Gaussian expectation over the true observation law:
/// E_z[ f(z, s) ] with z = x + sqrt(mu) v, x from `prior`'s components.
fn expect_over_observation<F>(
    prior: &Prior,
    mu: f64,
    quad: &QuadratureSpec,
    f: F,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut total = 0.0;
    for c in prior.components() {
        if c.weight == 0.0 {
            continue;
        }
        let nu = (c.variance + mu).sqrt();
        let v = gauss_expect(
            |w| f(c.mean + nu * w),
            quad.n_hermite,
            quad.quad_rel_tol(),
            1e-300,
        )?;
        total += c.weight * v;
    }
    Ok(total)
}

/// Right-hand sides of the posterior-mean fixed-point equations, with the
/// observation z always drawn from the true law.
fn mmse_rhs(
    config: &ProblemConfig,
    post_prior: &Prior,
    post_noise_sq: f64,
    sigma_eff_sq: f64,
    sigma_p_eff_sq: f64,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for (ws, s) in config.scale.atoms() {
        let mu = sigma_eff_sq / s;
        let mu_p = sigma_p_eff_sq / s;
        e1 += ws
            * s
            * expect_over_observation(&config.prior, mu, quad, |z| {
                scalar_mmse_mse(&config.prior, post_prior, mu, mu_p, z)
            })?;
        e2 += ws
            * s
            * expect_over_observation(&config.prior, mu, quad, |z| {
                scalar_mmse_mse(post_prior, post_prior, mu_p, mu_p, z)
            })?;
    }
    Ok((
        config.sigma0_sq + config.beta * e1,
        post_noise_sq + config.beta * e2,
    ))
}

/// Solve the posterior-mean fixed point. In the matched case
/// (postulated prior and noise equal to the true ones) the two equations
/// coincide and a single-equation iteration enforces
/// `sigma_p_eff_sq == sigma_eff_sq` exactly.
pub fn solve_mmse_fixed_point(
    config: &ProblemConfig,
    postulated_noise_sq: f64,
    quad: &QuadratureSpec,
) -> Result<Vec<NoiseLevels>> {
    quad.validate()?;
    let post_prior = match &config.estimator {
        EstimatorSpec::Mmse { postulated_prior } => postulated_prior.clone(),
        other => {
            return Err(Error::UnsupportedEstimator {
                estimator: other.name(),
                operation: "solve_mmse_fixed_point",
            })
        }
    };
    if !(postulated_noise_sq > 0.0 && postulated_noise_sq.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "postulated noise must be positive, got {postulated_noise_sq}"
        )));
    }
    let matched = post_prior == config.prior && postulated_noise_sq == config.sigma0_sq;
    let inits = if quad.init_grid.is_empty() {
        default_init_grid(config)
    } else {
        quad.init_grid.clone()
    };
    let diverge = 1e30 * config.sigma0_sq.max(postulated_noise_sq).max(1.0);
    let mut runs = Vec::new();
    for &s2 in &inits {
        let outcome = if matched {
            // single unknown; keep the pair locked together
            let one = damped_iterate(s2.max(f64::MIN_POSITIVE), s2.max(f64::MIN_POSITIVE), quad, |s, _| {
                let mut e = 0.0;
                for (ws, sa) in config.scale.atoms() {
                    let mu = s / sa;
                    e += ws
                        * sa
                        * expect_over_observation(&config.prior, mu, quad, |z| {
                            scalar_mmse_mse(&config.prior, &config.prior, mu, mu, z)
                        })?;
                }
                let r = config.sigma0_sq + config.beta * e;
                Ok((r, r))
            }, diverge)?;
            let mut lv = one.levels;
            lv.gamma_p = lv.sigma_eff_sq;
            IterationOutcome { levels: lv }
        } else {
            damped_iterate(s2.max(f64::MIN_POSITIVE), postulated_noise_sq, quad, |s, g| {
                mmse_rhs(config, &post_prior, postulated_noise_sq, s, g, quad)
            }, diverge)?
        };
        runs.push(outcome.levels);
    }
    collect_solutions(runs, quad)
}

/// Unweighted predicted MSE of the posterior-mean estimator at the given
/// levels; shared with the metrics module.
pub(crate) fn mmse_predicted_mse(
    config: &ProblemConfig,
    post_prior: &Prior,
    levels: &NoiseLevels,
    quad: &QuadratureSpec,
    weighted: bool,
) -> Result<f64> {
    let mut total = 0.0;
    for (ws, s) in config.scale.atoms() {
        let mu = levels.sigma_eff_sq / s;
        let mu_p = levels.gamma_p / s;
        let e = expect_over_observation(&config.prior, mu, quad, |z| {
            scalar_mmse_mse(&config.prior, post_prior, mu, mu_p, z)
        })?;
        total += ws * if weighted { s } else { 1.0 } * e;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Regularization optimizer.
// ---------------------------------------------------------------------------

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Select the regularization gamma minimizing the predicted MSE for a lasso
/// or zero-norm estimator, via the alternating scheme: freeze sigma_eff^2,
/// minimize the weighted MSE over gamma_p subject to the tail constraint
/// beta * P(|z| > edge) < 1, update sigma_eff^2, repeat. The vector-level
/// gamma is recovered from the second fixed-point equation.
pub fn optimize_regularization(
    config: &ProblemConfig,
    quad: &QuadratureSpec,
) -> Result<(f64, NoiseLevels)> {
    quad.validate()?;
    let family = match config.estimator.family() {
        Some(f @ (MapFamily::Lasso | MapFamily::ZeroNorm)) => f,
        _ => {
            return Err(Error::UnsupportedEstimator {
                estimator: config.estimator.name(),
                operation: "optimize_regularization",
            })
        }
    };
    if !(config.beta > 0.0) {
        return Err(Error::InvalidConfig(
            "optimize_regularization requires beta > 0".into(),
        ));
    }
    let beta = config.beta;
    let power = config.scale.mean() * config.prior.second_moment();
    let ref_scale = config.sigma0_sq.max(power).max(f64::MIN_POSITIVE);
    let mut sigma2 = config.sigma0_sq + beta * power;
    let mut gp_opt = f64::NAN;
    let mut iterations = 0;

    for outer in 0..quad.max_iter {
        iterations = outer + 1;
        let feasible = |gp: f64| {
            beta * tail_probability(&config.prior, &config.scale, sigma2, gp, family) < 1.0
        };
        let mse_of = |gp: f64| {
            map_mse_expectation(&config.prior, &config.scale, sigma2, gp, family, true)
        };

        // lower edge of the feasible set (tail probability decreases in gamma_p)
        let mut lo = ref_scale * 1e-8;
        if !feasible(lo) {
            let mut hi = lo;
            let mut tries = 0;
            while !feasible(hi) {
                hi *= 4.0;
                tries += 1;
                if tries > 200 {
                    return Err(Error::NoFeasibleRegularization);
                }
            }
            let mut infeas = hi / 4.0;
            for _ in 0..200 {
                let mid = (infeas * hi).sqrt();
                if feasible(mid) {
                    hi = mid;
                } else {
                    infeas = mid;
                }
            }
            lo = hi;
        }

        // log-spaced scan, extended upward while the objective still improves
        let hi0 = ref_scale * 1e8;
        let n_grid = 96;
        let mut best_val = f64::INFINITY;
        let mut best_idx = 0;
        let mut grid = Vec::with_capacity(n_grid);
        for i in 0..n_grid {
            let t = i as f64 / (n_grid - 1) as f64;
            let gp = lo * (hi0 / lo).powf(t);
            let v = if feasible(gp) { mse_of(gp) } else { f64::INFINITY };
            if v < best_val {
                best_val = v;
                best_idx = i;
            }
            grid.push(gp);
        }
        if !best_val.is_finite() {
            return Err(Error::NoFeasibleRegularization);
        }
        let (gp_new, mse_new) = if best_idx + 1 == n_grid {
            // boundary optimum: the MSE keeps shrinking as gamma_p grows
            let mut gp = grid[n_grid - 1];
            let mut v = best_val;
            while gp < ref_scale * 1e16 {
                let cand = gp * 4.0;
                let vc = mse_of(cand);
                if vc < v && feasible(cand) {
                    gp = cand;
                    v = vc;
                } else {
                    break;
                }
            }
            (gp, v)
        } else {
            let a = grid[best_idx.saturating_sub(1)].max(lo);
            let b = grid[(best_idx + 1).min(n_grid - 1)];
            let (lx, lv) = golden_section_min(|lg| {
                let gp = lg.exp();
                if feasible(gp) { mse_of(gp) } else { f64::INFINITY }
            }, a.ln(), b.ln(), 90);
            (lx.exp(), lv)
        };
        gp_opt = gp_new;
        let sigma2_new = config.sigma0_sq + beta * mse_new;
        let done = (sigma2_new - sigma2).abs() <= quad.tol * sigma2;
        sigma2 = sigma2_new;
        if done {
            break;
        }
    }

    let tail = tail_probability(&config.prior, &config.scale, sigma2, gp_opt, family);
    let gamma = gp_opt * (1.0 - beta * tail);
    if !(gamma > 0.0) {
        return Err(Error::NoFeasibleRegularization);
    }

    // report the residual at the recovered gamma; polish if the alternating
    // scheme stopped slightly off the fixed point
    let cfg = ProblemConfig {
        estimator: config.estimator.with_gamma(gamma)?,
        ..config.clone()
    };
    let (r1, r2) = map_rhs(&cfg, &NoiseLevels::point(sigma2, gp_opt), quad)?;
    let res = ((sigma2 - r1).abs() / sigma2).max((gp_opt - r2).abs() / gp_opt);
    let levels = if res < quad.tol {
        NoiseLevels {
            sigma_eff_sq: sigma2,
            gamma_p: gp_opt,
            converged: true,
            iterations,
            residual: res,
        }
    } else {
        let diverge = 1e30 * ref_scale;
        let polished = damped_iterate(sigma2, gp_opt, quad, |s, g| {
            map_rhs(&cfg, &NoiseLevels::point(s, g), quad)
        }, diverge)?;
        polished.levels
    };
    Ok((gamma, levels))
}

/// Multiuser efficiency eta = sigma0^2 / sigma_eff^2, in (0, 1] whenever the
/// interference term is nonnegative.
pub fn multiuser_efficiency(levels: &NoiseLevels, sigma0_sq: f64) -> f64 {
    sigma0_sq / levels.sigma_eff_sq
}
