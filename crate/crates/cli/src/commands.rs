//! The predict / simulate / compare commands.

use crate::config::{
    build_trial_config, resolve_point, ExperimentDef, ExperimentFile, GammaMode, ResolvedPoint,
};
use crate::csvio::{fmt, CsvTable, ParsedCsv};
use crate::CliError;
use rayon::prelude::*;
use replica_cs::{
    optimize_regularization, optimize_thresholds, predicted_mse_weighted, prediction,
    run_experiment, solve_map_fixed_point, solve_mmse_fixed_point, EstimatorSpec, NoiseLevels,
    ProblemConfig, QuadratureSpec, SolverStatus,
};
use std::path::Path;

const PREDICT_HEADER: [&str; 10] = [
    "sweep_value",
    "sigma_eff_sq",
    "gamma_p",
    "mse",
    "se_db",
    "eta",
    "p_misdetect",
    "n_solutions",
    "residual",
    "iterations",
];

const SUMMARY_HEADER: [&str; 6] = [
    "sweep_value",
    "median_se_db",
    "ci_low_db",
    "ci_high_db",
    "mean_misdetect",
    "non_converged_count",
];

struct PointSolution {
    /// Configuration with the final regularization in place.
    config: ProblemConfig,
    gamma: f64,
    levels: NoiseLevels,
    n_solutions: usize,
}

fn solve_point(
    exp_name: &str,
    point: &ResolvedPoint,
    quad: &QuadratureSpec,
) -> Result<PointSolution, CliError> {
    let cfg = &point.config;
    let solver_err = |e: replica_cs::Error| {
        CliError::solver(format!(
            "experiment `{exp_name}` sweep {}: {e}",
            point.sweep_value
        ))
    };
    match (&cfg.estimator, point.gamma_mode) {
        (EstimatorSpec::Mmse { .. }, _) => {
            let sols = solve_mmse_fixed_point(cfg, cfg.sigma0_sq, quad).map_err(solver_err)?;
            warn_multiple(exp_name, point.sweep_value, sols.len());
            Ok(PointSolution {
                config: cfg.clone(),
                gamma: f64::NAN,
                levels: sols[0],
                n_solutions: sols.len(),
            })
        }
        (_, GammaMode::Optimal) => {
            let (gamma, levels) = optimize_regularization(cfg, quad).map_err(solver_err)?;
            let config = ProblemConfig {
                estimator: cfg.estimator.with_gamma(gamma).map_err(solver_err)?,
                ..cfg.clone()
            };
            Ok(PointSolution {
                config,
                gamma,
                levels,
                n_solutions: 1,
            })
        }
        _ => {
            let gamma = cfg.estimator.gamma().expect("map estimator");
            let sols = solve_map_fixed_point(cfg, quad).map_err(solver_err)?;
            warn_multiple(exp_name, point.sweep_value, sols.len());
            Ok(PointSolution {
                config: cfg.clone(),
                gamma,
                levels: sols[0],
                n_solutions: sols.len(),
            })
        }
    }
}

fn warn_multiple(exp_name: &str, sweep_value: f64, n: usize) {
    if n > 1 {
        eprintln!(
            "warning: experiment `{exp_name}` sweep {sweep_value}: {n} fixed-point solutions; \
             using the smallest sigma_eff^2"
        );
    }
}

fn prediction_row(
    exp_name: &str,
    point: &ResolvedPoint,
    quad: &QuadratureSpec,
) -> Result<Vec<String>, CliError> {
    let sol = solve_point(exp_name, point, quad)?;
    let err = |e: replica_cs::Error| {
        CliError::solver(format!("experiment `{exp_name}` sweep {}: {e}", point.sweep_value))
    };
    let pred = prediction(&sol.config, &sol.levels, quad, point.support).map_err(err)?;
    let (mse, se_db) = if point.weighted {
        // physical squared error when the scale factors carry signal power
        let w = predicted_mse_weighted(&sol.config, &sol.levels, quad).map_err(err)?;
        let power = sol.config.scale.mean() * sol.config.prior.second_moment();
        (w, 10.0 * (w / power).log10())
    } else {
        (pred.mse, pred.normalized_se_db)
    };
    Ok(vec![
        fmt(point.sweep_value),
        fmt(sol.levels.sigma_eff_sq),
        fmt(sol.levels.gamma_p),
        fmt(mse),
        fmt(se_db),
        fmt(pred.eta),
        fmt(pred.p_misdetect.unwrap_or(f64::NAN)),
        sol.n_solutions.to_string(),
        fmt(sol.levels.residual),
        sol.levels.iterations.to_string(),
    ])
}

fn failed_row(sweep_value: f64) -> Vec<String> {
    vec![
        fmt(sweep_value),
        fmt(f64::NAN),
        fmt(f64::NAN),
        fmt(f64::NAN),
        fmt(f64::NAN),
        fmt(f64::NAN),
        fmt(f64::NAN),
        "0".to_string(),
        fmt(f64::NAN),
        "0".to_string(),
    ]
}

fn output_path(exp: &ExperimentDef, metric: &str, out_dir: &Path, default: &str) -> Option<std::path::PathBuf> {
    for out in &exp.outputs {
        if out.metric == metric {
            return Some(out_dir.join(&out.path));
        }
    }
    match metric {
        "prediction" | "summary" => Some(out_dir.join(default)),
        _ => None, // trials and cdf dumps are opt-in
    }
}

/// Solve every sweep point of every experiment and write one prediction CSV
/// per experiment. Rows for failed solves carry NaN fields; any failure
/// makes the command exit with the solver status code after all files are
/// written.
pub fn predict_command(file: &ExperimentFile, out_dir: &Path) -> Result<(), CliError> {
    let quad = QuadratureSpec::default();
    let mut first_failure: Option<CliError> = None;
    for exp in &file.experiments {
        let points: Vec<ResolvedPoint> = exp
            .sweep
            .values
            .iter()
            .map(|&v| resolve_point(exp, v))
            .collect::<Result<_, _>>()?;
        let results: Vec<(f64, Result<Vec<String>, CliError>)> = points
            .par_iter()
            .map(|p| (p.sweep_value, prediction_row(&exp.name, p, &quad)))
            .collect();
        let mut table = CsvTable::new(&PREDICT_HEADER);
        for (sweep_value, res) in results {
            match res {
                Ok(row) => table.push(row),
                Err(e) => {
                    eprintln!("error: {e}");
                    table.push(failed_row(sweep_value));
                    if first_failure.is_none() {
                        first_failure = Some(e);
                    }
                }
            }
        }
        let path = output_path(exp, "prediction", out_dir, &format!("{}_predict.csv", exp.name))
            .expect("prediction path");
        table.write_atomic(&path)?;
        println!("wrote {}", path.display());
    }
    match first_failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Run the Monte Carlo section of every experiment that has one and write
/// summary (plus optional per-trial and CDF) CSVs.
pub fn simulate_command(
    file: &ExperimentFile,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let quad = QuadratureSpec::default();
    let mut simulated_any = false;
    let mut first_failure: Option<CliError> = None;
    for exp in &file.experiments {
        if exp.montecarlo.is_none() {
            continue;
        }
        simulated_any = true;
        let mut summary = CsvTable::new(&SUMMARY_HEADER);
        let mut trials = CsvTable::new(&["sweep_value", "trial_index", "seed", "se_db", "misdetect", "status"]);
        let mut cdf = CsvTable::new(&["sweep_value", "se_db", "cdf"]);
        for &v in &exp.montecarlo_values() {
            let point = resolve_point(exp, v)?;
            let row = simulate_point(exp, &point, &quad, seed_override, &mut trials, &mut cdf);
            match row {
                Ok(r) => summary.push(r),
                Err(e) => {
                    eprintln!("error: {e}");
                    summary.push(vec![
                        fmt(v),
                        fmt(f64::NAN),
                        fmt(f64::NAN),
                        fmt(f64::NAN),
                        fmt(f64::NAN),
                        "0".to_string(),
                    ]);
                    if first_failure.is_none() {
                        first_failure = Some(e);
                    }
                }
            }
        }
        let path = output_path(exp, "summary", out_dir, &format!("{}_sim.csv", exp.name))
            .expect("summary path");
        summary.write_atomic(&path)?;
        println!("wrote {}", path.display());
        if let Some(p) = output_path(exp, "trials", out_dir, "") {
            trials.write_atomic(&p)?;
            println!("wrote {}", p.display());
        }
        if let Some(p) = output_path(exp, "cdf", out_dir, "") {
            cdf.write_atomic(&p)?;
            println!("wrote {}", p.display());
        }
    }
    if !simulated_any {
        return Err(CliError::config(
            "no experiment in the file has a montecarlo section".into(),
        ));
    }
    match first_failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn simulate_point(
    exp: &ExperimentDef,
    point: &ResolvedPoint,
    quad: &QuadratureSpec,
    seed_override: Option<u64>,
    trials_table: &mut CsvTable,
    cdf_table: &mut CsvTable,
) -> Result<Vec<String>, CliError> {
    let sol = solve_point(&exp.name, point, quad)?;
    let err = |e: replica_cs::Error| {
        CliError::solver(format!("experiment `{}` sweep {}: {e}", exp.name, point.sweep_value))
    };
    let support_rule = if exp.support_recovery {
        Some(
            optimize_thresholds(&sol.config, &sol.levels, quad)
                .map_err(err)?
                .0,
        )
    } else {
        None
    };
    let tc = build_trial_config(exp, point, sol.gamma, seed_override, support_rule)?;
    let out = run_experiment(&tc).map_err(err)?;

    for t in &out.trials {
        trials_table.push(vec![
            fmt(point.sweep_value),
            t.trial_index.to_string(),
            t.seed.to_string(),
            fmt(t.se_db.unwrap_or(f64::NAN)),
            fmt(t.misdetect_rate.unwrap_or(f64::NAN)),
            match t.status {
                SolverStatus::Converged => "converged".to_string(),
                SolverStatus::MaxIter => "max_iter".to_string(),
            },
        ]);
    }
    for (g, c) in out.summary.se_cdf.grid_db.iter().zip(out.summary.se_cdf.cdf.iter()) {
        cdf_table.push(vec![fmt(point.sweep_value), fmt(*g), fmt(*c)]);
    }
    Ok(vec![
        fmt(point.sweep_value),
        fmt(out.summary.median_se_db),
        fmt(out.summary.median_ci_db.0),
        fmt(out.summary.median_ci_db.1),
        fmt(out.summary.mean_misdetect.unwrap_or(f64::NAN)),
        out.summary.max_iter_trials.to_string(),
    ])
}

/// Join a prediction CSV and a simulation CSV on the sweep value and report
/// the per-point gap in dB, plus a machine-readable JSON summary.
pub fn compare_command(
    predict_path: &Path,
    simulate_path: &Path,
    tolerance_db: Option<f64>,
    json_out: Option<&Path>,
) -> Result<(), CliError> {
    let pred = ParsedCsv::read(predict_path)?;
    let sim = ParsedCsv::read(simulate_path)?;
    let p_sweep = pred.column("sweep_value")?;
    let p_se = pred.column("se_db")?;
    let s_sweep = sim.column("sweep_value")?;
    let s_se = sim.column("median_se_db")?;

    let mut pred_pts: Vec<(f64, f64)> = Vec::new();
    for row in &pred.rows {
        pred_pts.push((pred.value(row, p_sweep)?, pred.value(row, p_se)?));
    }
    let mut sim_pts: Vec<(f64, f64)> = Vec::new();
    for row in &sim.rows {
        sim_pts.push((sim.value(row, s_sweep)?, sim.value(row, s_se)?));
    }

    let mut unmatched: Vec<String> = Vec::new();
    for &(v, _) in &pred_pts {
        if !sim_pts.iter().any(|&(w, _)| w == v) {
            unmatched.push(format!("prediction-only point {v}"));
        }
    }
    for &(v, _) in &sim_pts {
        if !pred_pts.iter().any(|&(w, _)| w == v) {
            unmatched.push(format!("simulation-only point {v}"));
        }
    }
    if !unmatched.is_empty() {
        return Err(CliError::config(format!(
            "sweep grids do not match: {}",
            unmatched.join("; ")
        )));
    }

    let mut joined: Vec<(f64, f64, f64, f64)> = pred_pts
        .iter()
        .map(|&(v, p)| {
            let s = sim_pts.iter().find(|&&(w, _)| w == v).expect("matched").1;
            (v, p, s, (s - p).abs())
        })
        .collect();
    joined.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut max_gap = 0.0f64;
    let mut failures: Vec<(f64, f64)> = Vec::new();
    println!("sweep_value  predicted_db  simulated_db  gap_db  status");
    for &(v, p, s, gap) in &joined {
        max_gap = if gap.is_nan() { f64::NAN } else { max_gap.max(gap) };
        let fail = match tolerance_db {
            Some(tol) => !(gap <= tol),
            None => false,
        };
        if fail {
            failures.push((v, gap));
        }
        println!(
            "{v:>11} {p:>13.4} {s:>13.4} {gap:>7.4}  {}",
            if fail { "FAIL" } else { "ok" }
        );
    }

    let json = serde_json::json!({
        "max_gap_db": max_gap,
        "points": joined.len(),
        "tolerance_db": tolerance_db,
        "failures": failures
            .iter()
            .map(|&(v, g)| serde_json::json!({"sweep_value": v, "gap_db": g}))
            .collect::<Vec<_>>(),
    });
    let rendered = serde_json::to_string_pretty(&json).expect("json");
    println!("{rendered}");
    if let Some(path) = json_out {
        crate::csvio::write_atomic(path, &rendered)?;
    }
    if !failures.is_empty() {
        return Err(CliError::comparison(format!(
            "{} of {} points exceed tolerance",
            failures.len(),
            joined.len()
        )));
    }
    Ok(())
}
