//! Single-stage subcommands. Each returns whether its checks passed.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use saddleflow::baselines::{lasso_homotopy, omp as omp_solve};
use saddleflow::dataset::read_vector_csv;
use saddleflow::flow::{build_hybrid_path, simulate as simulate_flow, HybridConfig, SimConfig};
use saddleflow::generate::{write_generated, GeneratorSpec, GENERATOR};
use saddleflow::saddle_path::default_grid;
use saddleflow::verify::{convergence_sweep, rip_experiment, termination_audit, SweepConfig};
use saddleflow::{run, verify_key_equation, Dataset, PathConfig, SaddlePath};
use serde_json::json;

use crate::output::{emit, hybrid_csv, path_csv, to_json, trajectory_csv};
use crate::{DataArgs, UsageError};

/// Relative slack when checking that sweep distances shrink with α.
pub const MONOTONE_SLACK: f64 = 1e-9;

pub fn load(data: &DataArgs) -> Result<Dataset> {
    Dataset::from_csv(&data.x, &data.y, data.header)
        .with_context(|| format!("loading {} and {}", data.x.display(), data.y.display()))
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(v) if !(v.is_finite() && v > 0.0) => Err(UsageError(format!("{name} must be positive, got {v}")).into()),
        _ => Ok(v),
    }
}

fn path_config(tol: Option<f64>) -> Result<PathConfig> {
    let mut cfg = PathConfig::default();
    if let Some(t) = positive("--tol", tol)? {
        cfg.tol_kkt = t;
    }
    Ok(cfg)
}

/// Horizon covering every jump of `path` with a margin.
pub fn default_t_end(path: &SaddlePath) -> f64 {
    let last = path.times.last().copied().unwrap_or(0.0);
    if last > 0.0 {
        1.25 * last
    } else {
        1.0
    }
}

pub fn path(data: &DataArgs, tol: Option<f64>, json_out: Option<&Path>, csv_out: Option<&Path>) -> Result<bool> {
    let cfg = path_config(tol)?;
    let data = load(data)?;
    let path = run(&data, &cfg)?;
    let doc = json!({ "p": path.loops(), "path": path, "config": cfg });
    emit(&to_json(&doc)?, json_out)?;
    if let Some(out) = csv_out {
        emit(&path_csv(&path), Some(out))?;
    }
    Ok(true)
}

pub fn simulate(
    data: &DataArgs,
    log10_alpha: f64,
    t_end: Option<f64>,
    tol: Option<f64>,
    csv_out: Option<&Path>,
    json_out: Option<&Path>,
) -> Result<bool> {
    if !(log10_alpha.is_finite() && log10_alpha < 0.0) {
        return Err(UsageError(format!("--log10-alpha must be negative, got {log10_alpha}")).into());
    }
    let t_end = positive("--t-end", t_end)?;
    let mut cfg = SimConfig::default();
    if let Some(t) = positive("--tol", tol)? {
        cfg.rel_tol = t;
        cfg.abs_tol = 0.1 * t;
    }
    let data = load(data)?;
    let t_end = match t_end {
        Some(t) => t,
        None => default_t_end(&run(&data, &PathConfig::default())?),
    };
    let traj = simulate_flow(&data, log10_alpha * std::f64::consts::LN_10, t_end, cfg)?;
    emit(&trajectory_csv(&traj), csv_out)?;
    if let Some(out) = json_out {
        let summary = json!({
            "log10_alpha": log10_alpha,
            "t_end": t_end,
            "samples": traj.len(),
            "saturated": traj.saturated,
            "duality_residual": traj.duality_residual(),
            "final_beta": traj.beta.last().map(|b| b.as_slice().to_vec()),
            "final_loss": traj.loss.last(),
        });
        emit(&to_json(&summary)?, Some(out))?;
    }
    Ok(!traj.saturated)
}

pub fn hybrid(data: &DataArgs, tol: Option<f64>, csv_out: Option<&Path>, json_out: Option<&Path>) -> Result<bool> {
    let mut cfg = HybridConfig::default();
    if let Some(t) = positive("--tol", tol)? {
        cfg.match_tol = t;
    }
    let data = load(data)?;
    let path = run(&data, &PathConfig::default())?;
    let hybrid = build_hybrid_path(&data, &path, &cfg)?;
    emit(&hybrid_csv(&hybrid, data.d()), csv_out)?;
    if let Some(out) = json_out {
        let doc = json!({ "total_length": hybrid.total_length(), "hybrid": hybrid });
        emit(&to_json(&doc)?, Some(out))?;
    }
    Ok(true)
}

pub fn lasso(data: &DataArgs, lambda_min: f64, json_out: Option<&Path>) -> Result<bool> {
    if lambda_min.is_nan() || lambda_min < 0.0 {
        return Err(UsageError(format!("--lambda-min must be nonnegative, got {lambda_min}")).into());
    }
    let data = load(data)?;
    let path = lasso_homotopy(&data, lambda_min)?;
    let doc = json!({ "endpoint": path.endpoint().as_slice(), "path": path });
    emit(&to_json(&doc)?, json_out)?;
    Ok(true)
}

pub fn omp(data: &DataArgs, k: usize, json_out: Option<&Path>) -> Result<bool> {
    if k == 0 {
        return Err(UsageError("--k must be positive".into()).into());
    }
    let data = load(data)?;
    let beta = omp_solve(&data, k)?;
    let doc = json!({
        "k": k,
        "beta": beta.as_slice(),
        "loss": data.loss(&beta)?,
        "l1": beta.lp_norm(1),
    });
    emit(&to_json(&doc)?, json_out)?;
    Ok(true)
}

pub struct VerifyOptions {
    pub beta_star: Option<std::path::PathBuf>,
    pub sweep: Vec<f64>,
    pub t_end: Option<f64>,
    pub tol: f64,
}

pub fn verify(data_args: &DataArgs, opts: &VerifyOptions, json_out: Option<&Path>, csv_out: Option<&Path>) -> Result<bool> {
    positive("--tol", Some(opts.tol))?;
    let t_end = positive("--t-end", opts.t_end)?;
    if let Some(bad) = opts.sweep.iter().find(|e| !(e.is_finite() && **e < 0.0)) {
        return Err(UsageError(format!("sweep values must be negative log10 alphas, got {bad}")).into());
    }
    let data = load(data_args)?;
    let path = run(&data, &PathConfig::default())?;
    let key = verify_key_equation(&path, &data, &default_grid(&path, 1000), opts.tol);
    let audit = termination_audit(&path, &data)?;
    let mut pass = key.passed() && audit.pass();

    let rip = match &opts.beta_star {
        Some(file) => {
            let beta_star = read_vector_csv(file, data_args.header)?;
            let report = rip_experiment(&data, &beta_star, None)?;
            pass &= report.pass != Some(false);
            Some(report)
        }
        None => None,
    };
    let sweep = if opts.sweep.is_empty() {
        None
    } else {
        let hybrid = build_hybrid_path(&data, &path, &HybridConfig::default())?;
        let t_end = t_end.unwrap_or_else(|| default_t_end(&path));
        let table = convergence_sweep(&data, &path, &hybrid, &opts.sweep, t_end, &SweepConfig::default())?;
        pass &= table.monotone(MONOTONE_SLACK);
        if let Some(out) = csv_out {
            emit(&table.to_csv(), Some(out))?;
        }
        Some(table)
    };
    let doc = json!({
        "p": path.loops(),
        "times": path.times,
        "key_equation": key,
        "termination": audit,
        "rip": rip,
        "sweep": sweep,
        "sweep_monotone": sweep.as_ref().map(|t| t.monotone(MONOTONE_SLACK)),
        "pass": pass,
    });
    emit(&to_json(&doc)?, json_out)?;
    Ok(pass)
}

pub fn generate(spec_file: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<bool> {
    let spec = match (spec_file, seed) {
        (Some(file), _) => {
            let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            serde_json::from_str::<GeneratorSpec>(&text)
                .map_err(|e| UsageError(format!("invalid generator spec {}: {e}", file.display())))?
        }
        (None, Some(seed)) => GeneratorSpec::figure_one(seed),
        (None, None) => return Err(UsageError("either --spec or --seed is required".into()).into()),
    };
    let (data, files) = write_generated(&spec, out)?;
    eprintln!(
        "wrote {} ({}x{}), {} and {} using {GENERATOR}",
        files.x.display(),
        data.n(),
        data.d(),
        files.y.display(),
        files.spec.display()
    );
    Ok(true)
}
