//! `run-all`: path → key equation → baselines → optional sweep → hybrid
//! path → Hausdorff table, collected into one JSON bundle.
//!
//! Stage errors are recorded rather than propagated, so a partial bundle is
//! always written once the config itself is valid.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use saddleflow::baselines::{lasso_homotopy, omp};
use saddleflow::flow::{build_hybrid_path, HybridConfig, HybridPath, SimConfig};
use saddleflow::generate::{write_generated, GeneratorSpec, GENERATOR};
use saddleflow::saddle_path::{default_grid, KeyEquationReport};
use saddleflow::verify::{convergence_sweep, termination_audit, SweepConfig, SweepTable, TerminationAudit};
use saddleflow::{run, verify_key_equation, Dataset, PathConfig, SaddlePath};
use serde::{Deserialize, Serialize};

use crate::commands::{default_t_end, MONOTONE_SLACK};
use crate::output::{emit, hausdorff_csv, hybrid_csv, path_csv, to_json};
use crate::UsageError;

/// Bumped whenever a bundle field changes meaning or disappears.
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    /// CSV files; relative paths are resolved against the config's directory.
    Csv {
        x: PathBuf,
        y: PathBuf,
        #[serde(default)]
        header: bool,
    },
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tol_grad: f64,
    pub tol_kkt: f64,
    pub tie_tol: f64,
    pub key_equation: f64,
    pub grid_points: usize,
    pub sim_rel: f64,
    pub sim_abs: f64,
    pub orbit_match: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let path = PathConfig::default();
        let sim = SimConfig::default();
        Self {
            tol_grad: path.tol_grad,
            tol_kkt: path.tol_kkt,
            tie_tol: path.tie_tol,
            key_equation: 1e-8,
            grid_points: 1000,
            sim_rel: sim.rel_tol,
            sim_abs: sim.abs_tol,
            orbit_match: HybridConfig::default().match_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Directory for the bundle and CSV artifacts.
    pub dir: Option<PathBuf>,
    pub bundle: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { dir: None, bundle: "bundle.json".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<DatasetSource>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// `log10 α` values to simulate; empty skips the sweep.
    #[serde(default)]
    pub log10_alphas: Vec<f64>,
    /// Sweep horizon in accelerated time (default: 1.25 × last jump time).
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub output: Outputs,
}

#[derive(Debug, Serialize)]
struct DatasetInfo {
    n: usize,
    d: usize,
    source: &'static str,
}

#[derive(Debug, Serialize)]
struct Baselines {
    lasso_endpoint: Vec<f64>,
    lasso_knots: usize,
    /// `∞`-distance between the final saddle and the Lasso endpoint.
    lasso_distance: f64,
    omp_k: usize,
    omp_beta: Vec<f64>,
    omp_distance: f64,
    path_l1: f64,
    omp_l1: f64,
}

#[derive(Debug, Serialize)]
struct HybridSummary {
    segments: usize,
    orbits: usize,
    total_length: f64,
}

#[derive(Debug, Serialize)]
struct HausdorffRow {
    log10_alpha: f64,
    hausdorff: f64,
}

#[derive(Debug, Serialize)]
struct Assertion {
    name: &'static str,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct StageError {
    stage: &'static str,
    message: String,
}

/// Every field is always present (`null` when a stage did not run).
#[derive(Debug, Serialize)]
struct Bundle {
    schema_version: u32,
    generator: &'static str,
    config: ExperimentConfig,
    dataset: Option<DatasetInfo>,
    p: Option<usize>,
    path: Option<SaddlePath>,
    key_equation: Option<KeyEquationReport>,
    baselines: Option<Baselines>,
    audit: Option<TerminationAudit>,
    sweep: Option<SweepTable>,
    hybrid: Option<HybridSummary>,
    hausdorff: Vec<HausdorffRow>,
    assertions: Vec<Assertion>,
    errors: Vec<StageError>,
    artifacts: Vec<String>,
    pass: bool,
}

impl Bundle {
    fn fail(&mut self, stage: &'static str, err: impl std::fmt::Display) {
        log::error!("{stage}: {err}");
        self.errors.push(StageError { stage, message: err.to_string() });
    }

    fn assert(&mut self, name: &'static str, pass: bool) {
        self.assertions.push(Assertion { name, pass });
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_config(file: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    if text.trim().is_empty() {
        return Err(usage(format!("{} is empty", file.display())));
    }
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", file.display())))?;
    if cfg.dataset.is_none() {
        return Err(usage("config has no dataset"));
    }
    let t = &cfg.tolerances;
    let tols = [t.tol_grad, t.tol_kkt, t.tie_tol, t.key_equation, t.sim_rel, t.sim_abs, t.orbit_match];
    if tols.iter().any(|v| !(v.is_finite() && *v > 0.0)) || t.grid_points < 2 {
        return Err(usage("tolerances must be positive and grid_points at least 2"));
    }
    if let Some(bad) = cfg.log10_alphas.iter().find(|e| !(e.is_finite() && **e < 0.0)) {
        return Err(usage(format!("log10_alphas must be negative, got {bad}")));
    }
    if cfg.t_end.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
        return Err(usage("t_end must be positive"));
    }
    Ok(cfg)
}

fn load_dataset(source: &DatasetSource, base: &Path, dir: &Path, bundle: &mut Bundle) -> Result<Dataset> {
    match source {
        DatasetSource::Csv { x, y, header } => Ok(Dataset::from_csv(&base.join(x), &base.join(y), *header)?),
        DatasetSource::Generator(spec) => {
            let (data, _) = write_generated(spec, dir)?;
            bundle.artifacts.extend(["X.csv", "y.csv", "spec.json"].map(String::from));
            Ok(data)
        }
    }
}

fn baselines(data: &Dataset, path: &SaddlePath) -> Result<Baselines> {
    let beta = path.final_saddle();
    let lasso = lasso_homotopy(data, 0.0)?;
    let support = beta.iter().filter(|v| **v != 0.0).count();
    let k = support.clamp(1, data.n().min(data.d()));
    let greedy = omp(data, k)?;
    Ok(Baselines {
        lasso_endpoint: lasso.endpoint().as_slice().to_vec(),
        lasso_knots: lasso.knots.len(),
        lasso_distance: (lasso.endpoint() - beta).amax(),
        omp_k: k,
        omp_beta: greedy.as_slice().to_vec(),
        omp_distance: (&greedy - beta).amax(),
        path_l1: beta.lp_norm(1),
        omp_l1: greedy.lp_norm(1),
    })
}

/// Runs the pipeline and writes the bundle; `Ok(false)` when any hard
/// assertion fails or a stage errors.
pub fn run_all(config_file: &Path, out_override: Option<&Path>) -> Result<bool> {
    let cfg = parse_config(config_file)?;
    let dir = match (out_override, &cfg.output.dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => return Err(usage("no output directory: set output.dir or pass --out")),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let base = config_file.parent().map(Path::to_path_buf).unwrap_or_default();
    let t = cfg.tolerances.clone();

    let mut bundle = Bundle {
        schema_version: SCHEMA_VERSION,
        generator: GENERATOR,
        config: cfg.clone(),
        dataset: None,
        p: None,
        path: None,
        key_equation: None,
        baselines: None,
        audit: None,
        sweep: None,
        hybrid: None,
        hausdorff: Vec::new(),
        assertions: Vec::new(),
        errors: Vec::new(),
        artifacts: Vec::new(),
        pass: false,
    };
    let source = cfg.dataset.as_ref().expect("checked by parse_config");
    let write_csv = |bundle: &mut Bundle, name: &str, text: String| match emit(&text, Some(&dir.join(name))) {
        Ok(()) => bundle.artifacts.push(name.to_string()),
        Err(e) => bundle.fail("output", format!("{e:#}")),
    };

    let data = match load_dataset(source, &base, &dir, &mut bundle) {
        Ok(data) => Some(data),
        Err(e) => {
            bundle.fail("dataset", format!("{e:#}"));
            None
        }
    };
    let path_cfg = PathConfig { tol_grad: t.tol_grad, tol_kkt: t.tol_kkt, tie_tol: t.tie_tol, max_loops: None };
    let path = data.as_ref().and_then(|data| {
        bundle.dataset = Some(DatasetInfo {
            n: data.n(),
            d: data.d(),
            source: match source {
                DatasetSource::Csv { .. } => "csv",
                DatasetSource::Generator(_) => "generator",
            },
        });
        run(data, &path_cfg).map_err(|e| bundle.fail("path", e)).ok()
    });

    if let (Some(data), Some(path)) = (&data, &path) {
        bundle.p = Some(path.loops());
        write_csv(&mut bundle, "path.csv", path_csv(path));

        let key = verify_key_equation(path, data, &default_grid(path, t.grid_points), t.key_equation);
        bundle.assert("key_equation", key.passed());
        bundle.key_equation = Some(key);

        // the baselines and the orbit integration are independent
        let hybrid_cfg = HybridConfig { match_tol: t.orbit_match, ..HybridConfig::default() };
        let (base_res, audit_res, hybrid_res) = std::thread::scope(|s| {
            let hybrid = s.spawn(|| build_hybrid_path(data, path, &hybrid_cfg));
            let base = baselines(data, path);
            let audit = termination_audit(path, data);
            (base, audit, hybrid.join().expect("hybrid stage panicked"))
        });
        match base_res {
            Ok(b) => bundle.baselines = Some(b),
            Err(e) => bundle.fail("baselines", format!("{e:#}")),
        }
        match audit_res {
            Ok(a) => {
                bundle.assert("termination_audit", a.pass());
                bundle.audit = Some(a);
            }
            Err(e) => bundle.fail("audit", e),
        }
        let hybrid: Option<HybridPath> = hybrid_res.map_err(|e| bundle.fail("hybrid", e)).ok();

        if !cfg.log10_alphas.is_empty() {
            match &hybrid {
                Some(h) => {
                    let sweep_cfg = SweepConfig {
                        sim: SimConfig { rel_tol: t.sim_rel, abs_tol: t.sim_abs, ..SimConfig::default() },
                        ..SweepConfig::default()
                    };
                    let t_end = cfg.t_end.unwrap_or_else(|| default_t_end(path));
                    match convergence_sweep(data, path, h, &cfg.log10_alphas, t_end, &sweep_cfg) {
                        Ok(table) => {
                            bundle.assert("sweep_monotone", table.monotone(MONOTONE_SLACK));
                            write_csv(&mut bundle, "sweep.csv", table.to_csv());
                            bundle.sweep = Some(table);
                        }
                        Err(e) => bundle.fail("sweep", e),
                    }
                }
                None => bundle.fail("sweep", "skipped: no hybrid path to compare against"),
            }
        }

        if let Some(h) = &hybrid {
            write_csv(&mut bundle, "hybrid.csv", hybrid_csv(h, data.d()));
            bundle.hybrid =
                Some(HybridSummary { segments: h.segments.len(), orbits: h.orbits().count(), total_length: h.total_length() });
        }
        if let Some(table) = &bundle.sweep {
            let rows: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.log10_alpha, r.hausdorff)).collect();
            bundle.hausdorff = rows.iter().map(|&(log10_alpha, hausdorff)| HausdorffRow { log10_alpha, hausdorff }).collect();
            write_csv(&mut bundle, "hausdorff.csv", hausdorff_csv(&rows));
        }
        bundle.path = Some(path.clone());
    }

    bundle.pass = bundle.errors.is_empty() && bundle.assertions.iter().all(|a| a.pass);
    let name = cfg.output.bundle.clone();
    bundle.artifacts.push(name.clone());
    emit(&to_json(&bundle)?, Some(&dir.join(&name)))?;
    eprintln!("bundle written to {}", dir.join(&name).display());
    Ok(bundle.pass)
}
