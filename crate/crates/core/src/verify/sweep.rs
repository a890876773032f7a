use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{csv_float, Dataset};
use crate::error::Result;
use crate::flow::{hausdorff_distance, log_alpha_threshold, potential, simulate, FlowTrajectory, HybridPath, SimConfig};
use crate::saddle_path::SaddlePath;

/// `sup ‖β_t − target‖∞` over `t ∈ [lo, hi]`, using every stored sample in
/// the window plus the interpolated endpoints.
pub fn window_sup_distance(traj: &FlowTrajectory, lo: f64, hi: f64, target: &DVector<f64>) -> f64 {
    let mut sup = (traj.beta_at(lo) - target).amax().max((traj.beta_at(hi) - target).amax());
    for (t, b) in traj.times.iter().zip(&traj.beta) {
        if *t >= lo && *t <= hi {
            sup = sup.max((b - target).amax());
        }
    }
    sup
}

/// The compact windows `[t_k + εℓ_k, t_{k+1} − εℓ_k]` between jump times
/// (`ℓ_k` the window length), the last one running to `t_end`.
pub fn compact_windows(path: &SaddlePath, t_end: f64, shrink: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(path.times.len());
    for k in 0..path.times.len() {
        let lo = path.times[k];
        let hi = path.times.get(k + 1).copied().unwrap_or(t_end);
        if hi <= lo {
            continue;
        }
        let len = hi - lo;
        let last = k + 1 == path.times.len();
        out.push((lo + shrink * len, if last { hi } else { hi - shrink * len }));
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    /// Fraction of each window cut from both ends.
    pub shrink: f64,
    pub sim: SimConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { shrink: 0.05, sim: SimConfig::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub log10_alpha: f64,
    /// Sup-distance to the predicted saddle on each compact window.
    pub window_sup: Vec<f64>,
    /// Distance to the predicted saddle at each window midpoint.
    pub mid_window: Vec<f64>,
    /// Sup-distance on a window straddling the first jump time (control).
    pub jump_window_sup: Option<f64>,
    /// Hausdorff distance between the trajectory graph and the limit graph.
    pub hausdorff: f64,
    pub samples: usize,
}

impl SweepRow {
    pub fn max_window_sup(&self) -> f64 {
        self.window_sup.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub shrink: f64,
    pub t_end: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Whether both distance columns shrink along the rows (ordered by
    /// decreasing α), allowing `slack` relative noise.
    pub fn monotone(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].max_window_sup() <= w[0].max_window_sup() * (1.0 + slack)
                && w[1].hausdorff <= w[0].hausdorff * (1.0 + slack)
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("log10_alpha,max_window_sup,hausdorff,jump_window_sup,samples\n");
        for r in &self.rows {
            let jump = r.jump_window_sup.map_or(String::new(), csv_float);
            let cells = [csv_float(r.log10_alpha), csv_float(r.max_window_sup()), csv_float(r.hausdorff), jump];
            s.push_str(&format!("{},{}\n", cells.join(","), r.samples));
        }
        s
    }
}

/// Simulates the flow at every `log10 α` (in parallel) and measures its
/// distance to the limit process on compact windows and as graphs.
/// Rows come back sorted by decreasing α.
pub fn convergence_sweep(
    data: &Dataset,
    path: &SaddlePath,
    hybrid: &HybridPath,
    log10_alphas: &[f64],
    t_end: f64,
    cfg: &SweepConfig,
) -> Result<SweepTable> {
    let windows = compact_windows(path, t_end, cfg.shrink);
    let graph = hybrid.graph();
    let mut rows = log10_alphas
        .par_iter()
        .map(|&e| {
            let traj = simulate(data, e * std::f64::consts::LN_10, t_end, cfg.sim)?;
            let mut window_sup = Vec::with_capacity(windows.len());
            let mut mid_window = Vec::with_capacity(windows.len());
            for &(lo, hi) in &windows {
                let target = path.saddle_at(0.5 * (lo + hi));
                window_sup.push(window_sup_distance(&traj, lo, hi, target));
                mid_window.push((traj.beta_at(0.5 * (lo + hi)) - target).amax());
            }
            let jump_window_sup = (path.loops() > 0).then(|| {
                let t1 = path.times[1];
                let next = path.times.get(2).copied().unwrap_or(t_end);
                window_sup_distance(&traj, t1 - cfg.shrink * t1, t1 + cfg.shrink * (next - t1), &path.saddles[0])
            });
            let hausdorff = hausdorff_distance(std::slice::from_ref(&traj.beta), &graph);
            Ok(SweepRow { log10_alpha: e, window_sup, mid_window, jump_window_sup, hausdorff, samples: traj.len() })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.log10_alpha.total_cmp(&a.log10_alpha));
    Ok(SweepTable { shrink: cfg.shrink, t_end, rows })
}

/// A stretch of the trajectory spent at a critical point.
#[derive(Debug, Clone, Serialize)]
pub struct Plateau {
    pub t_in: f64,
    pub t_out: f64,
    #[serde(serialize_with = "crate::ser::vector")]
    pub beta: DVector<f64>,
}

/// Splits the trajectory into stays near critical points, detected by
/// `‖|β| ⊙ ∇L(β)‖∞ ≤ eta·max(1, ‖Xᵀy/n‖∞)²`. Stays shorter than
/// `min_dwell` are ignored; consecutive stays at the same point (within
/// `merge_tol` in `∞`-norm) are merged. The number of jumps is one less than
/// the number of plateaus.
pub fn plateaus(data: &Dataset, traj: &FlowTrajectory, eta: f64, min_dwell: f64, merge_tol: f64) -> Vec<Plateau> {
    let thr = eta * data.grad_scale().powi(2);
    let mut raw: Vec<Plateau> = Vec::new();
    let mut open: Option<usize> = None;
    let close = |raw: &mut Vec<Plateau>, a: usize, b: usize| {
        if traj.times[b] - traj.times[a] >= min_dwell {
            raw.push(Plateau { t_in: traj.times[a], t_out: traj.times[b], beta: traj.beta[b].clone() });
        }
    };
    for j in 0..traj.len() {
        let b = &traj.beta[j];
        let still = b.abs().component_mul(&data.grad_unchecked(b)).amax() <= thr;
        match (still, open) {
            (true, None) => open = Some(j),
            (false, Some(a)) => {
                close(&mut raw, a, j - 1);
                open = None;
            }
            _ => {}
        }
    }
    if let Some(a) = open {
        close(&mut raw, a, traj.len() - 1);
    }
    let mut merged: Vec<Plateau> = Vec::with_capacity(raw.len());
    for p in raw {
        match merged.last_mut() {
            Some(q) if (&q.beta - &p.beta).amax() <= merge_tol * p.beta.amax().max(1.0) => {
                q.t_out = p.t_out;
                q.beta = p.beta;
            }
            _ => merged.push(p),
        }
    }
    merged
}

/// Violations of the rate and boundedness bounds along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    /// Whether `α` is below the threshold the bounds are stated for.
    pub applicable: bool,
    pub log_alpha: f64,
    pub log_alpha_threshold: f64,
    /// Samples with `L(β_t) − L* > φ̃_α(β*)/(2t)`.
    pub rate_violations: usize,
    /// Samples with `‖β_t‖∞ > 3‖β*‖₁ + 1`.
    pub bound_violations: usize,
    /// Largest `(L(β_t) − L*)·2t / φ̃_α(β*)` seen.
    pub worst_rate_ratio: f64,
    pub max_beta: f64,
}

/// Checks `L(β_t) − L* ≤ φ̃_α(β*)/(2t)` and `‖β_t‖∞ ≤ 3‖β*‖₁ + 1` at every
/// sample, where `β*` is the minimum-ℓ1 solution.
pub fn appendix_bounds(data: &Dataset, traj: &FlowTrajectory, beta_l1: &DVector<f64>) -> BoundsReport {
    let l1 = beta_l1.lp_norm(1);
    let threshold = log_alpha_threshold(l1, data.d());
    let phi = potential(beta_l1, traj.log_alpha, true);
    let loss_star = data.loss_unchecked(beta_l1);
    let cap = 3.0 * l1 + 1.0;
    // rounding allowance on the loss evaluation
    let slack = 1e-12 * traj.loss[0].max(f64::MIN_POSITIVE);
    let mut rep = BoundsReport {
        applicable: traj.log_alpha < threshold,
        log_alpha: traj.log_alpha,
        log_alpha_threshold: threshold,
        rate_violations: 0,
        bound_violations: 0,
        worst_rate_ratio: 0.0,
        max_beta: 0.0,
    };
    for j in 0..traj.len() {
        let t = traj.times[j];
        let excess = traj.loss[j] - loss_star;
        if t > 0.0 {
            let allowed = phi / (2.0 * t);
            rep.worst_rate_ratio = rep.worst_rate_ratio.max(excess / allowed);
            if excess > allowed + slack {
                rep.rate_violations += 1;
            }
        }
        let m = traj.beta[j].amax();
        rep.max_beta = rep.max_beta.max(m);
        if m > cap {
            rep.bound_violations += 1;
        }
    }
    rep
}
