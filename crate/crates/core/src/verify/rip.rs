use nalgebra::{DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{binomial, principal, Combinations};
use crate::saddle_path::{run, PathConfig};

/// Largest number of subsets enumerated in exact mode.
pub const SUBSET_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub enum RipMode {
    Exact,
    /// Random subsets; the result is a lower bound on the constant.
    Sampled { subsets: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RipEstimate {
    pub value: f64,
    /// `false` when the value is only a sampled lower bound.
    pub exact: bool,
    pub subsets: u64,
}

fn deviation(h: &nalgebra::DMatrix<f64>, idx: &[usize]) -> f64 {
    let eig = SymmetricEigen::new(principal(h, idx)).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    (hi - 1.0).abs().max((1.0 - lo).abs())
}

/// Restricted isometry constant of order `s`: the largest deviation from 1
/// of an eigenvalue of any `s × s` principal submatrix of `XᵀX/n`.
///
/// By eigenvalue interlacing this also covers every smaller order.
pub fn rip_constant(data: &Dataset, s: usize, mode: RipMode) -> Result<RipEstimate> {
    let d = data.d();
    if s == 0 || s > d {
        return Err(Error::InvalidArgument(format!("order {s} outside 1..={d}")));
    }
    let h = data.gram();
    match mode {
        RipMode::Exact => {
            let count = binomial(d, s);
            if count > SUBSET_LIMIT as f64 {
                return Err(Error::TooManySubsets { count, limit: SUBSET_LIMIT as f64 });
            }
            let value = Combinations::new(d, s).map(|idx| deviation(h, &idx)).fold(0.0, f64::max);
            Ok(RipEstimate { value, exact: true, subsets: count as u64 })
        }
        RipMode::Sampled { subsets, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut value = 0.0f64;
            for _ in 0..subsets {
                let mut idx = rand::seq::index::sample(&mut rng, d, s).into_vec();
                idx.sort_unstable();
                value = value.max(deviation(h, &idx));
            }
            Ok(RipEstimate { value, exact: false, subsets: subsets as u64 })
        }
    }
}

/// Whether the hypotheses of the sparse-recovery predictions hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason")]
pub enum Assumption {
    Holds,
    Failed(String),
    /// Only a sampled lower bound on the constant was available.
    Uncertified(String),
}

/// Predicted and observed values for one loop of the path.
#[derive(Debug, Clone, Serialize)]
pub struct LoopCheck {
    /// Coordinate learnt in this loop.
    pub coord: usize,
    pub time_interval: (f64, f64),
    pub observed_time: Option<f64>,
    /// `(coordinate, lower, upper, observed)` for each learnt coordinate.
    pub boxes: Vec<(usize, f64, f64, f64)>,
    pub support_ok: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RipReport {
    pub r: usize,
    pub eps_tilde: RipEstimate,
    pub eps: f64,
    pub gap: f64,
    pub norm: f64,
    pub assumption: Assumption,
    pub loops: usize,
    pub checks: Vec<LoopCheck>,
    pub final_matches: bool,
    /// `None` when the assumption does not hold and nothing was asserted.
    pub pass: Option<bool>,
}

/// Runs the path algorithm on `y = Xβ*` and checks the predicted loop
/// count, saddle boxes `β*_i ± ε‖β*‖₂` and time intervals
/// `[1/(|β*_i| + ε‖β*‖₂), 1/(|β*_i| − ε‖β*‖₂)]`, with `ε = 5ε̃`.
///
/// The predictions are only asserted when `ε̃ < √2 − 1` and
/// `ε‖β*‖₂ < λ/2` hold for an exactly computed `ε̃`.
pub fn rip_experiment(data: &Dataset, beta_star: &DVector<f64>, mode: Option<RipMode>) -> Result<RipReport> {
    let d = data.d();
    if beta_star.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: beta_star.len() });
    }
    let mut order: Vec<usize> = (0..d).filter(|&i| beta_star[i] != 0.0).collect();
    order.sort_by(|&a, &b| beta_star[b].abs().total_cmp(&beta_star[a].abs()));
    let r = order.len();
    if r == 0 {
        return Err(Error::InvalidArgument("beta_star must be nonzero".into()));
    }
    let mags: Vec<f64> = order.iter().map(|&i| beta_star[i].abs()).collect();
    let gap = (0..r).map(|k| mags[k] - mags.get(k + 1).copied().unwrap_or(0.0)).fold(f64::INFINITY, f64::min);
    let norm = beta_star.norm();

    let s = (2 * r).min(d);
    let mode = mode.unwrap_or(if binomial(d, s) <= SUBSET_LIMIT as f64 {
        RipMode::Exact
    } else {
        RipMode::Sampled { subsets: 100_000, seed: 0 }
    });
    let eps_tilde = rip_constant(data, s, mode)?;
    let eps = 5.0 * eps_tilde.value;
    let radius = eps * norm;
    let assumption = if eps_tilde.value >= 2f64.sqrt() - 1.0 {
        Assumption::Failed(format!("RIP constant {} is not below sqrt(2) - 1", eps_tilde.value))
    } else if !(radius < gap / 2.0) {
        Assumption::Failed(format!("5 eps~ |beta*| = {radius} is not below half the gap {}", gap / 2.0))
    } else if !eps_tilde.exact {
        Assumption::Uncertified(format!("RIP constant is a sampled lower bound over {} subsets", eps_tilde.subsets))
    } else {
        Assumption::Holds
    };

    let path = run(data, &PathConfig::default())?;
    // absolute slack for rounding when the boxes collapse to points
    let slack = 1e-12 * norm.max(1.0);
    let mut checks = Vec::with_capacity(r);
    for k in 0..r {
        let coord = order[k];
        let time_interval = (1.0 / (mags[k] + radius), if mags[k] > radius { 1.0 / (mags[k] - radius) } else { f64::INFINITY });
        let observed_time = path.times.get(k + 1).copied();
        let saddle = path.saddles.get(k + 1);
        let mut pass = observed_time
            .is_some_and(|t| t >= time_interval.0 * (1.0 - 1e-12) && t <= time_interval.1 * (1.0 + 1e-12));
        let support_ok = saddle.is_some_and(|b| (0..d).all(|i| (b[i] != 0.0) == order[..=k].contains(&i)));
        pass &= support_ok;
        let mut boxes = Vec::with_capacity(k + 1);
        for &i in &order[..=k] {
            let observed = saddle.map_or(f64::NAN, |b| b[i]);
            let (lo, hi) = (beta_star[i] - radius, beta_star[i] + radius);
            pass &= observed >= lo - slack && observed <= hi + slack;
            boxes.push((i, lo, hi, observed));
        }
        checks.push(LoopCheck { coord, time_interval, observed_time, boxes, support_ok, pass });
    }
    let final_matches = (path.final_saddle() - beta_star).amax() <= 1e-9 * beta_star.amax();
    let pass = (assumption == Assumption::Holds)
        .then(|| path.loops() == r && final_matches && checks.iter().all(|c| c.pass));
    Ok(RipReport { r, eps_tilde, eps, gap, norm, assumption, loops: path.loops(), checks, final_matches, pass })
}
