//! Jump times and visited saddles of the vanishing-initialisation limit.
//!
//! Starting from `(t, β, s) = (0, 0, 0)`, the iterate sits at a saddle while
//! the dual vector `s` moves linearly with slope `−∇L(β)`. As soon as a
//! coordinate of `s` reaches `±1` the iterate jumps to the minimiser of `L`
//! under the sign constraints encoded by `s`. The loop stops at a global
//! minimiser of `L`, which is the minimum-ℓ1 solution.

use nalgebra::DVector;
use serde::Serialize;

use crate::constrained::{constrained_lsq, SignPattern, DEFAULT_KKT_TOL};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::binomial;

/// Time spent at a saddle before one or more dual coordinates reach `±1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HitEvent {
    pub delta: f64,
    pub coords: Vec<usize>,
    /// Boundary value (`±1`) reached by each entry of `coords`.
    pub signs: Vec<i8>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathConfig {
    /// Gradient entries below `tol_grad · ‖Xᵀy/n‖∞` count as zero.
    pub tol_grad: f64,
    /// KKT tolerance handed to the inner constrained solve.
    pub tol_kkt: f64,
    /// Relative tolerance for simultaneous hits and for reading `I±` off `s`.
    pub tie_tol: f64,
    /// Optional cap on loops; the theoretical bound always applies.
    pub max_loops: Option<u64>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self { tol_grad: 1e-10, tol_kkt: DEFAULT_KKT_TOL, tie_tol: 1e-9, max_loops: None }
    }
}

/// Output of [`run`]: `times[k]`, `saddles[k]` and `duals[k]` for `k = 0..=p`.
#[derive(Debug, Clone, Serialize)]
pub struct SaddlePath {
    pub times: Vec<f64>,
    #[serde(serialize_with = "crate::ser::vectors")]
    pub saddles: Vec<DVector<f64>>,
    #[serde(serialize_with = "crate::ser::vectors")]
    pub duals: Vec<DVector<f64>>,
    pub losses: Vec<f64>,
    /// `hits[k]` is the event that ends the stay at `saddles[k]`.
    pub hits: Vec<HitEvent>,
}

impl SaddlePath {
    /// Number of jumps `p`.
    pub fn loops(&self) -> usize {
        self.hits.len()
    }

    pub fn final_saddle(&self) -> &DVector<f64> {
        self.saddles.last().expect("path always holds the origin")
    }

    /// Saddle occupied at time `t` (right-continuous).
    pub fn saddle_at(&self, t: f64) -> &DVector<f64> {
        &self.saddles[self.segment_index(t)]
    }

    pub(crate) fn segment_index(&self, t: f64) -> usize {
        self.times.partition_point(|&tk| tk <= t).saturating_sub(1)
    }
}

/// `min(2^d, Σ_{k≤n} C(d,k))`, capped at `10⁶`.
pub fn loop_bound(n: usize, d: usize) -> u64 {
    let pow = if d >= 63 { f64::INFINITY } else { (1u64 << d) as f64 };
    let sum: f64 = (0..=n.min(d)).map(|k| binomial(d, k)).sum();
    pow.min(sum).min(1e6) as u64
}

/// Smallest `δ > 0` at which some `s[i] − δ·grad[i]`, `i ∈ active`, reaches `±1`.
pub fn hitting_time(
    s: &DVector<f64>,
    grad: &DVector<f64>,
    active: &[usize],
    tie_tol: f64,
) -> Result<HitEvent> {
    let candidates: Vec<(usize, f64, i8)> = active
        .iter()
        .filter_map(|&i| {
            let g = grad[i];
            let (delta, sign) = if g < 0.0 {
                ((1.0 - s[i]) / -g, 1)
            } else if g > 0.0 {
                ((s[i] + 1.0) / g, -1)
            } else {
                return None;
            };
            (delta > 0.0 && delta.is_finite()).then_some((i, delta, sign))
        })
        .collect();
    let delta = candidates
        .iter()
        .map(|c| c.1)
        .min_by(f64::total_cmp)
        .ok_or(Error::NoFiniteHit)?;
    let (coords, signs) = candidates
        .iter()
        .filter(|c| c.1 <= delta * (1.0 + tie_tol))
        .map(|c| (c.0, c.2))
        .unzip();
    Ok(HitEvent { delta, coords, signs })
}

/// Runs the saddle-to-saddle recursion to completion.
pub fn run(data: &Dataset, cfg: &PathConfig) -> Result<SaddlePath> {
    let d = data.d();
    let tol_g = cfg.tol_grad * data.xty().amax();
    let bound = loop_bound(data.n(), d);
    let max_loops = cfg.max_loops.map_or(bound, |m| m.min(bound));

    let mut t = 0.0;
    let mut beta = DVector::zeros(d);
    let mut s = DVector::zeros(d);
    let mut path = SaddlePath {
        times: vec![0.0],
        saddles: vec![beta.clone()],
        duals: vec![s.clone()],
        losses: vec![data.loss_unchecked(&beta)],
        hits: Vec::new(),
    };

    loop {
        let grad = data.grad_unchecked(&beta);
        if grad.amax() <= tol_g {
            break;
        }
        if path.loops() as u64 >= max_loops {
            return Err(Error::MaxLoops(max_loops));
        }
        let active: Vec<usize> = (0..d).filter(|&i| grad[i].abs() > tol_g).collect();
        let hit = hitting_time(&s, &grad, &active, cfg.tie_tol)?;
        if hit.delta > 1e12 {
            log::warn!("stay of {:e} at saddle {}: near-degenerate gradient", hit.delta, path.loops());
        }
        t += hit.delta;
        s -= &grad * hit.delta;
        for (&i, &sign) in hit.coords.iter().zip(&hit.signs) {
            s[i] = f64::from(sign);
        }
        for v in s.iter_mut() {
            if v.abs() >= 1.0 - cfg.tie_tol {
                *v = v.signum();
            }
        }
        let pattern = SignPattern::from_dual(&s, cfg.tie_tol);
        beta = constrained_lsq(data, &pattern, cfg.tol_kkt)?.beta;

        path.times.push(t);
        path.saddles.push(beta.clone());
        path.duals.push(s.clone());
        path.losses.push(data.loss_unchecked(&beta));
        path.hits.push(hit);
    }

    check_postconditions(data, &path)?;
    Ok(path)
}

fn check_postconditions(data: &Dataset, path: &SaddlePath) -> Result<()> {
    let fail = |msg: String| Err(Error::InvariantViolated(msg));
    let support_cap = data.n().min(data.d());
    for k in 0..path.saddles.len() {
        let (beta, s) = (&path.saddles[k], &path.duals[k]);
        let support = beta.iter().filter(|v| **v != 0.0).count();
        if support > support_cap {
            return fail(format!("saddle {k} has {support} nonzeros (> {support_cap})"));
        }
        for i in 0..beta.len() {
            let ok = if beta[i] > 0.0 {
                s[i] == 1.0
            } else if beta[i] < 0.0 {
                s[i] == -1.0
            } else {
                s[i].abs() <= 1.0
            };
            if !ok {
                return fail(format!("dual {k} is not a subgradient at coordinate {i}"));
            }
        }
        if k > 0 {
            if path.losses[k] >= path.losses[k - 1] {
                return fail(format!(
                    "loss did not decrease at jump {k}: {} -> {}",
                    path.losses[k - 1],
                    path.losses[k]
                ));
            }
            let hit = &path.hits[k - 1];
            for (&i, &sign) in hit.coords.iter().zip(&hit.signs) {
                if f64::from(sign) * beta[i] <= 0.0 {
                    return fail(format!("coordinate {i} hit the boundary at jump {k} but stayed inactive"));
                }
            }
        }
    }
    Ok(())
}

/// Worst violations of the key-equation properties on a time grid.
#[derive(Debug, Clone, Default, Serialize)]
pub struct KeyEquationReport {
    pub samples: usize,
    /// `max(|s_t[i]| − 1, 0)`.
    pub k1: f64,
    /// Sign mismatch between `β°_t[i]` and a saturated `s_t[i]`.
    pub k2: f64,
    /// `|β°_t[i]|` where `|s_t[i]| < 1 − tol`.
    pub k3: f64,
    /// Distance of `s_t[i]` from `sign(β°_t[i])` on the support.
    pub k4: f64,
    /// Number of (sample, coordinate, property) triples above `tol`.
    pub violations: usize,
}

impl KeyEquationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// `n` uniformly spaced times covering every jump with a margin after the last.
pub fn default_grid(path: &SaddlePath, points: usize) -> Vec<f64> {
    let last = path.times.last().copied().unwrap_or(0.0);
    let end = if last > 0.0 { 1.25 * last } else { 1.0 };
    let denom = points.saturating_sub(1).max(1) as f64;
    (0..points).map(|j| end * j as f64 / denom).collect()
}

/// Reconstructs `s_t = −∫₀ᵗ ∇L(β°_u) du` from the path's times and saddles
/// and checks that it stays in `∂‖β°_t‖₁` at every grid time.
pub fn verify_key_equation(
    path: &SaddlePath,
    data: &Dataset,
    grid: &[f64],
    tol: f64,
) -> KeyEquationReport {
    let grads: Vec<DVector<f64>> = path.saddles.iter().map(|b| data.grad_unchecked(b)).collect();
    let mut anchors = vec![DVector::zeros(data.d())];
    for k in 1..path.times.len() {
        let dt = path.times[k] - path.times[k - 1];
        let next = &anchors[k - 1] - &grads[k - 1] * dt;
        anchors.push(next);
    }

    let mut report = KeyEquationReport { samples: grid.len(), ..Default::default() };
    let note = |slot: &mut f64, v: f64, count: &mut usize| {
        *slot = slot.max(v);
        if v > tol {
            *count += 1;
        }
    };
    for &t in grid {
        let k = path.segment_index(t);
        let s = &anchors[k] - &grads[k] * (t - path.times[k]);
        let beta = &path.saddles[k];
        for i in 0..s.len() {
            let (si, bi) = (s[i], beta[i]);
            let mut count = report.violations;
            note(&mut report.k1, (si.abs() - 1.0).max(0.0), &mut count);
            if si >= 1.0 - tol {
                note(&mut report.k2, (-bi).max(0.0), &mut count);
            } else if si <= -1.0 + tol {
                note(&mut report.k2, bi.max(0.0), &mut count);
            } else {
                note(&mut report.k3, bi.abs(), &mut count);
            }
            if bi > 0.0 {
                note(&mut report.k4, (1.0 - si).max(0.0), &mut count);
            } else if bi < 0.0 {
                note(&mut report.k4, (si + 1.0).max(0.0), &mut count);
            }
            report.violations = count;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::critical_point_check;
    use crate::fixtures::{identity_design, two_d_example};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn hitting_time_examples() {
        let hit = hitting_time(&v(&[0.0, 0.0]), &v(&[0.5, -0.25]), &[0, 1], 1e-9).unwrap();
        assert_eq!(hit, HitEvent { delta: 2.0, coords: vec![0], signs: vec![-1] });

        let hit = hitting_time(&v(&[0.0, 0.0]), &v(&[-0.2, -0.16]), &[0, 1], 1e-9).unwrap();
        assert!((hit.delta - 5.0).abs() < 1e-14);
        assert_eq!((hit.coords, hit.signs), (vec![0], vec![1]));

        let hit = hitting_time(&v(&[1.0, 0.8]), &v(&[0.0, -0.12]), &[1], 1e-9).unwrap();
        assert!((hit.delta - 5.0 / 3.0).abs() < 1e-14);
        assert_eq!((hit.coords, hit.signs), (vec![1], vec![1]));
    }

    #[test]
    fn hitting_time_ties_and_errors() {
        let hit = hitting_time(&v(&[0.0, 0.0, 0.5]), &v(&[-1.0, 1.0, 0.1]), &[0, 1, 2], 1e-9).unwrap();
        assert_eq!((hit.coords, hit.signs), (vec![0, 1], vec![1, -1]));
        assert!(matches!(
            hitting_time(&v(&[0.0]), &v(&[0.0]), &[0], 1e-9),
            Err(Error::NoFiniteHit)
        ));
    }

    #[test]
    fn two_d_path_matches_hand_computation() {
        let data = two_d_example();
        let path = run(&data, &PathConfig::default()).unwrap();
        assert_eq!(path.loops(), 3);
        let times = [5.0, 20.0 / 3.0, 70.0 / 3.0];
        let saddles = [[0.2, 0.0], [0.0, 1.6], [-0.2, 2.0]];
        let duals = [[1.0, 0.8], [1.0, 1.0], [-1.0, 1.0]];
        for k in 0..3 {
            assert!((path.times[k + 1] - times[k]).abs() < 1e-10);
            assert!((&path.saddles[k + 1] - v(&saddles[k])).amax() < 1e-10);
            assert!((&path.duals[k + 1] - v(&duals[k])).amax() < 1e-10);
        }
        for beta in &path.saddles {
            assert!(critical_point_check(&data, beta, 1e-9));
        }
        let grid = default_grid(&path, 1000);
        assert!(verify_key_equation(&path, &data, &grid, 1e-8).passed());
    }

    #[test]
    fn identity_design_prefixes() {
        let data = identity_design(&[3.0, 2.0, 1.0, 0.0]);
        let path = run(&data, &PathConfig::default()).unwrap();
        assert_eq!(path.loops(), 3);
        let expected = [[3.0, 0.0, 0.0, 0.0], [3.0, 2.0, 0.0, 0.0], [3.0, 2.0, 1.0, 0.0]];
        for (k, want) in expected.iter().enumerate() {
            assert!((path.times[k + 1] - 1.0 / (3.0 - k as f64)).abs() < 1e-12);
            assert!((&path.saddles[k + 1] - v(want)).amax() < 1e-12);
        }
    }

    #[test]
    fn identity_design_tie_admits_both() {
        let data = identity_design(&[2.0, -2.0, 1.0]);
        let path = run(&data, &PathConfig::default()).unwrap();
        assert_eq!(path.loops(), 2);
        assert_eq!(path.hits[0].coords, vec![0, 1]);
        assert!((&path.saddles[1] - v(&[2.0, -2.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn zero_targets_give_trivial_path() {
        let mut data = two_d_example();
        data = Dataset::new(data.x().clone(), DVector::zeros(2)).unwrap();
        let path = run(&data, &PathConfig::default()).unwrap();
        assert_eq!(path.loops(), 0);
        assert_eq!(path.times, vec![0.0]);
        assert_eq!(path.saddles, vec![DVector::zeros(2)]);
    }

    #[test]
    fn loop_bound_values() {
        assert_eq!(loop_bound(2, 2), 4);
        assert_eq!(loop_bound(3, 3), 8);
        assert_eq!(loop_bound(2, 4), 11);
        assert_eq!(loop_bound(1000, 100), 1_000_000);
    }

    #[test]
    fn corrupted_saddle_is_flagged() {
        let data = two_d_example();
        let mut path = run(&data, &PathConfig::default()).unwrap();
        // coordinate 2 is inactive at the first saddle
        path.saddles[1][1] += 0.1;
        let report = verify_key_equation(&path, &data, &default_grid(&path, 1000), 1e-8);
        assert!(report.k3 > 0.09 && report.violations > 0);
    }

    #[test]
    fn max_loops_cap_is_an_error() {
        let data = two_d_example();
        let cfg = PathConfig { max_loops: Some(2), ..Default::default() };
        assert!(matches!(run(&data, &cfg), Err(Error::MaxLoops(2))));
    }
}
