//! Structural checks on the data and on candidate critical points.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::linalg::Combinations;

/// Relative residual under which a point counts as lying in an affine span.
pub const AFFINE_TOL: f64 = 1e-9;

/// A signed column `x̃_column` lying in the affine span of the signed columns
/// `signs[a] · x̃_subset[a]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralPositionWitness {
    pub subset: Vec<usize>,
    pub signs: Vec<i8>,
    pub column: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneralPositionReport {
    pub holds: bool,
    pub k_max: usize,
    pub witness: Option<GeneralPositionWitness>,
}

/// Default subset size bound `min(n, d, 6)`.
pub fn default_k_max(data: &Dataset) -> usize {
    data.n().min(data.d()).min(6)
}

/// Checks that no signed column `±x̃_j` lies in the affine span of `k ≤ k_max`
/// other signed columns.
///
/// Testing `+x̃_j` against all `2^k` sign assignments covers `-x̃_j` as well,
/// since negating every point maps one affine span onto the other.
pub fn general_position_check(data: &Dataset, k_max: usize) -> GeneralPositionReport {
    let (n, d) = (data.n(), data.d());
    let x = data.x();
    let k_max = k_max.min(n).min(d.saturating_sub(1));
    let scale = (0..d).map(|j| x.column(j).norm()).fold(0.0, f64::max);
    for k in 1..=k_max {
        for subset in Combinations::new(d, k) {
            for mask in 0..(1u32 << k) {
                let signs: Vec<i8> = (0..k).map(|a| if mask >> a & 1 == 1 { -1 } else { 1 }).collect();
                let points: Vec<DVector<f64>> = subset
                    .iter()
                    .zip(&signs)
                    .map(|(&j, &s)| x.column(j) * f64::from(s))
                    .collect();
                for column in (0..d).filter(|j| !subset.contains(j)) {
                    let target = x.column(column).into_owned();
                    let residual = affine_residual(&points, &target);
                    if residual <= AFFINE_TOL * scale.max(f64::MIN_POSITIVE) {
                        return GeneralPositionReport {
                            holds: false,
                            k_max,
                            witness: Some(GeneralPositionWitness {
                                subset,
                                signs,
                                column,
                                residual,
                            }),
                        };
                    }
                }
            }
        }
    }
    GeneralPositionReport { holds: true, k_max, witness: None }
}

/// Distance from `target` to the affine span of `points`: least squares on
/// `target − p₀ ≈ Σ cᵢ (pᵢ − p₀)`, which encodes the sum-to-one constraint.
fn affine_residual(points: &[DVector<f64>], target: &DVector<f64>) -> f64 {
    let base = &points[0];
    let rhs = target - base;
    if points.len() == 1 {
        return rhs.norm();
    }
    let n = base.len();
    let diffs = DMatrix::from_fn(n, points.len() - 1, |r, c| points[c + 1][r] - base[r]);
    let svd = diffs.clone().svd(true, true);
    let smax = svd.singular_values.amax();
    match svd.solve(&rhs, 1e-12 * smax.max(f64::MIN_POSITIVE)) {
        Ok(coef) => (&diffs * coef - rhs).norm(),
        Err(_) => rhs.norm(),
    }
}

/// `β` maps to a critical point of the factorised loss: `|β| ⊙ ∇L(β) = 0`
/// and `∇L(β)ᵢ = 0` on the support. `tol` is relative to `max(1, ‖Xᵀy/n‖∞)`.
pub fn critical_point_check(data: &Dataset, beta: &DVector<f64>, tol: f64) -> bool {
    let Ok(grad) = data.grad_loss(beta) else { return false };
    let tol_abs = tol * data.grad_scale();
    let weighted = beta.abs().component_mul(&grad).amax();
    let on_support = (0..beta.len())
        .filter(|&i| beta[i] != 0.0)
        .map(|i| grad[i].abs())
        .fold(0.0, f64::max);
    weighted <= tol_abs && on_support <= tol_abs
}
