//! Sign-constrained least squares: the inner problem of the path algorithm.
//!
//! Minimises `L(β)` subject to `β_i ≥ 0` on `I₊`, `β_i ≤ 0` on `I₋` and
//! `β_i = 0` elsewhere. Columns in `I₋` are negated so that the problem
//! becomes a non-negative least squares problem in Gram form, which is then
//! solved with the Lawson–Hanson active-set method.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{gather, principal, spd_solve, Cholesky};

/// Default absolute KKT tolerance, relative to `max(1, ‖Xᵀy/n‖∞)`.
pub const DEFAULT_KKT_TOL: f64 = 1e-10;

/// Disjoint coordinate sets allowed to be non-negative (`plus`) or
/// non-positive (`minus`). Every other coordinate is pinned to zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SignPattern {
    plus: BTreeSet<usize>,
    minus: BTreeSet<usize>,
}

impl SignPattern {
    pub fn new(
        plus: impl IntoIterator<Item = usize>,
        minus: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let plus: BTreeSet<_> = plus.into_iter().collect();
        let minus: BTreeSet<_> = minus.into_iter().collect();
        if let Some(i) = plus.intersection(&minus).next() {
            return Err(Error::InvalidArgument(format!("coordinate {i} is in both I+ and I-")));
        }
        Ok(Self { plus, minus })
    }

    /// Pattern read off a dual vector: `I± = {i : ±s_i ≥ 1 − tie_tol}`.
    pub fn from_dual(s: &DVector<f64>, tie_tol: f64) -> Self {
        let plus = (0..s.len()).filter(|&i| s[i] >= 1.0 - tie_tol).collect();
        let minus = (0..s.len()).filter(|&i| s[i] <= -1.0 + tie_tol).collect();
        Self { plus, minus }
    }

    pub fn plus(&self) -> &BTreeSet<usize> {
        &self.plus
    }

    pub fn minus(&self) -> &BTreeSet<usize> {
        &self.minus
    }

    /// `I₊ ∪ I₋` in increasing order.
    pub fn allowed(&self) -> Vec<usize> {
        self.plus.union(&self.minus).copied().collect()
    }

    /// `+1` on `I₊`, `-1` on `I₋`, `0` on the inactive set.
    pub fn sign(&self, i: usize) -> f64 {
        if self.plus.contains(&i) {
            1.0
        } else if self.minus.contains(&i) {
            -1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(serialize_with = "crate::ser::vector")]
    pub beta: DVector<f64>,
    /// `∇L(β)` at the returned point.
    #[serde(serialize_with = "crate::ser::vector")]
    pub grad: DVector<f64>,
    /// Coordinates with a nonzero value, increasing.
    pub active: Vec<usize>,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Unique minimiser of `L` over the sign-constrained set described by `pattern`.
///
/// `tol` is an absolute tolerance on gradient entries after scaling by
/// `max(1, ‖Xᵀy/n‖∞)`.
pub fn constrained_lsq(data: &Dataset, pattern: &SignPattern, tol: f64) -> Result<SolveReport> {
    let d = data.d();
    if let Some(&i) = pattern.plus.iter().chain(&pattern.minus).find(|&&i| i >= d) {
        return Err(Error::InvalidArgument(format!("pattern index {i} out of range for d = {d}")));
    }
    let tol_abs = tol * data.grad_scale();
    let idx = pattern.allowed();
    let m = idx.len();
    let flip: Vec<f64> = idx.iter().map(|&i| pattern.sign(i)).collect();

    // flipped problem: min ½ zᵀGz − cᵀz subject to z ≥ 0
    let h = principal(data.gram(), &idx);
    let g = DMatrix::from_fn(m, m, |a, b| flip[a] * flip[b] * h[(a, b)]);
    let c = DVector::from_fn(m, |a, _| flip[a] * data.xty()[idx[a]]);
    if m > 0 {
        // uniqueness requires the whole restricted normal matrix to be regular
        Cholesky::new(&g)?;
    }

    let (z, iterations) = lawson_hanson(&g, &c, tol_abs)?;

    let mut beta = DVector::zeros(d);
    for (a, &i) in idx.iter().enumerate() {
        beta[i] = flip[a] * z[a];
    }
    let grad = data.grad_unchecked(&beta);
    let active: Vec<usize> = (0..d).filter(|&i| beta[i] != 0.0).collect();
    let mut kkt_residual = 0.0f64;
    for &i in &idx {
        let r = if beta[i] != 0.0 {
            grad[i].abs()
        } else {
            // at a zero coordinate the objective must not decrease when moving
            // in the allowed direction: sign(i) * grad_i >= 0
            (-pattern.sign(i) * grad[i]).max(0.0)
        };
        kkt_residual = kkt_residual.max(r);
    }
    if kkt_residual > tol_abs {
        return Err(Error::InvariantViolated(format!(
            "constrained least squares KKT residual {kkt_residual:e} above {tol_abs:e}"
        )));
    }
    Ok(SolveReport { beta, grad, active, iterations, kkt_residual })
}

/// Lawson–Hanson active set for `min ½ zᵀGz − cᵀz, z ≥ 0` with `G` positive definite.
fn lawson_hanson(g: &DMatrix<f64>, c: &DVector<f64>, tol: f64) -> Result<(DVector<f64>, usize)> {
    let m = c.len();
    let max_iter = 5 * m + 10;
    let mut z = DVector::<f64>::zeros(m);
    let mut passive: Vec<usize> = Vec::new();
    let mut blocked: Vec<usize> = Vec::new();
    let mut iterations = 0;

    loop {
        let w = c - g * &z;
        let entering = (0..m)
            .filter(|j| !passive.contains(j) && !blocked.contains(j))
            .filter(|&j| w[j] > tol)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = entering else { break };
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::MaxIterations(max_iter));
        }
        passive.push(j);
        passive.sort_unstable();

        let mut first = true;
        loop {
            let sub = spd_solve(&principal(g, &passive), &gather(c, &passive))?;
            if sub.iter().all(|&v| v > 0.0) {
                for (a, &p) in passive.iter().enumerate() {
                    z[p] = sub[a];
                }
                blocked.clear();
                break;
            }
            if first {
                let pos = passive.iter().position(|&p| p == j).unwrap();
                if sub[pos] <= 0.0 {
                    // the entering coordinate cannot become positive: roll back
                    passive.retain(|&p| p != j);
                    blocked.push(j);
                    break;
                }
            }
            first = false;
            let mut step = 1.0f64;
            for (a, &p) in passive.iter().enumerate() {
                if sub[a] <= 0.0 {
                    step = step.min(z[p] / (z[p] - sub[a]));
                }
            }
            for (a, &p) in passive.iter().enumerate() {
                z[p] += step * (sub[a] - z[p]);
            }
            for (a, &p) in passive.iter().enumerate() {
                if sub[a] <= 0.0 && z[p] <= step.max(1.0) * f64::EPSILON * 16.0 {
                    z[p] = 0.0;
                }
            }
            passive.retain(|&p| z[p] > 0.0);
            if passive.is_empty() {
                break;
            }
        }
    }
    Ok((z, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{identity_design, two_d_example};
    use crate::linalg::Combinations;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn separable_projections() {
        let data = identity_design(&[3.0, -2.0]);
        let r = constrained_lsq(&data, &SignPattern::new([0], []).unwrap(), DEFAULT_KKT_TOL).unwrap();
        assert!((r.beta.clone() - DVector::from_vec(vec![3.0, 0.0])).amax() < 1e-14);
        assert_eq!(r.active, vec![0]);

        let r = constrained_lsq(&data, &SignPattern::new([1], []).unwrap(), DEFAULT_KKT_TOL).unwrap();
        assert_eq!(r.beta, DVector::zeros(2));
        assert!((r.grad[1] - 2.0).abs() < 1e-14);
        assert!(r.active.is_empty());

        let r = constrained_lsq(&data, &SignPattern::new([0], [1]).unwrap(), DEFAULT_KKT_TOL).unwrap();
        assert!((r.beta - DVector::from_vec(vec![3.0, -2.0])).amax() < 1e-14);
    }

    #[test]
    fn two_d_nonnegative_orthant() {
        let data = two_d_example();
        let r = constrained_lsq(&data, &SignPattern::new([0, 1], []).unwrap(), DEFAULT_KKT_TOL).unwrap();
        assert!((r.beta.clone() - DVector::from_vec(vec![0.0, 1.6])).amax() < 1e-13);
        assert!((r.grad.clone() - DVector::from_vec(vec![0.12, 0.0])).amax() < 1e-13);
        assert_eq!(r.active, vec![1]);
        assert!(r.kkt_residual <= 1e-10);

        let r = constrained_lsq(&data, &SignPattern::new([1], [0]).unwrap(), DEFAULT_KKT_TOL).unwrap();
        assert!((r.beta - DVector::from_vec(vec![-0.2, 2.0])).amax() < 1e-12);
    }

    #[test]
    fn empty_pattern_is_origin() {
        let data = two_d_example();
        let r = constrained_lsq(&data, &SignPattern::default(), DEFAULT_KKT_TOL).unwrap();
        assert_eq!(r.beta, DVector::zeros(2));
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn overlapping_pattern_rejected() {
        assert!(SignPattern::new([0, 1], [1]).is_err());
    }

    #[test]
    fn rank_deficient_restriction() {
        // duplicated column
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, 0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let data = Dataset::new(x, y).unwrap();
        let res = constrained_lsq(&data, &SignPattern::new([0, 1], []).unwrap(), DEFAULT_KKT_TOL);
        assert!(matches!(res, Err(Error::RankDeficient { .. })));
    }

    /// Minimum of `L` over the pattern's feasible set by enumerating every
    /// support `S ⊆ I₊ ∪ I₋`, solving the unconstrained least squares problem
    /// on `S`, and keeping feasible candidates.
    fn brute_force(data: &Dataset, pattern: &SignPattern) -> DVector<f64> {
        let idx = pattern.allowed();
        let mut best = (data.loss(&DVector::zeros(data.d())).unwrap(), DVector::zeros(data.d()));
        for k in 1..=idx.len() {
            for sub in Combinations::new(idx.len(), k) {
                let support: Vec<usize> = sub.iter().map(|&a| idx[a]).collect();
                let xs = DMatrix::from_fn(data.n(), k, |r, c| data.x()[(r, support[c])]);
                let sol = xs.clone().svd(true, true).solve(data.y(), 1e-14).unwrap();
                if support.iter().enumerate().any(|(a, &i)| pattern.sign(i) * sol[a] < 0.0) {
                    continue;
                }
                let mut beta = DVector::zeros(data.d());
                for (a, &i) in support.iter().enumerate() {
                    beta[i] = sol[a];
                }
                let l = data.loss(&beta).unwrap();
                if l < best.0 {
                    best = (l, beta);
                }
            }
        }
        best.1
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d = rng.random_range(2..=8);
            let n = rng.random_range(6..=9);
            let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let data = Dataset::new(x, y).unwrap();
            let mut plus = Vec::new();
            let mut minus = Vec::new();
            for i in 0..d {
                if plus.len() + minus.len() == 6 {
                    break;
                }
                match rng.random_range(0..3) {
                    0 => plus.push(i),
                    1 => minus.push(i),
                    _ => {}
                }
            }
            let pattern = SignPattern::new(plus, minus).unwrap();
            let r = constrained_lsq(&data, &pattern, DEFAULT_KKT_TOL).unwrap();
            let oracle = brute_force(&data, &pattern);
            assert!((&r.beta - &oracle).amax() < 1e-9, "{} vs {}", r.beta, oracle);
            // KKT sign conditions
            for i in pattern.allowed() {
                if r.beta[i] != 0.0 {
                    assert!(r.grad[i].abs() < 1e-9);
                    assert!(pattern.sign(i) * r.beta[i] > 0.0);
                } else {
                    assert!(pattern.sign(i) * r.grad[i] >= -1e-9);
                }
            }
        }
    }
}
