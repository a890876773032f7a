use nalgebra::DVector;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{gather, principal, spd_solve, Cholesky};

const KKT_TOL: f64 = 1e-10;

/// Piecewise-linear Lasso path `λ ↦ argmin L(β) + λ‖β‖₁`, stored at its knots.
#[derive(Debug, Clone, Serialize)]
pub struct LassoPath {
    /// Decreasing from `λ_max = ‖∇L(0)‖∞` to `λ_min`.
    pub knots: Vec<f64>,
    #[serde(serialize_with = "crate::ser::vectors")]
    pub vertices: Vec<nalgebra::DVector<f64>>,
}

impl LassoPath {
    /// Vertex at the smallest computed `λ`; the minimum-ℓ1 solution when `λ_min = 0`.
    pub fn endpoint(&self) -> &DVector<f64> {
        self.vertices.last().expect("path has at least one knot")
    }

    /// Linear interpolation between knots; `None` outside `[λ_min, λ_max]`.
    pub fn at(&self, lambda: f64) -> Option<DVector<f64>> {
        let first = *self.knots.first()?;
        if lambda > first {
            return (lambda.is_finite()).then(|| self.vertices[0].clone());
        }
        for k in 1..self.knots.len() {
            let (hi, lo) = (self.knots[k - 1], self.knots[k]);
            if lambda >= lo {
                let w = if hi > lo { (hi - lambda) / (hi - lo) } else { 1.0 };
                return Some(&self.vertices[k - 1] * (1.0 - w) + &self.vertices[k] * w);
            }
        }
        None
    }
}

enum Event {
    Join(usize),
    Drop(usize),
    End,
}

/// Homotopy (LARS with the Lasso drop rule) from `λ_max` down to `lambda_min`.
pub fn lasso_homotopy(data: &Dataset, lambda_min: f64) -> Result<LassoPath> {
    if !(lambda_min >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda_min must be nonnegative, got {lambda_min}")));
    }
    let d = data.d();
    let rank = data.n().min(d);
    let b = data.xty();
    let h = data.gram();
    let lambda_max = b.amax();
    let tol = KKT_TOL * data.grad_scale();
    let tiny = 1e-14 * lambda_max.max(f64::MIN_POSITIVE);
    // Events this close to λ_min lose to the end of the path. Once the active
    // set spans the data every inactive correlation is proportional to λ, so
    // a join and the end tie exactly and rounding must not pick the join.
    let end_slack = 1e-12 * lambda_max.max(f64::MIN_POSITIVE);

    let mut lambda = lambda_max;
    let mut beta = DVector::zeros(d);
    let mut path = LassoPath { knots: vec![lambda], vertices: vec![beta.clone()] };
    if lambda <= lambda_min {
        return Ok(path);
    }

    let mut active: Vec<usize> = (0..d).filter(|&j| b[j].abs() >= lambda * (1.0 - 1e-12)).collect();
    let mut signs: Vec<f64> = active.iter().map(|&j| b[j].signum()).collect();
    let mut last_dropped: Option<usize> = None;

    loop {
        let chol = Cholesky::new(&principal(h, &active)).map_err(|_| Error::Degenerate)?;
        let dir = chol.solve(&DVector::from_column_slice(&signs));
        let corr = b - h * &beta;
        // d(corr_j)/d(−λ) = −a_j
        let a: Vec<f64> = (0..d)
            .map(|j| active.iter().zip(dir.iter()).map(|(&i, w)| h[(j, i)] * w).sum())
            .collect();

        let mut best = (lambda - lambda_min, Event::End);
        let horizon = lambda - lambda_min - end_slack;
        // once the active columns span the data no further column can join
        let joinable = if active.len() < rank { d } else { 0 };
        for j in (0..joinable).filter(|j| !active.contains(j)) {
            for (num, den) in [(lambda - corr[j], 1.0 - a[j]), (lambda + corr[j], 1.0 + a[j])] {
                if den.abs() < 1e-15 {
                    continue;
                }
                let gamma = num / den;
                // a coordinate dropped at this knot sits exactly on the boundary
                // it just left; that root is rounding noise, not an event
                let fresh_drop = last_dropped == Some(j) && num.abs() <= 1e-9 * lambda_max;
                if gamma > 0.0 && !fresh_drop && gamma < best.0 && gamma < horizon {
                    best = (gamma, Event::Join(j));
                }
            }
        }
        for (pos, &i) in active.iter().enumerate() {
            if dir[pos] != 0.0 {
                let gamma = -beta[i] / dir[pos];
                if gamma > tiny && gamma < best.0 && gamma < horizon {
                    best = (gamma, Event::Drop(i));
                }
            }
        }

        let (gamma, event) = best;
        lambda = if matches!(event, Event::End) { lambda_min } else { lambda - gamma };
        // recompute the vertex from the normal equations instead of stepping
        beta = vertex(data, &active, &signs, lambda)?;
        last_dropped = None;
        match event {
            Event::Join(j) => {
                let c = b[j] - h.row(j).dot(&beta.transpose());
                active.push(j);
                signs.push(c.signum());
            }
            Event::Drop(i) => {
                let pos = active.iter().position(|&p| p == i).unwrap();
                active.remove(pos);
                signs.remove(pos);
                // β_i is only zero up to rounding; re-solve without it rather
                // than truncating, which would shift every correlation
                beta = vertex(data, &active, &signs, lambda)?;
                last_dropped = Some(i);
            }
            Event::End => {}
        }
        check_kkt(data, &beta, lambda, tol)?;
        path.knots.push(lambda);
        path.vertices.push(beta.clone());
        if matches!(event, Event::End) || active.is_empty() {
            break;
        }
    }
    Ok(path)
}

/// Solution of `H_AA β_A = (Xᵀy/n)_A − λ s_A`, zero off `A`.
fn vertex(data: &Dataset, active: &[usize], signs: &[f64], lambda: f64) -> Result<DVector<f64>> {
    let rhs = gather(data.xty(), active) - DVector::from_column_slice(signs) * lambda;
    let sol = spd_solve(&principal(data.gram(), active), &rhs).map_err(|_| Error::Degenerate)?;
    let mut beta = DVector::zeros(data.d());
    for (pos, &i) in active.iter().enumerate() {
        beta[i] = sol[pos];
    }
    Ok(beta)
}

fn check_kkt(data: &Dataset, beta: &DVector<f64>, lambda: f64, tol: f64) -> Result<()> {
    let corr = -data.grad_unchecked(beta);
    let mut residual = 0.0f64;
    for i in 0..beta.len() {
        let r = if beta[i] != 0.0 {
            (corr[i] - lambda * beta[i].signum()).abs()
        } else {
            (corr[i].abs() - lambda).max(0.0)
        };
        residual = residual.max(r);
    }
    if residual > tol {
        return Err(Error::KktViolation { lambda, residual });
    }
    Ok(())
}
