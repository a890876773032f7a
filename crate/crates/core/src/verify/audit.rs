use serde::Serialize;

use crate::baselines::lasso_homotopy;
use crate::checks::critical_point_check;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::saddle_path::{loop_bound, SaddlePath};

/// Structural checks on a finished path.
#[derive(Debug, Clone, Serialize)]
pub struct TerminationAudit {
    pub loops: usize,
    pub bound: u64,
    pub loops_ok: bool,
    pub loss_decrease_ok: bool,
    pub max_support: usize,
    pub support_ok: bool,
    pub final_grad: f64,
    pub final_grad_ok: bool,
    /// `∞`-distance between the final saddle and the Lasso endpoint.
    pub min_l1_distance: f64,
    pub min_l1_ok: bool,
    pub critical_points_ok: bool,
}

impl TerminationAudit {
    pub fn pass(&self) -> bool {
        self.loops_ok
            && self.loss_decrease_ok
            && self.support_ok
            && self.final_grad_ok
            && self.min_l1_ok
            && self.critical_points_ok
    }
}

/// Checks the loop bound, strict loss decrease, support sizes, final
/// stationarity, that every saddle is a critical point, and that the output
/// is the minimum-ℓ1 solution found by the Lasso homotopy.
pub fn termination_audit(path: &SaddlePath, data: &Dataset) -> Result<TerminationAudit> {
    let (n, d) = (data.n(), data.d());
    let bound = loop_bound(n, d);
    let loss_decrease_ok = path
        .saddles
        .windows(2)
        .all(|w| data.loss_change(&w[0], &w[1]).is_ok_and(|delta| delta < 0.0));
    let max_support = path.saddles.iter().map(|b| b.iter().filter(|&&x| x != 0.0).count()).max().unwrap_or(0);
    let final_grad = data.grad_loss(path.final_saddle())?.amax();
    let scale = data.grad_scale();
    let lasso = lasso_homotopy(data, 0.0)?;
    let min_l1_distance = (lasso.endpoint() - path.final_saddle()).amax();
    let beta_scale = path.final_saddle().amax().max(1.0);
    Ok(TerminationAudit {
        loops: path.loops(),
        bound,
        loops_ok: (path.loops() as u64) <= bound,
        loss_decrease_ok,
        max_support,
        support_ok: max_support <= n.min(d),
        final_grad,
        final_grad_ok: final_grad <= 1e-8 * scale,
        min_l1_distance,
        min_l1_ok: min_l1_distance <= 1e-8 * beta_scale,
        critical_points_ok: path.saddles.iter().all(|b| critical_point_check(data, b, 1e-9)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{identity_design, two_d_example};
    use crate::saddle_path::{run, PathConfig};

    #[test]
    fn hand_examples_pass() {
        let data = two_d_example();
        let audit = termination_audit(&run(&data, &PathConfig::default()).unwrap(), &data).unwrap();
        assert_eq!((audit.loops, audit.bound), (3, 4));
        assert!(audit.pass());
        let data = identity_design(&[3.0, 2.0, 1.0]);
        let audit = termination_audit(&run(&data, &PathConfig::default()).unwrap(), &data).unwrap();
        assert_eq!((audit.loops, audit.bound), (3, 8));
        assert!(audit.pass());
    }

    #[test]
    fn corrupted_path_fails() {
        let data = two_d_example();
        let mut path = run(&data, &PathConfig::default()).unwrap();
        path.saddles.swap(1, 2);
        let audit = termination_audit(&path, &data).unwrap();
        assert!(!audit.loss_decrease_ok || !audit.critical_points_ok);
        assert!(!audit.pass());
    }
}
