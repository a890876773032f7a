use serde::Serialize;

use super::simulate::FlowTrajectory;
use crate::error::{Error, Result};

/// Arc-length clock `τ(t̃) = t̃ + ∫₀^t̃ ‖dβ/ds‖₂ ds` on the trajectory samples.
#[derive(Debug, Clone, Serialize)]
pub struct ArcLength {
    pub tau: Vec<f64>,
    /// Accelerated time at each `τ` sample (`t̂(τ)`).
    pub t_hat: Vec<f64>,
    /// Euclidean length of each sample-to-sample move of `β`.
    pub moves: Vec<f64>,
}

impl ArcLength {
    /// `t̂(τ)` by linear interpolation; monotone since both grids increase.
    pub fn t_at(&self, tau: f64) -> f64 {
        let j = self.tau.partition_point(|&s| s <= tau);
        if j == 0 {
            return self.t_hat[0];
        }
        if j == self.tau.len() {
            return *self.t_hat.last().unwrap();
        }
        let w = (tau - self.tau[j - 1]) / (self.tau[j] - self.tau[j - 1]);
        self.t_hat[j - 1] + w * (self.t_hat[j] - self.t_hat[j - 1])
    }

    /// Per-interval `(dt̂/dτ, ‖dβ̂/dτ‖)`; the two always sum to one.
    pub fn speeds(&self) -> Vec<(f64, f64)> {
        (1..self.tau.len())
            .map(|j| {
                let dtau = self.tau[j] - self.tau[j - 1];
                ((self.t_hat[j] - self.t_hat[j - 1]) / dtau, self.moves[j - 1] / dtau)
            })
            .collect()
    }

    pub fn total(&self) -> f64 {
        *self.tau.last().unwrap_or(&0.0)
    }
}

/// Accumulates `1 + ‖β̇‖` between consecutive samples (exact for the
/// piecewise-linear interpolant of the samples).
pub fn arc_length_reparametrize(traj: &FlowTrajectory) -> Result<ArcLength> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let mut out = ArcLength { tau: vec![traj.times[0]], t_hat: vec![traj.times[0]], moves: Vec::new() };
    for j in 1..traj.len() {
        let dt = traj.times[j] - traj.times[j - 1];
        let mv = (&traj.beta[j] - &traj.beta[j - 1]).norm();
        let tau = out.tau[j - 1] + dt + mv;
        if !(tau > out.tau[j - 1]) {
            return Err(Error::NonMonotone(j));
        }
        out.tau.push(tau);
        out.t_hat.push(traj.times[j]);
        out.moves.push(mv);
    }
    Ok(out)
}
