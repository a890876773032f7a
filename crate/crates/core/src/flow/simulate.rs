use nalgebra::DVector;
use serde::Serialize;

use super::integrator::{integrate, Control, Step, Tolerances};
use super::mirror::beta_from_zeta;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Integrator settings for [`simulate`].
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Largest allowed `‖Δβ‖∞` between stored samples, relative to
    /// `max(‖β‖∞, β_ref)` with `β_ref = ‖Xᵀy/n‖∞ / max_i H_ii`.
    pub sample_frac: f64,
    /// Largest gap between stored samples, as a fraction of `t_end`.
    pub time_frac: f64,
    /// Allowed loss increase between accepted steps, relative to `L(0)`.
    pub loss_slack: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-10, max_steps: 2_000_000, sample_frac: 0.01, time_frac: 1e-4, loss_slack: 1e-9 }
    }
}

/// Sampled solution of the accelerated flow at one initialisation scale.
#[derive(Debug, Clone, Serialize)]
pub struct FlowTrajectory {
    pub log_alpha: f64,
    /// Accelerated time `t̃ = t / ln(1/α)`.
    pub times: Vec<f64>,
    #[serde(skip)]
    pub zeta: Vec<DVector<f64>>,
    #[serde(serialize_with = "crate::ser::vectors")]
    pub beta: Vec<DVector<f64>>,
    pub loss: Vec<f64>,
    /// `∫₀ᵗ ∇L(β_s) ds`, integrated alongside `ζ`.
    #[serde(skip)]
    pub grad_integral: Vec<DVector<f64>>,
    /// Whether reconstructing `β` ever hit the exponent clamp.
    pub saturated: bool,
}

impl FlowTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Piecewise-linear interpolation of the stored `β` samples.
    pub fn beta_at(&self, t: f64) -> DVector<f64> {
        let j = self.times.partition_point(|&s| s <= t);
        if j == 0 {
            return self.beta[0].clone();
        }
        if j == self.times.len() {
            return self.beta[j - 1].clone();
        }
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = (t - t0) / (t1 - t0);
        &self.beta[j - 1] * (1.0 - w) + &self.beta[j] * w
    }

    /// Largest violation of `ζ/(2 ln(1/α)) + ∫∇L = 0` over the samples.
    pub fn duality_residual(&self) -> f64 {
        let scale = -2.0 * self.log_alpha;
        self.zeta
            .iter()
            .zip(&self.grad_integral)
            .map(|(z, g)| (z / scale + g).amax())
            .fold(0.0, f64::max)
    }
}

/// Integrates `dζ/dt̃ = −2 ln(1/α) ∇L(β(ζ))` from `ζ = 0` to `t_end`.
pub fn simulate(data: &Dataset, log_alpha: f64, t_end: f64, cfg: SimConfig) -> Result<FlowTrajectory> {
    if !(log_alpha < 0.0) || !log_alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("log alpha must be negative and finite, got {log_alpha}")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end must be positive and finite, got {t_end}")));
    }
    let d = data.d();
    let rate = -2.0 * log_alpha;
    let h_max = data.gram().diagonal().max();
    let beta_ref = data.xty().amax() / h_max;
    let loss0 = data.loss_unchecked(&DVector::zeros(d));
    let slack = cfg.loss_slack * loss0;

    let mut traj = FlowTrajectory {
        log_alpha,
        times: vec![0.0],
        zeta: vec![DVector::zeros(d)],
        beta: vec![DVector::zeros(d)],
        loss: vec![loss0],
        grad_integral: vec![DVector::zeros(d)],
        saturated: false,
    };
    let split = |y: &DVector<f64>| (y.rows(0, d).into_owned(), y.rows(d, d).into_owned());
    let rhs = |y: &DVector<f64>| {
        let (beta, _) = beta_from_zeta(&y.rows(0, d).into_owned(), log_alpha);
        let g = data.grad_unchecked(&beta);
        let mut out = DVector::zeros(2 * d);
        out.rows_mut(0, d).copy_from(&(&g * -rate));
        out.rows_mut(d, d).copy_from(&g);
        out
    };
    let tol = Tolerances { rtol: cfg.rel_tol, atol: cfg.abs_tol, max_steps: cfg.max_steps };
    // The ζ-block of the Jacobian is −2 ln(1/α) H diag(√(β² + α⁴)), whose
    // spectral radius is at most rate · λmax(H) · max_i (|β_i| + α²).
    let lambda_max = data.gram().clone().symmetric_eigenvalues().max().max(0.0);
    let alpha_sq = (2.0 * log_alpha).exp();
    let bound = |y: &DVector<f64>| {
        let (beta, _) = beta_from_zeta(&y.rows(0, d).into_owned(), log_alpha);
        rate * lambda_max * (beta.amax() + alpha_sq)
    };
    let max_gap = cfg.time_frac * t_end;
    let mut last_step_loss = loss0;
    // whether the start of the current step is the last stored sample
    let mut start_stored = true;

    let push = |traj: &mut FlowTrajectory, t: f64, y: &DVector<f64>| {
        let (zeta, grad_int) = split(y);
        let (beta, sat) = beta_from_zeta(&zeta, log_alpha);
        traj.saturated |= sat;
        traj.loss.push(data.loss_unchecked(&beta));
        traj.times.push(t);
        traj.zeta.push(zeta);
        traj.beta.push(beta);
        traj.grad_integral.push(grad_int);
    };
    let threshold = |a: &DVector<f64>, b: &DVector<f64>| cfg.sample_frac * a.amax().max(b.amax()).max(beta_ref);

    integrate(rhs, bound, DVector::zeros(2 * d), t_end, tol, |step: &Step<'_>| {
        let (z1, _) = split(step.y1);
        let (beta1, _) = beta_from_zeta(&z1, log_alpha);
        let loss = data.loss_unchecked(&beta1);
        if loss > last_step_loss + slack {
            return Err(Error::Diverged { t: step.t1, increase: loss - last_step_loss });
        }
        last_step_loss = loss;

        let stored = traj.beta.last().unwrap();
        let close = (&beta1 - stored).amax() <= threshold(stored, &beta1);
        let last = step.t1 >= t_end;
        if close && !last && step.t1 - traj.times.last().unwrap() < max_gap {
            start_stored = false;
            return Ok(Control::Continue);
        }
        if !start_stored {
            // the skipped step start was close to the stored sample, so
            // anchoring there keeps consecutive samples within threshold
            push(&mut traj, step.t0, step.y0);
        }
        start_stored = true;
        // subdivide with the dense output until consecutive samples are close
        let mut pending = vec![(step.t1, step.y1.clone(), beta1)];
        let mut prev_beta = traj.beta.last().unwrap().clone();
        let mut prev_t = step.t0;
        while let Some((t, y, beta)) = pending.pop() {
            let far = (&beta - &prev_beta).amax() > threshold(&prev_beta, &beta) || t - prev_t > max_gap;
            if far && t - prev_t > 1e-12 * t.max(1.0) {
                let tm = 0.5 * (prev_t + t);
                let ym = step.interpolate(tm);
                let (zm, _) = split(&ym);
                let (bm, _) = beta_from_zeta(&zm, log_alpha);
                pending.push((t, y, beta));
                pending.push((tm, ym, bm));
                continue;
            }
            push(&mut traj, t, &y);
            prev_beta = beta;
            prev_t = t;
        }
        Ok(Control::Continue)
    })?;
    Ok(traj)
}
