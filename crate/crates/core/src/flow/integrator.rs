//! Integrators for autonomous systems `y' = f(y)`: Dormand–Prince 5(4) with
//! a PI step-size controller, and the linearly implicit ROS2 for stiff
//! stretches. Both hand out cubic Hermite dense output.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

/// One accepted step, handed to the observer.
pub(crate) struct Step<'a> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a DVector<f64>,
    pub y1: &'a DVector<f64>,
    pub f0: &'a DVector<f64>,
    pub f1: &'a DVector<f64>,
    /// Whether the step length was set by the stiffness cap.
    pub capped: bool,
}

impl Step<'_> {
    /// Cubic Hermite interpolant at `t ∈ [t0, t1]`.
    pub fn interpolate(&self, t: f64) -> DVector<f64> {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        self.y0 * h00 + self.f0 * (h10 * h) + self.y1 * h01 + self.f1 * (h11 * h)
    }
}

pub(crate) enum Control {
    Continue,
    Stop,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Hairer's PI controller constants for DOPRI5.
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Largest `|z|` on the negative real axis kept by the step cap. The real
/// stability interval of the pair ends at `z ≈ −3.3066`, where the
/// amplification factor is exactly `+1`; a controller parked there sees a
/// spurious steady state, so the cap keeps well inside.
pub(crate) const STIFF_LIMIT: f64 = 2.5;

/// Integrates from `t = 0` until `t_end` (which may be infinite) or until
/// `observe` returns [`Control::Stop`]. Returns the final time.
///
/// `spectral_bound(y)` must bound the spectral radius of the Jacobian at
/// `y`; steps are capped at `STIFF_LIMIT / spectral_bound(y)`.
pub(crate) fn integrate<F, B, O>(
    mut f: F,
    spectral_bound: B,
    y0: DVector<f64>,
    t_end: f64,
    tol: Tolerances,
    mut observe: O,
) -> Result<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    B: Fn(&DVector<f64>) -> f64,
    O: FnMut(&Step<'_>) -> Result<Control>,
{
    let n = y0.len();
    let mut t = 0.0;
    let mut y = y0;
    let mut k1 = f(&y);
    let scale = |a: &DVector<f64>, b: &DVector<f64>, i: usize| tol.atol + tol.rtol * a[i].abs().max(b[i].abs());

    let mut h = {
        let d0 = (0..n).map(|i| (y[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt();
        let d1 = (0..n).map(|i| (k1[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(t_end)
    };
    let mut fac_old = 1e-4f64;
    let mut steps = 0usize;

    while t < t_end {
        if steps >= tol.max_steps {
            return Err(Error::TooManySteps(steps));
        }
        steps += 1;
        let rho = spectral_bound(&y);
        let mut capped = false;
        if rho > 0.0 && h >= STIFF_LIMIT / rho {
            h = STIFF_LIMIT / rho;
            capped = true;
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepUnderflow(t));
        }

        let k2 = f(&(&y + &k1 * (h * A21)));
        let k3 = f(&(&y + (&k1 * A31 + &k2 * A32) * h));
        let k4 = f(&(&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h));
        let k5 = f(&(&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h));
        let y6 = &y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h;
        let k6 = f(&y6);
        let y_new = &y + (&k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
        let k7 = f(&y_new);
        let e = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;

        let mut err = (0..n).map(|i| (e[i] / scale(&y, &y_new, i)).powi(2)).sum::<f64>();
        err = if n == 0 { 0.0 } else { (err / n as f64).sqrt() };
        if !err.is_finite() {
            h *= FAC_MIN;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            fac_old = err.max(1e-4);
            let t_new = if last { t_end } else { t + h };
            let step = Step { t0: t, t1: t_new, y0: &y, y1: &y_new, f0: &k1, f1: &k7, capped };
            let control = observe(&step)?;
            t = t_new;
            y = y_new;
            k1 = k7;
            if matches!(control, Control::Stop) {
                break;
            }
            h /= fac;
        } else {
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }
    Ok(t)
}

// ROS2 with γ = 1 + 1/√2 (L-stable); the embedded solution is the
// linearly implicit Euler step.
const GAMMA: f64 = 1.0 + std::f64::consts::FRAC_1_SQRT_2;

/// Linearly implicit ROS2 with an order-1 error estimate. `jacobian(y)` must
/// return `∂f/∂y`. Same contract as [`integrate`] otherwise; steps are never
/// capped, so it suits stiff systems whose solution varies slowly.
pub(crate) fn integrate_stiff<F, J, O>(
    mut f: F,
    jacobian: J,
    y0: DVector<f64>,
    t_end: f64,
    tol: Tolerances,
    mut observe: O,
) -> Result<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> DMatrix<f64>,
    O: FnMut(&Step<'_>) -> Result<Control>,
{
    let n = y0.len();
    let mut t = 0.0;
    let mut y = y0;
    let mut f0 = f(&y);
    let scale = |a: &DVector<f64>, b: &DVector<f64>, i: usize| tol.atol + tol.rtol * a[i].abs().max(b[i].abs());
    let mut h = {
        let d0 = (0..n).map(|i| (y[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt();
        let d1 = (0..n).map(|i| (f0[i] / scale(&y, &y, i)).powi(2)).sum::<f64>().sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(t_end)
    };
    let mut steps = 0usize;
    let mut jac = jacobian(&y);

    while t < t_end {
        if steps >= tol.max_steps {
            return Err(Error::TooManySteps(steps));
        }
        steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepUnderflow(t));
        }
        let w = DMatrix::identity(n, n) - &jac * (GAMMA * h);
        let lu = w.lu();
        let Some(k1) = lu.solve(&f0) else {
            h *= FAC_MIN;
            continue;
        };
        let Some(k2) = lu.solve(&(f(&(&y + &k1 * h)) - &k1 * 2.0)) else {
            h *= FAC_MIN;
            continue;
        };
        let y_new = &y + (&k1 * 1.5 + &k2 * 0.5) * h;
        let e = (&k1 + &k2) * (0.5 * h);
        let mut err = (0..n).map(|i| (e[i] / scale(&y, &y_new, i)).powi(2)).sum::<f64>();
        err = if n == 0 { 0.0 } else { (err / n as f64).sqrt() };
        if !err.is_finite() {
            h *= FAC_MIN;
            continue;
        }
        let fac = (SAFETY / err.sqrt()).clamp(FAC_MIN, 5.0);
        if err <= 1.0 {
            let f1 = f(&y_new);
            let t_new = if last { t_end } else { t + h };
            let step = Step { t0: t, t1: t_new, y0: &y, y1: &y_new, f0: &f0, f1: &f1, capped: false };
            let control = observe(&step)?;
            t = t_new;
            y = y_new;
            f0 = f1;
            if matches!(control, Control::Stop) {
                break;
            }
            jac = jacobian(&y);
            h *= fac;
        } else {
            h *= fac.min(1.0);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerances = Tolerances { rtol: 1e-10, atol: 1e-12, max_steps: 100_000 };

    #[test]
    fn exponential_decay() {
        let mut last = DVector::zeros(1);
        let t = integrate(|y| -y, |_| 1.0, DVector::from_element(1, 1.0), 3.0, TOL, |s| {
            last = s.y1.clone();
            Ok(Control::Continue)
        })
        .unwrap();
        assert_eq!(t, 3.0);
        assert!((last[0] - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_and_dense_output() {
        let mut worst = 0.0f64;
        integrate(
            |y| DVector::from_vec(vec![y[1], -y[0]]),
            |_| 1.0,
            DVector::from_vec(vec![1.0, 0.0]),
            10.0,
            TOL,
            |s| {
                let tm = 0.5 * (s.t0 + s.t1);
                let ym = s.interpolate(tm);
                worst = worst.max((ym[0] - tm.cos()).abs());
                Ok(Control::Continue)
            },
        )
        .unwrap();
        assert!(worst < 1e-6, "dense output error {worst}");
    }

    #[test]
    fn observer_stop_and_step_budget() {
        let t = integrate(|y| y.clone(), |_| 1.0, DVector::from_element(1, 1.0), f64::INFINITY, TOL, |s| {
            Ok(if s.y1[0] > 10.0 { Control::Stop } else { Control::Continue })
        })
        .unwrap();
        assert!(t > 10f64.ln() && t < 3.0);
        let tight = Tolerances { max_steps: 3, ..TOL };
        let err = integrate(|y| -y, |_| 1.0, DVector::from_element(1, 1.0), 100.0, tight, |_| Ok(Control::Continue));
        assert!(matches!(err, Err(Error::TooManySteps(3))));
    }

    #[test]
    fn stiff_linear_system_reaches_equilibrium() {
        // y' = −A(y − 1) with eigenvalues 1e4 and 1e-2: a controller left to
        // itself settles on the stability boundary and stalls short of 1
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[1e4, 0.0, 0.0, 1e-2]);
        let target = DVector::from_element(2, 1.0);
        let mut last = DVector::zeros(2);
        let loose = Tolerances { rtol: 1e-6, atol: 1e-9, max_steps: 10_000_000 };
        integrate(|y| -(&a * (y - &target)), |_| 1e4, DVector::zeros(2), 1000.0, loose, |s| {
            last = s.y1.clone();
            Ok(Control::Continue)
        })
        .unwrap();
        assert!((last - target).amax() < 1e-3);
    }

    #[test]
    fn rosenbrock_handles_stiffness_in_few_steps() {
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[1e4, 0.0, 0.0, 1e-2]);
        let target = DVector::from_element(2, 1.0);
        let mut last = DVector::zeros(2);
        let mut steps = 0;
        let loose = Tolerances { rtol: 1e-6, atol: 1e-9, max_steps: 100_000 };
        let jac = |_: &DVector<f64>| -a.clone();
        integrate_stiff(|y| -(&a * (y - &target)), jac, DVector::zeros(2), 1000.0, loose, |s| {
            last = s.y1.clone();
            steps += 1;
            Ok(Control::Continue)
        })
        .unwrap();
        // exact: 1 − e^{−10} in the slow coordinate
        assert!((last[0] - 1.0).abs() < 1e-6);
        assert!((last[1] - (1.0 - (-10.0f64).exp())).abs() < 1e-5, "{last}");
        assert!(steps < 10_000, "{steps}");
    }

    #[test]
    fn rosenbrock_tracks_algebraic_decay() {
        // y' = −y² from y(0) = 1 has y(t) = 1/(1 + t)
        let mut last = (0.0, DVector::zeros(1));
        let mut worst = 0.0f64;
        let mut steps = 0;
        let tol = Tolerances { rtol: 1e-8, atol: 1e-14, max_steps: 1_000_000 };
        integrate_stiff(
            |y| y.map(|v| -v * v),
            |y| DMatrix::from_element(1, 1, -2.0 * y[0]),
            DVector::from_element(1, 1.0),
            1e6,
            tol,
            |s| {
                let tm = 0.5 * (s.t0 + s.t1);
                worst = worst.max((s.interpolate(tm)[0] * (1.0 + tm) - 1.0).abs());
                last = (s.t1, s.y1.clone());
                steps += 1;
                Ok(Control::Continue)
            },
        )
        .unwrap();
        assert_eq!(last.0, 1e6);
        assert!((last.1[0] * (1.0 + 1e6) - 1.0).abs() < 1e-5, "{}", last.1[0]);
        assert!(worst < 1e-5, "{worst}");
        assert!(steps < 300_000, "{steps}");
    }
}
