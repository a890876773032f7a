use nalgebra::DVector;
use serde::Serialize;

use super::integrator::{integrate, integrate_stiff, Control, Step, Tolerances};
use crate::checks::critical_point_check;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::saddle_path::SaddlePath;

/// Consecutive stiffness-capped explicit steps before switching to the
/// implicit integrator.
const STIFF_SWITCH: usize = 1000;
/// Tightest relative tolerance used by the implicit integrator; its error
/// estimate is only first order, so tighter values cost many steps.
const TAIL_RTOL: f64 = 1e-9;
/// Polyline vertices closer than this fraction of `max_seg` are skipped.
const MIN_SEG: f64 = 1e-4;

/// Settings for [`heteroclinic_orbit`].
#[derive(Debug, Clone, Copy)]
pub struct OrbitConfig {
    /// Launch offset; `None` means `1e-8·max(1, ‖saddle‖∞)`.
    pub eps0: Option<f64>,
    /// Arrival threshold on `‖|β| ⊙ ∇L(β)‖₂`, scaled by `max(1, ‖Xᵀy/n‖∞)`.
    pub tol_stop: f64,
    /// The orbit also has to satisfy `‖β'‖·t ≤ settle_tol·max(1, ‖β‖∞)`.
    /// Near a degenerate endpoint the residual shrinks like the squared
    /// distance, and `‖β'‖·t` is the distance still to go on a `1/t` tail.
    pub settle_tol: f64,
    /// Arc length after which the orbit is declared stalled.
    pub max_len: f64,
    /// Longest polyline segment, relative to `max(1, ‖β‖∞)`.
    pub max_seg: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self { eps0: None, tol_stop: 1e-10, settle_tol: 1e-8, max_len: 1e4, max_seg: 1e-2, rel_tol: 1e-11, max_steps: 1_000_000 }
    }
}

/// Follows the normalised flow `β' = −|β| ⊙ ∇L(β) / ‖·‖` out of `saddle`
/// along the given entering coordinates until it reaches the next critical
/// point. The returned polyline starts at `saddle`.
///
/// The un-normalised field is integrated instead; it traces the same curve
/// and the polyline is parametrised by its own arc length anyway.
pub fn heteroclinic_orbit(
    data: &Dataset,
    saddle: &DVector<f64>,
    entering: &[(usize, i8)],
    cfg: &OrbitConfig,
) -> Result<Vec<DVector<f64>>> {
    let d = data.d();
    if saddle.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: saddle.len() });
    }
    if entering.is_empty() {
        return Err(Error::InvalidLaunch("no entering coordinate".into()));
    }
    if !critical_point_check(data, saddle, 1e-8) {
        return Err(Error::InvalidLaunch("launch point is not a critical point".into()));
    }
    let g = data.grad_unchecked(saddle);
    let scale = saddle.amax().max(1.0);
    let eps0 = cfg.eps0.unwrap_or(1e-8 * scale);
    let mut start = saddle.clone();
    for &(i, sigma) in entering {
        let sigma = f64::from(sigma);
        if i >= d || !(sigma * -g[i] > 0.0) {
            return Err(Error::InvalidLaunch(format!("coordinate {i} with sign {sigma} is not an unstable direction")));
        }
        start[i] += eps0 * sigma;
    }

    let field = |b: &DVector<f64>| -b.abs().component_mul(&data.grad_unchecked(b));
    // Jacobian −diag(|β|) H − diag(sign(β) ∇L)
    let jacobian = |b: &DVector<f64>| {
        let g = data.grad_unchecked(b);
        let mut j = -data.gram().clone();
        for (i, mut row) in j.row_iter_mut().enumerate() {
            row *= b[i].abs();
            row[i] -= b[i].signum() * g[i];
        }
        j
    };
    let lambda_max = data.gram().clone().symmetric_eigenvalues().max().max(0.0);
    let bound = |b: &DVector<f64>| lambda_max * b.amax() + data.grad_unchecked(b).amax();
    let stop = cfg.tol_stop * data.grad_scale();
    let min_travel = 1e3 * eps0;
    let tol = Tolerances { rtol: cfg.rel_tol, atol: 1e-6 * eps0, max_steps: cfg.max_steps };

    let mut polyline = vec![saddle.clone(), start.clone()];
    let mut length = (&start - saddle).norm();
    let mut on_step = |step: &Step<'_>| -> Result<Control> {
        let seg = cfg.max_seg * step.y1.amax().max(1.0);
        let pieces = ((step.y1 - step.y0).norm() / seg).ceil().clamp(1.0, 1e4) as usize;
        let here = step.y1;
        let residual = here.abs().component_mul(&data.grad_unchecked(here)).norm();
        let travelled = (here - saddle).amax() > min_travel;
        let settled = step.f1.norm() * step.t1 <= cfg.settle_tol * here.amax().max(1.0);
        let done = residual < stop && travelled && settled;
        for k in 1..=pieces {
            let p = if k == pieces {
                step.y1.clone()
            } else {
                step.interpolate(step.t0 + (step.t1 - step.t0) * k as f64 / pieces as f64)
            };
            let last = polyline.last().unwrap();
            let gap = (&p - last).norm();
            // slow tails would otherwise add a vertex per tiny step
            if (gap >= MIN_SEG * seg || (done && k == pieces)) && data.loss_change(last, &p)? < 0.0 {
                length += gap;
                polyline.push(p);
            }
        }
        if length > cfg.max_len {
            return Err(Error::Stalled(length));
        }
        Ok(if done { Control::Stop } else { Control::Continue })
    };

    // explicit steps until the stiffness cap dictates the pace for a while,
    // then the implicit integrator for the slowly converging remainder
    let mut capped_run = 0usize;
    let mut tail: Option<DVector<f64>> = None;
    integrate(field, bound, start, f64::INFINITY, tol, |step: &Step<'_>| {
        let control = on_step(step)?;
        capped_run = if step.capped { capped_run + 1 } else { 0 };
        if matches!(control, Control::Continue) && capped_run >= STIFF_SWITCH {
            tail = Some(step.y1.clone());
            return Ok(Control::Stop);
        }
        Ok(control)
    })?;
    if let Some(y) = tail {
        let tail_tol = Tolerances { rtol: cfg.rel_tol.max(TAIL_RTOL), ..tol };
        integrate_stiff(field, jacobian, y, f64::INFINITY, tail_tol, &mut on_step)?;
    }
    Ok(polyline)
}

/// A plateau of the limit process in arc-length time.
#[derive(Debug, Clone, Serialize)]
pub struct SaddleSegment {
    #[serde(serialize_with = "crate::ser::vector")]
    pub beta: DVector<f64>,
    pub tau_in: f64,
    /// Infinite for the terminal plateau.
    pub tau_out: f64,
}

/// A heteroclinic orbit traversed at unit speed.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitSegment {
    #[serde(serialize_with = "crate::ser::vectors")]
    pub polyline: Vec<DVector<f64>>,
    pub tau_in: f64,
    pub tau_out: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Saddle(SaddleSegment),
    Orbit(OrbitSegment),
}

/// Limit object in arc-length time: plateaus at the saddles joined by the
/// heteroclinic orbits between them.
#[derive(Debug, Clone, Serialize)]
pub struct HybridPath {
    pub segments: Vec<Segment>,
}

impl HybridPath {
    pub fn orbits(&self) -> impl Iterator<Item = &OrbitSegment> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Orbit(o) => Some(o),
            Segment::Saddle(_) => None,
        })
    }

    /// Summed length of all orbits.
    pub fn total_length(&self) -> f64 {
        self.orbits().map(|o| o.tau_out - o.tau_in).sum()
    }

    /// The graph of the path as polylines (a plateau is a single point).
    pub fn graph(&self) -> Vec<Vec<DVector<f64>>> {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Saddle(p) => vec![p.beta.clone()],
                Segment::Orbit(o) => o.polyline.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HybridConfig {
    pub orbit: OrbitConfig,
    /// Allowed `∞`-distance between an orbit's end and the next saddle,
    /// relative to `max(1, ‖saddle‖∞)`.
    pub match_tol: f64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self { orbit: OrbitConfig::default(), match_tol: 1e-6 }
    }
}

fn polyline_length(points: &[DVector<f64>]) -> f64 {
    points.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// Stitches the saddles of `path` with the orbits launched along its hit
/// events.
pub fn build_hybrid_path(data: &Dataset, path: &SaddlePath, cfg: &HybridConfig) -> Result<HybridPath> {
    let mut segments = Vec::with_capacity(2 * path.saddles.len());
    let mut tau = 0.0;
    for k in 0..path.saddles.len() {
        let beta = path.saddles[k].clone();
        if k == path.loops() {
            segments.push(Segment::Saddle(SaddleSegment { beta, tau_in: tau, tau_out: f64::INFINITY }));
            break;
        }
        let dwell = path.times[k + 1] - path.times[k];
        segments.push(Segment::Saddle(SaddleSegment { beta: beta.clone(), tau_in: tau, tau_out: tau + dwell }));
        tau += dwell;

        let hit = &path.hits[k];
        let entering: Vec<(usize, i8)> = hit.coords.iter().copied().zip(hit.signs.iter().copied()).collect();
        let polyline = heteroclinic_orbit(data, &beta, &entering, &cfg.orbit)?;
        let next = &path.saddles[k + 1];
        let distance = (polyline.last().unwrap() - next).amax();
        if distance > cfg.match_tol * next.amax().max(1.0) {
            return Err(Error::SaddleMismatch { index: k + 1, distance });
        }
        let len = polyline_length(&polyline);
        segments.push(Segment::Orbit(OrbitSegment { polyline, tau_in: tau, tau_out: tau + len }));
        tau += len;
    }
    Ok(HybridPath { segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{identity_design, two_d_example};
    use crate::saddle_path::{run, PathConfig};

    fn strictly_decreasing(data: &Dataset, poly: &[DVector<f64>]) -> bool {
        poly.windows(2).all(|w| data.loss_change(&w[0], &w[1]).unwrap() < 0.0)
    }

    #[test]
    fn identity_orbit_is_axis_aligned() {
        let data = identity_design(&[3.0, 2.0, 1.0]);
        let poly = heteroclinic_orbit(&data, &DVector::zeros(3), &[(0, 1)], &OrbitConfig::default()).unwrap();
        let end = poly.last().unwrap();
        // 1-D logistic-type ODE β' = β(3 − β) ends at 3
        assert!((end[0] - 3.0).abs() < 1e-9);
        assert!(poly.iter().all(|p| p[1] == 0.0 && p[2] == 0.0));
        assert!((polyline_length(&poly) - 3.0).abs() < 1e-9);
        assert!(strictly_decreasing(&data, &poly));
    }

    #[test]
    fn two_d_second_orbit() {
        let data = two_d_example();
        let poly = heteroclinic_orbit(&data, &DVector::from_vec(vec![0.2, 0.0]), &[(1, 1)], &OrbitConfig::default()).unwrap();
        let end = poly.last().unwrap();
        assert!((end - DVector::from_vec(vec![0.0, 1.6])).amax() < 1e-6, "{end}");
        assert!(strictly_decreasing(&data, &poly));
        // coordinate 1 shrinks monotonically towards 0 while coordinate 2 grows
        for w in poly.windows(2) {
            assert!(w[1][0] <= w[0][0] && w[1][1] >= w[0][1]);
        }
    }

    #[test]
    fn bad_launches() {
        let data = two_d_example();
        let cfg = OrbitConfig::default();
        let not_critical = DVector::from_vec(vec![0.1, 0.0]);
        assert!(matches!(heteroclinic_orbit(&data, &not_critical, &[(1, 1)], &cfg), Err(Error::InvalidLaunch(_))));
        let saddle = DVector::from_vec(vec![0.2, 0.0]);
        assert!(matches!(heteroclinic_orbit(&data, &saddle, &[(1, -1)], &cfg), Err(Error::InvalidLaunch(_))));
        assert!(matches!(heteroclinic_orbit(&data, &saddle, &[], &cfg), Err(Error::InvalidLaunch(_))));
        let short = OrbitConfig { max_len: 0.5, ..cfg };
        assert!(matches!(heteroclinic_orbit(&data, &saddle, &[(1, 1)], &short), Err(Error::Stalled(_))));
    }

    #[test]
    fn one_dimensional_hybrid() {
        let data = identity_design(&[2.0]);
        let path = run(&data, &PathConfig::default()).unwrap();
        let hybrid = build_hybrid_path(&data, &path, &HybridConfig::default()).unwrap();
        assert_eq!(hybrid.segments.len(), 3);
        let Segment::Saddle(first) = &hybrid.segments[0] else { panic!() };
        assert_eq!((first.tau_in, first.tau_out), (0.0, 0.5));
        let Segment::Orbit(orbit) = &hybrid.segments[1] else { panic!() };
        assert!((orbit.tau_out - orbit.tau_in - 2.0).abs() < 1e-9);
        let Segment::Saddle(last) = &hybrid.segments[2] else { panic!() };
        assert_eq!(last.beta[0], 2.0);
        assert!(last.tau_out.is_infinite());
        assert!((hybrid.total_length() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn two_d_hybrid() {
        let data = two_d_example();
        let path = run(&data, &PathConfig::default()).unwrap();
        let hybrid = build_hybrid_path(&data, &path, &HybridConfig::default()).unwrap();
        let orbits: Vec<_> = hybrid.orbits().collect();
        assert_eq!(orbits.len(), 3);
        let second = &orbits[1].polyline;
        assert!((second[0][0] - 0.2).abs() < 1e-12);
        assert!(second.last().unwrap()[0].abs() < 1e-6);
        assert!((second.last().unwrap()[1] - 1.6).abs() < 1e-6);
        for o in &orbits {
            assert!(strictly_decreasing(&data, &o.polyline));
            assert!((polyline_length(&o.polyline) - (o.tau_out - o.tau_in)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_targets_single_plateau() {
        let data = identity_design(&[0.0, 0.0]);
        let path = run(&data, &PathConfig::default()).unwrap();
        let hybrid = build_hybrid_path(&data, &path, &HybridConfig::default()).unwrap();
        assert_eq!(hybrid.segments.len(), 1);
        assert_eq!(hybrid.orbits().count(), 0);
    }

    #[test]
    fn degenerate_terminal_saddle() {
        // with n < d the final saddle interpolates, its gradient vanishes and
        // the leaving coordinate decays like 1/t under stiff fast modes
        let data = crate::generate::generate(&crate::generate::GeneratorSpec::figure_one(0)).unwrap();
        let path = run(&data, &PathConfig::default()).unwrap();
        let hybrid = build_hybrid_path(&data, &path, &HybridConfig::default()).unwrap();
        let last = hybrid.orbits().last().unwrap();
        let end = last.polyline.last().unwrap();
        assert!((end - path.final_saddle()).amax() < 1e-6 * path.final_saddle().amax());
        assert!(strictly_decreasing(&data, &last.polyline));
        assert!(last.polyline.len() < 100_000);
    }
}
