//! JSON and CSV writers. Floats use shortest round-trip formatting, so every
//! written value parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::DVector;
use saddleflow::dataset::csv_float;
use saddleflow::flow::{FlowTrajectory, HybridPath, Segment};
use saddleflow::SaddlePath;
use serde::Serialize;

/// Writes `text` to `dest`, or to stdout when `dest` is `None`.
pub fn emit(text: &str, dest: Option<&Path>) -> Result<()> {
    match dest {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn header(s: &mut String, lead: &[&str], d: usize, tail: &[&str]) {
    let mut cols: Vec<String> = lead.iter().map(|c| c.to_string()).collect();
    cols.extend((1..=d).map(|i| format!("beta_{i}")));
    cols.extend(tail.iter().map(|c| c.to_string()));
    s.push_str(&cols.join(","));
    s.push('\n');
}

fn row(s: &mut String, lead: &[String], beta: &DVector<f64>, tail: &[f64]) {
    let cells = lead.iter().cloned().chain(beta.iter().map(|v| csv_float(*v))).chain(tail.iter().map(|v| csv_float(*v)));
    s.push_str(&cells.collect::<Vec<_>>().join(","));
    s.push('\n');
}

/// `t, beta_1..beta_d, loss` per stored sample (`t` is accelerated time).
pub fn trajectory_csv(traj: &FlowTrajectory) -> String {
    let mut s = String::new();
    header(&mut s, &["t"], traj.beta.first().map_or(0, |b| b.len()), &["loss"]);
    for j in 0..traj.len() {
        row(&mut s, &[csv_float(traj.times[j])], &traj.beta[j], &[traj.loss[j]]);
    }
    s
}

/// One row per saddle: jump index, arrival time, saddle and its loss.
/// The loss of the limit process is constant between consecutive rows.
pub fn path_csv(path: &SaddlePath) -> String {
    let mut s = String::new();
    header(&mut s, &["k", "t"], path.final_saddle().len(), &["loss"]);
    for k in 0..path.saddles.len() {
        row(&mut s, &[k.to_string(), csv_float(path.times[k])], &path.saddles[k], &[path.losses[k]]);
    }
    s
}

/// Polylines of the hybrid path with arc-length time `tau`. Plateaus emit
/// their entry and (finite) exit points; orbits emit every vertex.
pub fn hybrid_csv(hybrid: &HybridPath, d: usize) -> String {
    let mut s = String::new();
    header(&mut s, &["segment", "kind", "tau"], d, &[]);
    for (id, seg) in hybrid.segments.iter().enumerate() {
        match seg {
            Segment::Saddle(p) => {
                for tau in [p.tau_in, p.tau_out].into_iter().filter(|t| t.is_finite()) {
                    row(&mut s, &[id.to_string(), "saddle".into(), csv_float(tau)], &p.beta, &[]);
                }
            }
            Segment::Orbit(o) => {
                let mut tau = o.tau_in;
                for (j, b) in o.polyline.iter().enumerate() {
                    if j > 0 {
                        tau += (b - &o.polyline[j - 1]).norm();
                    }
                    row(&mut s, &[id.to_string(), "orbit".into(), csv_float(tau)], b, &[]);
                }
            }
        }
    }
    s
}

/// `log10_alpha,hausdorff` for each simulated scale.
pub fn hausdorff_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("log10_alpha,hausdorff\n");
    for (a, h) in rows {
        let _ = writeln!(s, "{},{}", csv_float(*a), csv_float(*h));
    }
    s
}
