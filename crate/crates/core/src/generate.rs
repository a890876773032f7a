//! Seeded synthetic data: Gaussian features with diagonal covariance and
//! noiseless targets `y = Xβ*`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Name of the random stream, recorded next to every generated file.
pub const GENERATOR: &str = "ChaCha8Rng::seed_from_u64 + rand_distr::StandardNormal, row-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Covariance {
    Identity,
    /// Per-feature variances.
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    #[serde(default = "identity")]
    pub covariance: Covariance,
    pub beta_star: Vec<f64>,
}

fn identity() -> Covariance {
    Covariance::Identity
}

impl GeneratorSpec {
    /// The `(n, d) = (5, 7)` sparse-recovery setting with `β* = (10, 20, 0, …)`.
    pub fn figure_one(seed: u64) -> Self {
        let mut beta_star = vec![0.0; 7];
        beta_star[0] = 10.0;
        beta_star[1] = 20.0;
        Self { n: 5, d: 7, seed, covariance: Covariance::Identity, beta_star }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidArgument("n and d must be positive".into()));
        }
        if self.beta_star.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: self.beta_star.len() });
        }
        if let Covariance::Diagonal(v) = &self.covariance {
            if v.len() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, got: v.len() });
            }
            if v.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::InvalidArgument("variances must be positive and finite".into()));
            }
        }
        if self.beta_star.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("beta_star must be finite".into()));
        }
        Ok(())
    }
}

/// Draws `x_i ~ N(0, diag(H))` row by row from the seeded stream and sets
/// `y = Xβ*`.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sd: Vec<f64> = match &spec.covariance {
        Covariance::Identity => vec![1.0; spec.d],
        Covariance::Diagonal(v) => v.iter().map(|s| s.sqrt()).collect(),
    };
    let mut x = DMatrix::zeros(spec.n, spec.d);
    for i in 0..spec.n {
        for j in 0..spec.d {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[(i, j)] = sd[j] * z;
        }
    }
    let y = &x * DVector::from_column_slice(&spec.beta_star);
    Dataset::new(x, y)
}

/// Paths written by [`write_generated`].
#[derive(Debug, Clone)]
pub struct GeneratedFiles {
    pub x: PathBuf,
    pub y: PathBuf,
    pub spec: PathBuf,
}

/// Generates the data and writes `X.csv`, `y.csv` and `spec.json` into `dir`.
pub fn write_generated(spec: &GeneratorSpec, dir: &Path) -> Result<(Dataset, GeneratedFiles)> {
    let data = generate(spec)?;
    fs::create_dir_all(dir)?;
    let files = GeneratedFiles { x: dir.join("X.csv"), y: dir.join("y.csv"), spec: dir.join("spec.json") };
    data.write_csv(&files.x, &files.y)?;
    let record = serde_json::json!({ "spec": spec, "generator": GENERATOR });
    let mut text = serde_json::to_string_pretty(&record).map_err(|e| Error::InvalidData(e.to_string()))?;
    text.push('\n');
    fs::write(&files.spec, text)?;
    Ok((data, files))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_are_exact_products() {
        let spec = GeneratorSpec::figure_one(7);
        let data = generate(&spec).unwrap();
        assert_eq!((data.n(), data.d()), (5, 7));
        for i in 0..5 {
            assert_eq!(data.y()[i], 10.0 * data.x()[(i, 0)] + 20.0 * data.x()[(i, 1)]);
        }
    }

    #[test]
    fn zero_signal_gives_zero_targets() {
        let spec = GeneratorSpec { beta_star: vec![0.0; 4], ..GeneratorSpec { n: 3, d: 4, seed: 1, covariance: Covariance::Identity, beta_star: vec![] } };
        assert!(generate(&spec).unwrap().y().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = GeneratorSpec { covariance: Covariance::Diagonal(vec![1.0, 4.0, 0.25]), ..GeneratorSpec { n: 6, d: 3, seed: 42, covariance: Covariance::Identity, beta_star: vec![1.0, -2.0, 0.5] } };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_generated(&spec, a.path()).unwrap();
        write_generated(&spec, b.path()).unwrap();
        for f in ["X.csv", "y.csv", "spec.json"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
        let other = GeneratorSpec { seed: 43, ..spec.clone() };
        let c = tempfile::tempdir().unwrap();
        write_generated(&other, c.path()).unwrap();
        assert_ne!(fs::read(a.path().join("X.csv")).unwrap(), fs::read(c.path().join("X.csv")).unwrap());
        // the files load back to the same data
        let back = Dataset::from_csv(&a.path().join("X.csv"), &a.path().join("y.csv"), false).unwrap();
        let orig = generate(&spec).unwrap();
        assert_eq!(back.x(), orig.x());
        assert_eq!(back.y(), orig.y());
        let sd = (0..3).map(|j| (orig.x().column(j).norm_squared() / 6.0).sqrt()).collect::<Vec<_>>();
        assert!(sd[1] > sd[2]);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = GeneratorSpec::figure_one(0);
        spec.beta_star.pop();
        assert!(generate(&spec).is_err());
        let spec = GeneratorSpec { covariance: Covariance::Diagonal(vec![1.0; 7]), n: 0, ..GeneratorSpec::figure_one(0) };
        assert!(generate(&spec).is_err());
        let spec = GeneratorSpec { covariance: Covariance::Diagonal(vec![-1.0; 7]), ..GeneratorSpec::figure_one(0) };
        assert!(generate(&spec).is_err());
    }
}
