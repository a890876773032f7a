//! Small named datasets with known saddle paths.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::generate::{generate, Covariance, GeneratorSpec};

/// Gram matrix of the two-dimensional worked example.
///
/// The matrix sometimes quoted for this example, `((1, 0.2), (0.2, -0.2))`,
/// is indefinite and cannot be a Gram matrix. `((1, 0.2), (0.2, 0.1))` is
/// positive definite and reproduces the saddles `(0.2, 0)` and `(0, 1.6)`
/// on the way to `β* = (-0.2, 2)`.
pub fn two_d_gram() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.1])
}

pub fn two_d_beta_star() -> DVector<f64> {
    DVector::from_vec(vec![-0.2, 2.0])
}

/// Two-dimensional example: saddles `(0.2, 0)`, `(0, 1.6)`, `(-0.2, 2)` at
/// times `5`, `20/3`, `70/3`.
pub fn two_d_example() -> Dataset {
    Dataset::from_gram(&two_d_gram(), &two_d_beta_star()).expect("positive definite Gram")
}

/// Square design with `XᵀX/n = I` and `y = Xβ*`.
pub fn identity_design(beta_star: &[f64]) -> Dataset {
    let d = beta_star.len();
    let x = DMatrix::identity(d, d) * (d as f64).sqrt();
    let y = &x * DVector::from_column_slice(beta_star);
    Dataset::new(x, y).expect("identity design is valid")
}

/// Instance on which orthogonal matching pursuit, run for `n = 3` rounds,
/// stops at an interpolator with larger ℓ1 norm than the Lasso endpoint:
/// Gaussian `3 × 6` design from seed 1 with `β* = (1, 1, 1, 0, 0, 0)`.
pub fn omp_divergence() -> Dataset {
    let spec = GeneratorSpec { n: 3, d: 6, seed: 1, covariance: Covariance::Identity, beta_star: vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0] };
    generate(&spec).expect("valid spec")
}
