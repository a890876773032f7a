//! Reference solvers: the homotopy Lasso path and orthogonal matching pursuit.

mod lasso;
mod omp;

pub use lasso::{lasso_homotopy, LassoPath};
pub use omp::omp;
