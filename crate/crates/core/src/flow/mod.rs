//! Gradient flow of the diagonal network at a finite initialisation scale,
//! and the arc-length limit objects it is compared against.

mod arclength;
mod hausdorff;
mod integrator;
pub mod mirror;
mod orbit;
mod simulate;

pub use arclength::{arc_length_reparametrize, ArcLength};
pub use hausdorff::hausdorff_distance;
pub use mirror::{beta_from_zeta, log_alpha_threshold, potential, weights_from_beta, zeta_from_beta};
pub use orbit::{
    build_hybrid_path, heteroclinic_orbit, HybridConfig, HybridPath, OrbitConfig, OrbitSegment, SaddleSegment, Segment,
};
pub use simulate::{simulate, FlowTrajectory, SimConfig};
