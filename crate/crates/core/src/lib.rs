//! Saddle-to-saddle dynamics of gradient flow on two-layer diagonal linear
//! networks `β = u ⊙ v` trained from vanishing initialisation.
//!
//! The crate computes the limiting piecewise-constant process (jump times and
//! visited saddles), simulates the actual flow at a given initialisation
//! scale, and provides the baselines and verifiers used to cross-check the
//! two.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod checks;
pub mod constrained;
pub mod dataset;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod generate;
mod linalg;
pub mod saddle_path;
mod ser;
pub mod verify;

pub use checks::{critical_point_check, general_position_check};
pub use constrained::{constrained_lsq, SignPattern, SolveReport};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use saddle_path::{run, verify_key_equation, HitEvent, PathConfig, SaddlePath};
