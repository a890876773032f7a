//! Quantitative checks of the limit theory: sparse-recovery predictions,
//! structural audits of paths, and convergence of simulated flows.

mod audit;
mod rip;
mod sweep;

pub use audit::{termination_audit, TerminationAudit};
pub use rip::{rip_constant, rip_experiment, Assumption, LoopCheck, RipEstimate, RipMode, RipReport, SUBSET_LIMIT};
pub use sweep::{
    appendix_bounds, compact_windows, convergence_sweep, plateaus, window_sup_distance, BoundsReport, Plateau,
    SweepConfig, SweepRow, SweepTable,
};
