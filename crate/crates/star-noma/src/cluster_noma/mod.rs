//! Cluster-based pipeline: joint active-beamforming/power-allocation
//! subproblem over shared per-cluster beamformers with exponential
//! log-SINR slacks, the cluster passive-surface subproblem, the cluster
//! deployment-location subproblem, and an alternating-optimization driver
//! that refreshes the intra-cluster decoding order every iteration.

mod active;
mod driver;
mod location;
mod passive;

pub use active::{solve_active_paf, ActivePafResult};
pub use driver::ao_optimize_cluster;
pub use location::solve_location_cluster;
pub use passive::solve_passive_cluster;

pub use crate::bf_noma::{
    AoParams, AoReport, BfError, InnerStep, IterationRecord, LocationResult, PassiveResult,
    StepStatus,
};
