//! Beamformer-based pipeline: the active-beamforming SDR subproblem, the
//! passive surface subproblem with sequential rank-one relaxation, the
//! two-step deployment-location subproblem, and the alternating-optimization
//! driver that cycles them while recording the true weighted sum-rate.

mod active;
mod driver;
mod location;
mod passive;

pub use active::{solve_active_bf, ActiveResult};
pub use driver::ao_optimize;
pub use location::{solve_location, LocationResult};
pub use passive::{solve_passive_bf, PassiveResult};

use nalgebra::{Complex, DMatrix, DVector, RowDVector};
use thiserror::Error;

use crate::conic::{ConicError, SolveOptions};
use crate::rates::{BeamformingSolution, ConstraintReport};

type C64 = Complex<f64>;

#[derive(Debug, Error)]
pub enum BfError {
    #[error("subproblem infeasible: {0}")]
    Infeasible(String),
    #[error("numerical trouble in {0}")]
    Numerical(String),
    #[error("initialization failed: {0}")]
    InitFailed(String),
    #[error(transparent)]
    Conic(#[from] ConicError),
}

/// Tolerances and loop limits for one alternating-optimization run.
#[derive(Debug, Clone)]
pub struct AoParams {
    /// outer stop: |F⁽ᵏ⁾ − F⁽ᵏ⁻¹⁾| ≤ tol
    pub tol: f64,
    /// inner SCA stop on surrogate objective change
    pub inner_tol: f64,
    pub max_ao_iter: usize,
    pub max_inner_iter: usize,
    /// step-two location search radius around the step-one optimum, meters
    pub trust_radius: f64,
    /// step-one probe lattice is probe_grid × probe_grid over the region
    pub probe_grid: usize,
    pub optimize_location: bool,
    pub solver: SolveOptions,
}

impl Default for AoParams {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            inner_tol: 1e-3,
            max_ao_iter: 8,
            max_inner_iter: 30,
            trust_radius: 1.0,
            probe_grid: 5,
            optimize_location: true,
            solver: SolveOptions::default(),
        }
    }
}

/// Outcome of one block inside an AO iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// candidate accepted (true WSR did not decrease)
    Accepted,
    /// candidate discarded by the reject-step safeguard
    Rejected,
    /// block not run (e.g. location optimization disabled)
    Skipped,
}

impl std::fmt::Display for StepStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepStatus::Accepted => "accepted",
            StepStatus::Rejected => "rejected",
            StepStatus::Skipped => "skipped",
        })
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// true WSR after this AO iteration (rates::wsr, not a surrogate)
    pub wsr: f64,
    pub active: StepStatus,
    pub passive: StepStatus,
    pub location: StepStatus,
}

/// One inner SCA/solver step, kept for monotonicity audits.
#[derive(Debug, Clone)]
pub struct InnerStep {
    pub objective: f64,
    pub iterations: u32,
}

/// Full record of one alternating-optimization run.
#[derive(Debug, Clone)]
pub struct AoReport {
    /// F⁽ᵏ⁾ true-WSR sequence; index 0 is the initial feasible point
    pub f_trace: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub solution: BeamformingSolution,
    pub residuals: ConstraintReport,
    pub converged: bool,
    /// λ_max/Tr of each W from the last active solve
    pub rank_one_ratios: Vec<f64>,
}

impl AoReport {
    pub fn final_wsr(&self) -> f64 {
        *self.f_trace.last().expect("trace never empty")
    }
}

/// `h† h` outer product of an effective row channel, scaled: the Hermitian
/// matrix with `Tr(w w† H) = scale·|h w|²`.
pub(crate) fn row_outer(h: &RowDVector<C64>, scale: f64) -> DMatrix<C64> {
    let col = h.adjoint();
    (&col * h) * C64::new(scale, 0.0)
}

/// Column effective channels `diag(r†) G w_j`, the per-surface-element
/// response to beamformer `w_j` (before surface coefficients).
pub(crate) fn element_response(
    r: &DVector<C64>,
    g: &DMatrix<C64>,
    w: &DVector<C64>,
) -> DVector<C64> {
    let gw = g * w;
    DVector::from_fn(r.len(), |m, _| r[m].conj() * gw[m])
}
