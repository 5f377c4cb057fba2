//! Shared mathematical toolbox: a conic-program builder over the embedded
//! interior-point backend, the SCA linearizers used by every subproblem
//! (each a certified one-sided bound of the function it replaces), and
//! rank-one extraction machinery for the semidefinite relaxations.

mod builder;
mod eig;
mod expr;
mod hermitian;
mod linearize;

pub use builder::{ConicError, ProgramBuilder, SolveOptions, SolveResult, SolveStatus};
pub use eig::{dominant_eigpair, extract_rank_one, RankOneKind};
pub use expr::{Expr, Var};
pub use hermitian::HermitianVar;
pub use linearize::{
    bilinear_upper, exp_lower, normsq_lower, product_lower_for_distance, taylor_log_recip,
    BilinearUpper, ExpLower, NormsqLower, TaylorLogRecip,
};
