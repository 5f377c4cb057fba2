//! Conic-program assembly and the interface to the interior-point backend.
//!
//! Programs are written in the natural form "this affine expression lies in
//! that cone"; assembly converts them to the backend's `Ax + s = b, s ∈ K`
//! layout. Semidefinite blocks use the scaled upper-triangle (svec)
//! packing: column-major upper triangle with off-diagonal entries
//! multiplied by √2.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use thiserror::Error;

use super::expr::{Expr, Var};

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("invalid expansion point: {0}")]
    InvalidExpansionPoint(String),
    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NonHermitian(f64),
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("solver setup failed: {0}")]
    Backend(String),
}

#[derive(Debug, Clone)]
enum ConeSpec {
    Zero,
    Nonneg,
    Soc,
    Exp,
    Pow(f64),
    PsdTriangle(usize),
}

struct ConeBlock {
    spec: ConeSpec,
    rows: Vec<Expr>,
}

/// Outcome classification of one conic solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

/// Primal solution returned by [`ProgramBuilder::solve`].
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
}

impl SolveResult {
    pub fn value(&self, v: Var) -> f64 {
        self.x[v.0]
    }

    pub fn value_expr(&self, e: &Expr) -> f64 {
        e.eval(&self.x)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solver knobs; defaults match the inner-loop tolerances used throughout.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            verbose: false,
        }
    }
}

/// Incrementally assembled conic program, minimized over its variables.
#[derive(Default)]
pub struct ProgramBuilder {
    n_vars: usize,
    objective: Expr,
    blocks: Vec<ConeBlock>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self) -> Var {
        let v = Var(self.n_vars);
        self.n_vars += 1;
        v
    }

    pub fn vars(&mut self, n: usize) -> Vec<Var> {
        (0..n).map(|_| self.var()).collect()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Set the objective to minimize.
    pub fn minimize(&mut self, e: Expr) {
        self.objective = e;
    }

    /// Set the objective to maximize (stored negated).
    pub fn maximize(&mut self, e: Expr) {
        self.objective = -e;
    }

    /// Constrain `e = 0`.
    pub fn eq_zero(&mut self, e: Expr) {
        self.blocks.push(ConeBlock {
            spec: ConeSpec::Zero,
            rows: vec![e],
        });
    }

    /// Constrain `e ≥ 0`.
    pub fn nonneg(&mut self, e: Expr) {
        self.blocks.push(ConeBlock {
            spec: ConeSpec::Nonneg,
            rows: vec![e],
        });
    }

    /// Constrain `rows[0] ≥ ‖rows[1..]‖₂`.
    pub fn soc(&mut self, rows: Vec<Expr>) {
        assert!(rows.len() >= 2, "second-order cone needs at least two rows");
        self.blocks.push(ConeBlock {
            spec: ConeSpec::Soc,
            rows,
        });
    }

    /// Constrain `y·e^{x/y} ≤ z` with `y > 0` (closure thereof).
    pub fn exp_le(&mut self, x: Expr, y: Expr, z: Expr) {
        self.blocks.push(ConeBlock {
            spec: ConeSpec::Exp,
            rows: vec![x, y, z],
        });
    }

    /// Constrain `x^a · y^(1−a) ≥ |z|` with `x, y ≥ 0` and `0 < a < 1`.
    pub fn pow_ge(&mut self, a: f64, x: Expr, y: Expr, z: Expr) {
        assert!(a > 0.0 && a < 1.0, "power cone exponent must lie in (0,1)");
        self.blocks.push(ConeBlock {
            spec: ConeSpec::Pow(a),
            rows: vec![x, y, z],
        });
    }

    /// Constrain a full symmetric matrix of expressions to be PSD.
    /// Only the upper triangle of `mat` is read.
    pub fn psd(&mut self, mat: &[Vec<Expr>]) {
        let n = mat.len();
        assert!(mat.iter().all(|r| r.len() == n), "PSD block must be square");
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut rows = Vec::with_capacity(n * (n + 1) / 2);
        for col in 0..n {
            for row in 0..=col {
                let e = mat[row][col].clone();
                rows.push(if row == col { e } else { e * sqrt2 });
            }
        }
        self.blocks.push(ConeBlock {
            spec: ConeSpec::PsdTriangle(n),
            rows,
        });
    }

    /// Constrain `u² ≤ b` via a single second-order cone row.
    pub fn quad_le(&mut self, u: Expr, b: Expr) {
        // u² ≤ b  ⟺  ‖(2u, b−1)‖ ≤ b+1
        self.soc(vec![
            b.clone() + 1.0,
            b - 1.0,
            u * 2.0,
        ]);
    }

    /// Constrain `t² ≤ x·y` with `x, y ≥ 0` (rotated second-order cone).
    pub fn square_le_product(&mut self, t: Expr, x: Expr, y: Expr) {
        self.soc(vec![x.clone() + y.clone(), x - y, t * 2.0]);
    }

    /// Solve the assembled program.
    pub fn solve(&self, opts: &SolveOptions) -> Result<SolveResult, ConicError> {
        let n = self.n_vars;
        let mut q = vec![0.0; n];
        for &(v, c) in &self.objective.terms {
            q[v] += c;
        }

        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut ti: Vec<usize> = Vec::new();
        let mut tj: Vec<usize> = Vec::new();
        let mut tv: Vec<f64> = Vec::new();
        let mut row = 0usize;

        // merge adjacent scalar cones of like kind to keep the cone list short
        let mut pending_zero = 0usize;
        let mut pending_nonneg = 0usize;
        macro_rules! flush_scalars {
            () => {
                if pending_zero > 0 {
                    cones.push(SupportedConeT::ZeroConeT(pending_zero));
                    pending_zero = 0;
                }
                if pending_nonneg > 0 {
                    cones.push(SupportedConeT::NonnegativeConeT(pending_nonneg));
                    pending_nonneg = 0;
                }
            };
        }

        for block in &self.blocks {
            match block.spec {
                ConeSpec::Zero => {
                    if pending_nonneg > 0 {
                        cones.push(SupportedConeT::NonnegativeConeT(pending_nonneg));
                        pending_nonneg = 0;
                    }
                    pending_zero += 1;
                }
                ConeSpec::Nonneg => {
                    if pending_zero > 0 {
                        cones.push(SupportedConeT::ZeroConeT(pending_zero));
                        pending_zero = 0;
                    }
                    pending_nonneg += 1;
                }
                ConeSpec::Soc => {
                    flush_scalars!();
                    cones.push(SupportedConeT::SecondOrderConeT(block.rows.len()));
                }
                ConeSpec::Exp => {
                    flush_scalars!();
                    cones.push(SupportedConeT::ExponentialConeT());
                }
                ConeSpec::Pow(a) => {
                    flush_scalars!();
                    cones.push(SupportedConeT::PowerConeT(a));
                }
                ConeSpec::PsdTriangle(dim) => {
                    flush_scalars!();
                    cones.push(SupportedConeT::PSDTriangleConeT(dim));
                }
            }
            // s = b − Ax must equal the expression c + Σ a_v x_v
            for e in &block.rows {
                b.push(e.constant);
                for &(v, c) in &e.terms {
                    if c != 0.0 {
                        ti.push(row);
                        tj.push(v);
                        tv.push(-c);
                    }
                }
                row += 1;
            }
        }
        if pending_zero > 0 {
            cones.push(SupportedConeT::ZeroConeT(pending_zero));
        }
        if pending_nonneg > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(pending_nonneg));
        }

        let m = row;
        let a_mat = CscMatrix::new_from_triplets(m, n, ti, tj, tv);
        let p_mat = CscMatrix::zeros((n, n));

        let settings = DefaultSettings {
            verbose: opts.verbose,
            max_iter: opts.max_iter,
            tol_gap_abs: opts.tol,
            tol_gap_rel: opts.tol,
            tol_feas: opts.tol,
            ..DefaultSettings::default()
        };

        let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings)
            .map_err(|e| ConicError::Backend(format!("{e:?}")))?;
        solver.solve();

        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            _ => SolveStatus::NumericalTrouble,
        };
        Ok(SolveResult {
            status,
            x: sol.x.clone(),
            objective: sol.obj_val + self.objective.constant,
            iterations: solver.info.iterations,
        })
    }

    /// Cone-by-cone text listing of the program for regression comparison.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "vars {}", self.n_vars).unwrap();
        let fmt_expr = |e: &Expr| {
            let mut s = format!("{:.12e}", e.constant);
            for &(v, c) in &e.terms {
                s.push_str(&format!(" {c:+.12e}*x{v}"));
            }
            s
        };
        writeln!(out, "min {}", fmt_expr(&self.objective)).unwrap();
        for block in &self.blocks {
            let name = match block.spec {
                ConeSpec::Zero => "zero".to_string(),
                ConeSpec::Nonneg => "nonneg".to_string(),
                ConeSpec::Soc => "soc".to_string(),
                ConeSpec::Exp => "exp".to_string(),
                ConeSpec::Pow(a) => format!("pow {a:.12e}"),
                ConeSpec::PsdTriangle(n) => format!("psd {n}"),
            };
            writeln!(out, "cone {name}").unwrap();
            for e in &block.rows {
                writeln!(out, "  {}", fmt_expr(e)).unwrap();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{dominant_eigpair, HermitianVar};
    use approx::assert_relative_eq;
    use nalgebra::{Complex, DMatrix};

    #[test]
    fn lp_minimum() {
        let mut pb = ProgramBuilder::new();
        let x = pb.var();
        pb.nonneg(x - 1.0);
        pb.minimize(x.into());
        let res = pb.solve(&Default::default()).unwrap();
        assert!(res.is_optimal());
        assert_relative_eq!(res.value(x), 1.0, epsilon = 1e-6);
        assert_relative_eq!(res.objective, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn infeasible_pair_detected() {
        let mut pb = ProgramBuilder::new();
        let x = pb.var();
        pb.nonneg(x - 1.0);
        pb.nonneg(-x);
        pb.minimize(x.into());
        let res = pb.solve(&Default::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
    }

    #[test]
    fn soc_norm_bound() {
        // min t  s.t.  t >= ||(3, 4)||
        let mut pb = ProgramBuilder::new();
        let t = pb.var();
        pb.soc(vec![t.into(), Expr::constant(3.0), Expr::constant(4.0)]);
        pb.minimize(t.into());
        let res = pb.solve(&Default::default()).unwrap();
        assert_relative_eq!(res.value(t), 5.0, epsilon = 1e-6);
    }

    #[test]
    fn quad_le_square() {
        // min b  s.t.  u = 3, u^2 <= b  ->  b = 9
        let mut pb = ProgramBuilder::new();
        let u = pb.var();
        let b = pb.var();
        pb.eq_zero(u - 3.0);
        pb.quad_le(u.into(), b.into());
        pb.minimize(b.into());
        let res = pb.solve(&Default::default()).unwrap();
        assert_relative_eq!(res.value(b), 9.0, epsilon = 1e-5);
    }

    #[test]
    fn exp_cone_orientation() {
        // min z  s.t.  1 * e^{x/1} <= z, x = 2  ->  z = e^2
        let mut pb = ProgramBuilder::new();
        let x = pb.var();
        let z = pb.var();
        pb.eq_zero(x - 2.0);
        pb.exp_le(x.into(), Expr::constant(1.0), z.into());
        pb.minimize(z.into());
        let res = pb.solve(&Default::default()).unwrap();
        assert_relative_eq!(res.value(z), (2.0f64).exp(), epsilon = 1e-4);
    }

    #[test]
    fn pow_cone_fractional_power() {
        // min tau  s.t.  tau^{1/2.5} >= 2  ->  tau = 2^{2.5}
        let mut pb = ProgramBuilder::new();
        let tau = pb.var();
        pb.pow_ge(
            1.0 / 2.5,
            tau.into(),
            Expr::constant(1.0),
            Expr::constant(2.0),
        );
        pb.minimize(tau.into());
        let res = pb.solve(&Default::default()).unwrap();
        assert_relative_eq!(res.value(tau), 2.0f64.powf(2.5), epsilon = 1e-4);
    }

    #[test]
    fn sdp_trace_objective_hits_eigenvalue_bound() {
        // max Tr(WH) s.t. Tr(W) <= p, W >= 0  ->  p * lambda_max(H)
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let n = 4;
        let b = DMatrix::from_fn(n, n, |_, _| {
            Complex::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let h = &b * b.adjoint();
        let p = 2.5;

        let mut pb = ProgramBuilder::new();
        let w = HermitianVar::new(&mut pb, n);
        pb.nonneg(-w.trace() + p);
        pb.maximize(w.trace_product(&h));
        let res = pb.solve(&Default::default()).unwrap();
        assert!(res.is_optimal());
        let (lam, _) = dominant_eigpair(&h).unwrap();
        assert_relative_eq!(-res.objective, p * lam, epsilon = 1e-5 * p * lam);

        // recovered matrix is PSD and rank-one within tolerance
        let wv = w.value(&res);
        let (wl, _) = dominant_eigpair(&wv).unwrap();
        let tr: f64 = (0..n).map(|i| wv[(i, i)].re).sum();
        assert!(wl / tr >= 1.0 - 1e-6);
    }

    #[test]
    fn solve_is_deterministic() {
        let build = || {
            let mut pb = ProgramBuilder::new();
            let x = pb.var();
            let t = pb.var();
            pb.soc(vec![t.into(), x - 2.0]);
            pb.nonneg(x - 0.5);
            pb.minimize(t + 0.3 * x);
            pb
        };
        let a = build();
        let b = build();
        assert_eq!(a.dump(), b.dump());
        let ra = a.solve(&Default::default()).unwrap();
        let rb = b.solve(&Default::default()).unwrap();
        assert_eq!(ra.x, rb.x);
        assert_eq!(ra.objective, rb.objective);
    }
}
