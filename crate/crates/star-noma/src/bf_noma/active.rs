//! Active-beamforming subproblem: semidefinite relaxation of the per-user
//! beamformer design with reciprocal-SINR slacks and the log-reciprocal
//! Taylor surrogate, iterated to a stationary point. The relaxation's
//! optimum is rank-one by construction, which the eigen-ratio audit checks.

use nalgebra::{Complex, DMatrix, DVector};

use super::{row_outer, AoParams, BfError, InnerStep};
use crate::channel::ChannelRealization;
use crate::conic::{
    extract_rank_one, taylor_log_recip, Expr, HermitianVar, ProgramBuilder, RankOneKind,
    SolveStatus,
};
use crate::rates::{effective_row, DecodingOrder};
use crate::scene::Scene;
use crate::starris::StarConfig;

type C64 = Complex<f64>;

#[derive(Debug, Clone)]
pub struct ActiveResult {
    pub w: Vec<DVector<C64>>,
    /// λ_max/Tr per user's W at the last inner iterate
    pub rank_one_ratios: Vec<f64>,
    pub trace: Vec<InnerStep>,
}

/// Receiver/signal slack pairs: for each signal `i`, receivers are `i`
/// itself and every later-decoded user `k ∈ J_i` (SIC decodability).
fn slack_pairs(order: &DecodingOrder, n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..n {
        pairs.push((i, i));
        for &k in order.decoded_after(0, i) {
            pairs.push((i, k));
        }
    }
    pairs
}

pub fn solve_active_bf(
    scene: &Scene,
    chan: &ChannelRealization,
    star: &StarConfig,
    order: &DecodingOrder,
    prev_w: &[DVector<C64>],
    r_min: f64,
    params: &AoParams,
) -> Result<ActiveResult, BfError> {
    let n = scene.n_users();
    let n_t = scene.n_t;

    // noise-normalized channel outer products: Tr(W H̄_k) is received SNR-like
    let h_mats: Vec<DMatrix<C64>> = (0..n)
        .map(|k| {
            let row = effective_row(&chan.r[k], star, scene.users[k].side, &chan.g);
            row_outer(&row, chan.path_loss[k] / scene.sigma2)
        })
        .collect();

    let pairs = slack_pairs(order, n);
    let trace_of = |w_vals: &[DMatrix<C64>], j: usize, k: usize| -> f64 {
        (0..n_t)
            .map(|p| (0..n_t).map(|q| (w_vals[j][(p, q)] * h_mats[k][(q, p)]).re).sum::<f64>())
            .sum()
    };

    let mut w_vals: Vec<DMatrix<C64>> = prev_w.iter().map(|w| &*w * w.adjoint()).collect();
    for i in 0..n {
        if trace_of(&w_vals, i, i) < 1e-20 && r_min > 0.0 {
            return Err(BfError::Infeasible(format!(
                "user {i}: vanishing effective channel with a positive rate floor"
            )));
        }
    }

    let mut inner = Vec::new();
    let mut prev_obj = f64::NEG_INFINITY;
    for _ in 0..params.max_inner_iter {
        // expansion points from the current block of matrices
        let points: Vec<(f64, f64)> = pairs
            .iter()
            .map(|&(i, k)| {
                let t = trace_of(&w_vals, i, k).max(1e-18);
                let interf: f64 = order
                    .decoded_after(0, i)
                    .iter()
                    .map(|&j| trace_of(&w_vals, j, k))
                    .sum();
                (1.0 / t, interf + 1.0)
            })
            .collect();

        let mut pb = ProgramBuilder::new();
        let w_vars: Vec<HermitianVar> =
            (0..n).map(|_| HermitianVar::new(&mut pb, n_t)).collect();
        let r_vars: Vec<_> = (0..n).map(|_| pb.var()).collect();

        for (p_idx, &(i, k)) in pairs.iter().enumerate() {
            let (x0, y0) = points[p_idx];
            let tl = taylor_log_recip(x0, y0)?;
            // scaled slacks ξ = x/x̃, υ = y/ỹ keep every coefficient O(1)
            let xi = pb.var();
            let up = pb.var();
            // 1/x ≤ Tr(W_i H̄_k)  ⟺  ξ · (x̃·Tr) ≥ 1
            let t_scaled = w_vars[i].trace_product(&(&h_mats[k] * C64::new(x0, 0.0)));
            pb.soc(vec![
                xi + t_scaled.clone(),
                Expr::from(xi) - t_scaled,
                Expr::constant(2.0),
            ]);
            // y ≥ interference + 1  ⟺  υ ≥ (Σ Tr + 1)/ỹ
            let mut interf = Expr::constant(1.0 / y0);
            for &j in order.decoded_after(0, i) {
                interf = interf + w_vars[j].trace_product(&(&h_mats[k] * C64::new(1.0 / y0, 0.0)));
            }
            pb.nonneg(up - interf);
            // R_i ≤ Taylor lower bound of log₂(1 + 1/(xy)) in scaled form
            let bound = (xi - 1.0) * (tl.ax * x0) + (up - 1.0) * (tl.ay * y0) + tl.a0;
            pb.nonneg(bound - r_vars[i]);
        }

        for i in 0..n {
            pb.nonneg(r_vars[i] - r_min);
            // received-power ordering along the decoding order (fairness)
            let scale = 1.0 / trace_of(&w_vals, i, i).max(1e-18);
            for &j in order.decoded_after(0, i) {
                let own = w_vars[i].trace_product(&(&h_mats[i] * C64::new(scale, 0.0)));
                let later = w_vars[j].trace_product(&(&h_mats[j] * C64::new(scale, 0.0)));
                pb.nonneg(later - own);
            }
        }

        let total: Expr = Expr::sum(w_vars.iter().map(|w| w.trace()));
        pb.nonneg(-total + scene.p_max);
        pb.maximize(Expr::sum(
            (0..n).map(|i| Expr::from(r_vars[i]) * scene.users[i].weight),
        ));

        let res = pb.solve(&params.solver)?;
        match res.status {
            SolveStatus::Optimal => {}
            // a degenerate re-expansion can stall the solver; fall back to
            // the last good iterate (the caller reject-steps on true WSR)
            _ if !inner.is_empty() => {
                log::debug!(
                    "active-BF re-solve ended with {:?}; keeping previous iterate",
                    res.status
                );
                break;
            }
            SolveStatus::Infeasible => {
                return Err(BfError::Infeasible("active-BF surrogate".into()))
            }
            _ => return Err(BfError::Numerical("active-BF solve".into())),
        }
        let obj = -res.objective;
        w_vals = w_vars.iter().map(|w| w.value(&res)).collect();
        inner.push(InnerStep {
            objective: obj,
            iterations: res.iterations,
        });
        if (obj - prev_obj).abs() <= params.inner_tol {
            break;
        }
        prev_obj = obj;
    }

    let mut w = Vec::with_capacity(n);
    let mut ratios = Vec::with_capacity(n);
    for mat in &w_vals {
        let tr: f64 = (0..n_t).map(|p| mat[(p, p)].re).sum();
        let vec = extract_rank_one(mat, RankOneKind::Beamformer)?;
        let lam = vec.norm_squared();
        ratios.push(if tr > 1e-300 { lam / tr } else { 1.0 });
        w.push(vec);
    }
    Ok(ActiveResult {
        w,
        rank_one_ratios: ratios,
        trace: inner,
    })
}
