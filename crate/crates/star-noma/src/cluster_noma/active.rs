//! Joint active-beamforming and power-allocation subproblem for the
//! cluster scheme: shared per-cluster beamformer matrices W_n plus
//! per-user power-allocation factors, with log-SINR slacks (x, y),
//! a geometric-mean slack ς for the signal product, and a bilinear
//! (c, d) upper bound for the intra-cluster interference product.
//! Each inner iterate re-expands every surrogate at the current point;
//! slacks are shifted/scaled there so all coefficients stay near unity.

use nalgebra::{Complex, DMatrix, DVector};

use super::{AoParams, BfError, InnerStep};
use crate::bf_noma::row_outer;
use crate::channel::ChannelRealization;
use crate::conic::{
    bilinear_upper, extract_rank_one, Expr, HermitianVar, ProgramBuilder, RankOneKind,
    SolveStatus,
};
use crate::rates::{effective_row, DecodingOrder};
use crate::scene::Scene;
use crate::starris::StarConfig;

type C64 = Complex<f64>;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

#[derive(Debug, Clone)]
pub struct ActivePafResult {
    /// per-cluster beamformers
    pub w: Vec<DVector<C64>>,
    /// per-cluster power-allocation factors, indexed like the cluster lists
    pub pafs: Vec<Vec<f64>>,
    /// λ_max/Tr per cluster W at the last inner iterate
    pub rank_one_ratios: Vec<f64>,
    pub trace: Vec<InnerStep>,
    /// worst observed violation of the y-slack monotone sandwich
    pub y_sandwich_violation: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn solve_active_paf(
    scene: &Scene,
    chan: &ChannelRealization,
    star: &StarConfig,
    order: &DecodingOrder,
    prev_w: &[DVector<C64>],
    prev_pafs: &[Vec<f64>],
    r_min: f64,
    params: &AoParams,
) -> Result<ActivePafResult, BfError> {
    let clusters = scene.clusters_or_singletons();
    let nc = clusters.len();
    let n_t = scene.n_t;

    // noise-normalized per-receiver outer products: Tr(W Ĥ_i) is SNR-like
    let h_mats: Vec<DMatrix<C64>> = (0..scene.n_users())
        .map(|i| {
            let row = effective_row(&chan.r[i], star, scene.users[i].side, &chan.g);
            row_outer(&row, chan.path_loss[i] / scene.sigma2)
        })
        .collect();

    let trace_of = |w_vals: &[DMatrix<C64>], n: usize, i: usize| -> f64 {
        (0..n_t)
            .map(|p| (0..n_t).map(|q| (w_vals[n][(p, q)] * h_mats[i][(q, p)]).re).sum::<f64>())
            .sum()
    };

    let mut w_vals: Vec<DMatrix<C64>> = prev_w.iter().map(|w| &*w * w.adjoint()).collect();
    let mut p_vals: Vec<Vec<f64>> = prev_pafs.to_vec();
    let paf_of = |p_vals: &[Vec<f64>], n: usize, user: usize| -> f64 {
        let k = clusters[n].iter().position(|&u| u == user).unwrap();
        p_vals[n][k]
    };

    for (n, cluster) in clusters.iter().enumerate() {
        for &i in cluster {
            if trace_of(&w_vals, n, i) < 1e-20 && r_min > 0.0 {
                return Err(BfError::Infeasible(format!(
                    "user {i}: vanishing effective channel with a positive rate floor"
                )));
            }
        }
    }

    let mut inner = Vec::new();
    let mut prev_obj = f64::NEG_INFINITY;
    let mut prev_y: Vec<f64> = Vec::new();
    let mut y_violation = 0.0f64;

    for _ in 0..params.max_inner_iter {
        let mut pb = ProgramBuilder::new();
        let w_vars: Vec<HermitianVar> =
            (0..nc).map(|_| HermitianVar::new(&mut pb, n_t)).collect();
        let p_vars: Vec<Vec<_>> = clusters
            .iter()
            .map(|c| {
                let vars = pb.vars(c.len());
                for &v in &vars {
                    pb.nonneg(Expr::from(v));
                }
                pb.eq_zero(Expr::sum(vars.iter().map(|&v| Expr::from(v))) - 1.0);
                vars
            })
            .collect();
        let p_expr = |n: usize, user: usize| -> Expr {
            let k = clusters[n].iter().position(|&u| u == user).unwrap();
            p_vars[n][k].into()
        };

        let mut objective = Expr::zero();
        let mut y_shifts: Vec<(Expr, f64)> = Vec::new();

        let mut slack_idx = 0;
        for (n, cluster) in clusters.iter().enumerate() {
            for &i in cluster {
                let js = order.decoded_after(n, i);
                let t0 = trace_of(&w_vals, n, i).max(1e-18);
                let inter0: f64 =
                    (0..nc).filter(|&n2| n2 != n).map(|n2| trace_of(&w_vals, n2, i)).sum();
                let pi0 = paf_of(&p_vals, n, i);
                let pj0: f64 = js.iter().map(|&j| paf_of(&p_vals, n, j)).sum();
                // §IV-D sandwich, Eq. (50): the fresh expansion point must be
                // dominated by the previous iterate's solved y-slack, which
                // certifies that the linearizer upper-bounded the realized
                // interference-plus-noise term
                if let Some(&prev) = prev_y.get(slack_idx) {
                    let den_true = pj0 * t0 + inter0 + 1.0;
                    y_violation = y_violation.max(den_true.ln() - prev);
                }
                slack_idx += 1;
                let num0 = ((pi0 + pj0) * t0 + inter0 + 1.0).max(1e-12);
                // floor keeps the bilinear-row coefficients bounded when the
                // interference at the expansion point vanishes
                let den0 = (pj0 * t0 + inter0 + 1.0).max(1e-4 * t0).max(1.0);

                let inter_expr = |scale: f64| -> Expr {
                    let mut e = Expr::constant(scale);
                    for n2 in 0..nc {
                        if n2 != n {
                            e = e + w_vars[n2]
                                .trace_product(&(&h_mats[i] * C64::new(scale, 0.0)));
                        }
                    }
                    e
                };

                // x-side, shifted by ln(num0): e^{x̂} ≤ num/num0 with the
                // signal product handled through ς'² ≤ (Σp)·Tr(W Ĥ)/num0
                let x_hat = pb.var();
                let sig = pb.var();
                pb.nonneg(Expr::from(sig));
                let p_sum = js
                    .iter()
                    .fold(p_expr(n, i), |acc, &j| acc + p_expr(n, j));
                let t_scaled =
                    w_vars[n].trace_product(&(&h_mats[i] * C64::new(1.0 / num0, 0.0)));
                pb.square_le_product(sig.into(), p_sum, t_scaled);
                let sig0 = (((pi0 + pj0) * t0) / num0).sqrt();
                let rhs = Expr::from(sig) * (2.0 * sig0) - sig0 * sig0 + inter_expr(1.0 / num0);
                pb.exp_le(x_hat.into(), Expr::constant(1.0), rhs);

                // y-side, shifted by ln(den0) so the exp linearization sits
                // at ŷ = 0 with unit slope: den/den0 ≤ ŷ + 1
                let y_hat = pb.var();
                let mut lhs = inter_expr(1.0 / den0);
                if !js.is_empty() {
                    // balanced scaling of the (c, d) pair: both expansion
                    // coordinates equal √(intra/den0)
                    let kappa = t0 / den0;
                    let d0 = pj0.max(1e-3);
                    let s_c = (kappa * d0).sqrt();
                    let s_d = (kappa / d0).sqrt();
                    let a = pb.var();
                    let b = pb.var();
                    pb.nonneg(
                        Expr::from(a)
                            - w_vars[n]
                                .trace_product(&(&h_mats[i] * C64::new(s_c / t0, 0.0))),
                    );
                    let d_sum = js
                        .iter()
                        .fold(Expr::zero(), |acc, &j| acc + p_expr(n, j) * s_d);
                    pb.nonneg(b - d_sum);
                    pb.nonneg(-Expr::from(b) + s_d);
                    let bu = bilinear_upper(s_c, s_d * d0);
                    let t_var = pb.var();
                    pb.quad_le(a + b, Expr::from(t_var) * 2.0);
                    lhs = lhs + t_var + bu.affine_expr(a.into(), b.into());
                }
                pb.nonneg(y_hat + 1.0 - lhs);
                y_shifts.push((Expr::from(y_hat), den0.ln()));

                // rate in the shifted slacks; the constant restores the shift
                let shift = (num0 / den0).ln();
                let r_expr =
                    (Expr::from(x_hat) - y_hat + shift) * LOG2_E;
                pb.nonneg(r_expr.clone() - r_min);
                objective = objective + r_expr * scene.users[i].weight;
            }
        }

        let total: Expr = Expr::sum(w_vars.iter().map(|w| w.trace()));
        pb.nonneg(-total + scene.p_max);
        pb.maximize(objective);

        let res = pb.solve(&params.solver)?;
        match res.status {
            SolveStatus::Optimal => {}
            // a degenerate re-expansion (e.g. a cluster starved of power)
            // can stall the solver; fall back to the last good iterate,
            // which the caller's reject-step evaluates on the true WSR
            _ if !inner.is_empty() => {
                log::debug!(
                    "active-BF/PAF re-solve ended with {:?}; keeping previous iterate",
                    res.status
                );
                break;
            }
            SolveStatus::Infeasible => {
                return Err(BfError::Infeasible("active-BF/PAF surrogate".into()))
            }
            other => {
                return Err(BfError::Numerical(format!(
                    "active-BF/PAF solve: {other:?}"
                )))
            }
        }
        let obj = -res.objective;
        w_vals = w_vars.iter().map(|w| w.value(&res)).collect();
        p_vals = p_vars
            .iter()
            .map(|vars| {
                let mut p: Vec<f64> = vars.iter().map(|&v| res.value(v).max(0.0)).collect();
                let s: f64 = p.iter().sum();
                let len = p.len();
                if s > 1e-12 {
                    for v in &mut p {
                        *v /= s;
                    }
                } else {
                    p.fill(1.0 / len as f64);
                }
                p
            })
            .collect();

        // record the solved y-slack values (in the unshifted log domain) for
        // the sandwich check at the next expansion
        prev_y = y_shifts
            .iter()
            .map(|(e, shift)| res.value_expr(e) + shift)
            .collect();

        inner.push(InnerStep {
            objective: obj,
            iterations: res.iterations,
        });
        if (obj - prev_obj).abs() <= params.inner_tol {
            break;
        }
        prev_obj = obj;
    }

    let mut w = Vec::with_capacity(nc);
    let mut ratios = Vec::with_capacity(nc);
    for mat in &w_vals {
        let tr: f64 = (0..n_t).map(|p| mat[(p, p)].re).sum();
        let vec = extract_rank_one(mat, RankOneKind::Beamformer)?;
        let lam = vec.norm_squared();
        ratios.push(if tr > 1e-300 { lam / tr } else { 1.0 });
        w.push(vec);
    }
    Ok(ActivePafResult {
        w,
        pafs: p_vals,
        rank_one_ratios: ratios,
        trace: inner,
        y_sandwich_violation: y_violation,
    })
}
