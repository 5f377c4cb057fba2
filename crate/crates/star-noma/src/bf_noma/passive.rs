//! Passive-beamforming subproblem: joint transmission/reflection surface
//! design over lifted matrices V_t, V_r with coupled diagonals
//! (energy-splitting), solved by successive convex approximation plus
//! sequential rank-one constraint relaxation, then projected back to a
//! feasible surface configuration with a reject-step safeguard.

use nalgebra::{Complex, DMatrix, DVector};

use super::{element_response, AoParams, BfError, InnerStep};
use crate::channel::ChannelRealization;
use crate::conic::{
    dominant_eigpair, extract_rank_one, taylor_log_recip, Expr, HermitianVar, ProgramBuilder,
    RankOneKind, SolveStatus,
};
use crate::rates::{wsr, BeamformingSolution, DecodingOrder};
use crate::scene::{Scene, Side};
use crate::starris::{project_feasible, StarConfig, EPS_BETA};

type C64 = Complex<f64>;

/// Eigen-ratio at which a lifted side counts as rank-one.
const RANK_ONE_REACHED: f64 = 1.0 - 1e-4;
/// Additive tightening step of the relaxation parameter per iteration.
const EPSILON_STEP: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct PassiveResult {
    pub star: StarConfig,
    /// λ_max/Tr of (V_t, V_r) at the last iterate
    pub eigen_ratios: [f64; 2],
    pub trace: Vec<InnerStep>,
    /// false when the reject-step safeguard kept the entry configuration
    pub accepted: bool,
}

pub fn solve_passive_bf(
    scene: &Scene,
    chan: &ChannelRealization,
    w: &[DVector<C64>],
    order: &DecodingOrder,
    entry: &StarConfig,
    r_min: f64,
    params: &AoParams,
) -> Result<PassiveResult, BfError> {
    let n = scene.n_users();
    let m = scene.m();

    // per-(receiver k, signal j) element-response outer products, noise
    // normalized: Tr(V_p ĥĥ†) is the received SNR-like power at user k
    let resp: Vec<Vec<DVector<C64>>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| {
                    element_response(&chan.r[k], &chan.g, &w[j])
                        * C64::new((chan.path_loss[k] / scene.sigma2).sqrt(), 0.0)
                })
                .collect()
        })
        .collect();
    let h_mat = |k: usize, j: usize| -> DMatrix<C64> { &resp[k][j] * resp[k][j].adjoint() };

    let side_of = |k: usize| scene.users[k].side;
    // the lift measures |v†d|² while the truth layer evaluates |vᵀd|², so
    // the SDP variable represents the conjugate of the surface vector:
    // conjugate on the way in and again on the way out
    let mut v_vals: [DMatrix<C64>; 2] = {
        let vt = entry.coefficient_vector(Side::Transmission).map(|c| c.conj());
        let vr = entry.coefficient_vector(Side::Reflection).map(|c| c.conj());
        [&vt * vt.adjoint(), &vr * vr.adjoint()]
    };
    let side_idx = |s: Side| match s {
        Side::Transmission => 0usize,
        Side::Reflection => 1usize,
    };

    let trace_of = |v: &DMatrix<C64>, h: &DMatrix<C64>| -> f64 {
        (0..m)
            .map(|p| (0..m).map(|q| (v[(p, q)] * h[(q, p)]).re).sum::<f64>())
            .sum()
    };

    let pairs = {
        let mut pairs = Vec::new();
        for i in 0..n {
            pairs.push((i, i));
            for &k in order.decoded_after(0, i) {
                pairs.push((i, k));
            }
        }
        pairs
    };

    let mut epsilon = [0.0f64; 2];
    let mut ratios = [1.0f64; 2];
    let mut inner = Vec::new();
    let mut prev_obj = f64::NEG_INFINITY;

    for _ in 0..params.max_inner_iter {
        let u_hint: [DVector<C64>; 2] = [
            dominant_eigpair(&v_vals[0])?.1,
            dominant_eigpair(&v_vals[1])?.1,
        ];

        let points: Vec<(f64, f64)> = pairs
            .iter()
            .map(|&(i, k)| {
                let vs = &v_vals[side_idx(side_of(k))];
                let t = trace_of(vs, &h_mat(k, i)).max(1e-18);
                let interf: f64 = order
                    .decoded_after(0, i)
                    .iter()
                    .map(|&j| trace_of(vs, &h_mat(k, j)))
                    .sum();
                (1.0 / t, interf + 1.0)
            })
            .collect();

        let mut pb = ProgramBuilder::new();
        let v_vars = [HermitianVar::new(&mut pb, m), HermitianVar::new(&mut pb, m)];
        let r_vars: Vec<_> = (0..n).map(|_| pb.var()).collect();

        // energy-splitting diagonal coupling with the closed β interval
        for e in 0..m {
            pb.eq_zero(v_vars[0].re(e, e) + v_vars[1].re(e, e) - 1.0);
            pb.nonneg(v_vars[0].re(e, e) - EPS_BETA);
            pb.nonneg(v_vars[1].re(e, e) - EPS_BETA);
        }

        // sequential rank-one relaxation rows
        for p in 0..2 {
            let uu = &u_hint[p] * u_hint[p].adjoint();
            pb.nonneg(v_vars[p].trace_product(&uu) - v_vars[p].trace() * epsilon[p]);
        }

        for (p_idx, &(i, k)) in pairs.iter().enumerate() {
            let (a0, b0) = points[p_idx];
            let tl = taylor_log_recip(a0, b0)?;
            let vk = &v_vars[side_idx(side_of(k))];
            let xi = pb.var();
            let up = pb.var();
            let t_scaled = vk.trace_product(&(h_mat(k, i) * C64::new(a0, 0.0)));
            pb.soc(vec![
                xi + t_scaled.clone(),
                Expr::from(xi) - t_scaled,
                Expr::constant(2.0),
            ]);
            let mut interf = Expr::constant(1.0 / b0);
            for &j in order.decoded_after(0, i) {
                interf = interf + vk.trace_product(&(h_mat(k, j) * C64::new(1.0 / b0, 0.0)));
            }
            pb.nonneg(up - interf);
            let bound = (xi - 1.0) * (tl.ax * a0) + (up - 1.0) * (tl.ay * b0) + tl.a0;
            pb.nonneg(bound - r_vars[i]);
        }

        for i in 0..n {
            pb.nonneg(r_vars[i] - r_min);
            let vi = &v_vars[side_idx(side_of(i))];
            let scale = trace_of(&v_vals[side_idx(side_of(i))], &h_mat(i, i)).max(1e-18);
            for &j in order.decoded_after(0, i) {
                let vj = &v_vars[side_idx(side_of(j))];
                let own = vi.trace_product(&(h_mat(i, i) * C64::new(1.0 / scale, 0.0)));
                let later = vj.trace_product(&(h_mat(j, j) * C64::new(1.0 / scale, 0.0)));
                pb.nonneg(later - own);
            }
        }

        pb.maximize(Expr::sum(
            (0..n).map(|i| Expr::from(r_vars[i]) * scene.users[i].weight),
        ));

        let res = pb.solve(&params.solver)?;
        match res.status {
            SolveStatus::Optimal => {}
            // a degenerate re-expansion can stall the solver; fall back to
            // the last good iterate (extraction + reject-step follow)
            _ if !inner.is_empty() => {
                log::debug!(
                    "passive-BF re-solve ended with {:?}; keeping previous iterate",
                    res.status
                );
                break;
            }
            SolveStatus::Infeasible => {
                return Err(BfError::Infeasible("passive-BF surrogate".into()))
            }
            _ => return Err(BfError::Numerical("passive-BF solve".into())),
        }
        let obj = -res.objective;
        v_vals = [v_vars[0].value(&res), v_vars[1].value(&res)];
        for p in 0..2 {
            let (lam, _) = dominant_eigpair(&v_vals[p])?;
            let tr: f64 = (0..m).map(|e| v_vals[p][(e, e)].re).sum();
            ratios[p] = if tr > 1e-300 { lam / tr } else { 1.0 };
            epsilon[p] = (ratios[p] + EPSILON_STEP).min(1.0);
        }
        inner.push(InnerStep {
            objective: obj,
            iterations: res.iterations,
        });
        let rank_done = ratios.iter().all(|&r| r >= RANK_ONE_REACHED);
        if rank_done && (obj - prev_obj).abs() <= params.inner_tol {
            break;
        }
        prev_obj = obj;
    }

    let raw_t = extract_rank_one(&v_vals[0], RankOneKind::StarSide)?.map(|c| c.conj());
    let raw_r = extract_rank_one(&v_vals[1], RankOneKind::StarSide)?.map(|c| c.conj());
    let candidate = project_feasible(&raw_t, &raw_r);

    // reject-step: extraction error must never lower the true WSR
    let mut sol = BeamformingSolution {
        scheme: scene.scheme,
        active: w.to_vec(),
        pafs: None,
        star: entry.clone(),
        per_slot_star: None,
        location: chan.star_location,
        order: order.clone(),
    };
    let before = wsr(&sol, chan, scene);
    sol.star = candidate.clone();
    let after = wsr(&sol, chan, scene);
    let accepted = after >= before - 1e-12;
    Ok(PassiveResult {
        star: if accepted { candidate } else { entry.clone() },
        eigen_ratios: ratios,
        trace: inner,
        accepted,
    })
}
