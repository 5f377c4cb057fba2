//! Cluster deployment-location subproblem: the same two-step scheme as the
//! beamformer-based solver (coarse probe lattice, full-region SCA, trust-box
//! refinement, reject-step on the true weighted sum-rate), with the cluster
//! signal model in the surrogate — PAF-weighted intra-cluster interference
//! plus inter-cluster terms — and the equivalent-gain ordering kept as
//! linear constraints in the reciprocal-gain slacks.

use nalgebra::Complex;

use super::{AoParams, BfError, InnerStep, LocationResult};
use crate::channel::{ChannelModel, ChannelRealization};
use crate::conic::{product_lower_for_distance, Expr, ProgramBuilder, SolveStatus};
use crate::rates::{effective_row, wsr, BeamformingSolution};
use crate::scene::{distance, Position3, Scene};

type C64 = Complex<f64>;

const GAIN_FLOOR: f64 = 1e-12;

/// Received powers `|r_i† Θ G w_n|²/σ²` per (receiver, cluster beam).
fn small_scale_powers(
    scene: &Scene,
    sol: &BeamformingSolution,
    chan: &ChannelRealization,
) -> Vec<Vec<f64>> {
    (0..scene.n_users())
        .map(|i| {
            let row = effective_row(&chan.r[i], &sol.star, scene.users[i].side, &chan.g);
            sol.active
                .iter()
                .map(|w| {
                    let hw: C64 = (0..w.len()).map(|c| row[c] * w[c]).sum();
                    hw.norm_sqr() / scene.sigma2
                })
                .collect()
        })
        .collect()
}

fn true_wsr_at(
    model: &ChannelModel,
    sol: &BeamformingSolution,
    s: Position3,
) -> Result<f64, BfError> {
    let chan = model
        .realize_at(s)
        .map_err(|e| BfError::Numerical(format!("channel realization: {e}")))?;
    let mut cand = sol.clone();
    cand.location = s;
    Ok(wsr(&cand, &chan, model.scene()))
}

#[allow(clippy::too_many_arguments)]
fn sca_pass(
    model: &ChannelModel,
    sol: &BeamformingSolution,
    r_min: f64,
    start: Position3,
    trust: Option<(Position3, f64)>,
    params: &AoParams,
    trace: &mut Vec<InnerStep>,
) -> Result<Position3, BfError> {
    let scene = model.scene();
    let clusters = scene.clusters_or_singletons();
    let nc = clusters.len();
    let n = scene.n_users();
    let region = &scene.region;
    let pafs = sol.pafs.as_ref().expect("cluster solution must carry PAFs");
    let paf_of = |cl: usize, user: usize| -> f64 {
        let k = clusters[cl].iter().position(|&u| u == user).unwrap();
        pafs[cl][k]
    };
    let mut s_cur = start;
    let mut prev_obj = f64::NEG_INFINITY;

    for _ in 0..params.max_inner_iter {
        let chan = model
            .realize_at(s_cur)
            .map_err(|e| BfError::Numerical(format!("channel realization: {e}")))?;
        let u = small_scale_powers(scene, sol, &chan);
        let d_bs = distance(s_cur, scene.bs);
        let d_user: Vec<f64> = (0..n).map(|i| distance(s_cur, scene.users[i].pos)).collect();
        let tau0: Vec<f64> = (0..n).map(|i| (d_bs * d_user[i]).powf(scene.alpha)).collect();

        let mut pb = ProgramBuilder::new();
        let sx = pb.var();
        let sy = pb.var();
        pb.nonneg(sx - region.x_min);
        pb.nonneg(-Expr::from(sx) + region.x_max);
        pb.nonneg(sy - region.y_min);
        pb.nonneg(-Expr::from(sy) + region.y_max);
        if let Some((center, radius)) = trust {
            pb.nonneg(sx - (center.x - radius));
            pb.nonneg(-Expr::from(sx) + center.x + radius);
            pb.nonneg(sy - (center.y - radius));
            pb.nonneg(-Expr::from(sy) + center.y + radius);
        }

        let z = region.z_fixed;
        let phi = pb.var();
        pb.soc(vec![
            phi.into(),
            sx - scene.bs.x,
            sy - scene.bs.y,
            Expr::constant(z - scene.bs.z),
        ]);
        let phi_i: Vec<_> = (0..n)
            .map(|i| {
                let p = pb.var();
                let pos = scene.users[i].pos;
                pb.soc(vec![
                    p.into(),
                    sx - pos.x,
                    sy - pos.y,
                    Expr::constant(z - pos.z),
                ]);
                p
            })
            .collect();
        let tau: Vec<_> = (0..n).map(|_| pb.var()).collect();
        for i in 0..n {
            product_lower_for_distance(
                &mut pb,
                tau[i],
                phi,
                phi_i[i],
                d_bs,
                d_user[i],
                scene.alpha,
            )?;
        }

        // surrogate rate per user, affine in its τ slack
        let mut objective = Expr::zero();
        // interference on user i's own signal, small-scale part only
        let interf_of = |cl: usize, i: usize| -> f64 {
            let mut v: f64 = sol
                .order
                .decoded_after(cl, i)
                .iter()
                .map(|&j| paf_of(cl, j) * u[i][cl])
                .sum();
            for n2 in 0..nc {
                if n2 != cl {
                    v += u[i][n2];
                }
            }
            v
        };
        for (cl, cluster) in clusters.iter().enumerate() {
            for &i in cluster {
                let sig = paf_of(cl, i) * u[i][cl];
                let den = interf_of(cl, i) + tau0[i];
                let a0 = (1.0 + sig / den).log2();
                let c = sig * std::f64::consts::LOG2_E / ((sig + den) * den);
                let r_expr = (Expr::from(tau[i]) - tau0[i]) * (-c) + a0;
                pb.nonneg(r_expr.clone() - r_min);
                objective = objective + r_expr * scene.users[i].weight;
            }
        }

        // equivalent-gain ordering: a later-decoded user keeps the larger
        // equivalent gain, linear in the τ slacks under frozen small scale
        for (cl, cluster) in clusters.iter().enumerate() {
            for &i in cluster {
                let int_i: f64 = (0..nc).filter(|&n2| n2 != cl).map(|n2| u[i][n2]).sum();
                for &k in sol.order.decoded_after(cl, i) {
                    let int_k: f64 = (0..nc).filter(|&n2| n2 != cl).map(|n2| u[k][n2]).sum();
                    let scale = 1.0 / u[k][cl].max(u[i][cl]).max(GAIN_FLOOR);
                    let lhs = (Expr::from(tau[i]) + int_i) * (u[k][cl] * scale);
                    let rhs = (Expr::from(tau[k]) + int_k) * (u[i][cl] * scale);
                    pb.nonneg(lhs - rhs);
                }
            }
        }

        pb.maximize(objective);
        let res = pb.solve(&params.solver)?;
        match res.status {
            SolveStatus::Optimal => {}
            _ => break,
        }
        let obj = -res.objective;
        let s_next = scene
            .region
            .clamp(Position3::new(res.value(sx), res.value(sy), z));
        trace.push(InnerStep {
            objective: obj,
            iterations: res.iterations,
        });
        let moved = distance(s_next, s_cur);
        s_cur = s_next;
        if (obj - prev_obj).abs() <= params.inner_tol || moved <= 1e-6 {
            break;
        }
        prev_obj = obj;
    }
    Ok(s_cur)
}

pub fn solve_location_cluster(
    model: &ChannelModel,
    sol: &BeamformingSolution,
    r_min: f64,
    params: &AoParams,
) -> Result<LocationResult, BfError> {
    let scene = model.scene();
    let region = &scene.region;
    let entry = sol.location;
    let mut trace = Vec::new();

    let g = params.probe_grid.max(1);
    let mut best_probe = entry;
    let mut best_val = true_wsr_at(model, sol, entry)?;
    for iy in 0..g {
        for ix in 0..g {
            let fx = if g > 1 { ix as f64 / (g - 1) as f64 } else { 0.5 };
            let fy = if g > 1 { iy as f64 / (g - 1) as f64 } else { 0.5 };
            let p = Position3::new(
                region.x_min + fx * (region.x_max - region.x_min),
                region.y_min + fy * (region.y_max - region.y_min),
                region.z_fixed,
            );
            let val = true_wsr_at(model, sol, p)?;
            if val > best_val + 1e-12 {
                best_val = val;
                best_probe = p;
            }
        }
    }

    let s_ini = sca_pass(model, sol, r_min, best_probe, None, params, &mut trace)?;
    let s_fine = sca_pass(
        model,
        sol,
        r_min,
        s_ini,
        Some((s_ini, params.trust_radius)),
        params,
        &mut trace,
    )?;

    let mut best = (entry, true_wsr_at(model, sol, entry)?);
    for cand in [best_probe, s_ini, s_fine] {
        let val = true_wsr_at(model, sol, cand)?;
        if val > best.1 + 1e-12 {
            best = (cand, val);
        }
    }
    let accepted = best.0 != entry;
    Ok(LocationResult {
        location: best.0,
        trace,
        accepted,
    })
}
