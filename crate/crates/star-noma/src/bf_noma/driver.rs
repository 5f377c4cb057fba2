//! Alternating-optimization driver for the beamformer-based scheme:
//! seeded initialization with a rate-floor annealing repair loop, then
//! active → passive → location rounds with per-block reject-step
//! safeguards and a true-WSR convergence trace.

use nalgebra::{Complex, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    solve_active_bf, solve_location, solve_passive_bf, AoParams, AoReport, BfError,
    IterationRecord, StepStatus,
};
use crate::channel::ChannelModel;
use crate::rates::{check_feasibility, effective_row, wsr, BeamformingSolution, DecodingOrder};
use crate::scene::{Scene, Side};
use crate::starris::StarConfig;

type C64 = Complex<f64>;

/// Default decoding order: transmission-side users first (lowest index
/// first), then reflection-side users.
pub(crate) fn default_order(scene: &Scene) -> DecodingOrder {
    let mut seq: Vec<usize> = (0..scene.n_users())
        .filter(|&i| scene.users[i].side == Side::Transmission)
        .collect();
    seq.extend((0..scene.n_users()).filter(|&i| scene.users[i].side == Side::Reflection));
    DecodingOrder::single(seq)
}

/// Seeded initial surface config: uniform random phases, even power split.
pub(crate) fn initial_star(scene: &Scene, rng: &mut ChaCha8Rng) -> StarConfig {
    let m = scene.m();
    let tau = std::f64::consts::TAU;
    StarConfig::even_split(
        (0..m).map(|_| rng.gen_range(0.0..tau)).collect(),
        (0..m).map(|_| rng.gen_range(0.0..tau)).collect(),
    )
}

/// Per-user matched-filter beamformers sharing the budget equally.
pub(crate) fn mrt_beamformers(
    scene: &Scene,
    chan: &crate::channel::ChannelRealization,
    star: &StarConfig,
) -> Vec<DVector<C64>> {
    let n = scene.n_users();
    let share = (scene.p_max / n as f64).sqrt();
    (0..n)
        .map(|i| {
            let row = effective_row(&chan.r[i], star, scene.users[i].side, &chan.g);
            let h = row.adjoint();
            let norm = h.norm();
            if norm > 1e-300 {
                &h * C64::new(share / norm, 0.0)
            } else {
                DVector::from_element(scene.n_t, C64::new(share / (scene.n_t as f64).sqrt(), 0.0))
            }
        })
        .collect()
}

pub fn ao_optimize(scene: &Scene, seed: u64, params: &AoParams) -> Result<AoReport, BfError> {
    let model = ChannelModel::new(scene, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5f3a_91c4_u64);
    let order = default_order(scene);

    let location = scene.region.centroid();
    let mut chan = model
        .realize_at(location)
        .map_err(|e| BfError::InitFailed(format!("channel model: {e}")))?;
    let star = initial_star(scene, &mut rng);
    let w = mrt_beamformers(scene, &chan, &star);
    let mut sol = BeamformingSolution {
        scheme: scene.scheme,
        active: w,
        pafs: None,
        star,
        per_slot_star: None,
        location,
        order,
    };

    // feasibility repair: anneal the rate floor up to the configured value;
    // the init is good once some round solved at the full floor (a later
    // round stalling on an already-converged iterate is not a failure)
    let mut last_err = None;
    let mut floor_reached = false;
    for round in 0..=5usize {
        let r = scene.r_min * round as f64 / 5.0;
        match solve_active_bf(
            scene,
            &chan,
            &sol.star,
            &sol.order,
            &sol.active,
            r,
            params,
        ) {
            Ok(res) => {
                sol.active = res.w;
                floor_reached |= r >= scene.r_min;
            }
            Err(e) => last_err = Some(e),
        }
    }
    if !floor_reached {
        let residuals = check_feasibility(&sol, &chan, scene, 1e-6);
        let detail = last_err.map_or_else(String::new, |e| format!(" (last error: {e})"));
        return Err(BfError::InitFailed(format!(
            "rate-floor annealing did not reach R_min{detail}; worst residual {:?}",
            residuals.worst().map(|r| (r.name.clone(), r.residual))
        )));
    }

    let mut f_trace = vec![wsr(&sol, &chan, scene)];
    let mut iterations = Vec::new();
    let mut rank_ratios = Vec::new();
    let mut converged = false;

    for it in 1..=params.max_ao_iter {
        let f_prev = *f_trace.last().unwrap();

        // active block
        let mut active_status = StepStatus::Rejected;
        match solve_active_bf(
            scene,
            &chan,
            &sol.star,
            &sol.order,
            &sol.active,
            scene.r_min,
            params,
        ) {
            Ok(res) => {
                let mut cand = sol.clone();
                cand.active = res.w.clone();
                if wsr(&cand, &chan, scene) >= wsr(&sol, &chan, scene) - 1e-12 {
                    sol = cand;
                    rank_ratios = res.rank_one_ratios;
                    active_status = StepStatus::Accepted;
                }
            }
            Err(BfError::Infeasible(_)) | Err(BfError::Numerical(_)) => {}
            Err(e) => return Err(e),
        }

        // passive block (its own internal reject-step keeps the entry)
        let mut passive_status = StepStatus::Rejected;
        match solve_passive_bf(
            scene,
            &chan,
            &sol.active,
            &sol.order,
            &sol.star,
            scene.r_min,
            params,
        ) {
            Ok(res) => {
                if res.accepted {
                    passive_status = StepStatus::Accepted;
                }
                sol.star = res.star;
            }
            Err(BfError::Infeasible(_)) | Err(BfError::Numerical(_)) => {}
            Err(e) => return Err(e),
        }

        // location block
        let mut location_status = StepStatus::Skipped;
        if params.optimize_location {
            match solve_location(&model, &sol, scene.r_min, params) {
                Ok(res) => {
                    location_status = if res.accepted {
                        StepStatus::Accepted
                    } else {
                        StepStatus::Rejected
                    };
                    if res.location != sol.location {
                        sol.location = res.location;
                        chan = model
                            .realize_at(sol.location)
                            .map_err(|e| BfError::Numerical(format!("channel model: {e}")))?;
                    }
                }
                Err(BfError::Infeasible(_)) | Err(BfError::Numerical(_)) => {
                    location_status = StepStatus::Rejected;
                }
                Err(e) => return Err(e),
            }
        }

        let f_now = wsr(&sol, &chan, scene);
        f_trace.push(f_now);
        iterations.push(IterationRecord {
            iteration: it,
            wsr: f_now,
            active: active_status,
            passive: passive_status,
            location: location_status,
        });
        if (f_now - f_prev).abs() <= params.tol {
            converged = true;
            break;
        }
    }

    let residuals = check_feasibility(&sol, &chan, scene, 1e-4);
    Ok(AoReport {
        f_trace,
        iterations,
        solution: sol,
        residuals,
        converged,
        rank_one_ratios: rank_ratios,
    })
}
