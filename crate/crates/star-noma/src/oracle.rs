//! Independent ground-truth machinery: exhaustive small-instance grid
//! search over surface phases/splits, deployment lattice and power levels,
//! plus the comparison baselines (equal-slot OMA, reflecting/transmitting
//! half-surfaces, zero-forcing with random surface and fixed location, and
//! active-only optimization with frozen surface and location).

use nalgebra::{Complex, DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bf_noma::{
    solve_active_bf, solve_location, solve_passive_bf, AoParams, AoReport, BfError,
    IterationRecord, StepStatus,
};
use crate::channel::{ChannelModel, ChannelRealization};
use crate::cluster_noma::solve_active_paf;
use crate::rates::{
    check_feasibility, decoding_order_cluster, effective_row, wsr, BeamformingSolution,
    DecodingOrder,
};
use crate::scene::{Position3, Scene, Scheme, Side};
use crate::starris::{StarConfig, EPS_BETA};

type C64 = Complex<f64>;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid of {combos} combinations exceeds the budget of {budget}")]
    BudgetExceeded { combos: u128, budget: u128 },
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
}

/// Grid resolution for the exhaustive oracle. Phases are gridded per
/// element and side; the energy split β_t is shared across elements; power
/// and PAF simplices are gridded per degree of freedom.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub phase_levels: usize,
    pub amp_levels: usize,
    /// location lattice is location_steps × location_steps over the region
    pub location_steps: usize,
    pub power_levels: usize,
    pub paf_levels: usize,
    /// hard cap on the number of grid evaluations
    pub budget: u128,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            phase_levels: 16,
            amp_levels: 5,
            location_steps: 3,
            power_levels: 9,
            paf_levels: 9,
            budget: 100_000_000,
        }
    }
}

/// Mixed-radix counter for deterministic lexicographic enumeration.
struct Counter {
    radix: Vec<usize>,
    idx: Vec<usize>,
    fresh: bool,
}

impl Counter {
    fn new(radix: Vec<usize>) -> Self {
        let n = radix.len();
        Self { radix, idx: vec![0; n], fresh: true }
    }

    fn next(&mut self) -> Option<&[usize]> {
        if self.fresh {
            self.fresh = false;
            if self.radix.iter().any(|&r| r == 0) {
                return None;
            }
            return Some(&self.idx);
        }
        for k in (0..self.radix.len()).rev() {
            self.idx[k] += 1;
            if self.idx[k] < self.radix[k] {
                return Some(&self.idx);
            }
            self.idx[k] = 0;
        }
        None
    }
}

/// Simplex levels: fraction grid over `dims` entries summing to one, with
/// `levels` points per free coordinate; entries over-allocating are skipped.
fn simplex_point(levels: usize, idxs: &[usize]) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(idxs.len() + 1);
    let mut rest = 1.0;
    for &k in idxs {
        let f = if levels > 1 { k as f64 / (levels - 1) as f64 } else { 1.0 };
        if f > rest + 1e-12 {
            return None;
        }
        out.push(f);
        rest -= f;
    }
    out.push(rest.max(0.0));
    Some(out)
}

/// Exhaustive search over the grid; returns the best feasible solution and
/// its weighted sum-rate, or `None` when no grid point is feasible.
pub fn grid_search(
    scene: &Scene,
    model: &ChannelModel,
    spec: &GridSpec,
) -> Result<Option<(BeamformingSolution, f64)>, OracleError> {
    let m = scene.m();
    let n = scene.n_users();
    let clusters = scene.clusters_or_singletons();
    let power_dims = match scene.scheme {
        Scheme::ClusterNoma => clusters.len(),
        _ => n,
    };
    let paf_free: usize = match scene.scheme {
        Scheme::ClusterNoma => clusters.iter().map(|c| c.len() - 1).sum(),
        _ => 0,
    };

    let mut radix = vec![spec.location_steps, spec.location_steps, spec.amp_levels];
    radix.extend(std::iter::repeat(spec.phase_levels).take(2 * m));
    radix.extend(std::iter::repeat(spec.power_levels).take(power_dims.saturating_sub(1)));
    radix.extend(std::iter::repeat(spec.paf_levels).take(paf_free));

    let combos: u128 = radix.iter().map(|&r| r as u128).product();
    if combos > spec.budget {
        return Err(OracleError::BudgetExceeded { combos, budget: spec.budget });
    }

    let region = &scene.region;
    let lattice = |steps: usize, k: usize, lo: f64, hi: f64| -> f64 {
        if steps > 1 { lo + (hi - lo) * k as f64 / (steps - 1) as f64 } else { (lo + hi) / 2.0 }
    };

    let default_order = || -> DecodingOrder {
        match scene.scheme {
            Scheme::ClusterNoma => DecodingOrder { sequences: clusters.clone() },
            _ => {
                let mut seq: Vec<usize> = (0..n)
                    .filter(|&i| scene.users[i].side == Side::Transmission)
                    .collect();
                seq.extend((0..n).filter(|&i| scene.users[i].side == Side::Reflection));
                DecodingOrder::single(seq)
            }
        }
    };

    let mut best: Option<(BeamformingSolution, f64)> = None;
    let mut counter = Counter::new(radix);
    let mut cached_loc: Option<(usize, usize, ChannelRealization)> = None;

    while let Some(idx) = counter.next() {
        let (ix, iy, iamp) = (idx[0], idx[1], idx[2]);
        let p = Position3::new(
            lattice(spec.location_steps, ix, region.x_min, region.x_max),
            lattice(spec.location_steps, iy, region.y_min, region.y_max),
            region.z_fixed,
        );
        if cached_loc.as_ref().map(|(a, b, _)| (*a, *b)) != Some((ix, iy)) {
            cached_loc = Some((ix, iy, model.realize_at(p)?));
        }
        let chan = &cached_loc.as_ref().unwrap().2;

        let beta = if spec.amp_levels > 1 {
            (iamp as f64 / (spec.amp_levels - 1) as f64)
                .clamp(EPS_BETA, 1.0 - EPS_BETA)
        } else {
            0.5
        };
        let tau = std::f64::consts::TAU;
        let phase = |k: usize| k as f64 * tau / spec.phase_levels as f64;
        let theta_t: Vec<f64> = (0..m).map(|e| phase(idx[3 + 2 * e])).collect();
        let theta_r: Vec<f64> = (0..m).map(|e| phase(idx[4 + 2 * e])).collect();
        let star = StarConfig { beta_t: vec![beta; m], theta_t, theta_r };

        let pow_base = 3 + 2 * m;
        let fracs = match simplex_point(
            spec.power_levels,
            &idx[pow_base..pow_base + power_dims.saturating_sub(1)],
        ) {
            Some(f) => f,
            None => continue,
        };

        let mut sol = match scene.scheme {
            Scheme::ClusterNoma => {
                let paf_base = pow_base + power_dims.saturating_sub(1);
                let mut pafs = Vec::with_capacity(clusters.len());
                let mut off = 0;
                let mut bad = false;
                for c in &clusters {
                    match simplex_point(spec.paf_levels, &idx[paf_base + off..paf_base + off + c.len() - 1]) {
                        Some(pv) => pafs.push(pv),
                        None => { bad = true; break; }
                    }
                    off += c.len() - 1;
                }
                if bad {
                    continue;
                }
                let w: Vec<DVector<C64>> = clusters
                    .iter()
                    .zip(&fracs)
                    .map(|(c, &f)| {
                        let mut h = DVector::from_element(scene.n_t, C64::new(0.0, 0.0));
                        for &i in c {
                            let row = effective_row(&chan.r[i], &star, scene.users[i].side, &chan.g);
                            h += row.adjoint();
                        }
                        mrt_scaled(&h, (f * scene.p_max).sqrt(), scene.n_t)
                    })
                    .collect();
                BeamformingSolution {
                    scheme: Scheme::ClusterNoma,
                    active: w,
                    pafs: Some(pafs),
                    star,
                    per_slot_star: None,
                    location: p,
                    order: default_order(),
                }
            }
            _ => {
                let w: Vec<DVector<C64>> = (0..n)
                    .map(|i| {
                        let row = effective_row(&chan.r[i], &star, scene.users[i].side, &chan.g);
                        mrt_scaled(&row.adjoint(), (fracs[i] * scene.p_max).sqrt(), scene.n_t)
                    })
                    .collect();
                BeamformingSolution {
                    scheme: scene.scheme,
                    active: w,
                    pafs: None,
                    star,
                    per_slot_star: None,
                    location: p,
                    order: default_order(),
                }
            }
        };
        if scene.scheme == Scheme::ClusterNoma {
            sol.order = decoding_order_cluster(&sol, chan, scene);
        }

        if !check_feasibility(&sol, chan, scene, 1e-6).ok() {
            continue;
        }
        let val = wsr(&sol, chan, scene);
        if best.as_ref().map(|(_, b)| val > *b).unwrap_or(true) {
            best = Some((sol, val));
        }
    }
    Ok(best)
}

fn mrt_scaled(h: &DVector<C64>, amplitude: f64, n_t: usize) -> DVector<C64> {
    let norm = h.norm();
    if norm > 1e-300 {
        h * C64::new(amplitude / norm, 0.0)
    } else {
        DVector::from_element(n_t, C64::new(amplitude / (n_t as f64).sqrt(), 0.0))
    }
}

fn random_star(scene: &Scene, rng: &mut ChaCha8Rng) -> StarConfig {
    let m = scene.m();
    let tau = std::f64::consts::TAU;
    StarConfig::even_split(
        (0..m).map(|_| rng.gen_range(0.0..tau)).collect(),
        (0..m).map(|_| rng.gen_range(0.0..tau)).collect(),
    )
}

fn report_from(
    f_trace: Vec<f64>,
    iterations: Vec<IterationRecord>,
    sol: BeamformingSolution,
    chan: &ChannelRealization,
    scene: &Scene,
    converged: bool,
    ratios: Vec<f64>,
) -> AoReport {
    let residuals = check_feasibility(&sol, chan, scene, 1e-4);
    AoReport {
        f_trace,
        iterations,
        solution: sol,
        residuals,
        converged,
        rank_one_ratios: ratios,
    }
}

fn single_user_scene(scene: &Scene, i: usize) -> Scene {
    let mut sub = scene.clone();
    sub.scheme = Scheme::BeamformerNoma;
    sub.clusters = None;
    sub.users = vec![scene.users[i].clone()];
    sub.users[0].weight = 1.0;
    sub
}

fn single_user_chan(chan: &ChannelRealization, i: usize) -> ChannelRealization {
    ChannelRealization {
        g: chan.g.clone(),
        r: vec![chan.r[i].clone()],
        path_loss: vec![chan.path_loss[i]],
        nlos_seed: chan.nlos_seed,
        star_location: chan.star_location,
    }
}

/// Equal-slot TDMA baseline: each user gets a 1/N-duration slot with the
/// full power budget, a matched-filter beamformer and its own surface
/// configuration; the shared deployment location is optimized on a lattice.
pub fn oma_baseline(scene: &Scene, seed: u64, params: &AoParams) -> Result<AoReport, BfError> {
    let n = scene.n_users();
    let model = ChannelModel::new(scene, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_u64);
    let mut location = scene.region.centroid();
    let mut chan = model
        .realize_at(location)
        .map_err(|e| BfError::InitFailed(format!("channel model: {e}")))?;
    let mut slots: Vec<StarConfig> = (0..n).map(|_| random_star(scene, &mut rng)).collect();

    let mrt_full = |chan: &ChannelRealization, slots: &[StarConfig]| -> Vec<DVector<C64>> {
        (0..n)
            .map(|i| {
                let row = effective_row(&chan.r[i], &slots[i], scene.users[i].side, &chan.g);
                mrt_scaled(&row.adjoint(), scene.p_max.sqrt(), scene.n_t)
            })
            .collect()
    };
    let mut w = mrt_full(&chan, &slots);
    let mk_sol = |w: &[DVector<C64>], slots: &[StarConfig], location: Position3| {
        BeamformingSolution {
            scheme: Scheme::Oma,
            active: w.to_vec(),
            pafs: None,
            star: slots[0].clone(),
            per_slot_star: Some(slots.to_vec()),
            location,
            order: DecodingOrder::single((0..n).collect()),
        }
    };

    let mut f_trace = vec![wsr(&mk_sol(&w, &slots, location), &chan, scene)];
    let mut iterations = Vec::new();
    let mut converged = false;

    for it in 1..=params.max_ao_iter {
        let f_prev = *f_trace.last().unwrap();

        // per-slot surface design through the single-user passive solver
        let mut passive_status = StepStatus::Rejected;
        for i in 0..n {
            let sub = single_user_scene(scene, i);
            let sub_chan = single_user_chan(&chan, i);
            let order = DecodingOrder::single(vec![0]);
            match solve_passive_bf(
                &sub,
                &sub_chan,
                &w[i..=i],
                &order,
                &slots[i],
                0.0,
                params,
            ) {
                Ok(res) => {
                    if res.accepted {
                        passive_status = StepStatus::Accepted;
                    }
                    slots[i] = res.star;
                }
                Err(BfError::Infeasible(_)) | Err(BfError::Numerical(_)) => {}
                Err(e) => return Err(e),
            }
        }
        // matched filter is the exact single-user active optimum
        w = mrt_full(&chan, &slots);

        // location: probe lattice, then a finer local lattice around the best
        let mut location_status = StepStatus::Skipped;
        if params.optimize_location {
            let eval = |p: Position3| -> Result<f64, BfError> {
                let c = model
                    .realize_at(p)
                    .map_err(|e| BfError::Numerical(format!("channel model: {e}")))?;
                // matched filters track the location so the probe is fair
                let wp = mrt_full(&c, &slots);
                Ok(wsr(&mk_sol(&wp, &slots, p), &c, scene))
            };
            let region = &scene.region;
            let mut best = (location, eval(location)?);
            let g = params.probe_grid.max(2);
            for iy in 0..g {
                for ix in 0..g {
                    let p = Position3::new(
                        region.x_min + (region.x_max - region.x_min) * ix as f64 / (g - 1) as f64,
                        region.y_min + (region.y_max - region.y_min) * iy as f64 / (g - 1) as f64,
                        region.z_fixed,
                    );
                    let v = eval(p)?;
                    if v > best.1 + 1e-12 {
                        best = (p, v);
                    }
                }
            }
            let coarse = best.0;
            for iy in 0..11 {
                for ix in 0..11 {
                    let p = region.clamp(Position3::new(
                        coarse.x + params.trust_radius * (ix as f64 / 5.0 - 1.0),
                        coarse.y + params.trust_radius * (iy as f64 / 5.0 - 1.0),
                        region.z_fixed,
                    ));
                    let v = eval(p)?;
                    if v > best.1 + 1e-12 {
                        best = (p, v);
                    }
                }
            }
            if best.0 != location {
                location_status = StepStatus::Accepted;
                location = best.0;
                chan = model
                    .realize_at(location)
                    .map_err(|e| BfError::Numerical(format!("channel model: {e}")))?;
                w = mrt_full(&chan, &slots);
            } else {
                location_status = StepStatus::Rejected;
            }
        }

        let f_now = wsr(&mk_sol(&w, &slots, location), &chan, scene);
        f_trace.push(f_now);
        iterations.push(IterationRecord {
            iteration: it,
            wsr: f_now,
            active: StepStatus::Accepted,
            passive: passive_status,
            location: location_status,
        });
        if (f_now - f_prev).abs() <= params.tol {
            converged = true;
            break;
        }
    }

    Ok(report_from(
        f_trace,
        iterations,
        mk_sol(&w, &slots, location),
        &chan,
        scene,
        converged,
        vec![1.0; n],
    ))
}

/// Conventional-RIS baseline: the surface is split into a pure-reflect half
/// (⌈M/2⌉ elements, the larger half) and a pure-transmit half, with the
/// energy split pinned and only the phases optimized (cyclic coordinate
/// ascent on the true weighted sum-rate).
pub fn reflect_only_baseline(
    scene: &Scene,
    seed: u64,
    params: &AoParams,
) -> Result<AoReport, BfError> {
    let n = scene.n_users();
    let m = scene.m();
    let model = ChannelModel::new(scene, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x517c_c1b7u64);
    let reflect_half = m.div_ceil(2);

    let pin = |cfg: &mut StarConfig| {
        for e in 0..m {
            cfg.beta_t[e] = if e < reflect_half { EPS_BETA } else { 1.0 - EPS_BETA };
        }
    };
    let mut star = random_star(scene, &mut rng);
    pin(&mut star);

    let location = scene.region.centroid();
    let mut chan = model
        .realize_at(location)
        .map_err(|e| BfError::InitFailed(format!("channel model: {e}")))?;
    let order = {
        let mut seq: Vec<usize> = (0..n)
            .filter(|&i| scene.users[i].side == Side::Transmission)
            .collect();
        seq.extend((0..n).filter(|&i| scene.users[i].side == Side::Reflection));
        DecodingOrder::single(seq)
    };
    let w: Vec<DVector<C64>> = (0..n)
        .map(|i| {
            let row = effective_row(&chan.r[i], &star, scene.users[i].side, &chan.g);
            mrt_scaled(&row.adjoint(), (scene.p_max / n as f64).sqrt(), scene.n_t)
        })
        .collect();
    let mut sol = BeamformingSolution {
        scheme: Scheme::BeamformerNoma,
        active: w,
        pafs: None,
        star,
        per_slot_star: None,
        location,
        order,
    };

    // rate-floor annealing as in the main driver: the init is good once
    // some round solved at the full floor
    let mut last_err = None;
    let mut floor_reached = false;
    for round in 0..=5usize {
        let r = scene.r_min * round as f64 / 5.0;
        match solve_active_bf(scene, &chan, &sol.star, &sol.order, &sol.active, r, params) {
            Ok(res) => {
                sol.active = res.w;
                floor_reached |= r >= scene.r_min;
            }
            Err(e) => last_err = Some(e),
        }
    }
    if !floor_reached {
        let detail = last_err.map_or_else(String::new, |e| format!(": {e}"));
        return Err(BfError::InitFailed(format!(
            "rate-floor annealing did not reach R_min{detail}"
        )));
    }

    let mut f_trace = vec![wsr(&sol, &chan, scene)];
    let mut iterations = Vec::new();
    let mut rank_ratios = vec![1.0; n];
    let mut converged = false;

    for it in 1..=params.max_ao_iter {
        let f_prev = *f_trace.last().unwrap();

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

        // phase-only passive design: per-element sweep on the pinned side
        let mut passive_status = StepStatus::Rejected;
        {
            let levels = 16;
            let tau = std::f64::consts::TAU;
            let mut improved = false;
            for e in 0..m {
                let reflect = e < reflect_half;
                let mut best_val = wsr(&sol, &chan, scene);
                let current = if reflect { sol.star.theta_r[e] } else { sol.star.theta_t[e] };
                let mut best_phase = current;
                for k in 0..levels {
                    let cand_phase = k as f64 * tau / levels as f64;
                    let mut cand = sol.clone();
                    if reflect {
                        cand.star.theta_r[e] = cand_phase;
                    } else {
                        cand.star.theta_t[e] = cand_phase;
                    }
                    let v = wsr(&cand, &chan, scene);
                    if v > best_val + 1e-12 {
                        best_val = v;
                        best_phase = cand_phase;
                    }
                }
                if best_phase != current {
                    improved = true;
                    if reflect {
                        sol.star.theta_r[e] = best_phase;
                    } else {
                        sol.star.theta_t[e] = best_phase;
                    }
                }
            }
            if improved {
                passive_status = StepStatus::Accepted;
            }
        }

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

    Ok(report_from(
        f_trace,
        iterations,
        sol,
        &chan,
        scene,
        converged,
        rank_ratios,
    ))
}

/// Zero-forcing beamformers on the effective rows (per user, or per cluster
/// on the summed member rows), equal power per stream. Errors when the
/// effective channel matrix is rank deficient.
pub fn zf_baseline(
    scene: &Scene,
    chan: &ChannelRealization,
    star: &StarConfig,
) -> Result<Vec<DVector<C64>>, BfError> {
    let clusters = scene.clusters_or_singletons();
    let rows: Vec<RowDVector<C64>> = match scene.scheme {
        Scheme::ClusterNoma => clusters
            .iter()
            .map(|c| {
                let mut acc = RowDVector::zeros(scene.n_t);
                for &i in c {
                    acc += effective_row(&chan.r[i], star, scene.users[i].side, &chan.g);
                }
                acc
            })
            .collect(),
        _ => (0..scene.n_users())
            .map(|i| effective_row(&chan.r[i], star, scene.users[i].side, &chan.g))
            .collect(),
    };
    let k = rows.len();
    let mut h = DMatrix::zeros(k, scene.n_t);
    for (r, row) in rows.iter().enumerate() {
        h.row_mut(r).copy_from(row);
    }
    let svd = h.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < 1e-10 * smax {
        return Err(BfError::Numerical(
            "zero-forcing unavailable: rank-deficient effective channel".into(),
        ));
    }
    let pinv = h
        .pseudo_inverse(1e-12 * smax)
        .map_err(|e| BfError::Numerical(format!("pseudo-inverse: {e}")))?;
    let share = (scene.p_max / k as f64).sqrt();
    Ok((0..k)
        .map(|c| {
            let col: DVector<C64> = pinv.column(c).into();
            mrt_scaled(&col, share, scene.n_t)
        })
        .collect())
}

/// ZF with random transmission/reflection vectors and fixed location, as a
/// one-shot report for the comparison plots.
pub fn zf_report(scene: &Scene, seed: u64, _params: &AoParams) -> Result<AoReport, BfError> {
    let model = ChannelModel::new(scene, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2545_f491u64);
    let star = random_star(scene, &mut rng);
    let location = scene.region.centroid();
    let chan = model
        .realize_at(location)
        .map_err(|e| BfError::InitFailed(format!("channel model: {e}")))?;
    let w = zf_baseline(scene, &chan, &star)?;
    let clusters = scene.clusters_or_singletons();
    let pafs = match scene.scheme {
        Scheme::ClusterNoma => {
            Some(clusters.iter().map(|c| vec![1.0 / c.len() as f64; c.len()]).collect())
        }
        _ => None,
    };
    let mut sol = BeamformingSolution {
        scheme: scene.scheme,
        active: w,
        pafs,
        star,
        per_slot_star: None,
        location,
        order: match scene.scheme {
            Scheme::ClusterNoma => DecodingOrder { sequences: clusters.clone() },
            _ => DecodingOrder::single((0..scene.n_users()).collect()),
        },
    };
    if scene.scheme == Scheme::ClusterNoma {
        sol.order = decoding_order_cluster(&sol, &chan, scene);
    }
    let f = wsr(&sol, &chan, scene);
    let ratios = vec![1.0; sol.active.len()];
    Ok(report_from(vec![f], Vec::new(), sol, &chan, scene, true, ratios))
}

/// Optimized active BF and power allocation only: the cluster pipeline with
/// the surface frozen at a random feasible configuration and the location
/// frozen at the region centroid.
pub fn obp_baseline(scene: &Scene, seed: u64, params: &AoParams) -> Result<AoReport, BfError> {
    let clusters = scene.clusters_or_singletons();
    let model = ChannelModel::new(scene, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5f3a_91c4u64);
    let star = random_star(scene, &mut rng);
    let location = scene.region.centroid();
    let chan = model
        .realize_at(location)
        .map_err(|e| BfError::InitFailed(format!("channel model: {e}")))?;

    let share = (scene.p_max / clusters.len() as f64).sqrt();
    let w: Vec<DVector<C64>> = clusters
        .iter()
        .map(|c| {
            let mut h = DVector::from_element(scene.n_t, C64::new(0.0, 0.0));
            for &i in c {
                let row = effective_row(&chan.r[i], &star, scene.users[i].side, &chan.g);
                h += row.adjoint();
            }
            mrt_scaled(&h, share, scene.n_t)
        })
        .collect();
    let mut sol = BeamformingSolution {
        scheme: scene.scheme,
        active: w,
        pafs: Some(clusters.iter().map(|c| vec![1.0 / c.len() as f64; c.len()]).collect()),
        star,
        per_slot_star: None,
        location,
        order: DecodingOrder { sequences: clusters.clone() },
    };

    let mut last_err = None;
    let mut floor_reached = false;
    for round in 0..=5usize {
        let r = scene.r_min * round as f64 / 5.0;
        sol.order = decoding_order_cluster(&sol, &chan, scene);
        match solve_active_paf(
            scene,
            &chan,
            &sol.star,
            &sol.order,
            &sol.active,
            sol.pafs.as_ref().unwrap(),
            r,
            params,
        ) {
            Ok(res) => {
                sol.active = res.w;
                sol.pafs = Some(res.pafs);
                floor_reached |= r >= scene.r_min;
            }
            Err(e) => last_err = Some(e),
        }
    }
    if !floor_reached {
        let detail = last_err.map_or_else(String::new, |e| format!(": {e}"));
        return Err(BfError::InitFailed(format!(
            "rate-floor annealing did not reach R_min{detail}"
        )));
    }

    let mut f_trace = vec![wsr(&sol, &chan, scene)];
    let mut iterations = Vec::new();
    let mut rank_ratios = Vec::new();
    let mut converged = false;
    for it in 1..=params.max_ao_iter {
        let f_prev = *f_trace.last().unwrap();
        let mut active_status = StepStatus::Rejected;
        let refreshed = decoding_order_cluster(&sol, &chan, scene);
        match solve_active_paf(
            scene,
            &chan,
            &sol.star,
            &refreshed,
            &sol.active,
            sol.pafs.as_ref().unwrap(),
            scene.r_min,
            params,
        ) {
            Ok(res) => {
                let mut cand = sol.clone();
                cand.order = refreshed;
                cand.active = res.w.clone();
                cand.pafs = Some(res.pafs.clone());
                if wsr(&cand, &chan, scene) >= wsr(&sol, &chan, scene) - 1e-12 {
                    sol = cand;
                    rank_ratios = res.rank_one_ratios;
                    active_status = StepStatus::Accepted;
                }
            }
            Err(BfError::Infeasible(_)) | Err(BfError::Numerical(_)) => {}
            Err(e) => return Err(e),
        }
        let f_now = wsr(&sol, &chan, scene);
        f_trace.push(f_now);
        iterations.push(IterationRecord {
            iteration: it,
            wsr: f_now,
            active: active_status,
            passive: StepStatus::Skipped,
            location: StepStatus::Skipped,
        });
        if (f_now - f_prev).abs() <= params.tol {
            converged = true;
            break;
        }
    }

    Ok(report_from(f_trace, iterations, sol, &chan, scene, converged, rank_ratios))
}
