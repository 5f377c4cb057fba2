//! Exact rate, objective and constraint evaluation for both NOMA schemes.
//!
//! Everything here is plain arithmetic on a concrete solution and channel
//! realization; the optimization surrogates elsewhere are always checked
//! against these functions.

use nalgebra::{Complex, DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::scene::{Position3, Scene, Scheme, Side};
use crate::starris::StarConfig;

type C64 = Complex<f64>;

/// SIC decoding order: one sequence per cluster (beamformer-based runs use a
/// single sequence over all users). `sequences[c][0]` is decoded first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingOrder {
    pub sequences: Vec<Vec<usize>>,
}

impl DecodingOrder {
    pub fn single(seq: Vec<usize>) -> Self {
        Self { sequences: vec![seq] }
    }

    /// Position of `user` within its sequence (its pi value).
    pub fn position(&self, cluster: usize, user: usize) -> usize {
        self.sequences[cluster]
            .iter()
            .position(|&u| u == user)
            .expect("user not present in decoding order")
    }

    /// Users decoded after `user` in the given cluster sequence.
    pub fn decoded_after(&self, cluster: usize, user: usize) -> &[usize] {
        let pos = self.position(cluster, user);
        &self.sequences[cluster][pos + 1..]
    }
}

/// A complete candidate solution for any scheme.
#[derive(Debug, Clone)]
pub struct BeamformingSolution {
    pub scheme: Scheme,
    /// Per-user beamformers (beamformer-based / OMA) or per-cluster (cluster-based).
    pub active: Vec<DVector<C64>>,
    /// Power allocation factors per cluster (cluster-based only).
    pub pafs: Option<Vec<Vec<f64>>>,
    pub star: StarConfig,
    /// Per-slot surface configs for OMA, where the surface is reconfigured
    /// between time slots; `star` is ignored when this is set.
    pub per_slot_star: Option<Vec<StarConfig>>,
    pub location: Position3,
    pub order: DecodingOrder,
}

impl BeamformingSolution {
    pub fn total_power(&self) -> f64 {
        self.active.iter().map(|w| w.norm_squared()).sum()
    }

    fn star_for_user(&self, user: usize) -> &StarConfig {
        match &self.per_slot_star {
            Some(slots) => &slots[user],
            None => &self.star,
        }
    }
}

/// `r^H diag(v_side) G`: the effective BS-to-user row channel through the surface.
pub fn effective_row(
    r: &DVector<C64>,
    cfg: &StarConfig,
    side: Side,
    g: &DMatrix<C64>,
) -> RowDVector<C64> {
    let v = cfg.coefficient_vector(side);
    let mut row = RowDVector::zeros(g.ncols());
    for m in 0..g.nrows() {
        let c = r[m].conj() * v[m];
        for k in 0..g.ncols() {
            row[k] += c * g[(m, k)];
        }
    }
    row
}

/// Effective rows for every user under one shared surface config.
pub fn effective_rows(scene: &Scene, chan: &ChannelRealization, cfg: &StarConfig) -> Vec<RowDVector<C64>> {
    scene
        .users
        .iter()
        .enumerate()
        .map(|(n, u)| effective_row(&chan.r[n], cfg, u.side, &chan.g))
        .collect()
}

fn received_power(h: &RowDVector<C64>, w: &DVector<C64>) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..h.len() {
        acc += h[k] * w[k];
    }
    acc.norm_sqr()
}

/// Rate of user `i` detecting `target`'s signal (beamformer-based), evaluated
/// at user `i`'s receiver. `target == i` gives the own-signal rate.
pub fn rate_bf(
    i: usize,
    target: usize,
    sol: &BeamformingSolution,
    chan: &ChannelRealization,
    scene: &Scene,
) -> f64 {
    let h = effective_row(&chan.r[i], sol.star_for_user(i), scene.users[i].side, &chan.g);
    let l = chan.path_loss[i];
    let num = l * received_power(&h, &sol.active[target]);
    let mut den = scene.sigma2;
    for &j in sol.order.decoded_after(0, target) {
        den += l * received_power(&h, &sol.active[j]);
    }
    (1.0 + num / den).log2()
}

/// Cluster-based rate of user `i` (global index) in cluster `n` detecting
/// `target`'s signal, evaluated at user `i`'s receiver.
pub fn rate_cluster(
    n: usize,
    i: usize,
    target: usize,
    sol: &BeamformingSolution,
    chan: &ChannelRealization,
    scene: &Scene,
) -> f64 {
    let clusters = scene.clusters_or_singletons();
    let pafs = sol.pafs.as_ref().expect("cluster solution must carry PAFs");
    let h = effective_row(&chan.r[i], &sol.star, scene.users[i].side, &chan.g);
    let l = chan.path_loss[i];
    let own = l * received_power(&h, &sol.active[n]);
    let paf_of = |user: usize| {
        let k = clusters[n].iter().position(|&u| u == user).unwrap();
        pafs[n][k]
    };
    let num = paf_of(target) * own;
    let mut den = scene.sigma2;
    for &j in sol.order.decoded_after(n, target) {
        den += paf_of(j) * own;
    }
    for n2 in 0..sol.active.len() {
        if n2 != n {
            den += l * received_power(&h, &sol.active[n2]);
        }
    }
    (1.0 + num / den).log2()
}

/// Weighted sum-rate of a solution under its scheme's signal model.
pub fn wsr(sol: &BeamformingSolution, chan: &ChannelRealization, scene: &Scene) -> f64 {
    match sol.scheme {
        Scheme::BeamformerNoma => scene
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| u.weight * rate_bf(i, i, sol, chan, scene))
            .sum(),
        Scheme::Oma => {
            // Equal-duration time slots, full power per slot.
            let slot = 1.0 / scene.n_users() as f64;
            scene
                .users
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let h = effective_row(
                        &chan.r[i],
                        sol.star_for_user(i),
                        u.side,
                        &chan.g,
                    );
                    let snr =
                        chan.path_loss[i] * received_power(&h, &sol.active[i]) / scene.sigma2;
                    u.weight * slot * (1.0 + snr).log2()
                })
                .sum()
        }
        Scheme::ClusterNoma => {
            let clusters = scene.clusters_or_singletons();
            clusters
                .iter()
                .enumerate()
                .flat_map(|(n, cluster)| {
                    cluster.iter().map(move |&i| (n, i))
                })
                .map(|(n, i)| scene.users[i].weight * rate_cluster(n, i, i, sol, chan, scene))
                .sum()
        }
    }
}

/// Equivalent channel gain deciding the intra-cluster decoding order:
/// desired-beamformer power over inter-cluster interference plus noise.
pub fn equivalent_gain(
    n: usize,
    i: usize,
    sol: &BeamformingSolution,
    chan: &ChannelRealization,
    scene: &Scene,
) -> f64 {
    let h = effective_row(&chan.r[i], &sol.star, scene.users[i].side, &chan.g);
    let l = chan.path_loss[i];
    let num = l * received_power(&h, &sol.active[n]);
    let mut den = scene.sigma2;
    for n2 in 0..sol.active.len() {
        if n2 != n {
            den += l * received_power(&h, &sol.active[n2]);
        }
    }
    num / den
}

/// Decoding order for the cluster scheme: within each cluster, ascending
/// equivalent gain (weakest decoded first); ties keep lower user index first.
pub fn decoding_order_cluster(
    sol: &BeamformingSolution,
    chan: &ChannelRealization,
    scene: &Scene,
) -> DecodingOrder {
    let clusters = scene.clusters_or_singletons();
    let sequences = clusters
        .iter()
        .enumerate()
        .map(|(n, cluster)| {
            let mut seq: Vec<usize> = cluster.clone();
            seq.sort_by(|&a, &b| {
                let ga = equivalent_gain(n, a, sol, chan, scene);
                let gb = equivalent_gain(n, b, sol, chan, scene);
                ga.partial_cmp(&gb).unwrap().then(a.cmp(&b))
            });
            seq
        })
        .collect();
    DecodingOrder { sequences }
}

/// One signed constraint residual; negative means satisfied with that margin.
#[derive(Debug, Clone)]
pub struct ConstraintResidual {
    pub name: String,
    pub residual: f64,
}

/// Signed residuals for every constraint of the solution's scheme.
#[derive(Debug, Clone)]
pub struct ConstraintReport {
    pub entries: Vec<ConstraintResidual>,
    pub tol: f64,
}

impl ConstraintReport {
    pub fn ok(&self) -> bool {
        self.entries.iter().all(|e| e.residual <= self.tol)
    }

    pub fn worst(&self) -> Option<&ConstraintResidual> {
        self.entries
            .iter()
            .max_by(|a, b| a.residual.partial_cmp(&b.residual).unwrap())
    }

    pub fn violations(&self) -> Vec<&ConstraintResidual> {
        self.entries.iter().filter(|e| e.residual > self.tol).collect()
    }
}

/// Evaluate every constraint of problem the solution claims to solve.
pub fn check_feasibility(
    sol: &BeamformingSolution,
    chan: &ChannelRealization,
    scene: &Scene,
    tol: f64,
) -> ConstraintReport {
    let mut entries = Vec::new();
    let mut push = |name: String, residual: f64| {
        entries.push(ConstraintResidual { name, residual });
    };

    // power budget (relative): simultaneous transmission shares the budget,
    // OMA slots each use it in full
    match sol.scheme {
        Scheme::Oma => {
            for (i, w) in sol.active.iter().enumerate() {
                push(
                    format!("slot_power_{i}"),
                    (w.norm_squared() - scene.p_max) / scene.p_max,
                );
            }
        }
        _ => push(
            "total_power".into(),
            (sol.total_power() - scene.p_max) / scene.p_max,
        ),
    }

    // region membership
    let s = sol.location;
    let r = &scene.region;
    push("region_x_lo".into(), r.x_min - s.x);
    push("region_x_hi".into(), s.x - r.x_max);
    push("region_y_lo".into(), r.y_min - s.y);
    push("region_y_hi".into(), s.y - r.y_max);

    // energy-splitting sums
    let star_configs: Vec<&StarConfig> = match &sol.per_slot_star {
        Some(slots) => slots.iter().collect(),
        None => vec![&sol.star],
    };
    for (s_idx, cfg) in star_configs.iter().enumerate() {
        for (m, &bt) in cfg.beta_t.iter().enumerate() {
            push(format!("es_range_{s_idx}_{m}"), bt.max(1.0 - bt) - 1.0);
        }
    }

    match sol.scheme {
        Scheme::BeamformerNoma => {
            for i in 0..scene.n_users() {
                let own = rate_bf(i, i, sol, chan, scene);
                push(format!("r_min_{i}"), scene.r_min - own);
                for &k in sol.order.decoded_after(0, i) {
                    push(format!("sic_{k}_to_{i}"), own - rate_bf(k, i, sol, chan, scene));
                }
            }
            // fairness power ordering along the decoding order
            let powers: Vec<f64> = (0..scene.n_users())
                .map(|i| {
                    let h = effective_row(
                        &chan.r[i],
                        sol.star_for_user(i),
                        scene.users[i].side,
                        &chan.g,
                    );
                    chan.path_loss[i] * received_power(&h, &sol.active[i])
                })
                .collect();
            for i in 0..scene.n_users() {
                for &j in sol.order.decoded_after(0, i) {
                    let scale = powers[i].max(powers[j]).max(scene.sigma2);
                    push(format!("fairness_{i}_le_{j}"), (powers[i] - powers[j]) / scale);
                }
            }
        }
        Scheme::Oma => {
            let slot = 1.0 / scene.n_users() as f64;
            for (i, u) in scene.users.iter().enumerate() {
                let h = effective_row(&chan.r[i], sol.star_for_user(i), u.side, &chan.g);
                let snr = chan.path_loss[i] * received_power(&h, &sol.active[i]) / scene.sigma2;
                let rate = slot * (1.0 + snr).log2();
                push(format!("r_min_{i}"), scene.r_min * slot - rate);
            }
        }
        Scheme::ClusterNoma => {
            let clusters = scene.clusters_or_singletons();
            let pafs = sol.pafs.as_ref().expect("cluster solution must carry PAFs");
            for (n, cluster) in clusters.iter().enumerate() {
                let sum: f64 = pafs[n].iter().sum();
                push(format!("paf_simplex_{n}"), (sum - 1.0).abs());
                for (k, &p) in pafs[n].iter().enumerate() {
                    push(format!("paf_nonneg_{n}_{k}"), -p);
                }
                for &i in cluster {
                    let own = rate_cluster(n, i, i, sol, chan, scene);
                    push(format!("r_min_{n}_{i}"), scene.r_min - own);
                    for &k in sol.order.decoded_after(n, i) {
                        push(
                            format!("sic_{n}_{k}_to_{i}"),
                            own - rate_cluster(n, k, i, sol, chan, scene),
                        );
                    }
                }
            }
        }
    }

    ConstraintReport { entries, tol }
}
