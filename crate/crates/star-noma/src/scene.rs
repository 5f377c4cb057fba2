//! Immutable problem instances: geometry, budgets, weights and scheme selection.
//!
//! A [`Scene`] is loaded from a plain-text config file (TOML syntax, documented
//! in the crate README) whose human-facing units are dBm/dB for powers and
//! meters for lengths. Internally everything is stored in linear units so that
//! the rest of the crate never converts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in 3-D space, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Euclidean distance between two points, meters.
pub fn distance(a: Position3, b: Position3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Rectangular deployment region for the surface; z is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_fixed: f64,
}

impl Region {
    pub fn contains(&self, p: Position3, tol: f64) -> bool {
        p.x >= self.x_min - tol
            && p.x <= self.x_max + tol
            && p.y >= self.y_min - tol
            && p.y <= self.y_max + tol
            && (p.z - self.z_fixed).abs() <= tol
    }

    pub fn centroid(&self) -> Position3 {
        Position3::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
            self.z_fixed,
        )
    }

    /// Clamp a point into the region (z snapped to the fixed height).
    pub fn clamp(&self, p: Position3) -> Position3 {
        Position3::new(
            p.x.clamp(self.x_min, self.x_max),
            p.y.clamp(self.y_min, self.y_max),
            self.z_fixed,
        )
    }
}

/// Which side of the surface a user sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Transmission,
    Reflection,
}

/// Multiple-access scheme run by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    BeamformerNoma,
    ClusterNoma,
    Oma,
}

/// A served user: location, surface side and rate weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub pos: Position3,
    pub side: Side,
    pub weight: f64,
}

/// The immutable problem instance shared by every optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub bs: Position3,
    pub users: Vec<User>,
    pub region: Region,
    /// BS antenna count.
    pub n_t: usize,
    /// Surface element grid: `m_v * m_h` elements total.
    pub m_v: usize,
    pub m_h: usize,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Rician factor, linear (BS-surface link; also surface-user unless overridden).
    pub rician_beta: f64,
    /// Rician factor for the surface-user links, linear.
    pub rician_beta_ru: f64,
    /// Total transmit power budget, watts.
    pub p_max: f64,
    /// Noise power per user, watts.
    pub sigma2: f64,
    /// Minimal required rate, bits/s/Hz.
    pub r_min: f64,
    pub scheme: Scheme,
    /// User-index partition for cluster-based NOMA.
    pub clusters: Option<Vec<Vec<usize>>>,
}

impl Scene {
    /// Total surface element count.
    pub fn m(&self) -> usize {
        self.m_v * self.m_h
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    /// Copy of this scene with a different power budget, watts.
    pub fn with_p_max(&self, p_max: f64) -> Scene {
        let mut s = self.clone();
        s.p_max = p_max;
        s
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !self.bs.is_finite() {
            return Err(SceneError::Invariant("bs position must be finite".into()));
        }
        if self.region.x_min >= self.region.x_max {
            return Err(SceneError::Invariant(format!(
                "region: x_min ({}) must be < x_max ({})",
                self.region.x_min, self.region.x_max
            )));
        }
        if self.region.y_min >= self.region.y_max {
            return Err(SceneError::Invariant(format!(
                "region: y_min ({}) must be < y_max ({})",
                self.region.y_min, self.region.y_max
            )));
        }
        if self.users.is_empty() {
            return Err(SceneError::Invariant("at least one user required".into()));
        }
        for (i, u) in self.users.iter().enumerate() {
            if !u.pos.is_finite() {
                return Err(SceneError::Invariant(format!("user {i}: non-finite position")));
            }
            if !(u.weight >= 0.0) {
                return Err(SceneError::Invariant(format!("user {i}: weight must be >= 0")));
            }
        }
        if self.n_t == 0 || self.m_v == 0 || self.m_h == 0 {
            return Err(SceneError::Invariant(
                "n_t, m_v and m_h must all be at least 1".into(),
            ));
        }
        if !(self.p_max > 0.0) {
            return Err(SceneError::Invariant("p_max must be > 0".into()));
        }
        if !(self.sigma2 > 0.0) {
            return Err(SceneError::Invariant("sigma2 (noise power) must be > 0".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(SceneError::Invariant("alpha must be > 0".into()));
        }
        if self.rician_beta < 0.0 || self.rician_beta_ru < 0.0 {
            return Err(SceneError::Invariant("rician factor must be >= 0".into()));
        }
        match (self.scheme, &self.clusters) {
            (Scheme::ClusterNoma, Some(clusters)) => {
                let mut seen = vec![false; self.users.len()];
                for (ci, cluster) in clusters.iter().enumerate() {
                    if cluster.is_empty() {
                        return Err(SceneError::Invariant(format!("cluster {ci} is empty")));
                    }
                    let side = self.users[cluster[0]].side;
                    for &u in cluster {
                        if u >= self.users.len() {
                            return Err(SceneError::Invariant(format!(
                                "cluster {ci}: user index {u} out of range"
                            )));
                        }
                        if seen[u] {
                            return Err(SceneError::Invariant(format!(
                                "user {u} appears in more than one cluster"
                            )));
                        }
                        seen[u] = true;
                        if self.users[u].side != side {
                            return Err(SceneError::Invariant(format!(
                                "cluster {ci}: users must share one side"
                            )));
                        }
                    }
                }
                if seen.iter().any(|s| !s) {
                    return Err(SceneError::Invariant(
                        "clusters must partition the full user set".into(),
                    ));
                }
            }
            (Scheme::ClusterNoma, None) => {
                return Err(SceneError::Invariant(
                    "cluster-noma scheme requires a cluster partition".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    /// Cluster partition for schemes that need one; beamformer/OMA scenes are
    /// treated as singleton clusters where convenient.
    pub fn clusters_or_singletons(&self) -> Vec<Vec<usize>> {
        match &self.clusters {
            Some(c) => c.clone(),
            None => (0..self.users.len()).map(|i| vec![i]).collect(),
        }
    }
}

/// dB to linear power ratio: `10^(v/10)`.
pub fn db_to_linear(v: f64) -> f64 {
    10f64.powf(v / 10.0)
}

/// dBm to watts: `10^((v-30)/10)`.
pub fn dbm_to_watts(v: f64) -> f64 {
    10f64.powf((v - 30.0) / 10.0)
}

/// Watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
}

// ---------------------------------------------------------------------------
// Config file schema (human units).
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scene: RawScene,
    star: RawStar,
    users: Vec<RawUser>,
    #[serde(default)]
    optimizer: Option<RawOptimizer>,
    #[serde(default)]
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    bs: [f64; 3],
    n_t: usize,
    alpha: f64,
    rician_factor_db: f64,
    #[serde(default)]
    rician_factor_ru_db: Option<f64>,
    noise_dbm: f64,
    p_max_dbm: f64,
    r_min: f64,
    scheme: Scheme,
    #[serde(default)]
    strict_sides: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStar {
    m_v: usize,
    m_h: usize,
    region_x: [f64; 2],
    region_y: [f64; 2],
    #[serde(default = "default_z")]
    region_z: f64,
}

fn default_z() -> f64 {
    2.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    pos: [f64; 3],
    side: Side,
    weight: f64,
    #[serde(default)]
    cluster: Option<usize>,
}

/// Optimizer settings carried alongside a scene in the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawOptimizer {
    pub tol: f64,
    pub max_ao_iter: usize,
    pub max_inner_iter: usize,
    pub trust_radius: f64,
    pub probe_grid: usize,
    pub optimize_location: bool,
}

impl Default for RawOptimizer {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_ao_iter: 8,
            max_inner_iter: 30,
            trust_radius: 1.0,
            probe_grid: 5,
            optimize_location: true,
        }
    }
}

/// Parameter-sweep request from the `[sweep]` config section.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub param: String,
    pub values: Vec<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub schemes: Vec<String>,
}

/// Everything a config file describes: the scene plus run settings.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub scene: Scene,
    pub optimizer: RawOptimizer,
    pub sweep: Option<RawSweep>,
}

/// Parse and validate a config file (see the README for the schema).
pub fn load_scene(config_text: &str) -> Result<Scene, SceneError> {
    Ok(load_config(config_text)?.scene)
}

/// Parse a config file including optimizer and sweep sections.
pub fn load_config(config_text: &str) -> Result<LoadedConfig, SceneError> {
    let raw: RawConfig =
        toml::from_str(config_text).map_err(|e| SceneError::Parse(e.to_string()))?;

    let region = Region {
        x_min: raw.star.region_x[0],
        x_max: raw.star.region_x[1],
        y_min: raw.star.region_y[0],
        y_max: raw.star.region_y[1],
        z_fixed: raw.star.region_z,
    };

    let users: Vec<User> = raw
        .users
        .iter()
        .map(|u| User {
            pos: Position3::new(u.pos[0], u.pos[1], u.pos[2]),
            side: u.side,
            weight: u.weight,
        })
        .collect();

    let clusters = if raw.users.iter().any(|u| u.cluster.is_some()) {
        let n_clusters = raw
            .users
            .iter()
            .filter_map(|u| u.cluster)
            .max()
            .map(|m| m + 1)
            .unwrap_or(0);
        let mut clusters = vec![Vec::new(); n_clusters];
        for (i, u) in raw.users.iter().enumerate() {
            match u.cluster {
                Some(c) => clusters[c].push(i),
                None => {
                    return Err(SceneError::Invariant(format!(
                        "user {i}: cluster index missing while others are clustered"
                    )))
                }
            }
        }
        Some(clusters)
    } else {
        None
    };

    let beta = db_to_linear(raw.scene.rician_factor_db);
    let scene = Scene {
        bs: Position3::new(raw.scene.bs[0], raw.scene.bs[1], raw.scene.bs[2]),
        users,
        region,
        n_t: raw.scene.n_t,
        m_v: raw.star.m_v,
        m_h: raw.star.m_h,
        alpha: raw.scene.alpha,
        rician_beta: beta,
        rician_beta_ru: raw
            .scene
            .rician_factor_ru_db
            .map(db_to_linear)
            .unwrap_or(beta),
        p_max: dbm_to_watts(raw.scene.p_max_dbm),
        sigma2: dbm_to_watts(raw.scene.noise_dbm),
        r_min: raw.scene.r_min,
        scheme: raw.scene.scheme,
        clusters,
    };
    scene.validate()?;

    if raw.scene.strict_sides {
        check_strict_sides(&scene)?;
    }

    Ok(LoadedConfig {
        scene,
        optimizer: raw.optimizer.unwrap_or_default(),
        sweep: raw.sweep,
    })
}

/// With `strict_sides`, every region corner must leave each user on its tagged
/// side of the surface plane (the plane through the surface normal to the
/// BS-user ground direction is approximated by the y-split used throughout:
/// reflection = BS side of the surface, transmission = far side).
fn check_strict_sides(scene: &Scene) -> Result<(), SceneError> {
    let corners = [
        (scene.region.x_min, scene.region.y_min),
        (scene.region.x_min, scene.region.y_max),
        (scene.region.x_max, scene.region.y_min),
        (scene.region.x_max, scene.region.y_max),
    ];
    for (i, u) in scene.users.iter().enumerate() {
        for &(_, sy) in &corners {
            // Sign of the y-offset relative to the surface decides the side.
            let bs_sign = (scene.bs.y - sy).signum();
            let user_sign = (u.pos.y - sy).signum();
            let expected = match u.side {
                Side::Reflection => bs_sign,
                Side::Transmission => -bs_sign,
            };
            if user_sign != expected {
                return Err(SceneError::Invariant(format!(
                    "strict_sides: user {i} flips side at region corner y={sy}"
                )));
            }
        }
    }
    Ok(())
}
