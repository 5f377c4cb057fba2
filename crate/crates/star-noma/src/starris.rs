//! Energy-splitting surface state and its feasibility projection.

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::scene::Side;

/// Closed-interval margin used for the `0 < beta < 1` amplitude constraint so
/// that the conic feasible set stays closed.
pub const EPS_BETA: f64 = 1e-6;

/// Per-element transmission/reflection amplitudes and phases of an
/// energy-splitting surface. `beta_r[m] == 1 - beta_t[m]` always holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarConfig {
    pub beta_t: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub theta_r: Vec<f64>,
}

impl StarConfig {
    /// All power to the transmission side, zero phases.
    pub fn full_transmission(m: usize) -> Self {
        Self {
            beta_t: vec![1.0; m],
            theta_t: vec![0.0; m],
            theta_r: vec![0.0; m],
        }
    }

    /// Even split, given phases.
    pub fn even_split(theta_t: Vec<f64>, theta_r: Vec<f64>) -> Self {
        assert_eq!(theta_t.len(), theta_r.len());
        Self {
            beta_t: vec![0.5; theta_t.len()],
            theta_t,
            theta_r,
        }
    }

    pub fn len(&self) -> usize {
        self.beta_t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta_t.is_empty()
    }

    pub fn beta(&self, side: Side, m: usize) -> f64 {
        match side {
            Side::Transmission => self.beta_t[m],
            Side::Reflection => 1.0 - self.beta_t[m],
        }
    }

    /// `v_side`: entry `m` is `sqrt(beta_m) * exp(j theta_m)`.
    pub fn coefficient_vector(&self, side: Side) -> DVector<Complex<f64>> {
        let thetas = match side {
            Side::Transmission => &self.theta_t,
            Side::Reflection => &self.theta_r,
        };
        DVector::from_iterator(
            self.len(),
            (0..self.len()).map(|m| {
                let amp = self.beta(side, m).max(0.0).sqrt();
                Complex::from_polar(amp, thetas[m])
            }),
        )
    }
}

/// Build a feasible [`StarConfig`] from a pair of raw per-element coefficients,
/// e.g. after rank-one extraction. Phases are preserved; the squared-amplitude
/// pair is rescaled per element so the energy-splitting sum equals one. A
/// degenerate element with both amplitudes zero gets an even 0.5/0.5 split.
pub fn project_feasible(raw_t: &DVector<Complex<f64>>, raw_r: &DVector<Complex<f64>>) -> StarConfig {
    assert_eq!(raw_t.len(), raw_r.len());
    let m = raw_t.len();
    let mut beta_t = Vec::with_capacity(m);
    let mut theta_t = Vec::with_capacity(m);
    let mut theta_r = Vec::with_capacity(m);
    for i in 0..m {
        let pt = raw_t[i].norm_sqr();
        let pr = raw_r[i].norm_sqr();
        let total = pt + pr;
        let bt = if total > 0.0 { pt / total } else { 0.5 };
        beta_t.push(bt.clamp(0.0, 1.0));
        theta_t.push(wrap_phase(raw_t[i].arg()));
        theta_r.push(wrap_phase(raw_r[i].arg()));
    }
    StarConfig {
        beta_t,
        theta_t,
        theta_r,
    }
}

fn wrap_phase(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let t = theta.rem_euclid(two_pi);
    if t >= two_pi {
        0.0
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_transmission_vectors() {
        let cfg = StarConfig::full_transmission(3);
        let vt = cfg.coefficient_vector(Side::Transmission);
        let vr = cfg.coefficient_vector(Side::Reflection);
        for m in 0..3 {
            assert_relative_eq!(vt[m].re, 1.0);
            assert_relative_eq!(vt[m].im, 0.0);
            assert_relative_eq!(vr[m].norm(), 0.0);
        }
    }

    #[test]
    fn even_split_amplitudes() {
        let cfg = StarConfig::even_split(vec![0.0; 4], vec![0.0; 4]);
        let vt = cfg.coefficient_vector(Side::Transmission);
        for m in 0..4 {
            assert_relative_eq!(vt[m].re, 0.5f64.sqrt());
        }
    }

    #[test]
    fn es_identity_random_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = 5;
            let cfg = StarConfig {
                beta_t: (0..m).map(|_| rng.gen::<f64>()).collect(),
                theta_t: (0..m).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect(),
                theta_r: (0..m).map(|_| rng.gen::<f64>() * std::f64::consts::TAU).collect(),
            };
            let vt = cfg.coefficient_vector(Side::Transmission);
            let vr = cfg.coefficient_vector(Side::Reflection);
            for i in 0..m {
                assert_relative_eq!(vt[i].norm_sqr() + vr[i].norm_sqr(), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn projection_cases() {
        let t = DVector::from_vec(vec![
            Complex::from_polar(0.6, 1.0),
            Complex::new(2.0, 0.0),
            Complex::new(0.0, 0.0),
        ]);
        let r = DVector::from_vec(vec![
            Complex::from_polar(0.8, 2.0),
            Complex::new(0.0, 0.0),
            Complex::new(0.0, 0.0),
        ]);
        let cfg = project_feasible(&t, &r);
        // already feasible: 0.36 + 0.64 = 1
        assert_relative_eq!(cfg.beta_t[0], 0.36, epsilon = 1e-12);
        assert_relative_eq!(cfg.theta_t[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(cfg.theta_r[0], 2.0, epsilon = 1e-12);
        // (2, 0) normalizes to full transmission
        assert_relative_eq!(cfg.beta_t[1], 1.0);
        // (0, 0) tie rule
        assert_relative_eq!(cfg.beta_t[2], 0.5);
    }

    #[test]
    fn projection_idempotent_on_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let m = 4;
            let cfg = StarConfig {
                beta_t: (0..m).map(|_| rng.gen::<f64>()).collect(),
                theta_t: (0..m).map(|_| rng.gen::<f64>() * 6.0).collect(),
                theta_r: (0..m).map(|_| rng.gen::<f64>() * 6.0).collect(),
            };
            let vt = cfg.coefficient_vector(Side::Transmission);
            let vr = cfg.coefficient_vector(Side::Reflection);
            let back = project_feasible(&vt, &vr);
            for i in 0..m {
                assert_relative_eq!(back.beta_t[i], cfg.beta_t[i], epsilon = 1e-12);
                assert_relative_eq!(
                    back.coefficient_vector(Side::Transmission)[i].re,
                    vt[i].re,
                    epsilon = 1e-12
                );
            }
        }
    }
}
