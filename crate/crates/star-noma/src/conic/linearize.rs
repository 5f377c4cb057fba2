//! First-order surrogate bounds used by the successive convex
//! approximations. Each carries its expansion point, evaluates numerically
//! for certification, and emits affine expressions for program assembly.
//! Every bound is tight at its expansion point and one-sided everywhere on
//! its stated domain.

use super::builder::{ConicError, ProgramBuilder};
use super::expr::{Expr, Var};

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Global lower bound of `log₂(1 + 1/(x·y))` on `x, y > 0`:
/// `a₀ + a_x(x − x̃) + a_y(y − ỹ)`.
#[derive(Debug, Clone, Copy)]
pub struct TaylorLogRecip {
    pub x0: f64,
    pub y0: f64,
    pub a0: f64,
    pub ax: f64,
    pub ay: f64,
}

pub fn taylor_log_recip(x0: f64, y0: f64) -> Result<TaylorLogRecip, ConicError> {
    if !(x0 > 0.0 && y0 > 0.0) || !x0.is_finite() || !y0.is_finite() {
        return Err(ConicError::InvalidExpansionPoint(format!(
            "taylor_log_recip needs x̃, ỹ > 0, got ({x0}, {y0})"
        )));
    }
    Ok(TaylorLogRecip {
        x0,
        y0,
        a0: (1.0 + 1.0 / (x0 * y0)).log2(),
        ax: -LOG2_E / (x0 * x0 * y0 + x0),
        ay: -LOG2_E / (x0 * y0 * y0 + y0),
    })
}

impl TaylorLogRecip {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a0 + self.ax * (x - self.x0) + self.ay * (y - self.y0)
    }

    pub fn expr(&self, x: Expr, y: Expr) -> Expr {
        (x - self.x0) * self.ax + (y - self.y0) * self.ay + self.a0
    }
}

/// Global lower bound of `e^y`: `e^{ỹ}(y − ỹ + 1)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpLower {
    pub y0: f64,
    pub e0: f64,
}

pub fn exp_lower(y0: f64) -> ExpLower {
    ExpLower { y0, e0: y0.exp() }
}

impl ExpLower {
    pub fn eval(&self, y: f64) -> f64 {
        self.e0 * (y - self.y0 + 1.0)
    }

    pub fn expr(&self, y: Expr) -> Expr {
        (y - self.y0 + 1.0) * self.e0
    }
}

/// Convex-quadratic global upper bound of `c·d` for `c, d ≥ 0`:
/// `(c+d)²/2` minus the linearization of `(c²+d²)/2` at `(c̃, d̃)`.
#[derive(Debug, Clone, Copy)]
pub struct BilinearUpper {
    pub c0: f64,
    pub d0: f64,
}

pub fn bilinear_upper(c0: f64, d0: f64) -> BilinearUpper {
    BilinearUpper { c0, d0 }
}

impl BilinearUpper {
    /// The affine part: everything except the `(c+d)²/2` term.
    pub fn affine_eval(&self, c: f64, d: f64) -> f64 {
        -(self.c0 * self.c0 + self.d0 * self.d0) / 2.0
            - self.c0 * (c - self.c0)
            - self.d0 * (d - self.d0)
    }

    pub fn affine_expr(&self, c: Expr, d: Expr) -> Expr {
        -(c * self.c0) - (d * self.d0)
            + (self.c0 * self.c0 + self.d0 * self.d0) / 2.0
    }

    /// Full bound value `(c+d)²/2 + affine`.
    pub fn eval(&self, c: f64, d: f64) -> f64 {
        let s = c + d;
        s * s / 2.0 + self.affine_eval(c, d)
    }
}

/// Global lower bound of `‖s − X‖²`: `‖s̃ − X‖² + 2(s̃ − X)ᵀ(s − s̃)`.
#[derive(Debug, Clone, Copy)]
pub struct NormsqLower {
    pub s0: [f64; 3],
    pub base: f64,
    pub grad: [f64; 3],
}

pub fn normsq_lower(s0: [f64; 3], x: [f64; 3]) -> NormsqLower {
    let diff = [s0[0] - x[0], s0[1] - x[1], s0[2] - x[2]];
    NormsqLower {
        s0,
        base: diff.iter().map(|d| d * d).sum(),
        grad: [2.0 * diff[0], 2.0 * diff[1], 2.0 * diff[2]],
    }
}

impl NormsqLower {
    pub fn eval(&self, s: [f64; 3]) -> f64 {
        self.base
            + self.grad[0] * (s[0] - self.s0[0])
            + self.grad[1] * (s[1] - self.s0[1])
            + self.grad[2] * (s[2] - self.s0[2])
    }

    /// Expression over the free (x, y) location coordinates; z is fixed.
    pub fn expr_xy(&self, sx: Expr, sy: Expr) -> Expr {
        (sx - self.s0[0]) * self.grad[0] + (sy - self.s0[1]) * self.grad[1] + self.base
    }
}

/// Emit the convexified distance-product constraint
/// `τ^{1/α} ≥ upper-bound(φ·φ_i)` at expansion point `(φ̃, φ̃_i)`.
///
/// The right side upper-bounds `φ·φ_i`, so any feasible point satisfies the
/// true constraint `τ ≥ (φ·φ_i)^α`, keeping `τ` a valid proxy for the
/// reciprocal large-scale gain. Uses one power cone for the concave left
/// side and one second-order cone for the quadratic term.
pub fn product_lower_for_distance(
    pb: &mut ProgramBuilder,
    tau: Var,
    phi: Var,
    phi_i: Var,
    phi0: f64,
    phii0: f64,
    alpha: f64,
) -> Result<(), ConicError> {
    if !(phi0 > 0.0 && phii0 > 0.0) {
        return Err(ConicError::InvalidExpansionPoint(format!(
            "distance expansion point must be positive, got ({phi0}, {phii0})"
        )));
    }
    let bound = bilinear_upper(phi0, phii0);
    // z ≤ τ^{1/α}, z ≥ 0
    let z = pb.var();
    pb.nonneg(Expr::from(z));
    pb.pow_ge(1.0 / alpha, Expr::from(tau), Expr::constant(1.0), Expr::from(z));
    // t ≥ (φ+φ_i)²/2  ⟺  (φ+φ_i)² ≤ 2t
    let t = pb.var();
    pb.quad_le(phi + phi_i, Expr::from(t) * 2.0);
    // z ≥ t + affine part of the bilinear upper bound
    pb.nonneg(z - t - bound.affine_expr(Expr::from(phi), Expr::from(phi_i)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn taylor_log_recip_spec_points() {
        let b = taylor_log_recip(1.0, 1.0).unwrap();
        assert_relative_eq!(b.eval(1.0, 1.0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(b.eval(2.0, 2.0), 1.0 - LOG2_E, epsilon = 1e-12);
        assert!(b.eval(2.0, 2.0) <= (1.0f64 + 1.0 / 4.0).log2());
        assert!(taylor_log_recip(0.0, 1.0).is_err());
        assert!(taylor_log_recip(1.0, -2.0).is_err());
    }

    #[test]
    fn taylor_log_recip_is_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let x0 = 10f64.powf(rng.gen_range(-3.0..3.0));
            let y0 = 10f64.powf(rng.gen_range(-3.0..3.0));
            let x = 10f64.powf(rng.gen_range(-3.0..3.0));
            let y = 10f64.powf(rng.gen_range(-3.0..3.0));
            let b = taylor_log_recip(x0, y0).unwrap();
            let truth = (1.0 + 1.0 / (x * y)).log2();
            assert!(
                b.eval(x, y) <= truth + 1e-9 * truth.abs().max(1.0),
                "violated at x0={x0} y0={y0} x={x} y={y}"
            );
        }
    }

    #[test]
    fn exp_lower_bound() {
        let b = exp_lower(0.0);
        assert_relative_eq!(b.eval(0.0), 1.0);
        assert!(b.eval(1.0) <= std::f64::consts::E);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let y0 = rng.gen_range(-30.0..5.0);
            let y = rng.gen_range(-30.0..5.0);
            let b = exp_lower(y0);
            assert!(b.eval(y) <= y.exp() + 1e-12);
            assert_relative_eq!(b.eval(y0), y0.exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn bilinear_upper_bound() {
        let b = bilinear_upper(1.0, 1.0);
        assert_relative_eq!(b.eval(1.0, 1.0), 1.0, epsilon = 1e-12);
        assert!(b.eval(2.0, 0.0) >= 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let c0: f64 = rng.gen_range(0.0..50.0);
            let d0: f64 = rng.gen_range(0.0..50.0);
            let c: f64 = rng.gen_range(0.0..50.0);
            let d: f64 = rng.gen_range(0.0..50.0);
            let b = bilinear_upper(c0, d0);
            assert!(b.eval(c, d) >= c * d - 1e-9);
            assert_relative_eq!(b.eval(c0, d0), c0 * d0, epsilon = 1e-9);
        }
    }

    #[test]
    fn normsq_lower_bound() {
        let s0 = [1.0, 2.0, 3.0];
        let b = normsq_lower(s0, s0);
        assert_relative_eq!(b.eval([9.0, -4.0, 0.5]), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let p = |rng: &mut ChaCha8Rng| {
                [
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                    rng.gen_range(-20.0..20.0),
                ]
            };
            let s0 = p(&mut rng);
            let x = p(&mut rng);
            let s = p(&mut rng);
            let b = normsq_lower(s0, x);
            let truth: f64 = (0..3).map(|k| (s[k] - x[k]) * (s[k] - x[k])).sum();
            assert!(b.eval(s) <= truth + 1e-9);
            let tight: f64 = (0..3).map(|k| (s0[k] - x[k]) * (s0[k] - x[k])).sum();
            assert_relative_eq!(b.eval(s0), tight, epsilon = 1e-9);
        }
    }

    #[test]
    fn distance_surrogate_feasible_at_expansion() {
        // α = 2: τ = (φφ_i)² satisfies the emitted constraint at the
        // expansion point, and the surrogate implies the true constraint.
        let mut pb = ProgramBuilder::new();
        let tau = pb.var();
        let phi = pb.var();
        let phi_i = pb.var();
        pb.eq_zero(phi - 3.0);
        pb.eq_zero(phi_i - 4.0);
        pb.minimize(Expr::from(tau));
        product_lower_for_distance(&mut pb, tau, phi, phi_i, 3.0, 4.0, 2.0).unwrap();
        let res = pb.solve(&Default::default()).unwrap();
        assert!(res.is_optimal());
        // at the expansion point the bound is tight: τ^{1/2} = 12
        assert_relative_eq!(res.value(tau), 144.0, epsilon = 1e-4);
        assert!(product_lower_for_distance(
            &mut ProgramBuilder::new(),
            tau,
            phi,
            phi_i,
            -1.0,
            1.0,
            2.5
        )
        .is_err());
    }

    #[test]
    fn distance_surrogate_conservative_off_expansion() {
        // moving away from the expansion point can only tighten: the
        // minimizing τ always satisfies τ ≥ (φφ_i)^α
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let phi0 = rng.gen_range(1.0..30.0);
            let phii0 = rng.gen_range(1.0..30.0);
            let pv = rng.gen_range(1.0..30.0);
            let piv = rng.gen_range(1.0..30.0);
            let alpha = 2.5;
            let mut pb = ProgramBuilder::new();
            let tau = pb.var();
            let phi = pb.var();
            let phi_i = pb.var();
            pb.eq_zero(phi - pv);
            pb.eq_zero(phi_i - piv);
            pb.minimize(Expr::from(tau));
            product_lower_for_distance(&mut pb, tau, phi, phi_i, phi0, phii0, alpha).unwrap();
            let res = pb.solve(&Default::default()).unwrap();
            assert!(res.is_optimal());
            let tau_v = res.value(tau);
            assert!(
                tau_v >= (pv * piv).powf(alpha) * (1.0 - 1e-5),
                "tau {tau_v} below true product power {}",
                (pv * piv).powf(alpha)
            );
        }
    }
}
