//! Complex Hermitian PSD matrix variables over a real conic backend.
//!
//! `W = X + iY` with `X` symmetric and `Y` skew-symmetric is represented by
//! scalar variables for the upper triangle of `X` and the strict upper
//! triangle of `Y`. `W ⪰ 0` is equivalent to the real symmetric lift
//! `[[X, −Y], [Y, X]] ⪰ 0`, which is what gets passed to the PSD cone.

use nalgebra::{Complex, DMatrix};

use super::builder::{ProgramBuilder, SolveResult};
use super::expr::{Expr, Var};

type C64 = Complex<f64>;

#[derive(Debug, Clone)]
pub struct HermitianVar {
    n: usize,
    /// upper triangle of X, column-major: index q(q+1)/2 + p for p ≤ q
    x_vars: Vec<Var>,
    /// strict upper triangle of Y, column-major: index q(q−1)/2 + p for p < q
    y_vars: Vec<Var>,
}

impl HermitianVar {
    /// Allocate the variables and add the PSD constraint.
    pub fn new(pb: &mut ProgramBuilder, n: usize) -> Self {
        let x_vars = pb.vars(n * (n + 1) / 2);
        let y_vars = pb.vars(n * (n - 1) / 2);
        let hv = Self { n, x_vars, y_vars };

        let dim = 2 * n;
        let mut lift = vec![vec![Expr::zero(); dim]; dim];
        for i in 0..dim {
            for j in i..dim {
                lift[i][j] = hv.lift_entry(i, j);
            }
        }
        pb.psd(&lift);
        hv
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn x_var(&self, p: usize, q: usize) -> Var {
        debug_assert!(p <= q);
        self.x_vars[q * (q + 1) / 2 + p]
    }

    fn y_var(&self, p: usize, q: usize) -> Var {
        debug_assert!(p < q);
        self.y_vars[q * (q - 1) / 2 + p]
    }

    /// X entry as an expression (symmetric completion).
    pub fn re(&self, p: usize, q: usize) -> Expr {
        let (a, b) = if p <= q { (p, q) } else { (q, p) };
        Expr::from(self.x_var(a, b))
    }

    /// Y entry as an expression (skew-symmetric completion; diagonal is 0).
    pub fn im(&self, p: usize, q: usize) -> Expr {
        if p == q {
            Expr::zero()
        } else if p < q {
            Expr::from(self.y_var(p, q))
        } else {
            -Expr::from(self.y_var(q, p))
        }
    }

    /// Entry (i, j) of the real lift [[X, −Y], [Y, X]].
    fn lift_entry(&self, i: usize, j: usize) -> Expr {
        let n = self.n;
        match (i < n, j < n) {
            (true, true) => self.re(i, j),
            (true, false) => -self.im(i, j - n),
            (false, true) => self.im(i - n, j),
            (false, false) => self.re(i - n, j - n),
        }
    }

    pub fn trace(&self) -> Expr {
        Expr::sum((0..self.n).map(|p| self.re(p, p)))
    }

    /// `Re Tr(W H)` for Hermitian `H`; with both Hermitian this is just
    /// `Tr(W H)`, the quantity appearing in every SDR rate expression.
    pub fn trace_product(&self, h: &DMatrix<C64>) -> Expr {
        assert_eq!(h.nrows(), self.n);
        assert_eq!(h.ncols(), self.n);
        let mut e = Expr::zero();
        for p in 0..self.n {
            e = e + self.re(p, p) * h[(p, p)].re;
            for q in (p + 1)..self.n {
                e = e + self.re(p, q) * (2.0 * h[(p, q)].re);
                e = e + self.im(p, q) * (2.0 * h[(p, q)].im);
            }
        }
        e
    }

    /// Recover the complex matrix value from a solve result.
    pub fn value(&self, res: &SolveResult) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |p, q| {
            C64::new(res.value_expr(&self.re(p, q)), res.value_expr(&self.im(p, q)))
        })
    }
}
