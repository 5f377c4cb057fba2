//! Scalar decision variables and affine expressions over them.

use std::ops::{Add, Mul, Neg, Sub};

/// Handle to one scalar decision variable of a [`super::ProgramBuilder`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Affine expression `constant + Σ coeff·var`. Terms may repeat a variable;
/// they are merged when the program is assembled.
#[derive(Clone, Debug, Default)]
pub struct Expr {
    pub(crate) terms: Vec<(usize, f64)>,
    pub(crate) constant: f64,
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn sum<I: IntoIterator<Item = Expr>>(items: I) -> Self {
        let mut out = Expr::zero();
        for e in items {
            out.terms.extend(e.terms);
            out.constant += e.constant;
        }
        out
    }

    /// Evaluate the expression against a full primal vector.
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Self {
        Expr {
            terms: vec![(v.0, 1.0)],
            constant: 0.0,
        }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

impl<T: Into<Expr>> Add<T> for Expr {
    type Output = Expr;
    fn add(mut self, rhs: T) -> Expr {
        let rhs = rhs.into();
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl<T: Into<Expr>> Sub<T> for Expr {
    type Output = Expr;
    fn sub(self, rhs: T) -> Expr {
        self + (-rhs.into())
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(mut self) -> Expr {
        for t in &mut self.terms {
            t.1 = -t.1;
        }
        self.constant = -self.constant;
        self
    }
}

impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(mut self, rhs: f64) -> Expr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        rhs * self
    }
}

impl Add<Expr> for f64 {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        rhs + self
    }
}

impl Sub<Expr> for f64 {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        -rhs + self
    }
}

impl<T: Into<Expr>> Add<T> for Var {
    type Output = Expr;
    fn add(self, rhs: T) -> Expr {
        Expr::from(self) + rhs.into()
    }
}

impl<T: Into<Expr>> Sub<T> for Var {
    type Output = Expr;
    fn sub(self, rhs: T) -> Expr {
        Expr::from(self) - rhs.into()
    }
}

impl Mul<f64> for Var {
    type Output = Expr;
    fn mul(self, rhs: f64) -> Expr {
        Expr::from(self) * rhs
    }
}

impl Mul<Var> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Var) -> Expr {
        Expr::from(rhs) * self
    }
}

impl Neg for Var {
    type Output = Expr;
    fn neg(self) -> Expr {
        -Expr::from(self)
    }
}
