//! Dense linear programs in the inequality/equality standard form
//!
//! ```text
//! minimize    cᵀx
//! subject to  G x ≤ h
//!             A x = b
//! ```
//!
//! with `x` otherwise unrestricted. [`solve`] runs a two-phase tableau
//! simplex with Bland's rule; [`verify_bruteforce`] is an independent
//! vertex-enumeration oracle for tiny instances.

mod matrix;
mod oracle;
mod simplex;

pub use matrix::Matrix;
pub use oracle::{verify_bruteforce, OracleResult, MAX_ORACLE_VARIABLES};
pub use simplex::solve;

use serde::Serialize;
use thiserror::Error;

/// Default absolute tolerance on constraint residuals.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("instance too large for brute force: {vars} variables (max {max})")]
    TooLarge { vars: usize, max: usize },
    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("oracle cross-check failed: {0}")]
    OracleMismatch(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLP {
    pub c: Vec<f64>,
    pub g: Matrix,
    pub h: Vec<f64>,
    pub a: Matrix,
    pub b_eq: Vec<f64>,
}

impl StandardFormLP {
    pub fn new(c: Vec<f64>, g: Matrix, h: Vec<f64>, a: Matrix, b_eq: Vec<f64>) -> Result<Self, LpError> {
        let lp = StandardFormLP { c, g, h, a, b_eq };
        lp.validate()?;
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.c.len();
        if self.g.rows() != self.h.len() {
            return Err(LpError::Dimension(format!(
                "G has {} rows but h has {} entries",
                self.g.rows(),
                self.h.len()
            )));
        }
        if self.a.rows() != self.b_eq.len() {
            return Err(LpError::Dimension(format!(
                "A has {} rows but b has {} entries",
                self.a.rows(),
                self.b_eq.len()
            )));
        }
        if self.g.rows() > 0 && self.g.cols() != n {
            return Err(LpError::Dimension(format!("G has {} columns, c has {n}", self.g.cols())));
        }
        if self.a.rows() > 0 && self.a.cols() != n {
            return Err(LpError::Dimension(format!("A has {} columns, c has {n}", self.a.cols())));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.c) {
            return Err(LpError::NonFinite("c"));
        }
        if !finite(self.g.data()) {
            return Err(LpError::NonFinite("G"));
        }
        if !finite(&self.h) {
            return Err(LpError::NonFinite("h"));
        }
        if !finite(self.a.data()) {
            return Err(LpError::NonFinite("A"));
        }
        if !finite(&self.b_eq) {
            return Err(LpError::NonFinite("b"));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of `Gx ≤ h` or `Ax = b` at `x`.
    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.g.rows() {
            worst = worst.max(self.g.row_dot(r, x) - self.h[r]);
        }
        for r in 0..self.a.rows() {
            worst = worst.max((self.a.row_dot(r, x) - self.b_eq[r]).abs());
        }
        worst
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.max_residual(x) <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal solution; empty unless optimal.
    pub x: Vec<f64>,
    /// `+∞` when infeasible, `−∞` when unbounded.
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
