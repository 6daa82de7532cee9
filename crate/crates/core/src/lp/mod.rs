//! Linear programs in a small, solver-neutral representation.
//!
//! Every formulation in the crate (day-ahead clearing, real-time redispatch,
//! the stochastic benchmark and the bilevel relaxations) is expressed as an
//! [`LpModel`] and handed to a [`SolverBackend`].
//!
//! # Dual sign convention
//!
//! All backends report duals as sensitivities of the optimal objective of the
//! minimization problem:
//!
//! * row dual `y_r = d obj / d rhs_r`; hence `y_r >= 0` on `>=` rows,
//!   `y_r <= 0` on `<=` rows and free on `=` rows;
//! * reduced cost `d_j = c_j - sum_r a_rj * y_r`; `d_j >= 0` when `x_j` sits on
//!   its lower bound and `d_j <= 0` when it sits on its upper bound.
//!
//! This is the Lagrangian `L = c'x - y'(Ax - b) - lam_lo'(x - lo) - lam_hi'(hi - x)`
//! with `lam_lo = max(d, 0)` and `lam_hi = max(-d, 0)`.

mod certify;
mod dense;
mod duality;
mod lu;
mod simplex;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use certify::Certifying;
pub use dense::DenseSimplex;
pub use duality::{check_duality, DualityReport};
pub use simplex::RevisedSimplex;

/// Index of a variable inside an [`LpModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// Index of a constraint row inside an [`LpModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub tag: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * x[v.0]).sum()
    }
}

/// A minimization LP: `min c'x` subject to tagged rows and variable bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpModel {
    vars: Vec<Variable>,
    rows: Vec<Row>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.vars.push(Variable { name: name.into(), lower, upper, cost });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(
        &mut self,
        tag: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> RowId {
        self.rows.push(Row { tag: tag.into(), coeffs, relation, rhs });
        RowId(self.rows.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn row(&self, r: RowId) -> &Row {
        &self.rows[r.0]
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        let var = &mut self.vars[v.0];
        var.lower = lower;
        var.upper = upper;
    }

    pub fn set_cost(&mut self, v: VarId, cost: f64) {
        self.vars[v.0].cost = cost;
    }

    pub fn set_relation(&mut self, r: RowId, relation: Relation) {
        self.rows[r.0].relation = relation;
    }

    pub fn set_rhs(&mut self, r: RowId, rhs: f64) {
        self.rows[r.0].rhs = rhs;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xi)| v.cost * xi).sum()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    /// Checks bound consistency, coefficient references and tag uniqueness.
    pub fn validate(&self) -> Result<(), Error> {
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.cost.is_nan() || !v.cost.is_finite() {
                return Err(Error::InvalidModel(alloc::format!("variable {} has non-finite data", v.name)));
            }
            if v.lower > v.upper {
                return Err(Error::InvalidModel(alloc::format!(
                    "variable {} has lower bound {} above upper bound {}",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(Error::InvalidModel(alloc::format!("variable {} has an empty domain", v.name)));
            }
        }
        let mut tags: Vec<&str> = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::InvalidModel(alloc::format!("row {} has non-finite rhs", row.tag)));
            }
            for &(v, a) in &row.coeffs {
                if v.0 >= self.vars.len() {
                    return Err(Error::InvalidModel(alloc::format!(
                        "row {} references unknown variable {}",
                        row.tag, v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidModel(alloc::format!("row {} has a non-finite coefficient", row.tag)));
                }
            }
            tags.push(&row.tag);
        }
        tags.sort_unstable();
        if let Some(w) = tags.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel(alloc::format!("duplicate row tag {}", w[0])));
        }
        Ok(())
    }

    /// Looks up a row by its tag (linear scan).
    pub fn find_row(&self, tag: &str) -> Option<RowId> {
        self.rows.iter().position(|r| r.tag == tag).map(RowId)
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration budget exhausted or the solve was interrupted.
    IterationLimit,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::IterationLimit => "iteration-limit",
        })
    }
}

/// Position of a variable or row logical relative to the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

/// Simplex basis usable as a warm start for a model with the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    pub vars: Vec<BasisStatus>,
    pub rows: Vec<BasisStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub(crate) fn failed(status: LpStatus, model: &LpModel, iterations: usize) -> Self {
        LpSolution {
            status,
            objective: f64::NAN,
            primal: alloc::vec![f64::NAN; model.num_vars()],
            row_duals: alloc::vec![f64::NAN; model.num_rows()],
            reduced_costs: alloc::vec![f64::NAN; model.num_vars()],
            iterations,
            basis: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.primal[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.row_duals[r.0]
    }

    /// Multiplier of the lower bound of `v` (nonnegative).
    pub fn lower_bound_dual(&self, v: VarId) -> f64 {
        self.reduced_costs[v.0].max(0.0)
    }

    /// Multiplier of the upper bound of `v` (nonnegative).
    pub fn upper_bound_dual(&self, v: VarId) -> f64 {
        (-self.reduced_costs[v.0]).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum primal constraint violation accepted at optimality.
    pub feas_tol: f64,
    /// Relative primal-dual objective gap accepted at optimality.
    pub gap_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { feas_tol: 1e-7, gap_tol: 1e-6 }
    }
}

/// Cooperative cancellation hook polled by long-running solves.
pub trait Interrupt {
    fn should_stop(&self) -> bool;
}

/// Never interrupts.
pub struct NoInterrupt;

impl Interrupt for NoInterrupt {
    fn should_stop(&self) -> bool {
        false
    }
}

/// Contract every LP engine implements.
///
/// Implementations must be deterministic: identical models and configuration
/// give bit-identical results. A solver instance may be shared between threads
/// only if the implementation is `Sync`; each call is independent.
pub trait SolverBackend {
    fn name(&self) -> &str;

    fn tolerances(&self) -> Tolerances;

    /// Solves `model`, optionally starting from `warm`.
    ///
    /// Failures are reported through [`LpSolution::status`]; a malformed model
    /// is the only error.
    fn solve_with(
        &self,
        model: &LpModel,
        warm: Option<&Basis>,
        interrupt: &dyn Interrupt,
    ) -> Result<LpSolution, Error>;

    fn solve(&self, model: &LpModel) -> Result<LpSolution, Error> {
        self.solve_with(model, None, &NoInterrupt)
    }
}

impl<B: SolverBackend + ?Sized> SolverBackend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn tolerances(&self) -> Tolerances {
        (**self).tolerances()
    }
    fn solve_with(
        &self,
        model: &LpModel,
        warm: Option<&Basis>,
        interrupt: &dyn Interrupt,
    ) -> Result<LpSolution, Error> {
        (**self).solve_with(model, warm, interrupt)
    }
}

/// Validates and solves `model` with `backend`.
pub fn solve_lp<B: SolverBackend + ?Sized>(model: &LpModel, backend: &B) -> Result<LpSolution, Error> {
    model.validate()?;
    backend.solve(model)
}

#[cfg(test)]
mod tests;
