use serde::{Deserialize, Serialize};

use super::{LpModel, LpSolution, Relation, Tolerances};

/// Optimality certificate residuals of a primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// Largest row or bound violation of the primal point.
    pub primal_residual: f64,
    /// Largest sign violation of the row duals and reduced costs.
    pub dual_residual: f64,
    /// Largest product of a multiplier and its slack, scaled by `1 + |rhs|`.
    pub complementarity_residual: f64,
    /// `|primal - dual| / (1 + |primal|)`.
    pub gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl DualityReport {
    pub fn ok(&self, tol: &Tolerances) -> bool {
        let dual_tol = tol.feas_tol.max(1e-6);
        self.primal_residual <= tol.feas_tol * 10.0
            && self.dual_residual <= dual_tol
            && self.complementarity_residual <= dual_tol
            && self.gap <= tol.gap_tol
    }
}

/// Evaluates primal feasibility, dual feasibility, complementary slackness and
/// the duality gap of `sol` for `model`, recomputing reduced costs from the
/// row duals rather than trusting the backend's values.
pub fn check_duality(model: &LpModel, sol: &LpSolution) -> DualityReport {
    let x = &sol.primal;
    let y = &sol.row_duals;
    let mut primal_residual = 0.0f64;
    let mut dual_residual = 0.0f64;
    let mut comp = 0.0f64;
    let mut dual_obj = 0.0;

    let mut d: alloc::vec::Vec<f64> = model.vars().iter().map(|v| v.cost).collect();
    for (r, row) in model.rows().iter().enumerate() {
        let act = row.activity(x);
        let viol = match row.relation {
            Relation::Le => act - row.rhs,
            Relation::Ge => row.rhs - act,
            Relation::Eq => (act - row.rhs).abs(),
        };
        primal_residual = primal_residual.max(viol);
        let yr = y[r];
        let sign_viol = match row.relation {
            Relation::Le => yr.max(0.0),
            Relation::Ge => (-yr).max(0.0),
            Relation::Eq => 0.0,
        };
        dual_residual = dual_residual.max(sign_viol);
        if row.relation != Relation::Eq {
            comp = comp.max(yr.abs() * (act - row.rhs).abs() / (1.0 + row.rhs.abs()));
        }
        dual_obj += yr * row.rhs;
        for &(v, a) in &row.coeffs {
            d[v.0] -= a * yr;
        }
    }
    for (j, v) in model.vars().iter().enumerate() {
        primal_residual = primal_residual.max(v.lower - x[j]).max(x[j] - v.upper);
        let lo_mult = d[j].max(0.0);
        let hi_mult = (-d[j]).max(0.0);
        if lo_mult > 0.0 {
            if v.lower.is_finite() {
                dual_obj += lo_mult * v.lower;
                comp = comp.max(lo_mult * (x[j] - v.lower).abs() / (1.0 + v.lower.abs()));
            } else {
                dual_residual = dual_residual.max(lo_mult);
            }
        }
        if hi_mult > 0.0 {
            if v.upper.is_finite() {
                dual_obj -= hi_mult * v.upper;
                comp = comp.max(hi_mult * (v.upper - x[j]).abs() / (1.0 + v.upper.abs()));
            } else {
                dual_residual = dual_residual.max(hi_mult);
            }
        }
    }
    let primal_obj = model.objective_value(x);
    DualityReport {
        primal_residual: primal_residual.max(0.0),
        dual_residual,
        complementarity_residual: comp,
        gap: (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs()),
        primal_objective: primal_obj,
        dual_objective: dual_obj,
    }
}
