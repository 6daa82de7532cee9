//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Slow but simple; used to cross-check [`super::RevisedSimplex`] on small
//! models. Warm starts are ignored.

use alloc::vec;
use alloc::vec::Vec;

use super::{Basis, Interrupt, LpModel, LpSolution, LpStatus, Relation, SolverBackend, Tolerances};
use crate::error::Error;

#[derive(Debug, Clone)]
pub struct DenseSimplex {
    pub tolerances: Tolerances,
    pub max_iterations: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex { tolerances: Tolerances::default(), max_iterations: 200_000 }
    }
}

/// How an original variable maps onto nonnegative tableau columns.
enum Map {
    /// `x = shift + col`
    Shifted { col: usize, shift: f64 },
    /// `x = shift - col`
    Mirrored { col: usize, shift: f64 },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    obj: Vec<f64>,
    width: usize,
}

const EPS: f64 = 1e-9;

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.width]
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let p = self.rows[r][q];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (k, row) in self.rows.iter_mut().enumerate() {
            if k == r {
                continue;
            }
            let f = row[q];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[q] = 0.0;
            }
        }
        let f = self.obj[q];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[q] = 0.0;
        }
        self.basis[r] = q;
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (v, t) in self.obj.iter_mut().zip(&self.rows[r]) {
                    *v -= cb * t;
                }
            }
        }
    }

    /// Runs Bland's rule over columns for which `allowed` holds.
    fn optimize(
        &mut self,
        allowed: &dyn Fn(usize) -> bool,
        iterations: &mut usize,
        max_iterations: usize,
        interrupt: &dyn Interrupt,
    ) -> LpStatus {
        loop {
            if *iterations >= max_iterations || (*iterations % 64 == 0 && interrupt.should_stop()) {
                return LpStatus::IterationLimit;
            }
            let Some(q) = (0..self.width).find(|&j| allowed(j) && self.obj[j] < -EPS) else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][q];
                if a > EPS {
                    let ratio = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => {
                            ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return LpStatus::Unbounded;
            };
            self.pivot(r, q);
            *iterations += 1;
        }
    }
}

impl SolverBackend for DenseSimplex {
    fn name(&self) -> &str {
        "dense-simplex"
    }

    fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    fn solve_with(&self, model: &LpModel, _warm: Option<&Basis>, interrupt: &dyn Interrupt) -> Result<LpSolution, Error> {
        model.validate()?;
        let mut ncols = 0usize;
        let mut maps = Vec::with_capacity(model.num_vars());
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for v in model.vars() {
            if v.lower.is_finite() {
                maps.push(Map::Shifted { col: ncols, shift: v.lower });
                if v.upper.is_finite() {
                    bound_rows.push((ncols, v.upper - v.lower));
                }
                ncols += 1;
            } else if v.upper.is_finite() {
                maps.push(Map::Mirrored { col: ncols, shift: v.upper });
                ncols += 1;
            } else {
                maps.push(Map::Split { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }
        let nstruct = ncols;
        let m = model.num_rows() + bound_rows.len();
        let slack_count = model.rows().iter().filter(|r| r.relation != Relation::Eq).count() + bound_rows.len();
        let art0 = nstruct + slack_count;
        let width = art0 + m;

        let mut cost = vec![0.0; width];
        for (v, map) in model.vars().iter().zip(&maps) {
            match *map {
                Map::Shifted { col, .. } => cost[col] = v.cost,
                Map::Mirrored { col, .. } => cost[col] = -v.cost,
                Map::Split { pos, neg } => {
                    cost[pos] = v.cost;
                    cost[neg] = -v.cost;
                }
            }
        }

        let mut rows = Vec::with_capacity(m);
        let mut negated = Vec::with_capacity(m);
        let mut slack = nstruct;
        for row in model.rows() {
            let mut t = vec![0.0; width + 1];
            let mut b = row.rhs;
            for &(v, a) in &row.coeffs {
                match maps[v.0] {
                    Map::Shifted { col, shift } => {
                        t[col] += a;
                        b -= a * shift;
                    }
                    Map::Mirrored { col, shift } => {
                        t[col] -= a;
                        b -= a * shift;
                    }
                    Map::Split { pos, neg } => {
                        t[pos] += a;
                        t[neg] -= a;
                    }
                }
            }
            match row.relation {
                Relation::Le => {
                    t[slack] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    t[slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            t[width] = b;
            rows.push(t);
        }
        for &(col, ub) in &bound_rows {
            let mut t = vec![0.0; width + 1];
            t[col] = 1.0;
            t[slack] = 1.0;
            slack += 1;
            t[width] = ub;
            rows.push(t);
        }
        for (r, t) in rows.iter_mut().enumerate() {
            let neg = t[width] < 0.0;
            if neg {
                for v in t.iter_mut() {
                    *v = -*v;
                }
            }
            negated.push(neg);
            t[art0 + r] = 1.0;
        }

        let mut tab = Tableau { rows, basis: (art0..art0 + m).collect(), obj: Vec::new(), width };
        let mut iterations = 0;

        // Phase 1: minimize the sum of artificials.
        let mut p1 = vec![0.0; width];
        for c in p1.iter_mut().skip(art0) {
            *c = 1.0;
        }
        tab.set_costs(&p1);
        let status = tab.optimize(&|_| true, &mut iterations, self.max_iterations, interrupt);
        if status != LpStatus::Optimal {
            return Ok(LpSolution::failed(status, model, iterations));
        }
        let infeas: f64 = -tab.obj[width];
        if infeas > self.tolerances.feas_tol * (1.0 + m as f64) {
            return Ok(LpSolution::failed(LpStatus::Infeasible, model, iterations));
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] >= art0 {
                if let Some(q) = (0..art0).find(|&j| tab.rows[r][j].abs() > 1e-7) {
                    tab.pivot(r, q);
                }
            }
        }

        tab.set_costs(&cost);
        let status = tab.optimize(&|j| j < art0, &mut iterations, self.max_iterations, interrupt);
        if status != LpStatus::Optimal {
            return Ok(LpSolution::failed(status, model, iterations));
        }

        let mut xs = vec![0.0; width];
        for (r, &b) in tab.basis.iter().enumerate() {
            xs[b] = tab.rhs(r);
        }
        let primal: Vec<f64> = maps
            .iter()
            .map(|map| match *map {
                Map::Shifted { col, shift } => shift + xs[col],
                Map::Mirrored { col, shift } => shift - xs[col],
                Map::Split { pos, neg } => xs[pos] - xs[neg],
            })
            .collect();
        // Artificial columns are unit vectors with zero phase-2 cost, so their
        // reduced cost is minus the row multiplier.
        let row_duals: Vec<f64> = (0..model.num_rows())
            .map(|r| {
                let y = -tab.obj[art0 + r];
                if negated[r] {
                    -y
                } else {
                    y
                }
            })
            .collect();
        let mut reduced_costs: Vec<f64> = model.vars().iter().map(|v| v.cost).collect();
        for (row, &y) in model.rows().iter().zip(&row_duals) {
            for &(v, a) in &row.coeffs {
                reduced_costs[v.0] -= a * y;
            }
        }
        Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: model.objective_value(&primal),
            primal,
            row_duals,
            reduced_costs,
            iterations,
            basis: None,
        })
    }
}
