//! Bounded revised simplex on sparse data.
//!
//! Internally every row `i` gets a logical column `s_i` and the constraints
//! read `A x + s = 0` with `-ru_i <= s_i <= -rl_i`. A primal infeasible start
//! is handled by the dual simplex (dual Devex pricing, bound flipping ratio
//! test); one-sided variables whose reduced cost points at the missing bound
//! get a temporary box. The primal simplex then finishes: phase 1 minimizes
//! the sum of bound violations of the basic variables (composite objective),
//! phase 2 uses Devex pricing with reduced costs updated from the pivot row,
//! and the ratio test is the two-pass Harris test. Rows with identical
//! coefficient vectors are merged into one ranged row before solving.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::lu::{BasisFactor, Lu};
use super::{Basis, BasisStatus, Interrupt, LpModel, LpSolution, LpStatus, Relation, SolverBackend, Tolerances};
use crate::error::Error;

const NONE: usize = usize::MAX;
/// Width of the temporary box given to one-sided variables by the dual phase (scaled units).
const ARTIFICIAL_BOX: f64 = 1e6;

/// Sparse revised simplex backend. This is the default engine.
#[derive(Debug, Clone)]
pub struct RevisedSimplex {
    pub tolerances: Tolerances,
    pub max_iterations: usize,
    /// Eta updates accumulated before the basis is refactorized.
    pub refactor_interval: usize,
    pub scaling: bool,
}

impl Default for RevisedSimplex {
    fn default() -> Self {
        RevisedSimplex { tolerances: Tolerances::default(), max_iterations: 5_000_000, refactor_interval: 100, scaling: true }
    }
}

impl SolverBackend for RevisedSimplex {
    fn name(&self) -> &str {
        "revised-simplex"
    }

    fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    fn solve_with(&self, model: &LpModel, warm: Option<&Basis>, interrupt: &dyn Interrupt) -> Result<LpSolution, Error> {
        model.validate()?;
        let Some(prob) = Internal::build(model, self.scaling) else {
            return Ok(LpSolution::failed(LpStatus::Infeasible, model, 0));
        };
        let mut s = Solver::new(&prob, self);
        s.crash(model, warm);
        let status = s.run(interrupt, self.max_iterations);
        Ok(s.extract(model, status))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VStat {
    Basic,
    Lower,
    Upper,
    Zero,
}

/// Scaled computational form of an [`LpModel`].
struct Internal {
    m: usize,
    n: usize,
    col_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    row_ptr: Vec<usize>,
    row_col: Vec<usize>,
    row_val: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    col_scale: Vec<f64>,
    row_scale: Vec<f64>,
    /// Original row -> internal row.
    row_of: Vec<usize>,
    /// Original row that defines the lower (resp. upper) activity limit of an internal row.
    lower_owner: Vec<usize>,
    upper_owner: Vec<usize>,
}

fn pow2_round(x: f64) -> f64 {
    if !(x.is_finite() && x > 0.0) {
        return 1.0;
    }
    libm::exp2(libm::round(libm::log2(x)))
}

impl Internal {
    /// Returns `None` when merged rows have contradictory limits.
    fn build(model: &LpModel, scaling: bool) -> Option<Internal> {
        let n = model.num_vars();
        // Normalized coefficient lists.
        let rows: Vec<Vec<(usize, f64)>> = model
            .rows()
            .iter()
            .map(|r| {
                let mut c: Vec<(usize, f64)> = r.coeffs.iter().map(|&(v, a)| (v.0, a)).collect();
                c.sort_by_key(|e| e.0);
                let mut out: Vec<(usize, f64)> = Vec::with_capacity(c.len());
                for (j, a) in c {
                    match out.last_mut() {
                        Some(last) if last.0 == j => last.1 += a,
                        _ => out.push((j, a)),
                    }
                }
                out.retain(|e| e.1 != 0.0);
                out
            })
            .collect();

        let mut order: Vec<usize> = (0..rows.len()).collect();
        let cmp = |a: &usize, b: &usize| -> Ordering {
            let (ra, rb) = (&rows[*a], &rows[*b]);
            ra.len().cmp(&rb.len()).then_with(|| {
                for (x, y) in ra.iter().zip(rb.iter()) {
                    let o = x.0.cmp(&y.0).then_with(|| x.1.to_bits().cmp(&y.1.to_bits()));
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                Ordering::Equal
            })
        };
        order.sort_by(|a, b| cmp(a, b).then(a.cmp(b)));

        let mut row_of = vec![0usize; rows.len()];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (k, &r) in order.iter().enumerate() {
            if k > 0 && cmp(&order[k - 1], &r) == Ordering::Equal && !rows[r].is_empty() {
                groups.last_mut().unwrap().push(r);
            } else {
                groups.push(vec![r]);
            }
        }
        // Keep internal rows in order of first appearance for locality.
        groups.sort_by_key(|g| g[0]);

        let m = groups.len();
        let mut rl = vec![f64::NEG_INFINITY; m];
        let mut ru = vec![f64::INFINITY; m];
        let mut lower_owner = vec![NONE; m];
        let mut upper_owner = vec![NONE; m];
        let mut ipat: Vec<&Vec<(usize, f64)>> = Vec::with_capacity(m);
        for (i, g) in groups.iter().enumerate() {
            ipat.push(&rows[g[0]]);
            for &r in g {
                row_of[r] = i;
                let row = &model.rows()[r];
                if matches!(row.relation, Relation::Ge | Relation::Eq) && row.rhs > rl[i] {
                    rl[i] = row.rhs;
                    lower_owner[i] = r;
                }
                if matches!(row.relation, Relation::Le | Relation::Eq) && row.rhs < ru[i] {
                    ru[i] = row.rhs;
                    upper_owner[i] = r;
                }
            }
            if rl[i] > ru[i] {
                if rl[i] - ru[i] > 1e-9 * (1.0 + rl[i].abs().max(ru[i].abs())) {
                    return None;
                }
                let mid = 0.5 * (rl[i] + ru[i]);
                rl[i] = mid;
                ru[i] = mid;
            }
        }

        // Row and column scaling factors (powers of two, geometric).
        let mut row_scale = vec![1.0; m];
        let mut col_scale = vec![1.0; n];
        if scaling {
            for _ in 0..6 {
                let mut cmin = vec![f64::INFINITY; n];
                let mut cmax = vec![0.0f64; n];
                for (i, pat) in ipat.iter().enumerate() {
                    for &(j, a) in pat.iter() {
                        let v = (a * row_scale[i]).abs();
                        cmin[j] = cmin[j].min(v);
                        cmax[j] = cmax[j].max(v);
                    }
                }
                for j in 0..n {
                    if cmax[j] > 0.0 {
                        col_scale[j] = 1.0 / libm::sqrt(cmin[j] * cmax[j]);
                    }
                }
                for (i, pat) in ipat.iter().enumerate() {
                    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                    for &(j, a) in pat.iter() {
                        let v = (a * col_scale[j]).abs();
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    if hi > 0.0 {
                        row_scale[i] = 1.0 / libm::sqrt(lo * hi);
                    }
                }
            }
            for s in row_scale.iter_mut() {
                *s = pow2_round(*s);
            }
            for s in col_scale.iter_mut() {
                *s = pow2_round(*s);
            }
        }

        // CSR then CSC.
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut row_col = Vec::new();
        let mut row_val = Vec::new();
        row_ptr.push(0);
        let mut col_count = vec![0usize; n];
        for (i, pat) in ipat.iter().enumerate() {
            for &(j, a) in pat.iter() {
                row_col.push(j);
                row_val.push(a * row_scale[i] * col_scale[j]);
                col_count[j] += 1;
            }
            row_ptr.push(row_col.len());
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + col_count[j];
        }
        let mut fill = col_ptr.clone();
        let mut col_idx = vec![0usize; row_col.len()];
        let mut col_val = vec![0.0; row_col.len()];
        for i in 0..m {
            for e in row_ptr[i]..row_ptr[i + 1] {
                let j = row_col[e];
                col_idx[fill[j]] = i;
                col_val[fill[j]] = row_val[e];
                fill[j] += 1;
            }
        }

        let mut lo = Vec::with_capacity(n + m);
        let mut hi = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for (j, v) in model.vars().iter().enumerate() {
            lo.push(v.lower / col_scale[j]);
            hi.push(v.upper / col_scale[j]);
            cost.push(v.cost * col_scale[j]);
        }
        for i in 0..m {
            lo.push(-ru[i] * row_scale[i]);
            hi.push(-rl[i] * row_scale[i]);
            cost.push(0.0);
        }

        Some(Internal {
            m,
            n,
            col_ptr,
            col_idx,
            col_val,
            row_ptr,
            row_col,
            row_val,
            lo,
            hi,
            cost,
            col_scale,
            row_scale,
            row_of,
            lower_owner,
            upper_owner,
        })
    }
}

struct Ratio {
    step: f64,
    /// Basis position leaving together with the bound value it reaches.
    leaving: Option<(usize, f64)>,
    flip: bool,
}

struct Solver<'a> {
    p: &'a Internal,
    ptol: f64,
    dtol: f64,
    refactor_interval: usize,
    /// Working bounds; the dual phase may box one-sided variables temporarily.
    lo: Vec<f64>,
    hi: Vec<f64>,
    boxed: Vec<usize>,
    x: Vec<f64>,
    stat: Vec<VStat>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    factor: BasisFactor,
    cost: Vec<f64>,
    d: Vec<f64>,
    weights: Vec<f64>,
    /// Dual pricing weights by basis position.
    row_weights: Vec<f64>,
    d_valid: bool,
    fresh: bool,
    perturbed: bool,
    perturbations: usize,
    degenerate_run: usize,
    rng: u64,
    iterations: usize,
    // workspaces
    wrow: Vec<f64>,
    wpos: Vec<f64>,
    alpha: Vec<f64>,
    prow: Vec<f64>,
    rho: Vec<f64>,
    touched: Vec<usize>,
}

impl<'a> Solver<'a> {
    fn new(p: &'a Internal, cfg: &RevisedSimplex) -> Self {
        let (m, n) = (p.m, p.n);
        Solver {
            p,
            ptol: 1e-7,
            dtol: 1e-9,
            refactor_interval: cfg.refactor_interval.max(1),
            lo: p.lo.clone(),
            hi: p.hi.clone(),
            boxed: Vec::new(),
            x: vec![0.0; n + m],
            stat: vec![VStat::Lower; n + m],
            basis: Vec::new(),
            pos_of: vec![NONE; n + m],
            factor: BasisFactor::default(),
            cost: p.cost.clone(),
            d: vec![0.0; n + m],
            weights: vec![1.0; n + m],
            row_weights: vec![1.0; m],
            d_valid: false,
            fresh: false,
            perturbed: false,
            perturbations: 0,
            degenerate_run: 0,
            rng: 0x9E37_79B9_7F4A_7C15,
            iterations: 0,
            wrow: vec![0.0; m],
            wpos: vec![0.0; m],
            alpha: vec![0.0; m],
            prow: vec![0.0; n + m],
            rho: vec![0.0; m],
            touched: Vec::new(),
        }
    }

    fn next_rand(&mut self) -> f64 {
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        (self.rng >> 11) as f64 / (1u64 << 53) as f64
    }

    fn nonbasic_status(&self, j: usize) -> VStat {
        let (lo, hi) = (self.lo[j], self.hi[j]);
        if lo.is_finite() {
            VStat::Lower
        } else if hi.is_finite() {
            VStat::Upper
        } else {
            VStat::Zero
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.stat[j] {
            VStat::Lower => self.lo[j],
            VStat::Upper => self.hi[j],
            _ => 0.0,
        }
    }

    /// Initial basis: the warm start when given, else all logicals.
    fn crash(&mut self, model: &LpModel, warm: Option<&Basis>) {
        let (m, n) = (self.p.m, self.p.n);
        let mut basic: Vec<usize> = Vec::with_capacity(m);
        for j in 0..n + m {
            self.stat[j] = self.nonbasic_status(j);
        }
        match warm {
            Some(b) if b.vars.len() == n && b.rows.len() == model.num_rows() => {
                for j in 0..n {
                    self.stat[j] = match b.vars[j] {
                        BasisStatus::Basic => {
                            basic.push(j);
                            VStat::Basic
                        }
                        BasisStatus::AtLower if self.lo[j].is_finite() => VStat::Lower,
                        BasisStatus::AtUpper if self.hi[j].is_finite() => VStat::Upper,
                        _ => self.nonbasic_status(j),
                    };
                }
                let mut row_basic = vec![true; m];
                let mut row_stat = vec![VStat::Basic; m];
                for (r, st) in b.rows.iter().enumerate() {
                    let i = self.p.row_of[r];
                    // activity at its upper limit means the logical sits at its lower bound
                    match st {
                        BasisStatus::AtUpper => {
                            row_basic[i] = false;
                            row_stat[i] = VStat::Lower;
                        }
                        BasisStatus::AtLower => {
                            row_basic[i] = false;
                            row_stat[i] = VStat::Upper;
                        }
                        _ => {}
                    }
                }
                for i in 0..m {
                    let j = n + i;
                    if row_basic[i] {
                        self.stat[j] = VStat::Basic;
                        basic.push(j);
                    } else {
                        let s = row_stat[i];
                        self.stat[j] = match s {
                            VStat::Lower if self.lo[j].is_finite() => VStat::Lower,
                            VStat::Upper if self.hi[j].is_finite() => VStat::Upper,
                            _ => self.nonbasic_status(j),
                        };
                    }
                }
                if basic.len() > m {
                    // Demote surplus structurals (latest first) to a bound.
                    while basic.len() > m {
                        let j = basic.iter().rposition(|&j| j < n).unwrap_or(basic.len() - 1);
                        let col = basic.remove(j);
                        self.stat[col] = self.nonbasic_status(col);
                    }
                } else if basic.len() < m {
                    for i in 0..m {
                        if basic.len() == m {
                            break;
                        }
                        if self.stat[n + i] != VStat::Basic {
                            self.stat[n + i] = VStat::Basic;
                            basic.push(n + i);
                        }
                    }
                }
            }
            _ => {
                for i in 0..m {
                    self.stat[n + i] = VStat::Basic;
                    basic.push(n + i);
                }
                // Free columns replace the logical of their largest entry's row.
                let mut taken = vec![false; m];
                for j in 0..n {
                    if self.lo[j].is_finite() || self.hi[j].is_finite() {
                        continue;
                    }
                    let mut best: Option<(usize, f64)> = None;
                    for e in self.p.col_ptr[j]..self.p.col_ptr[j + 1] {
                        let (i, a) = (self.p.col_idx[e], self.p.col_val[e].abs());
                        if !taken[i] && best.is_none_or(|b| a > b.1) {
                            best = Some((i, a));
                        }
                    }
                    if let Some((i, _)) = best {
                        taken[i] = true;
                        basic[i] = j;
                        self.stat[j] = VStat::Basic;
                        self.stat[n + i] = self.nonbasic_status(n + i);
                    }
                }
            }
        }
        self.basis = basic;
        for (pos, &j) in self.basis.iter().enumerate() {
            self.pos_of[j] = pos;
        }
        for j in 0..n + m {
            if self.stat[j] != VStat::Basic {
                self.x[j] = self.nonbasic_value(j);
            }
        }
    }

    fn column(&self, j: usize) -> ColIter<'_> {
        if j < self.p.n {
            ColIter::Structural(
                self.p.col_idx[self.p.col_ptr[j]..self.p.col_ptr[j + 1]].iter(),
                self.p.col_val[self.p.col_ptr[j]..self.p.col_ptr[j + 1]].iter(),
            )
        } else {
            ColIter::Logical(Some(j - self.p.n))
        }
    }

    fn refactor(&mut self) {
        let (m, n) = (self.p.m, self.p.n);
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self.basis.iter().map(|&j| self.column(j).collect()).collect();
            match Lu::factorize(m, &cols) {
                Ok(lu) => {
                    self.factor = BasisFactor::new(lu);
                    break;
                }
                Err(sing) => {
                    // Swap in logicals for the rows left without a pivot.
                    for (&pos, &row) in sing.positions.iter().zip(sing.rows.iter()) {
                        let out = self.basis[pos];
                        self.pos_of[out] = NONE;
                        self.stat[out] = self.nonbasic_status(out);
                        self.x[out] = self.nonbasic_value(out);
                        let inn = n + row;
                        if self.stat[inn] == VStat::Basic {
                            // already basic elsewhere; cannot happen for an unpivoted row
                            continue;
                        }
                        self.basis[pos] = inn;
                        self.pos_of[inn] = pos;
                        self.stat[inn] = VStat::Basic;
                    }
                    self.d_valid = false;
                }
            }
        }
        self.compute_primal();
        self.fresh = true;
    }

    fn compute_primal(&mut self) {
        let m = self.p.m;
        let rhs = &mut self.wrow;
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.p.n + m {
            if self.stat[j] == VStat::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.p.n {
                for e in self.p.col_ptr[j]..self.p.col_ptr[j + 1] {
                    rhs[self.p.col_idx[e]] -= self.p.col_val[e] * xj;
                }
            } else {
                rhs[j - self.p.n] -= xj;
            }
        }
        let mut xb = vec![0.0; m];
        self.factor.ftran(&mut self.wrow, &mut xb);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[pos];
        }
    }

    /// `y = B^-T c_B` for the given basic costs, then `d = c - A'y` on nonbasics.
    fn compute_duals(&mut self, phase1: bool) -> Vec<f64> {
        let (m, n) = (self.p.m, self.p.n);
        for (pos, &j) in self.basis.iter().enumerate() {
            self.wpos[pos] = if phase1 { self.phase1_cost(j) } else { self.cost[j] };
        }
        let mut y = vec![0.0; m];
        self.factor.btran(&mut self.wpos, &mut y);
        for j in 0..n {
            if self.stat[j] == VStat::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let mut s = if phase1 { 0.0 } else { self.cost[j] };
            for e in self.p.col_ptr[j]..self.p.col_ptr[j + 1] {
                s -= y[self.p.col_idx[e]] * self.p.col_val[e];
            }
            self.d[j] = s;
        }
        for i in 0..m {
            let j = n + i;
            self.d[j] = if self.stat[j] == VStat::Basic { 0.0 } else { (if phase1 { 0.0 } else { self.cost[j] }) - y[i] };
        }
        y
    }

    fn phase1_cost(&self, j: usize) -> f64 {
        let x = self.x[j];
        if x < self.lo[j] - self.ptol {
            -1.0
        } else if x > self.hi[j] + self.ptol {
            1.0
        } else {
            0.0
        }
    }

    fn infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| {
                let x = self.x[j];
                (self.lo[j] - x).max(x - self.hi[j]).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn eligible(&self, j: usize) -> Option<f64> {
        let dj = self.d[j];
        match self.stat[j] {
            VStat::Basic => None,
            VStat::Lower => (dj < -self.dtol && self.hi[j] > self.lo[j]).then_some(1.0),
            VStat::Upper => (dj > self.dtol && self.hi[j] > self.lo[j]).then_some(-1.0),
            VStat::Zero => {
                if dj < -self.dtol {
                    Some(1.0)
                } else if dj > self.dtol {
                    Some(-1.0)
                } else {
                    None
                }
            }
        }
    }

    fn price(&self, devex: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.p.n + self.p.m {
            if let Some(dir) = self.eligible(j) {
                let dj = self.d[j];
                let score = if devex { dj * dj / self.weights[j] } else { dj.abs() };
                if score > best_score {
                    best_score = score;
                    best = Some((j, dir));
                }
            }
        }
        best
    }

    fn ftran_column(&mut self, q: usize) {
        self.wrow.iter_mut().for_each(|v| *v = 0.0);
        if q < self.p.n {
            for e in self.p.col_ptr[q]..self.p.col_ptr[q + 1] {
                self.wrow[self.p.col_idx[e]] = self.p.col_val[e];
            }
        } else {
            self.wrow[q - self.p.n] = 1.0;
        }
        self.factor.ftran(&mut self.wrow, &mut self.alpha);
    }

    fn ratio_test(&self, q: usize, dir: f64, phase1: bool) -> Option<Ratio> {
        let piv_tol = 1e-7;
        let ptol = self.ptol;
        let mut t_max = f64::INFINITY;
        // (pos, delta, target, exact ratio)
        let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
        for (pos, &j) in self.basis.iter().enumerate() {
            let a = self.alpha[pos];
            if a.abs() <= piv_tol {
                continue;
            }
            let delta = -dir * a;
            let (x, lo, hi) = (self.x[j], self.lo[j], self.hi[j]);
            let target = if phase1 && x < lo - ptol {
                if delta > 0.0 {
                    Some(if hi.is_finite() { hi } else { lo })
                } else {
                    None
                }
            } else if phase1 && x > hi + ptol {
                if delta < 0.0 {
                    Some(if lo.is_finite() { lo } else { hi })
                } else {
                    None
                }
            } else if delta > 0.0 {
                hi.is_finite().then_some(hi)
            } else {
                lo.is_finite().then_some(lo)
            };
            let Some(target) = target else { continue };
            let (relaxed, exact) = if delta > 0.0 {
                ((target + ptol - x) / delta, (target - x) / delta)
            } else {
                ((x - target + ptol) / -delta, (x - target) / -delta)
            };
            t_max = t_max.min(relaxed.max(0.0));
            cands.push((pos, delta, target, exact.max(0.0)));
        }
        let range = self.hi[q] - self.lo[q];
        if range.is_finite() && range <= t_max {
            return Some(Ratio { step: range, leaving: None, flip: true });
        }
        if cands.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for c in cands {
            if c.3 <= t_max && best.is_none_or(|b| c.1.abs() > b.1.abs()) {
                best = Some(c);
            }
        }
        let (pos, _, target, exact) = best?;
        Some(Ratio { step: exact, leaving: Some((pos, target)), flip: false })
    }

    /// Pivot row `alpha_r = e_r' B^-1 [A I]` over nonbasic columns, into `self.prow`.
    fn compute_pivot_row(&mut self, r: usize) {
        let (m, n) = (self.p.m, self.p.n);
        for &j in &self.touched {
            self.prow[j] = 0.0;
        }
        self.touched.clear();
        self.wpos.iter_mut().for_each(|v| *v = 0.0);
        self.wpos[r] = 1.0;
        self.factor.btran(&mut self.wpos, &mut self.rho);
        for i in 0..m {
            let ri = self.rho[i];
            if ri == 0.0 {
                continue;
            }
            for e in self.p.row_ptr[i]..self.p.row_ptr[i + 1] {
                let j = self.p.row_col[e];
                if self.prow[j] == 0.0 {
                    self.touched.push(j);
                }
                self.prow[j] += ri * self.p.row_val[e];
                if self.prow[j] == 0.0 {
                    self.prow[j] = f64::MIN_POSITIVE;
                }
            }
            let j = n + i;
            self.prow[j] = ri;
            self.touched.push(j);
        }
    }

    fn perturb_costs(&mut self) {
        for j in 0..self.p.n {
            let mag = 1e-7 * (1.0 + self.p.cost[j].abs());
            let u = 0.5 + 0.5 * self.next_rand();
            let sign = match self.stat[j] {
                VStat::Lower => 1.0,
                VStat::Upper => -1.0,
                _ => {
                    if self.next_rand() < 0.5 {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            self.cost[j] = self.p.cost[j] + sign * mag * u;
        }
        self.perturbed = true;
        self.perturbations += 1;
        self.d_valid = false;
    }

    /// Moves nonbasic variables to the bound their reduced cost calls for.
    /// Variables without the needed bound get a temporary box.
    fn dual_repair(&mut self) {
        let mut moved = false;
        for j in 0..self.p.n + self.p.m {
            let st = self.stat[j];
            if st == VStat::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = self.d[j];
            let want = if dj < -self.dtol {
                VStat::Upper
            } else if dj > self.dtol {
                VStat::Lower
            } else {
                continue;
            };
            if st == want {
                continue;
            }
            if !self.lo[j].is_finite() && !self.hi[j].is_finite() {
                self.lo[j] = -ARTIFICIAL_BOX;
                self.hi[j] = ARTIFICIAL_BOX;
                self.boxed.push(j);
            } else if want == VStat::Upper && !self.hi[j].is_finite() {
                self.hi[j] = self.lo[j] + ARTIFICIAL_BOX;
                self.boxed.push(j);
            } else if want == VStat::Lower && !self.lo[j].is_finite() {
                self.lo[j] = self.hi[j] - ARTIFICIAL_BOX;
                self.boxed.push(j);
            }
            self.stat[j] = want;
            self.x[j] = self.nonbasic_value(j);
            moved = true;
        }
        if moved {
            self.compute_primal();
        }
    }

    /// Drops the temporary boxes; variables resting on one move to a true bound.
    fn unbox(&mut self) {
        if self.boxed.is_empty() {
            return;
        }
        for k in 0..self.boxed.len() {
            let j = self.boxed[k];
            self.lo[j] = self.p.lo[j];
            self.hi[j] = self.p.hi[j];
            if self.stat[j] != VStat::Basic && !(self.x[j] == self.lo[j] || self.x[j] == self.hi[j]) {
                self.stat[j] = self.nonbasic_status(j);
                self.x[j] = self.nonbasic_value(j);
            }
        }
        self.boxed.clear();
        self.compute_primal();
    }

    fn refactor_due(&self) -> bool {
        self.factor.num_updates() >= self.refactor_interval || self.factor.eta_nnz() > 4 * (self.factor.lu_nnz() + self.p.m)
    }

    /// Dual simplex with bound flipping from a dual feasible start. Returns a
    /// final status, or `None` to continue with the primal simplex from the
    /// current basis (primal feasible on normal exit).
    fn run_dual(&mut self, interrupt: &dyn Interrupt, max_iter: usize) -> Option<LpStatus> {
        let piv_tol = 1e-7;
        let m = self.p.m;
        self.compute_duals(false);
        self.dual_repair();
        self.row_weights.iter_mut().for_each(|w| *w = 1.0);
        // (column, exact ratio, signed pivot entry)
        let mut cands: Vec<(usize, f64, f64)> = Vec::new();
        let mut best_obj = f64::NEG_INFINITY;
        let mut stalled = 0;
        loop {
            if self.iterations >= max_iter {
                return Some(LpStatus::IterationLimit);
            }
            if self.iterations % 64 == 0 && interrupt.should_stop() {
                return Some(LpStatus::IterationLimit);
            }
            if self.refactor_due() {
                self.refactor();
                self.compute_duals(false);
                self.dual_repair();
                // Hand a stalled tail over to the primal simplex.
                let obj: f64 = (0..self.p.n).map(|j| self.cost[j] * self.x[j]).sum();
                if obj > best_obj + 1e-9 * (1.0 + obj.abs()) {
                    best_obj = obj;
                    stalled = 0;
                } else {
                    stalled += 1;
                    if stalled > 30 {
                        return None;
                    }
                }
            }
            let mut r = NONE;
            let mut best = 0.0;
            for (pos, &j) in self.basis.iter().enumerate() {
                let x = self.x[j];
                let v = if x < self.lo[j] - self.ptol {
                    self.lo[j] - x
                } else if x > self.hi[j] + self.ptol {
                    x - self.hi[j]
                } else {
                    continue;
                };
                let score = v * v / self.row_weights[pos];
                if score > best {
                    best = score;
                    r = pos;
                }
            }
            if r == NONE {
                if !self.fresh {
                    self.refactor();
                    self.compute_duals(false);
                    self.dual_repair();
                    continue;
                }
                return None;
            }
            let p = self.basis[r];
            let below = self.x[p] < self.lo[p];
            let sign = if below { -1.0 } else { 1.0 };
            let target = if below { self.lo[p] } else { self.hi[p] };
            self.compute_pivot_row(r);
            cands.clear();
            for &j in &self.touched {
                if self.stat[j] == VStat::Basic || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = sign * self.prow[j];
                let ok = match self.stat[j] {
                    VStat::Lower => a > piv_tol,
                    VStat::Upper => a < -piv_tol,
                    _ => a.abs() > piv_tol,
                };
                if ok {
                    cands.push((j, self.d[j] / a, a));
                }
            }
            if cands.is_empty() {
                if !self.fresh {
                    self.refactor();
                    self.compute_duals(false);
                    self.dual_repair();
                    continue;
                }
                if self.boxed.is_empty() {
                    return Some(LpStatus::Infeasible);
                }
                return None;
            }
            cands.sort_by(|a, b| a.1.total_cmp(&b.1));
            // Pass boxed breakpoints while the dual objective keeps improving.
            let mut slope = (self.x[p] - target).abs();
            let mut k0 = 0;
            while k0 + 1 < cands.len() {
                let (j, _, a) = cands[k0];
                let range = self.hi[j] - self.lo[j];
                if self.stat[j] == VStat::Zero || !range.is_finite() {
                    break;
                }
                let drop = a.abs() * range;
                if slope - drop <= 0.0 {
                    break;
                }
                slope -= drop;
                k0 += 1;
            }
            let t_max = cands[k0..].iter().map(|c| c.1 + self.dtol / c.2.abs()).fold(f64::INFINITY, f64::min);
            let mut pick = k0;
            for k in k0..cands.len() {
                if cands[k].1 <= t_max && cands[k].2.abs() > cands[pick].2.abs() {
                    pick = k;
                }
            }
            let q = cands[pick].0;
            self.ftran_column(q);
            let alpha_rq = self.alpha[r];
            let prow_q = self.prow[q];
            if (alpha_rq - prow_q).abs() > 1e-7 * (1.0 + alpha_rq.abs()) || alpha_rq.abs() < piv_tol {
                if !self.fresh {
                    self.refactor();
                    self.compute_duals(false);
                    self.dual_repair();
                    continue;
                }
                if alpha_rq.abs() < piv_tol {
                    return None;
                }
            }

            // Dual update.
            let theta_d = self.d[q] / alpha_rq;
            if theta_d.abs() <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            if theta_d != 0.0 {
                for k in 0..self.touched.len() {
                    let j = self.touched[k];
                    if self.stat[j] != VStat::Basic {
                        self.d[j] -= theta_d * self.prow[j];
                    }
                }
            }
            self.d[q] = 0.0;
            self.d[p] = -theta_d;

            // Bound flips, then the primal step.
            if k0 > 0 {
                self.wrow.iter_mut().for_each(|v| *v = 0.0);
                for &(j, _, _) in &cands[..k0] {
                    let (old, st) = if self.stat[j] == VStat::Lower {
                        (self.lo[j], VStat::Upper)
                    } else {
                        (self.hi[j], VStat::Lower)
                    };
                    self.stat[j] = st;
                    let delta = self.nonbasic_value(j) - old;
                    self.x[j] += delta;
                    if j < self.p.n {
                        for e in self.p.col_ptr[j]..self.p.col_ptr[j + 1] {
                            self.wrow[self.p.col_idx[e]] += self.p.col_val[e] * delta;
                        }
                    } else {
                        self.wrow[j - self.p.n] += delta;
                    }
                }
                self.factor.ftran(&mut self.wrow, &mut self.wpos);
                for (pos, &j) in self.basis.iter().enumerate() {
                    self.x[j] -= self.wpos[pos];
                }
            }
            let theta_p = (self.x[p] - target) / alpha_rq;
            for (pos, &j) in self.basis.iter().enumerate() {
                let a = self.alpha[pos];
                if a != 0.0 {
                    self.x[j] -= theta_p * a;
                }
            }
            self.x[q] += theta_p;

            let wr = self.row_weights[r];
            for pos in 0..m {
                let a = self.alpha[pos];
                if pos != r && a != 0.0 {
                    let ratio = a / alpha_rq;
                    let w = ratio * ratio * wr;
                    if w > self.row_weights[pos] {
                        self.row_weights[pos] = w;
                    }
                }
            }
            self.row_weights[r] = (wr / (alpha_rq * alpha_rq)).max(1.0);
            if self.row_weights.iter().any(|&w| w > 1e12) {
                self.row_weights.iter_mut().for_each(|w| *w = 1.0);
            }

            self.factor.update(r, &self.alpha);
            self.basis[r] = q;
            self.pos_of[q] = r;
            self.pos_of[p] = NONE;
            self.stat[q] = VStat::Basic;
            self.stat[p] = if below { VStat::Lower } else { VStat::Upper };
            self.x[p] = target;
            self.iterations += 1;
            self.fresh = false;
            if self.perturbations < 3 && self.degenerate_run > 50 {
                self.perturb_nonbasic_costs();
                self.degenerate_run = 0;
            }
        }
    }

    /// Shifts nonbasic costs away from zero reduced cost, keeping dual feasibility.
    fn perturb_nonbasic_costs(&mut self) {
        for j in 0..self.p.n {
            let dir = match self.stat[j] {
                VStat::Lower => 1.0,
                VStat::Upper => -1.0,
                _ => continue,
            };
            if self.lo[j] == self.hi[j] {
                continue;
            }
            let shift = dir * 1e-7 * (1.0 + self.p.cost[j].abs()) * (0.5 + 0.5 * self.next_rand());
            self.cost[j] += shift;
            self.d[j] += shift;
        }
        self.perturbed = true;
        self.perturbations += 1;
    }

    fn run(&mut self, interrupt: &dyn Interrupt, max_iter: usize) -> LpStatus {
        self.refactor();
        if self.infeasibility() > self.ptol {
            if let Some(status) = self.run_dual(interrupt, max_iter) {
                return status;
            }
            self.unbox();
            if self.perturbed {
                self.cost.copy_from_slice(&self.p.cost);
                self.perturbed = false;
            }
            self.perturbations = 0;
            self.degenerate_run = 0;
            self.d_valid = false;
        }
        loop {
            if self.iterations >= max_iter {
                return LpStatus::IterationLimit;
            }
            if self.iterations % 64 == 0 && interrupt.should_stop() {
                return LpStatus::IterationLimit;
            }
            if self.refactor_due() {
                self.refactor();
                self.d_valid = false;
            }
            let phase1 = self.infeasibility() > self.ptol;
            if phase1 {
                self.d_valid = false;
                self.compute_duals(true);
            } else if !self.d_valid {
                self.compute_duals(false);
                self.d_valid = true;
                self.weights.iter_mut().for_each(|w| *w = 1.0);
            }
            let Some((q, dir)) = self.price(!phase1) else {
                if !self.fresh {
                    self.refactor();
                    self.d_valid = false;
                    continue;
                }
                if phase1 {
                    return LpStatus::Infeasible;
                }
                if self.perturbed {
                    self.cost.copy_from_slice(&self.p.cost);
                    self.perturbed = false;
                    self.d_valid = false;
                    continue;
                }
                return LpStatus::Optimal;
            };
            self.ftran_column(q);
            let Some(ratio) = self.ratio_test(q, dir, phase1) else {
                if !self.fresh {
                    self.refactor();
                    self.d_valid = false;
                    continue;
                }
                if phase1 {
                    // no blocking variable while repairing feasibility: numerical trouble
                    return LpStatus::Infeasible;
                }
                return LpStatus::Unbounded;
            };
            let t = ratio.step;
            if t <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            // Primal update.
            self.x[q] += dir * t;
            for (pos, &j) in self.basis.iter().enumerate() {
                let a = self.alpha[pos];
                if a != 0.0 {
                    self.x[j] -= dir * t * a;
                }
            }
            self.iterations += 1;
            if ratio.flip {
                self.stat[q] = if dir > 0.0 { VStat::Upper } else { VStat::Lower };
                self.x[q] = self.nonbasic_value(q);
                continue;
            }
            let (r, target) = ratio.leaving.unwrap();
            let leaving = self.basis[r];
            let alpha_rq = self.alpha[r];
            if alpha_rq.abs() < 1e-7 && !self.fresh {
                // Unstable pivot: undo and refactor.
                self.x[q] -= dir * t;
                for (pos, &j) in self.basis.iter().enumerate() {
                    let a = self.alpha[pos];
                    if a != 0.0 {
                        self.x[j] += dir * t * a;
                    }
                }
                self.iterations -= 1;
                self.refactor();
                self.d_valid = false;
                continue;
            }
            if !phase1 {
                self.compute_pivot_row(r);
                let theta = self.d[q] / alpha_rq;
                let wq = self.weights[q].max(1.0);
                for k in 0..self.touched.len() {
                    let j = self.touched[k];
                    if self.stat[j] == VStat::Basic || j == q {
                        continue;
                    }
                    let arj = self.prow[j];
                    self.d[j] -= theta * arj;
                    let ratio = arj / alpha_rq;
                    let w = ratio * ratio * wq;
                    if w > self.weights[j] {
                        self.weights[j] = w;
                    }
                }
                self.d[leaving] = -theta;
                self.weights[leaving] = (wq / (alpha_rq * alpha_rq)).max(1.0);
                self.d[q] = 0.0;
                if self.weights[leaving] > 1e12 || self.touched.iter().any(|&j| self.weights[j] > 1e12) {
                    self.weights.iter_mut().for_each(|w| *w = 1.0);
                }
            }
            self.factor.update(r, &self.alpha);
            self.basis[r] = q;
            self.pos_of[q] = r;
            self.pos_of[leaving] = NONE;
            self.stat[q] = VStat::Basic;
            let (lo, hi) = (self.lo[leaving], self.hi[leaving]);
            self.stat[leaving] = if target == lo && lo.is_finite() {
                VStat::Lower
            } else if target == hi && hi.is_finite() {
                VStat::Upper
            } else {
                self.nonbasic_status(leaving)
            };
            self.x[leaving] = self.nonbasic_value(leaving);
            self.fresh = false;
            if !phase1 && !self.perturbed && self.perturbations < 3 && self.degenerate_run > 50 {
                self.perturb_costs();
                self.degenerate_run = 0;
            }
        }
    }

    fn extract(&mut self, model: &LpModel, status: LpStatus) -> LpSolution {
        if status != LpStatus::Optimal {
            return LpSolution::failed(status, model, self.iterations);
        }
        let (m, n) = (self.p.m, self.p.n);
        self.cost.copy_from_slice(&self.p.cost);
        let y_int = self.compute_duals(false);
        let primal: Vec<f64> = (0..n).map(|j| self.x[j] * self.p.col_scale[j]).collect();
        let mut row_duals = vec![0.0; model.num_rows()];
        for i in 0..m {
            let y = y_int[i] * self.p.row_scale[i];
            if y > 0.0 && self.p.lower_owner[i] != NONE {
                row_duals[self.p.lower_owner[i]] = y;
            } else if y < 0.0 && self.p.upper_owner[i] != NONE {
                row_duals[self.p.upper_owner[i]] = y;
            } else if y != 0.0 {
                let owner = if self.p.lower_owner[i] != NONE { self.p.lower_owner[i] } else { self.p.upper_owner[i] };
                if owner != NONE {
                    row_duals[owner] = y;
                }
            }
        }
        let mut reduced_costs: Vec<f64> = model.vars().iter().map(|v| v.cost).collect();
        for (r, row) in model.rows().iter().enumerate() {
            let y = row_duals[r];
            if y != 0.0 {
                for &(v, a) in &row.coeffs {
                    reduced_costs[v.0] -= a * y;
                }
            }
        }
        let to_status = |s: VStat| match s {
            VStat::Basic => BasisStatus::Basic,
            VStat::Lower => BasisStatus::AtLower,
            VStat::Upper => BasisStatus::AtUpper,
            VStat::Zero => BasisStatus::Zero,
        };
        let vars: Vec<BasisStatus> = (0..n).map(|j| to_status(self.stat[j])).collect();
        let mut rows = vec![BasisStatus::Basic; model.num_rows()];
        for i in 0..m {
            match self.stat[n + i] {
                // logical at its lower bound: activity at the upper limit
                VStat::Lower if self.p.upper_owner[i] != NONE => rows[self.p.upper_owner[i]] = BasisStatus::AtUpper,
                VStat::Upper if self.p.lower_owner[i] != NONE => rows[self.p.lower_owner[i]] = BasisStatus::AtLower,
                _ => {}
            }
        }
        let objective = model.objective_value(&primal);
        LpSolution {
            status,
            objective,
            primal,
            row_duals,
            reduced_costs,
            iterations: self.iterations,
            basis: Some(Basis { vars, rows }),
        }
    }
}

enum ColIter<'a> {
    Structural(core::slice::Iter<'a, usize>, core::slice::Iter<'a, f64>),
    Logical(Option<usize>),
}

impl Iterator for ColIter<'_> {
    type Item = (usize, f64);
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColIter::Structural(i, v) => Some((*i.next()?, *v.next()?)),
            ColIter::Logical(r) => r.take().map(|r| (r, 1.0)),
        }
    }
}
