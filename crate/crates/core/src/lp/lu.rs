//! Sparse LU factorization of simplex bases.
//!
//! Right-looking Gaussian elimination with Markowitz pivot selection and
//! threshold partial pivoting. Basis updates between refactorizations are kept
//! as a product-form eta file.

use alloc::vec;
use alloc::vec::Vec;

const NONE: usize = usize::MAX;
/// Relative threshold for accepting a pivot against its column maximum.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Entries below this magnitude are never used as pivots.
const PIVOT_ABS_TOL: f64 = 1e-11;
/// Candidate pivots examined before settling for the best one found.
const SEARCH_LIMIT: usize = 4;

/// Rows and basis positions left without a pivot when the basis is singular.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Lu {
    m: usize,
    prow: Vec<usize>,
    pcol: Vec<usize>,
    pval: Vec<f64>,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

/// Intrusive doubly linked lists of items grouped by count.
struct Buckets {
    head: Vec<usize>,
    next: Vec<usize>,
    prev: Vec<usize>,
    count: Vec<usize>,
    linked: Vec<bool>,
}

impl Buckets {
    fn new(items: usize, max_count: usize) -> Self {
        Buckets {
            head: vec![NONE; max_count + 2],
            next: vec![NONE; items],
            prev: vec![NONE; items],
            count: vec![0; items],
            linked: vec![false; items],
        }
    }

    fn insert(&mut self, x: usize, c: usize) {
        let c = c.min(self.head.len() - 1);
        self.count[x] = c;
        self.prev[x] = NONE;
        self.next[x] = self.head[c];
        if self.head[c] != NONE {
            self.prev[self.head[c]] = x;
        }
        self.head[c] = x;
        self.linked[x] = true;
    }

    fn remove(&mut self, x: usize) {
        if !self.linked[x] {
            return;
        }
        let (p, n) = (self.prev[x], self.next[x]);
        if p != NONE {
            self.next[p] = n;
        } else {
            self.head[self.count[x]] = n;
        }
        if n != NONE {
            self.prev[n] = p;
        }
        self.linked[x] = false;
    }

    fn update(&mut self, x: usize, c: usize) {
        if self.linked[x] {
            self.remove(x);
            self.insert(x, c);
        }
    }
}

impl Lu {
    pub fn nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }

    /// Factorizes the `m x m` matrix whose columns are `cols` (row, value) lists.
    pub fn factorize(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<Lu, Singular> {
        debug_assert_eq!(cols.len(), m);
        let mut acols: Vec<Vec<(usize, f64)>> = cols
            .iter()
            .map(|c| c.iter().copied().filter(|&(_, v)| v != 0.0).collect())
            .collect();
        let mut arows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in acols.iter().enumerate() {
            for &(i, _) in col {
                arows[i].push(j);
            }
        }
        let mut cb = Buckets::new(m, m);
        let mut rb = Buckets::new(m, m);
        for j in 0..m {
            cb.insert(j, acols[j].len());
        }
        for i in 0..m {
            rb.insert(i, arows[i].len());
        }
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut mark = vec![NONE; m];

        let mut lu = Lu {
            m,
            prow: Vec::with_capacity(m),
            pcol: Vec::with_capacity(m),
            pval: Vec::with_capacity(m),
            l_ptr: vec![0],
            u_ptr: vec![0],
            ..Default::default()
        };

        let mut lcol: Vec<(usize, f64)> = Vec::new();
        let mut urow: Vec<(usize, f64)> = Vec::new();

        for _ in 0..m {
            let Some((p, q, piv)) = select_pivot(&acols, &arows, &cb, &rb, m) else {
                break;
            };
            // L multipliers from column q.
            lcol.clear();
            for &(i, a) in &acols[q] {
                if i != p {
                    lcol.push((i, a / piv));
                }
            }
            // Detach column q from the row patterns.
            for &(i, _) in &acols[q] {
                if i != p {
                    let r = &mut arows[i];
                    if let Some(pos) = r.iter().position(|&j| j == q) {
                        r.swap_remove(pos);
                    }
                    rb.update(i, r.len());
                }
            }
            // Detach row p from the columns, collecting the U row.
            urow.clear();
            for &j in &arows[p] {
                if j == q {
                    continue;
                }
                let c = &mut acols[j];
                if let Some(pos) = c.iter().position(|&(i, _)| i == p) {
                    let (_, v) = c.swap_remove(pos);
                    urow.push((j, v));
                }
            }
            arows[p].clear();
            acols[q].clear();
            cb.remove(q);
            rb.remove(p);
            row_done[p] = true;
            col_done[q] = true;

            // Schur complement update.
            if !lcol.is_empty() {
                for &(j, u) in &urow {
                    let col = &mut acols[j];
                    for (k, &(i, _)) in col.iter().enumerate() {
                        mark[i] = k;
                    }
                    for &(i, l) in &lcol {
                        let delta = -l * u;
                        if mark[i] != NONE {
                            col[mark[i]].1 += delta;
                        } else {
                            col.push((i, delta));
                            arows[i].push(j);
                            rb.update(i, arows[i].len());
                        }
                    }
                    for &(i, _) in col.iter() {
                        mark[i] = NONE;
                    }
                }
            }
            for &(j, _) in &urow {
                cb.update(j, acols[j].len());
            }

            lu.prow.push(p);
            lu.pcol.push(q);
            lu.pval.push(piv);
            for &(i, l) in &lcol {
                lu.l_idx.push(i);
                lu.l_val.push(l);
            }
            lu.l_ptr.push(lu.l_idx.len());
            for &(j, u) in &urow {
                lu.u_idx.push(j);
                lu.u_val.push(u);
            }
            lu.u_ptr.push(lu.u_idx.len());
        }

        if lu.prow.len() < m {
            return Err(Singular {
                positions: (0..m).filter(|&j| !col_done[j]).collect(),
                rows: (0..m).filter(|&i| !row_done[i]).collect(),
            });
        }
        Ok(lu)
    }

    /// Solves `B x = b`. `b` is indexed by row and is overwritten; `x` by position.
    pub fn ftran(&self, b: &mut [f64], x: &mut [f64]) {
        for k in 0..self.m {
            let t = b[self.prow[k]];
            if t != 0.0 {
                for e in self.l_ptr[k]..self.l_ptr[k + 1] {
                    b[self.l_idx[e]] -= self.l_val[e] * t;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut s = b[self.prow[k]];
            for e in self.u_ptr[k]..self.u_ptr[k + 1] {
                s -= self.u_val[e] * x[self.u_idx[e]];
            }
            x[self.pcol[k]] = s / self.pval[k];
        }
    }

    /// Solves `B' y = c`. `c` is indexed by position and is overwritten; `y` by row.
    pub fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        for k in 0..self.m {
            let w = c[self.pcol[k]] / self.pval[k];
            y[self.prow[k]] = w;
            if w != 0.0 {
                for e in self.u_ptr[k]..self.u_ptr[k + 1] {
                    c[self.u_idx[e]] -= self.u_val[e] * w;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut s = 0.0;
            for e in self.l_ptr[k]..self.l_ptr[k + 1] {
                s += self.l_val[e] * y[self.l_idx[e]];
            }
            if s != 0.0 {
                y[self.prow[k]] -= s;
            }
        }
    }
}

fn col_max(col: &[(usize, f64)]) -> f64 {
    col.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()))
}

fn select_pivot(
    acols: &[Vec<(usize, f64)>],
    arows: &[Vec<usize>],
    cb: &Buckets,
    rb: &Buckets,
    m: usize,
) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    let mut best_cost = usize::MAX;
    let mut searched = 0usize;
    let max_count = cb.head.len() - 1;
    for cnt in 1..=max_count.min(m) {
        let mut j = cb.head[cnt];
        while j != NONE {
            let col = &acols[j];
            let cmax = col_max(col);
            for &(i, a) in col {
                if a.abs() < PIVOT_ABS_TOL || a.abs() < PIVOT_THRESHOLD * cmax {
                    continue;
                }
                let cost = (arows[i].len() - 1) * (cnt - 1);
                if cost < best_cost || (cost == best_cost && best.is_some_and(|b| a.abs() > b.2.abs())) {
                    best_cost = cost;
                    best = Some((i, j, a));
                }
            }
            searched += 1;
            if best.is_some() && (searched >= SEARCH_LIMIT || best_cost == 0) {
                return best;
            }
            j = cb.next[j];
        }
        let mut i = rb.head[cnt];
        while i != NONE {
            for &j in &arows[i] {
                let col = &acols[j];
                let Some(&(_, a)) = col.iter().find(|&&(r, _)| r == i) else { continue };
                if a.abs() < PIVOT_ABS_TOL || a.abs() < PIVOT_THRESHOLD * col_max(col) {
                    continue;
                }
                let cost = (cnt - 1) * (col.len() - 1);
                if cost < best_cost || (cost == best_cost && best.is_some_and(|b| a.abs() > b.2.abs())) {
                    best_cost = cost;
                    best = Some((i, j, a));
                }
            }
            searched += 1;
            if best.is_some() && (searched >= SEARCH_LIMIT || best_cost == 0) {
                return best;
            }
            i = rb.next[i];
        }
        if best.is_some() && best_cost <= cnt * cnt {
            return best;
        }
    }
    best
}

/// One product-form update: column `pos` of the basis replaced by a column
/// whose representation in the previous basis is `alpha`.
#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    start: usize,
    end: usize,
}

/// LU factors plus the eta file accumulated since the last refactorization.
#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    lu: Lu,
    etas: Vec<Eta>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

impl BasisFactor {
    pub fn new(lu: Lu) -> Self {
        BasisFactor { lu, etas: Vec::new(), eta_idx: Vec::new(), eta_val: Vec::new() }
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_nnz(&self) -> usize {
        self.eta_idx.len()
    }

    pub fn lu_nnz(&self) -> usize {
        self.lu.nnz()
    }

    /// Records the replacement of basis position `pos`; `alpha` is the
    /// FTRAN'd entering column (indexed by position).
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let start = self.eta_idx.len();
        for (i, &a) in alpha.iter().enumerate() {
            if i != pos && a != 0.0 {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.etas.push(Eta { pos, pivot: alpha[pos], start, end: self.eta_idx.len() });
    }

    /// `b` (by row) is consumed; the result is written to `x` (by position).
    pub fn ftran(&self, b: &mut [f64], x: &mut [f64]) {
        self.lu.ftran(b, x);
        for eta in &self.etas {
            let xr = x[eta.pos] / eta.pivot;
            x[eta.pos] = xr;
            if xr != 0.0 {
                for e in eta.start..eta.end {
                    x[self.eta_idx[e]] -= self.eta_val[e] * xr;
                }
            }
        }
    }

    /// `c` (by position) is consumed; the result is written to `y` (by row).
    pub fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for e in eta.start..eta.end {
                s -= self.eta_val[e] * c[self.eta_idx[e]];
            }
            c[eta.pos] = s / eta.pivot;
        }
        self.lu.btran(c, y);
    }
}
