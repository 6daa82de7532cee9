//! Exact bilevel solve by branch-and-bound over complementarity pairs.
//!
//! Each node LP is the upper-level model (primal day-ahead and real-time
//! blocks, multiplier signs, stationarity) with some pairs forced: either the
//! multiplier is fixed to zero or the inequality is made tight. A node whose
//! day-ahead schedule is optimal for the day-ahead LP with offers trimmed to
//! the scheduled renewable quantities is bilevel feasible, so its LP value is
//! an incumbent and its subtree is closed.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{myd_offer, BilevelResult, Diagnostics, SlackFix, UpperLevel};
use crate::error::Error;
use crate::grid::{GridCase, OfferVector, ScenarioSet};
use crate::lp::{Basis, Interrupt, LpModel, LpStatus, Relation, SolverBackend};
use crate::market::{clear_da, settle_sequential, SettlementReport};

/// Elapsed-time source for time limits; the core crate has no clock of its own.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// A clock that never advances: time limits never trigger.
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktConfig {
    /// Relative optimality gap at which the search stops.
    pub gap_tol: f64,
    pub node_limit: usize,
    /// Infinite means no limit and is written as `null`.
    #[serde(with = "unlimited")]
    pub time_limit_secs: f64,
}

mod unlimited {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for KktConfig {
    fn default() -> Self {
        KktConfig { gap_tol: 1e-6, node_limit: 100_000, time_limit_secs: f64::INFINITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KktStatus {
    Optimal,
    NodeLimit,
    TimeLimit,
}

/// Largest complementarity product accepted as satisfied.
const PRODUCT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
enum Branch {
    MultiplierZero,
    SlackZero,
}

struct Node {
    bound: f64,
    id: usize,
    fixes: Vec<(usize, Branch)>,
    warm: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the lowest bound, then the oldest node, is greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.id.cmp(&self.id))
    }
}

struct Deadline<'a> {
    clock: &'a dyn Clock,
    limit: f64,
}

impl Interrupt for Deadline<'_> {
    fn should_stop(&self) -> bool {
        self.clock.seconds() >= self.limit
    }
}

struct Incumbent {
    value: f64,
    da_cost: f64,
    offer: OfferVector,
    report: Option<SettlementReport>,
}

fn apply(model: &mut LpModel, upper: &UpperLevel, fixes: &[(usize, Branch)]) {
    for &(p, branch) in fixes {
        let pair = &upper.kkt.pairs[p];
        match branch {
            Branch::MultiplierZero => model.set_bounds(pair.multiplier, 0.0, 0.0),
            Branch::SlackZero => match pair.fix {
                SlackFix::RowEquality(r) => model.set_relation(r, Relation::Eq),
                SlackFix::FixVar(v, value) => model.set_bounds(v, value, value),
            },
        }
    }
}

/// Exact optimistic bilevel optimum (up to `config.gap_tol`), or the best
/// incumbent with its gap when a node or time limit is reached.
pub fn solve_bid_kkt<B: SolverBackend + ?Sized>(
    case: &GridCase,
    scenarios: &ScenarioSet,
    backend: &B,
    config: &KktConfig,
    clock: &dyn Clock,
) -> Result<BilevelResult, Error> {
    let start = clock.seconds();
    let deadline = Deadline { clock, limit: start + config.time_limit_secs };
    let offer_box: Vec<(f64, f64)> = case.vres_units.iter().map(|u| (0.0, u.capacity_mw)).collect();
    let upper = UpperLevel::build(case, scenarios, &offer_box)?;
    let capacities = case.vres_capacities();
    let trimmed = |x: &[f64]| -> OfferVector {
        OfferVector::new(upper.da.p_vres.iter().zip(&capacities).map(|(v, &c)| x[v.0].clamp(0.0, c)).collect())
    };

    // The mean offer is always bilevel feasible and seeds the search.
    let mut incumbent: Option<Incumbent> = None;
    let myd = myd_offer(scenarios);
    if let Ok(rep) = settle_sequential(case, &myd, scenarios, backend) {
        incumbent = Some(Incumbent { value: rep.total_cost, da_cost: rep.da.cost_da, offer: myd, report: Some(rep) });
    }

    let prune_tol = |inc: &Option<Incumbent>| inc.as_ref().map_or(f64::INFINITY, |i| i.value - config.gap_tol * (1.0 + i.value.abs()));
    let mut heap = BinaryHeap::new();
    heap.push(Node { bound: f64::NEG_INFINITY, id: 0, fixes: Vec::new(), warm: None });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut status = KktStatus::Optimal;

    while let Some(node) = heap.pop() {
        if node.bound >= prune_tol(&incumbent) {
            continue;
        }
        if nodes >= config.node_limit {
            status = KktStatus::NodeLimit;
            heap.push(node);
            break;
        }
        if deadline.should_stop() {
            status = KktStatus::TimeLimit;
            heap.push(node);
            break;
        }
        let mut model = upper.model.clone();
        apply(&mut model, &upper, &node.fixes);
        let sol = backend.solve_with(&model, node.warm.as_ref(), &deadline)?;
        nodes += 1;
        iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::IterationLimit if deadline.should_stop() => {
                status = KktStatus::TimeLimit;
                heap.push(node);
                break;
            }
            other => return Err(Error::solver(format!("branch-and-bound node {}", node.id), other)),
        }
        let value = sol.objective;
        if value >= prune_tol(&incumbent) {
            continue;
        }
        let x = &sol.primal;
        let offer = trimmed(x);
        let scheduled: f64 = upper.primal_objective_terms().iter().map(|&(v, c)| c * x[v.0]).sum();
        let products: Vec<f64> = upper.kkt.pairs.iter().map(|p| p.product(x)).collect();
        let max_product = products.iter().copied().fold(0.0, f64::max);

        // Bilevel feasible when the scheduled day-ahead cost is already the
        // day-ahead optimum for the trimmed offers.
        let da_optimal = max_product <= PRODUCT_TOL
            || clear_da(case, &offer, backend).is_ok_and(|da| scheduled <= da.cost_da + 1e-7 * (1.0 + da.cost_da.abs()));
        if da_optimal {
            incumbent = Some(Incumbent { value, da_cost: scheduled, offer, report: None });
            continue;
        }
        if let Ok(rep) = settle_sequential(case, &offer, scenarios, backend) {
            if incumbent.as_ref().is_none_or(|i| rep.total_cost < i.value) {
                incumbent = Some(Incumbent { value: rep.total_cost, da_cost: rep.da.cost_da, offer, report: Some(rep) });
            }
        }

        let fixed: Vec<usize> = node.fixes.iter().map(|f| f.0).collect();
        let pick = products
            .iter()
            .enumerate()
            .filter(|(p, _)| !fixed.contains(p))
            .fold(None::<(usize, f64)>, |best, (p, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((p, v)),
            });
        let Some((p, _)) = pick else { continue };
        for branch in [Branch::MultiplierZero, Branch::SlackZero] {
            let mut fixes = node.fixes.clone();
            fixes.push((p, branch));
            heap.push(Node { bound: value, id: next_id, fixes, warm: sol.basis.clone() });
            next_id += 1;
        }
    }

    let Some(best) = incumbent else {
        return Err(Error::NoIncumbent(format!("search stopped after {nodes} nodes ({status:?})")));
    };
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    // Unexplored root leaves an infinite gap.
    let gap = ((best.value - open_bound.min(best.value)) / (1.0 + best.value.abs())).max(0.0);
    let evaluated = match best.report {
        Some(rep) => rep,
        None => settle_sequential(case, &best.offer, scenarios, backend)?,
    };
    Ok(BilevelResult {
        offer: best.offer,
        relaxed_objective: None,
        exact_objective: Some(best.value),
        z: Vec::new(),
        evaluated,
        diagnostics: Diagnostics {
            nodes,
            gap,
            status,
            lp_iterations: iterations,
            solve_seconds: clock.seconds() - start,
            incumbent_da_cost: Some(best.da_cost),
        },
    })
}
