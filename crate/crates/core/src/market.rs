//! Day-ahead and real-time market clearing, and the sequential settlement
//! that clears the day-ahead market first and then every real-time scenario.
//!
//! Flows follow the DC approximation: line `(f, t)` carries
//! `(theta_f - theta_t) / x` from `f` to `t`. The day-ahead balance at bus `n`
//! is `sum P_conv + sum P_vres - flows out + flows in = L_n`, and the
//! real-time rebalance row carries the deviation of each flow from its
//! day-ahead value.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{GridCase, OfferVector, ScenarioSet};
use crate::lp::{LpModel, LpSolution, LpStatus, Relation, RowId, SolverBackend, VarId};

/// Variables and rows of one day-ahead block inside an [`LpModel`].
#[derive(Debug, Clone)]
pub struct DaLayout {
    pub p_conv: Vec<VarId>,
    pub p_vres: Vec<VarId>,
    pub theta: Vec<VarId>,
    pub balance: Vec<RowId>,
    pub line_lower: Vec<RowId>,
    pub line_upper: Vec<RowId>,
    pub reference: RowId,
}

/// Adds the day-ahead variables and constraints with renewable schedules
/// bounded by `vres_upper`.
pub fn add_da_block(model: &mut LpModel, case: &GridCase, vres_upper: &[f64], prefix: &str) -> DaLayout {
    let p_conv: Vec<VarId> = case
        .conventional_units
        .iter()
        .enumerate()
        .map(|(i, u)| model.add_var(format!("{prefix}p_conv[{i}]"), u.p_min, u.p_max, u.cost_da))
        .collect();
    let p_vres: Vec<VarId> = vres_upper
        .iter()
        .enumerate()
        .map(|(k, &w)| model.add_var(format!("{prefix}p_vres[{k}]"), 0.0, w, 0.0))
        .collect();
    let theta: Vec<VarId> = (0..case.num_buses())
        .map(|n| model.add_var(format!("{prefix}theta[{n}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
        .collect();

    let mut coeffs: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); case.num_buses()];
    for (i, u) in case.conventional_units.iter().enumerate() {
        coeffs[u.bus].push((p_conv[i], 1.0));
    }
    for (k, u) in case.vres_units.iter().enumerate() {
        coeffs[u.bus].push((p_vres[k], 1.0));
    }
    push_flow_terms(case, &theta, &mut coeffs, 1.0);
    let demand = case.bus_demand();
    let balance = coeffs
        .into_iter()
        .enumerate()
        .map(|(n, c)| model.add_row(format!("{prefix}balance[{n}]"), c, Relation::Eq, demand[n]))
        .collect();
    let (line_lower, line_upper) = add_line_limits(model, case, &theta, prefix);
    let reference = model.add_row(format!("{prefix}reference"), vec![(theta[case.reference_bus], 1.0)], Relation::Eq, 0.0);
    DaLayout { p_conv, p_vres, theta, balance, line_lower, line_upper, reference }
}

/// Adds `sign * (net inflow through lines)` to per-bus coefficient lists.
fn push_flow_terms(case: &GridCase, theta: &[VarId], coeffs: &mut [Vec<(VarId, f64)>], sign: f64) {
    for l in &case.lines {
        let b = sign / l.reactance_pu;
        coeffs[l.from_bus].push((theta[l.from_bus], -b));
        coeffs[l.from_bus].push((theta[l.to_bus], b));
        coeffs[l.to_bus].push((theta[l.from_bus], b));
        coeffs[l.to_bus].push((theta[l.to_bus], -b));
    }
}

fn add_line_limits(model: &mut LpModel, case: &GridCase, theta: &[VarId], prefix: &str) -> (Vec<RowId>, Vec<RowId>) {
    let mut lower = Vec::with_capacity(case.lines.len());
    let mut upper = Vec::with_capacity(case.lines.len());
    for (l, line) in case.lines.iter().enumerate() {
        let b = 1.0 / line.reactance_pu;
        let flow = vec![(theta[line.from_bus], b), (theta[line.to_bus], -b)];
        lower.push(model.add_row(format!("{prefix}line_min[{l}]"), flow.clone(), Relation::Ge, -line.capacity_mw));
        upper.push(model.add_row(format!("{prefix}line_max[{l}]"), flow, Relation::Le, line.capacity_mw));
    }
    (lower, upper)
}

/// Day-ahead clearing LP for a given renewable offer.
pub fn build_da_lp(case: &GridCase, offer: &OfferVector) -> Result<(LpModel, DaLayout), Error> {
    offer.check_against(case)?;
    let mut model = LpModel::new();
    let layout = add_da_block(&mut model, case, &offer.w, "da_");
    Ok((model, layout))
}

/// Optimal day-ahead schedule, prices and bound multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaOutcome {
    pub p_conv: Vec<f64>,
    pub p_vres: Vec<f64>,
    pub theta_da: Vec<f64>,
    /// Balance-row duals (bus prices).
    pub balance_price: Vec<f64>,
    pub line_lower_dual: Vec<f64>,
    pub line_upper_dual: Vec<f64>,
    pub conv_lower_dual: Vec<f64>,
    pub conv_upper_dual: Vec<f64>,
    pub vres_lower_dual: Vec<f64>,
    pub vres_upper_dual: Vec<f64>,
    pub cost_da: f64,
}

impl DaOutcome {
    pub fn from_solution(case: &GridCase, layout: &DaLayout, sol: &LpSolution) -> DaOutcome {
        let vals = |ids: &[VarId]| ids.iter().map(|&v| sol.value(v)).collect::<Vec<f64>>();
        let lo = |ids: &[VarId]| ids.iter().map(|&v| sol.lower_bound_dual(v)).collect::<Vec<f64>>();
        let hi = |ids: &[VarId]| ids.iter().map(|&v| sol.upper_bound_dual(v)).collect::<Vec<f64>>();
        let p_conv = vals(&layout.p_conv);
        let cost_da = case.conventional_units.iter().zip(&p_conv).map(|(u, p)| u.cost_da * p).sum();
        DaOutcome {
            p_vres: vals(&layout.p_vres),
            theta_da: vals(&layout.theta),
            balance_price: layout.balance.iter().map(|&r| sol.dual(r)).collect(),
            line_lower_dual: layout.line_lower.iter().map(|&r| sol.dual(r).max(0.0)).collect(),
            line_upper_dual: layout.line_upper.iter().map(|&r| (-sol.dual(r)).max(0.0)).collect(),
            conv_lower_dual: lo(&layout.p_conv),
            conv_upper_dual: hi(&layout.p_conv),
            vres_lower_dual: lo(&layout.p_vres),
            vres_upper_dual: hi(&layout.p_vres),
            p_conv,
            cost_da,
        }
    }

    /// Day-ahead flow on every line.
    pub fn line_flows(&self, case: &GridCase) -> Vec<f64> {
        case.lines.iter().map(|l| (self.theta_da[l.from_bus] - self.theta_da[l.to_bus]) / l.reactance_pu).collect()
    }
}

pub fn clear_da<B: SolverBackend + ?Sized>(case: &GridCase, offer: &OfferVector, backend: &B) -> Result<DaOutcome, Error> {
    let (model, layout) = build_da_lp(case, offer)?;
    let sol = backend.solve(&model)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::solver("day-ahead", sol.status));
    }
    Ok(DaOutcome::from_solution(case, &layout, &sol))
}

/// Where the day-ahead quantities of a real-time block come from.
#[derive(Debug, Clone, Copy)]
pub enum DaSource<'a> {
    /// A cleared schedule: real-time limits and imbalances become constants.
    Fixed(&'a DaOutcome),
    /// Day-ahead variables of the same model (joint stochastic dispatch).
    Linked(&'a DaLayout),
}

#[derive(Debug, Clone)]
pub struct RtLayout {
    pub r_up: Vec<VarId>,
    pub r_down: Vec<VarId>,
    pub curtail: Vec<VarId>,
    pub shed: Vec<VarId>,
    pub theta: Vec<VarId>,
    pub rebalance: Vec<RowId>,
    pub line_lower: Vec<RowId>,
    pub line_upper: Vec<RowId>,
}

/// Adds one real-time redispatch block for the realization `actual`, with
/// costs multiplied by `weight`.
pub fn add_rt_block(
    model: &mut LpModel,
    case: &GridCase,
    da: DaSource<'_>,
    actual: &[f64],
    weight: f64,
    prefix: &str,
) -> RtLayout {
    let nb = case.num_buses();
    let units = &case.conventional_units;
    let (r_up, r_down): (Vec<VarId>, Vec<VarId>) = match da {
        DaSource::Fixed(out) => units
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let p = out.p_conv[i];
                (
                    model.add_var(format!("{prefix}r_up[{i}]"), 0.0, (u.p_max - p).max(0.0), weight * u.cost_up),
                    model.add_var(format!("{prefix}r_down[{i}]"), 0.0, (p - u.p_min).max(0.0), -weight * u.cost_down),
                )
            })
            .unzip(),
        DaSource::Linked(lay) => units
            .iter()
            .enumerate()
            .map(|(i, u)| {
                // the room rows imply these bounds; stating them keeps the slack basis dual feasible
                let span = (u.p_max - u.p_min).max(0.0);
                let up = model.add_var(format!("{prefix}r_up[{i}]"), 0.0, span, weight * u.cost_up);
                let down = model.add_var(format!("{prefix}r_down[{i}]"), 0.0, span, -weight * u.cost_down);
                model.add_row(format!("{prefix}up_room[{i}]"), vec![(up, 1.0), (lay.p_conv[i], 1.0)], Relation::Le, u.p_max);
                model.add_row(format!("{prefix}down_room[{i}]"), vec![(down, 1.0), (lay.p_conv[i], -1.0)], Relation::Le, -u.p_min);
                (up, down)
            })
            .unzip(),
    };
    let curtail: Vec<VarId> =
        actual.iter().enumerate().map(|(k, &w)| model.add_var(format!("{prefix}curtail[{k}]"), 0.0, w, 0.0)).collect();
    let demand = case.bus_demand();
    let shed: Vec<VarId> =
        (0..nb).map(|n| model.add_var(format!("{prefix}shed[{n}]"), 0.0, demand[n], weight * case.voll)).collect();
    let theta: Vec<VarId> = (0..nb)
        .map(|n| model.add_var(format!("{prefix}theta[{n}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
        .collect();

    let mut coeffs: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); nb];
    let mut constant = vec![0.0; nb];
    for (i, u) in units.iter().enumerate() {
        coeffs[u.bus].push((r_up[i], 1.0));
        coeffs[u.bus].push((r_down[i], -1.0));
    }
    for (k, u) in case.vres_units.iter().enumerate() {
        constant[u.bus] += actual[k];
        coeffs[u.bus].push((curtail[k], -1.0));
        match da {
            DaSource::Fixed(out) => constant[u.bus] -= out.p_vres[k],
            DaSource::Linked(lay) => coeffs[u.bus].push((lay.p_vres[k], -1.0)),
        }
    }
    for n in 0..nb {
        coeffs[n].push((shed[n], 1.0));
    }
    push_flow_terms(case, &theta, &mut coeffs, 1.0);
    match da {
        // minus the day-ahead inflow
        DaSource::Fixed(out) => {
            for l in &case.lines {
                let f = (out.theta_da[l.from_bus] - out.theta_da[l.to_bus]) / l.reactance_pu;
                constant[l.from_bus] += f;
                constant[l.to_bus] -= f;
            }
        }
        DaSource::Linked(lay) => push_flow_terms(case, &lay.theta, &mut coeffs, -1.0),
    }
    let rebalance = coeffs
        .into_iter()
        .enumerate()
        .map(|(n, c)| model.add_row(format!("{prefix}rebalance[{n}]"), c, Relation::Eq, -constant[n]))
        .collect();
    let (line_lower, line_upper) = add_line_limits(model, case, &theta, prefix);
    model.add_row(format!("{prefix}reference"), vec![(theta[case.reference_bus], 1.0)], Relation::Eq, 0.0);
    RtLayout { r_up, r_down, curtail, shed, theta, rebalance, line_lower, line_upper }
}

/// Real-time redispatch LP of one scenario given a cleared day-ahead schedule.
pub fn build_rt_lp(case: &GridCase, da: &DaOutcome, actual: &[f64]) -> Result<(LpModel, RtLayout), Error> {
    if actual.len() != case.vres_units.len() {
        return Err(Error::Dimension(format!("realization has {} entries, case has {} vres units", actual.len(), case.vres_units.len())));
    }
    if da.p_conv.len() != case.conventional_units.len() || da.theta_da.len() != case.num_buses() {
        return Err(Error::Dimension("day-ahead outcome does not match the case".into()));
    }
    let mut model = LpModel::new();
    let layout = add_rt_block(&mut model, case, DaSource::Fixed(da), actual, 1.0, "rt_");
    Ok((model, layout))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtOutcome {
    pub r_up: Vec<f64>,
    pub r_down: Vec<f64>,
    pub curtail: Vec<f64>,
    pub shed: Vec<f64>,
    pub theta_rt: Vec<f64>,
    /// Line-limit duals, kept for diagnostics.
    pub line_lower_dual: Vec<f64>,
    pub line_upper_dual: Vec<f64>,
    /// Signed cost: down-regulation earns `cost_down` back.
    pub cost_rt: f64,
}

impl RtOutcome {
    pub fn from_solution(case: &GridCase, layout: &RtLayout, sol: &LpSolution) -> RtOutcome {
        let vals = |ids: &[VarId]| ids.iter().map(|&v| sol.value(v)).collect::<Vec<f64>>();
        let r_up = vals(&layout.r_up);
        let r_down = vals(&layout.r_down);
        let shed = vals(&layout.shed);
        let cost_rt = rt_cost(case, &r_up, &r_down, &shed);
        RtOutcome {
            r_up,
            r_down,
            curtail: vals(&layout.curtail),
            theta_rt: vals(&layout.theta),
            line_lower_dual: layout.line_lower.iter().map(|&r| sol.dual(r).max(0.0)).collect(),
            line_upper_dual: layout.line_upper.iter().map(|&r| (-sol.dual(r)).max(0.0)).collect(),
            shed,
            cost_rt,
        }
    }

    pub fn total_shed(&self) -> f64 {
        self.shed.iter().sum()
    }

    pub fn total_curtailed(&self) -> f64 {
        self.curtail.iter().sum()
    }
}

pub fn rt_cost(case: &GridCase, r_up: &[f64], r_down: &[f64], shed: &[f64]) -> f64 {
    let units: f64 =
        case.conventional_units.iter().enumerate().map(|(i, u)| u.cost_up * r_up[i] - u.cost_down * r_down[i]).sum();
    units + case.voll * shed.iter().sum::<f64>()
}

/// Solves the real-time LP of scenario `index`.
pub fn solve_rt_scenario<B: SolverBackend + ?Sized>(
    case: &GridCase,
    da: &DaOutcome,
    scenarios: &ScenarioSet,
    index: usize,
    backend: &B,
) -> Result<RtOutcome, Error> {
    let (model, layout) = build_rt_lp(case, da, &scenarios.realizations[index])?;
    let sol = backend.solve(&model)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::solver(format!("real-time scenario {index}"), sol.status));
    }
    Ok(RtOutcome::from_solution(case, &layout, &sol))
}

/// Probability-weighted sum in scenario order.
pub fn expected_cost(scenarios: &ScenarioSet, outcomes: &[RtOutcome]) -> f64 {
    scenarios.weights.iter().zip(outcomes).map(|(w, o)| w * o.cost_rt).sum()
}

/// Clears every scenario independently; returns the outcomes and their expected cost.
pub fn clear_rt<B: SolverBackend + ?Sized>(
    case: &GridCase,
    da: &DaOutcome,
    scenarios: &ScenarioSet,
    backend: &B,
) -> Result<(Vec<RtOutcome>, f64), Error> {
    scenarios.check_against(case)?;
    let outcomes = (0..scenarios.len())
        .map(|s| solve_rt_scenario(case, da, scenarios, s, backend))
        .collect::<Result<Vec<_>, Error>>()?;
    let expected = expected_cost(scenarios, &outcomes);
    Ok((outcomes, expected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementReport {
    pub offer: OfferVector,
    pub da: DaOutcome,
    pub rt: Vec<RtOutcome>,
    pub weights: Vec<f64>,
    pub expected_rt_cost: f64,
    pub total_cost: f64,
}

impl SettlementReport {
    pub fn assemble(offer: OfferVector, da: DaOutcome, rt: Vec<RtOutcome>, scenarios: &ScenarioSet) -> Self {
        let expected_rt_cost = expected_cost(scenarios, &rt);
        let total_cost = da.cost_da + expected_rt_cost;
        SettlementReport { offer, da, rt, weights: scenarios.weights.clone(), expected_rt_cost, total_cost }
    }
}

/// Clears the day-ahead market with `offer`, then each real-time scenario.
pub fn settle_sequential<B: SolverBackend + ?Sized>(
    case: &GridCase,
    offer: &OfferVector,
    scenarios: &ScenarioSet,
    backend: &B,
) -> Result<SettlementReport, Error> {
    let da = clear_da(case, offer, backend)?;
    let (rt, _) = clear_rt(case, &da, scenarios, backend)?;
    Ok(SettlementReport::assemble(offer.clone(), da, rt, scenarios))
}

