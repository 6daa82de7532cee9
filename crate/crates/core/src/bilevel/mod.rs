//! Renewable offer adjustment: the joint stochastic benchmark, the myopic
//! mean offer, and the bilevel problem in which the day-ahead market clears
//! optimally for the chosen offers while the offers minimize expected total
//! cost. The bilevel problem is solved exactly by branch-and-bound over the
//! complementarity conditions of the day-ahead LP ([`solve_bid_kkt`]) or
//! approximately through strong duality with a McCormick envelope on the
//! bilinear offer-times-multiplier terms ([`solve_bid_mccormick`]).

mod kkt;
mod mccormick;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{GridCase, OfferVector, ScenarioSet};
use crate::lp::{LpModel, LpStatus, Relation, RowId, SolverBackend, VarId};
use crate::market::{add_da_block, add_rt_block, clear_da, DaLayout, DaSource, RtLayout, SettlementReport};

pub use kkt::{solve_bid_kkt, Clock, KktConfig, KktStatus, NoClock};
pub use mccormick::{
    build_bid_mccormick, envelope_residuals, solve_bid_mccormick, solve_bid_mccormick_with_bounds, McCormickLayout,
};

/// Box used by the McCormick envelope of `z_k = W_k * lam_k`, where `lam_k`
/// is the multiplier of the renewable offer cap in the day-ahead LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCormickBounds {
    pub alpha_w: Vec<f64>,
    pub beta_w: Vec<f64>,
    pub alpha_lam: Vec<f64>,
    pub beta_lam: Vec<f64>,
    pub gamma: f64,
}

impl McCormickBounds {
    pub fn validate(&self, units: usize) -> Result<(), Error> {
        let lens = [self.alpha_w.len(), self.beta_w.len(), self.alpha_lam.len(), self.beta_lam.len()];
        if lens.iter().any(|&l| l != units) {
            return Err(Error::Dimension(format!("bounds cover {lens:?} units, case has {units}")));
        }
        for k in 0..units {
            let (aw, bw, al, bl) = (self.alpha_w[k], self.beta_w[k], self.alpha_lam[k], self.beta_lam[k]);
            if [aw, bw, al, bl].iter().any(|v| !v.is_finite()) || aw < 0.0 || al < 0.0 || bw < aw || bl < al {
                return Err(Error::Bounds(format!("unit {k}: offer box [{aw}, {bw}], multiplier box [{al}, {bl}]")));
            }
        }
        Ok(())
    }

    /// Multiplies the multiplier upper bounds by `factor`.
    pub fn inflate_lambda(mut self, factor: f64) -> Self {
        for b in &mut self.beta_lam {
            *b *= factor;
        }
        self
    }
}

/// Offer box `[0, min(gamma * E[W~], capacity)]` and multiplier box
/// `[0, lam]` where `lam` is the offer-cap multiplier of the day-ahead market
/// cleared with all offers at zero.
pub fn compute_bounds<B: SolverBackend + ?Sized>(
    case: &GridCase,
    scenarios: &ScenarioSet,
    gamma: f64,
    backend: &B,
) -> Result<McCormickBounds, Error> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    scenarios.check_against(case)?;
    let k = case.vres_units.len();
    let mean = scenarios.expected();
    let beta_w = mean.iter().zip(&case.vres_units).map(|(m, u)| (gamma * m).min(u.capacity_mw)).collect();
    let zero = clear_da(case, &OfferVector::zeros(k), backend)?;
    Ok(McCormickBounds {
        alpha_w: vec![0.0; k],
        beta_w,
        alpha_lam: vec![0.0; k],
        beta_lam: zero.vres_upper_dual,
        gamma,
    })
}

/// Each unit offers its probability-weighted mean production.
pub fn myd_offer(scenarios: &ScenarioSet) -> OfferVector {
    OfferVector::new(scenarios.expected())
}

#[derive(Debug, Clone)]
pub struct StdLayout {
    pub da: DaLayout,
    pub rt: Vec<RtLayout>,
}

/// Joint day-ahead and real-time dispatch minimizing expected total cost,
/// with day-ahead renewable schedules limited only by capacity.
pub fn build_std(case: &GridCase, scenarios: &ScenarioSet) -> Result<(LpModel, StdLayout), Error> {
    scenarios.check_against(case)?;
    let mut model = LpModel::new();
    let da = add_da_block(&mut model, case, &case.vres_capacities(), "da_");
    let rt = add_rt_scenarios(&mut model, case, &da, scenarios);
    Ok((model, StdLayout { da, rt }))
}

fn add_rt_scenarios(model: &mut LpModel, case: &GridCase, da: &DaLayout, scenarios: &ScenarioSet) -> Vec<RtLayout> {
    scenarios
        .realizations
        .iter()
        .zip(&scenarios.weights)
        .enumerate()
        .map(|(s, (actual, &w))| add_rt_block(model, case, DaSource::Linked(da), actual, w, &format!("rt{s}_")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdResult {
    pub objective: f64,
    pub cost_da: f64,
    /// Day-ahead renewable schedules of the joint optimum.
    pub p_vres: Vec<f64>,
    pub lp_iterations: usize,
}

pub fn solve_std<B: SolverBackend + ?Sized>(case: &GridCase, scenarios: &ScenarioSet, backend: &B) -> Result<StdResult, Error> {
    let (model, layout) = build_std(case, scenarios)?;
    let sol = backend.solve(&model)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::solver("stochastic dispatch", sol.status));
    }
    let cost_da = case.conventional_units.iter().zip(&layout.da.p_conv).map(|(u, &v)| u.cost_da * sol.value(v)).sum();
    Ok(StdResult {
        objective: sol.objective,
        cost_da,
        p_vres: layout.da.p_vres.iter().map(|&v| sol.value(v)).collect(),
        lp_iterations: sol.iterations,
    })
}

/// How a complementarity pair's slack is forced to zero when branching.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlackFix {
    /// The inequality row becomes an equality.
    RowEquality(RowId),
    /// The variable is fixed at the given bound.
    FixVar(VarId, f64),
}

/// One inequality of the day-ahead LP paired with its multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityPair {
    pub label: String,
    /// Slack `sum a x + c >= 0` of the inequality.
    pub slack: Vec<(VarId, f64)>,
    pub slack_const: f64,
    pub multiplier: VarId,
    /// `multiplier_sign * value(multiplier) >= 0` is the multiplier magnitude.
    pub multiplier_sign: f64,
    pub fix: SlackFix,
}

impl ComplementarityPair {
    pub fn slack_value(&self, x: &[f64]) -> f64 {
        self.slack.iter().map(|&(v, a)| a * x[v.0]).sum::<f64>() + self.slack_const
    }

    pub fn multiplier_value(&self, x: &[f64]) -> f64 {
        self.multiplier_sign * x[self.multiplier.0]
    }

    /// `|multiplier * slack|`, the complementarity violation at `x`.
    pub fn product(&self, x: &[f64]) -> f64 {
        (self.multiplier_value(x) * self.slack_value(x)).abs()
    }
}

/// Optimality conditions of the day-ahead LP embedded in an upper-level model:
/// one multiplier per row and per finite bound, one stationarity row per
/// day-ahead variable, and the complementarity pairs left for branching.
#[derive(Debug, Clone)]
pub struct KktSystem {
    pub da_vars: Vec<VarId>,
    pub da_rows: Vec<RowId>,
    /// Multiplier of each day-ahead row, aligned with `da_rows`.
    pub row_dual: Vec<VarId>,
    /// Lower-bound multiplier of each day-ahead variable, aligned with `da_vars`.
    pub lower_mult: Vec<Option<VarId>>,
    /// Upper-bound multiplier; for renewable schedules this prices the offer cap.
    pub upper_mult: Vec<Option<VarId>>,
    pub stationarity: Vec<RowId>,
    pub pairs: Vec<ComplementarityPair>,
    /// Multiplier of each renewable offer cap (`lam` in the envelope).
    pub offer_cap_mult: Vec<VarId>,
}

/// Upper-level model shared by both bilevel solution methods: the day-ahead
/// block with offers as variables, every real-time block, and the KKT
/// system of the day-ahead LP without complementarity.
#[derive(Debug, Clone)]
pub struct UpperLevel {
    pub model: LpModel,
    pub da: DaLayout,
    pub offer: Vec<VarId>,
    pub offer_cap: Vec<RowId>,
    pub rt: Vec<RtLayout>,
    pub kkt: KktSystem,
}

impl UpperLevel {
    /// Builds the model with offer `k` restricted to `offer_box[k]`.
    pub fn build(case: &GridCase, scenarios: &ScenarioSet, offer_box: &[(f64, f64)]) -> Result<UpperLevel, Error> {
        scenarios.check_against(case)?;
        if offer_box.len() != case.vres_units.len() {
            return Err(Error::Dimension(format!("offer box has {} entries", offer_box.len())));
        }
        let mut model = LpModel::new();
        let v0 = model.num_vars();
        let r0 = model.num_rows();
        let da = add_da_block(&mut model, case, &case.vres_capacities(), "da_");
        let (v1, r1) = (model.num_vars(), model.num_rows());

        let offer: Vec<VarId> =
            offer_box.iter().enumerate().map(|(k, &(lo, hi))| model.add_var(format!("offer[{k}]"), lo, hi, 0.0)).collect();
        let offer_cap: Vec<RowId> = (0..offer.len())
            .map(|k| model.add_row(format!("offer_cap[{k}]"), vec![(da.p_vres[k], 1.0), (offer[k], -1.0)], Relation::Le, 0.0))
            .collect();
        let rt = add_rt_scenarios(&mut model, case, &da, scenarios);

        let da_vars: Vec<VarId> = (v0..v1).map(VarId).collect();
        let da_rows: Vec<RowId> = (r0..r1).map(RowId).collect();
        let mut is_vres = vec![None; v1 - v0];
        for (k, v) in da.p_vres.iter().enumerate() {
            is_vres[v.0 - v0] = Some(k);
        }

        let mut row_dual = Vec::with_capacity(da_rows.len());
        for &r in &da_rows {
            let row = model.row(r);
            let (lo, hi) = match row.relation {
                Relation::Eq => (f64::NEG_INFINITY, f64::INFINITY),
                Relation::Ge => (0.0, f64::INFINITY),
                Relation::Le => (f64::NEG_INFINITY, 0.0),
            };
            let name = format!("dual[{}]", row.tag);
            row_dual.push(model.add_var(name, lo, hi, 0.0));
        }
        let mut lower_mult = Vec::with_capacity(da_vars.len());
        let mut upper_mult = Vec::with_capacity(da_vars.len());
        let mut offer_cap_mult = vec![VarId(0); offer.len()];
        for &v in &da_vars {
            let var = model.var(v).clone();
            lower_mult.push(
                var.lower.is_finite().then(|| model.add_var(format!("lower_mult[{}]", var.name), 0.0, f64::INFINITY, 0.0)),
            );
            let has_upper = is_vres[v.0 - v0].is_some() || var.upper.is_finite();
            let up = has_upper.then(|| model.add_var(format!("upper_mult[{}]", var.name), 0.0, f64::INFINITY, 0.0));
            if let Some(k) = is_vres[v.0 - v0] {
                offer_cap_mult[k] = up.unwrap();
            }
            upper_mult.push(up);
        }

        // Stationarity: c_j - sum_r a_rj y_r - lower_j + upper_j = 0.
        let mut columns: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); da_vars.len()];
        for (ri, &r) in da_rows.iter().enumerate() {
            for &(v, a) in &model.row(r).coeffs {
                if (v0..v1).contains(&v.0) {
                    columns[v.0 - v0].push((row_dual[ri], a));
                }
            }
        }
        let mut stationarity = Vec::with_capacity(da_vars.len());
        for (j, mut coeffs) in columns.into_iter().enumerate() {
            if let Some(m) = lower_mult[j] {
                coeffs.push((m, 1.0));
            }
            if let Some(m) = upper_mult[j] {
                coeffs.push((m, -1.0));
            }
            let var = model.var(da_vars[j]).clone();
            stationarity.push(model.add_row(format!("stationarity[{}]", var.name), coeffs, Relation::Eq, var.cost));
        }

        let mut pairs = Vec::new();
        for (ri, &r) in da_rows.iter().enumerate() {
            let row = model.row(r);
            let (sign, mult_sign) = match row.relation {
                Relation::Eq => continue,
                Relation::Ge => (1.0, 1.0),
                Relation::Le => (-1.0, -1.0),
            };
            pairs.push(ComplementarityPair {
                label: row.tag.clone(),
                slack: row.coeffs.iter().map(|&(v, a)| (v, sign * a)).collect(),
                slack_const: -sign * row.rhs,
                multiplier: row_dual[ri],
                multiplier_sign: mult_sign,
                fix: SlackFix::RowEquality(r),
            });
        }
        for (j, &v) in da_vars.iter().enumerate() {
            let var = model.var(v).clone();
            if let Some(m) = lower_mult[j] {
                pairs.push(ComplementarityPair {
                    label: format!("lower[{}]", var.name),
                    slack: vec![(v, 1.0)],
                    slack_const: -var.lower,
                    multiplier: m,
                    multiplier_sign: 1.0,
                    fix: SlackFix::FixVar(v, var.lower),
                });
            }
            if let Some(m) = upper_mult[j] {
                let pair = match is_vres[v.0 - v0] {
                    Some(k) => ComplementarityPair {
                        label: format!("offer_cap[{k}]"),
                        slack: vec![(offer[k], 1.0), (v, -1.0)],
                        slack_const: 0.0,
                        multiplier: m,
                        multiplier_sign: 1.0,
                        fix: SlackFix::RowEquality(offer_cap[k]),
                    },
                    None => ComplementarityPair {
                        label: format!("upper[{}]", var.name),
                        slack: vec![(v, -1.0)],
                        slack_const: var.upper,
                        multiplier: m,
                        multiplier_sign: 1.0,
                        fix: SlackFix::FixVar(v, var.upper),
                    },
                };
                pairs.push(pair);
            }
        }

        let kkt = KktSystem { da_vars, da_rows, row_dual, lower_mult, upper_mult, stationarity, pairs, offer_cap_mult };
        Ok(UpperLevel { model, da, offer, offer_cap, rt, kkt })
    }

    /// Day-ahead dual objective as linear terms over the multipliers, leaving
    /// out the offer-cap terms `-lam_k * W_k` (returned separately by the
    /// caller's choice of substitute).
    pub fn dual_objective_terms(&self) -> Vec<(VarId, f64)> {
        let k = &self.kkt;
        let mut terms = Vec::new();
        for (ri, &r) in k.da_rows.iter().enumerate() {
            let rhs = self.model.row(r).rhs;
            if rhs != 0.0 {
                terms.push((k.row_dual[ri], rhs));
            }
        }
        let caps: Vec<VarId> = k.offer_cap_mult.clone();
        for (j, &v) in k.da_vars.iter().enumerate() {
            let var = self.model.var(v);
            if let Some(m) = k.lower_mult[j] {
                if var.lower != 0.0 {
                    terms.push((m, var.lower));
                }
            }
            if let Some(m) = k.upper_mult[j] {
                if !caps.contains(&m) && var.upper != 0.0 {
                    terms.push((m, -var.upper));
                }
            }
        }
        terms
    }

    /// Day-ahead primal cost as linear terms.
    pub fn primal_objective_terms(&self) -> Vec<(VarId, f64)> {
        self.kkt
            .da_vars
            .iter()
            .filter_map(|&v| {
                let c = self.model.var(v).cost;
                (c != 0.0).then_some((v, c))
            })
            .collect()
    }

    /// Largest absolute stationarity residual at `x`.
    pub fn stationarity_residual(&self, x: &[f64]) -> f64 {
        self.kkt
            .stationarity
            .iter()
            .map(|&r| {
                let row = self.model.row(r);
                (row.activity(x) - row.rhs).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Outcome of a bilevel solve, evaluated by sequential clearing at the offer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilevelResult {
    pub offer: OfferVector,
    /// Optimum of the McCormick relaxation, when that method was used.
    pub relaxed_objective: Option<f64>,
    /// Best bilevel-feasible objective found by branch-and-bound.
    pub exact_objective: Option<f64>,
    /// Envelope variables of the relaxation (empty for the exact method).
    pub z: Vec<f64>,
    pub evaluated: SettlementReport,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub nodes: usize,
    /// Relative gap between the incumbent and the best open bound.
    pub gap: f64,
    pub status: KktStatus,
    pub lp_iterations: usize,
    pub solve_seconds: f64,
    /// Day-ahead cost of the incumbent's embedded schedule (exact method only).
    pub incumbent_da_cost: Option<f64>,
}
