use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{compute_bounds, BilevelResult, Diagnostics, KktStatus, McCormickBounds, UpperLevel};
use crate::error::Error;
use crate::grid::{GridCase, OfferVector, ScenarioSet};
use crate::lp::{Basis, BasisStatus, LpModel, LpStatus, NoInterrupt, Relation, RowId, SolverBackend, VarId};
use crate::market::settle_sequential;

/// Slacks of the four envelope inequalities of `z = w * lam` over the box
/// `[aw, bw] x [al, bl]`; all are nonnegative exactly when the point lies in
/// the envelope. Order: two under-estimators, then two over-estimators.
pub fn envelope_residuals(aw: f64, bw: f64, al: f64, bl: f64, w: f64, lam: f64, z: f64) -> [f64; 4] {
    [
        z - (al * w + aw * lam - al * aw),
        z - (bl * w + bw * lam - bl * bw),
        (bl * w + aw * lam - bl * aw) - z,
        (al * w + bw * lam - al * bw) - z,
    ]
}

#[derive(Debug, Clone)]
pub struct McCormickLayout {
    pub upper: UpperLevel,
    pub z: Vec<VarId>,
    pub strong_duality: RowId,
    /// Four envelope rows per renewable unit, ordered as in [`envelope_residuals`].
    pub envelope: Vec<[RowId; 4]>,
}

/// Single LP: upper-level objective over day-ahead and real-time variables,
/// the day-ahead KKT system with complementarity replaced by strong duality,
/// and each offer-times-multiplier product replaced by an envelope variable.
pub fn build_bid_mccormick(
    case: &GridCase,
    scenarios: &ScenarioSet,
    bounds: &McCormickBounds,
) -> Result<(LpModel, McCormickLayout), Error> {
    bounds.validate(case.vres_units.len())?;
    let offer_box: Vec<(f64, f64)> = bounds.alpha_w.iter().zip(&bounds.beta_w).map(|(&a, &b)| (a, b)).collect();
    let mut upper = UpperLevel::build(case, scenarios, &offer_box)?;
    let dual_terms = upper.dual_objective_terms();
    let primal_terms = upper.primal_objective_terms();
    let model = &mut upper.model;

    let z: Vec<VarId> = (0..case.vres_units.len())
        .map(|k| model.add_var(format!("envelope[{k}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
        .collect();

    // primal cost = dual objective, where the dual objective carries -z_k for each offer cap
    let mut coeffs = primal_terms;
    coeffs.extend(dual_terms.iter().map(|&(v, a)| (v, -a)));
    coeffs.extend(z.iter().map(|&v| (v, 1.0)));
    let strong_duality = model.add_row("strong_duality", coeffs, Relation::Eq, 0.0);

    let mut envelope = Vec::with_capacity(z.len());
    for k in 0..z.len() {
        let (aw, bw, al, bl) = (bounds.alpha_w[k], bounds.beta_w[k], bounds.alpha_lam[k], bounds.beta_lam[k]);
        let (w, lam) = (upper.offer[k], upper.kkt.offer_cap_mult[k]);
        let mut row = |tag: &str, cw: f64, cl: f64, rel: Relation, rhs: f64| {
            let mut c = vec![(z[k], 1.0)];
            if cw != 0.0 {
                c.push((w, -cw));
            }
            if cl != 0.0 {
                c.push((lam, -cl));
            }
            model.add_row(format!("{tag}[{k}]"), c, rel, rhs)
        };
        envelope.push([
            row("envelope_under_low", al, aw, Relation::Ge, -al * aw),
            row("envelope_under_high", bl, bw, Relation::Ge, -bl * bw),
            row("envelope_over_wide", bl, aw, Relation::Le, -bl * aw),
            row("envelope_over_tall", al, bw, Relation::Le, -al * bw),
        ]);
    }
    let model = upper.model.clone();
    Ok((model, McCormickLayout { upper, z, strong_duality, envelope }))
}

pub fn solve_bid_mccormick<B: SolverBackend + ?Sized>(
    case: &GridCase,
    scenarios: &ScenarioSet,
    gamma: f64,
    backend: &B,
) -> Result<BilevelResult, Error> {
    let bounds = compute_bounds(case, scenarios, gamma, backend)?;
    solve_bid_mccormick_with_bounds(case, scenarios, &bounds, backend)
}

/// Solves the relaxation, then re-solves with the optimal value capped and
/// the offers pulled toward the day-ahead renewable schedules (the relaxation
/// leaves offers undetermined wherever the envelope is slack). The offer is
/// evaluated by sequential clearing.
pub fn solve_bid_mccormick_with_bounds<B: SolverBackend + ?Sized>(
    case: &GridCase,
    scenarios: &ScenarioSet,
    bounds: &McCormickBounds,
    backend: &B,
) -> Result<BilevelResult, Error> {
    let (mut model, layout) = build_bid_mccormick(case, scenarios, bounds)?;
    let first = backend.solve(&model)?;
    if first.status != LpStatus::Optimal {
        return Err(Error::solver("McCormick relaxation", first.status));
    }
    let opt = first.objective;

    let objective: Vec<(VarId, f64)> =
        model.vars().iter().enumerate().filter(|(_, v)| v.cost != 0.0).map(|(j, v)| (VarId(j), v.cost)).collect();
    for j in 0..model.num_vars() {
        model.set_cost(VarId(j), 0.0);
    }
    for (k, &w) in layout.upper.offer.iter().enumerate() {
        model.set_cost(w, 1.0);
        model.set_cost(layout.upper.da.p_vres[k], -1.0);
    }
    model.add_row("objective_cap", objective, Relation::Le, opt + 1e-9 * (1.0 + opt.abs()));
    let warm = first.basis.map(|b| {
        let mut rows = b.rows;
        rows.push(BasisStatus::Basic);
        Basis { vars: b.vars, rows }
    });
    let sol = backend.solve_with(&model, warm.as_ref(), &NoInterrupt)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::solver("McCormick offer selection", sol.status));
    }

    let offer = OfferVector::new(
        layout
            .upper
            .offer
            .iter()
            .zip(&case.vres_units)
            .map(|(&w, u)| sol.value(w).clamp(0.0, u.capacity_mw))
            .collect(),
    );
    let z = layout.z.iter().map(|&v| sol.value(v)).collect();
    let evaluated = settle_sequential(case, &offer, scenarios, backend)?;
    Ok(BilevelResult {
        offer,
        relaxed_objective: Some(opt),
        exact_objective: None,
        z,
        evaluated,
        diagnostics: Diagnostics {
            nodes: 1,
            gap: 0.0,
            status: KktStatus::Optimal,
            lp_iterations: first.iterations + sol.iterations,
            solve_seconds: 0.0,
            incumbent_da_cost: None,
        },
    })
}
