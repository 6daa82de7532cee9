use gridbid_core::grid::{Bus, ConventionalUnit, GridCase, LoadPoint, Line, OfferVector, ScenarioSet, VresUnit};
use gridbid_core::lp::{check_duality, LpStatus, RevisedSimplex, SolverBackend, Tolerances};
use gridbid_core::market::*;
use gridbid_core::Error;

fn bus(i: usize) -> Bus {
    Bus { id: i, name: format!("b{i}") }
}

fn one_bus(cost_up: f64, cost_down: f64) -> GridCase {
    GridCase {
        buses: vec![bus(0)],
        lines: vec![],
        conventional_units: vec![ConventionalUnit { bus: 0, cost_da: 10.0, cost_up, cost_down, p_max: 200.0, p_min: 0.0 }],
        vres_units: vec![VresUnit { bus: 0, capacity_mw: 100.0 }],
        loads: vec![LoadPoint { bus: 0, demand_mw: 100.0 }],
        voll: 1000.0,
        reference_bus: 0,
    }
}

/// Cheap unit at bus 0, expensive unit and the load at bus 1, 10 MW line.
fn congested_pair() -> GridCase {
    GridCase {
        buses: vec![bus(0), bus(1)],
        lines: vec![Line { from_bus: 0, to_bus: 1, reactance_pu: 0.1, capacity_mw: 10.0 }],
        conventional_units: vec![
            ConventionalUnit { bus: 0, cost_da: 10.0, cost_up: 20.0, cost_down: 5.0, p_max: 200.0, p_min: 0.0 },
            ConventionalUnit { bus: 1, cost_da: 30.0, cost_up: 45.0, cost_down: 20.0, p_max: 200.0, p_min: 0.0 },
        ],
        vres_units: vec![],
        loads: vec![LoadPoint { bus: 1, demand_mw: 100.0 }],
        voll: 1000.0,
        reference_bus: 0,
    }
}

#[test]
fn merit_order_day_ahead() {
    let rs = RevisedSimplex::default();
    let da = clear_da(&one_bus(20.0, 5.0), &OfferVector::new(vec![50.0]), &rs).unwrap();
    assert!((da.p_vres[0] - 50.0).abs() < 1e-9 && (da.p_conv[0] - 50.0).abs() < 1e-9);
    assert!((da.cost_da - 500.0).abs() < 1e-9);

    let da = clear_da(&one_bus(20.0, 5.0), &OfferVector::new(vec![0.0]), &rs).unwrap();
    assert!((da.cost_da - 1000.0).abs() < 1e-9);
    assert!((da.balance_price[0] - 10.0).abs() < 1e-9);
}

#[test]
fn congestion_matches_enumeration() {
    let case = congested_pair();
    let rs = RevisedSimplex::default();
    let (model, _) = build_da_lp(&case, &OfferVector::new(vec![])).unwrap();
    let sol = rs.solve(&model).unwrap();
    assert!(check_duality(&model, &sol).ok(&Tolerances::default()));
    let da = clear_da(&case, &OfferVector::new(vec![]), &rs).unwrap();

    // two dispatch variables tied by balance: walk the cheap unit's output
    // and keep the best point that respects the line
    let mut best = f64::INFINITY;
    for i in 0..=4000 {
        let p0 = i as f64 * 0.05;
        let p1 = 100.0 - p0;
        if p0.abs() <= 10.0 && (0.0..=200.0).contains(&p1) {
            best = best.min(10.0 * p0 + 30.0 * p1);
        }
    }
    assert!((da.cost_da - best).abs() < 1e-9, "{} vs {best}", da.cost_da);
    let flow = da.line_flows(&case)[0];
    assert!((flow - 10.0).abs() < 1e-7);
    assert!(da.line_upper_dual[0] > 0.0);
    // the price gap across the line is the congestion rent per MW
    assert!((da.balance_price[1] - da.balance_price[0] - 20.0).abs() < 1e-7);
}

/// Real-time cost by enumerating down-regulation, curtailment and shedding
/// on a grid; up-regulation closes the balance.
fn enumerate_rt(deficit: f64, cost_up: f64, cost_down: f64, room_up: f64, room_down: f64, actual: f64) -> f64 {
    let mut best = f64::INFINITY;
    let step = 0.5;
    let n = |hi: f64| (hi / step).round() as usize;
    for a in 0..=n(room_down) {
        for b in 0..=n(actual) {
            for c in 0..=n(100.0) {
                let (down, curtail, shed) = (a as f64 * step, b as f64 * step, c as f64 * step);
                // up - down - curtail + shed = deficit
                let up = deficit + down + curtail - shed;
                if (0.0..=room_up).contains(&up) {
                    best = best.min(cost_up * up - cost_down * down + 1000.0 * shed);
                }
            }
        }
    }
    best
}

#[test]
fn real_time_examples_match_enumeration() {
    let case = one_bus(15.0, 5.0);
    let rs = RevisedSimplex::default();
    let da = clear_da(&case, &OfferVector::new(vec![50.0]), &rs).unwrap();
    for (actual, expect) in [(30.0, 300.0), (80.0, -150.0), (50.0, 0.0)] {
        let (model, layout) = build_rt_lp(&case, &da, &[actual]).unwrap();
        let sol = rs.solve(&model).unwrap();
        assert!(check_duality(&model, &sol).ok(&Tolerances::default()));
        let rt = RtOutcome::from_solution(&case, &layout, &sol);
        assert!((rt.cost_rt - expect).abs() < 1e-9, "actual {actual}: {}", rt.cost_rt);
        let oracle = enumerate_rt(50.0 - actual, 15.0, 5.0, 150.0, 50.0, actual);
        assert!((rt.cost_rt - oracle).abs() < 1e-9, "oracle {oracle}");
    }
    let da_short = clear_da(&case, &OfferVector::new(vec![50.0]), &rs).unwrap();
    let (rt, _) = clear_rt(&case, &da_short, &ScenarioSet::uniform(vec![vec![30.0]]).unwrap(), &rs).unwrap();
    assert!((rt[0].r_up[0] - 20.0).abs() < 1e-9);
}

#[test]
fn expected_real_time_cost() {
    let case = one_bus(15.0, 5.0);
    let rs = RevisedSimplex::default();
    let da = clear_da(&case, &OfferVector::new(vec![50.0]), &rs).unwrap();
    let (_, exp) = clear_rt(&case, &da, &ScenarioSet::uniform(vec![vec![50.0]]).unwrap(), &rs).unwrap();
    assert_eq!(exp, 0.0);
    let (rt, exp) = clear_rt(&case, &da, &ScenarioSet::uniform(vec![vec![30.0], vec![80.0]]).unwrap(), &rs).unwrap();
    assert!((exp - 75.0).abs() < 1e-9);
    assert_eq!(rt.len(), 2);
}

#[test]
fn sequential_settlement_matches_offer_grid() {
    let case = one_bus(20.0, 5.0);
    let sc = ScenarioSet::uniform(vec![vec![40.0], vec![80.0]]).unwrap();
    let rs = RevisedSimplex::default();
    let cost = |w: f64| settle_sequential(&case, &OfferVector::new(vec![w]), &sc, &rs).unwrap().total_cost;
    let (best_w, best) =
        (0..=1000).map(|i| i as f64 * 0.1).map(|w| (w, cost(w))).fold((0.0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    assert!((best - 500.0).abs() < 1e-6 && (best_w - 40.0).abs() < 1e-9);
    assert!((cost(60.0) - 550.0).abs() < 1e-6);
    let zero = settle_sequential(&case, &OfferVector::new(vec![0.0]), &sc, &rs).unwrap();
    assert!((zero.da.p_conv[0] - 100.0).abs() < 1e-9);
    // all renewable output is surplus in real time
    assert!(zero.rt.iter().all(|r| r.r_up[0] == 0.0));
    let rep = settle_sequential(&case, &OfferVector::new(vec![60.0]), &sc, &rs).unwrap();
    let sum = rep.da.cost_da + rep.weights.iter().zip(&rep.rt).map(|(w, r)| w * r.cost_rt).sum::<f64>();
    assert!((rep.total_cost - sum).abs() <= 1e-9 * rep.total_cost.abs());
}

#[test]
fn infeasible_day_ahead_is_reported() {
    let mut case = one_bus(20.0, 5.0);
    case.loads[0].demand_mw = 500.0;
    let err = clear_da(&case, &OfferVector::new(vec![100.0]), &RevisedSimplex::default()).unwrap_err();
    assert!(matches!(err, Error::Solver { status: LpStatus::Infeasible, .. }), "{err:?}");
}

#[test]
fn balance_residuals_within_tolerance() {
    let case = congested_pair();
    let rs = RevisedSimplex::default();
    let da = clear_da(&case, &OfferVector::new(vec![]), &rs).unwrap();
    let flows = da.line_flows(&case);
    let demand = case.bus_demand();
    for n in 0..2 {
        let gen: f64 = case.conventional_units.iter().zip(&da.p_conv).filter(|(u, _)| u.bus == n).map(|(_, p)| p).sum();
        let net: f64 = case.lines.iter().zip(&flows).map(|(l, f)| if l.from_bus == n { -f } else if l.to_bus == n { *f } else { 0.0 }).sum();
        assert!((gen + net - demand[n]).abs() <= 1e-7 * (1.0 + demand[n]));
    }
}
