use gridbid::backend::{clear_rt_parallel, settle_parallel, Backend};
use gridbid::harness::*;
use gridbid::io::{load_case, load_scenarios};
use gridbid::report::{scenario_rows, write_csv, write_settlement_csv};
use gridbid::Error;
use gridbid_core::grid::{GridCase, OfferVector, ScenarioSet};
use gridbid_core::instances::{random_instance, RandomSpec};
use gridbid_core::lp::RevisedSimplex;
use gridbid_core::market::{clear_da, clear_rt, settle_sequential};

fn one_bus() -> (GridCase, ScenarioSet) {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    (load_case(dir.join("one_bus.json")).unwrap(), load_scenarios(dir.join("one_bus_scenarios.json")).unwrap())
}

#[test]
fn every_method_on_the_one_bus_case() {
    let (case, sc) = one_bus();
    let opts = RunOptions::default();
    let expected = [(Method::Myd, 550.0, 60.0), (Method::Std, 500.0, 40.0), (Method::BidMccormick, 500.0, 40.0), (Method::BidKkt, 500.0, 40.0)];
    let mut runs = Vec::new();
    for (m, cost, vres) in expected {
        let r = run_method(&case, &sc, m, &opts, &Backend::default()).unwrap();
        assert!((r.cost - cost).abs() < 1e-6, "{}: {}", m.label(), r.cost);
        assert!((r.da_vres - vres).abs() < 1e-6, "{}: {}", m.label(), r.da_vres);
        assert!(r.solve_seconds >= 0.0 && r.build_seconds >= 0.0);
        runs.push(r);
    }
    assert!(runs[0].settlement.is_some() && runs[2].bilevel.is_some());
    let row = runs[3].summary(sc.len());
    assert_eq!(row.method, "BiD-KKT");
    assert_eq!(row.nodes, Some(1));
    assert_eq!(row.scenarios, 2);
    CostSet::from_runs(&runs).check().unwrap();
}

#[test]
fn ordering_violations_are_named() {
    let ok = CostSet { myd: Some(550.0), std: Some(500.0), mccormick: Some(600.0), kkt: Some(500.0) };
    ok.check().unwrap();
    let bad = CostSet { myd: Some(520.0), std: Some(500.0), mccormick: Some(499.0), kkt: Some(530.0) };
    let Err(Error::Ordering(msg)) = bad.check() else { panic!("expected an ordering error") };
    assert!(msg.contains("MyD >= BiD-KKT") && msg.contains("BiD-McCormick >= StD"), "{msg}");
    assert!(!msg.contains("BiD-KKT >= StD"));
    assert_eq!(bad.check().unwrap_err().exit_code(), 4);
    // missing methods are skipped
    CostSet { myd: None, std: Some(1.0), mccormick: None, kkt: Some(1.0) }.check().unwrap();
}

#[test]
fn single_gamma_sweep_matches_a_direct_run() {
    let rs = RevisedSimplex::default();
    let (case, sc) = random_instance(3, &RandomSpec::small(), &rs).unwrap();
    let opts = RunOptions { gamma: 0.7, ..RunOptions::default() };
    let rows = sweep_gamma(&case, &sc, &[0.7], &Method::ALL, &opts, &rs).unwrap();
    assert_eq!(rows.len(), 1);
    for m in Method::ALL {
        let direct = run_method(&case, &sc, m, &opts, &rs).unwrap().cost;
        let swept = match m {
            Method::Myd => rows[0].myd_cost,
            Method::Std => rows[0].std_cost,
            Method::BidMccormick => rows[0].mccormick_cost,
            Method::BidKkt => rows[0].kkt_cost,
        };
        assert_eq!(swept, Some(direct), "{}", m.label());
    }
    assert!(sweep_gamma(&case, &sc, &[0.0], &Method::ALL, &opts, &rs).is_err());
}

#[test]
fn vanishing_gamma_forces_zero_offers() {
    let rs = RevisedSimplex::default();
    let (case, sc) = one_bus();
    let opts = RunOptions { gamma: 1e-6, ..RunOptions::default() };
    let r = run_method(&case, &sc, Method::BidMccormick, &opts, &rs).unwrap();
    let offer = &r.bilevel.unwrap().offer;
    assert!(offer.w[0] <= 1e-6 * 60.0 + 1e-9, "{:?}", offer.w);
    // zero offer: 1000 day-ahead, all renewable output sold down at 5
    assert!((r.cost - (1000.0 - 5.0 * 60.0)).abs() < 1e-3, "{}", r.cost);
}

#[test]
fn plot_data_is_long_format() {
    let row = GammaRow {
        gamma: 0.4,
        myd_cost: Some(4.0),
        myd_vres: Some(40.0),
        std_cost: Some(1.0),
        std_vres: Some(10.0),
        kkt_cost: Some(2.0),
        kkt_vres: Some(20.0),
        mccormick_cost: Some(3.0),
        mccormick_vres: Some(30.0),
        mccormick_relaxed: Some(1.0),
    };
    let cost = gamma_plotdata(&[row.clone()], GammaQuantity::Cost);
    let series: Vec<&str> = cost.iter().map(|p| p.series.as_str()).collect();
    assert_eq!(series, ["StD", "BiD-KKT", "BiD-McCormick", "MyD"]);
    assert_eq!(cost.iter().map(|p| p.value).collect::<Vec<_>>(), [1.0, 2.0, 3.0, 4.0]);
    let vres = gamma_plotdata(&[row], GammaQuantity::DaVres);
    assert_eq!(vres.iter().map(|p| p.value).collect::<Vec<_>>(), [10.0, 20.0, 30.0, 40.0]);
    assert!(vres.iter().all(|p| p.x == 0.4));

    let mut buf = Vec::new();
    write_csv(&mut buf, &gamma_plotdata(&[], GammaQuantity::Cost)).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "x,series,value\n");
}

#[test]
fn penetration_cell_at_unit_scale() {
    let rs = RevisedSimplex::default();
    let (case, sc) = one_bus();
    let methods = [Method::Std, Method::Myd];
    let rows = sweep_penetration(&case, &sc, &[1.0, 2.0], &[1.0], &methods, &RunOptions::default(), &rs).unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0].penetration - 0.6).abs() < 1e-12);
    assert_eq!(rows[0].label, "60R-1L");
    assert_eq!(rows[0].std_cost, Some(run_method(&case, &sc, Method::Std, &RunOptions::default(), &rs).unwrap().cost));
    assert_eq!(rows[0].mccormick_cost, None);
    assert!((rows[1].penetration - 1.2).abs() < 1e-12);
    let plot = penetration_plotdata(&rows);
    assert_eq!(plot.len(), 4);
    assert_eq!(plot[0].series, "StD 1L");
}

#[test]
fn parallel_real_time_matches_serial() {
    let rs = RevisedSimplex::default();
    for seed in 0..10 {
        let (case, sc) = random_instance(seed, &RandomSpec::small(), &rs).unwrap();
        let offer = OfferVector::new(case.vres_units.iter().map(|u| 0.4 * u.capacity_mw).collect());
        let da = clear_da(&case, &offer, &rs).unwrap();
        let (serial, e1) = clear_rt(&case, &da, &sc, &rs).unwrap();
        let (parallel, e2) = clear_rt_parallel(&case, &da, &sc, &rs).unwrap();
        assert_eq!(e1.to_bits(), e2.to_bits());
        assert_eq!(serial.len(), parallel.len());
        let a = settle_sequential(&case, &offer, &sc, &rs).unwrap();
        let b = settle_parallel(&case, &offer, &sc, &rs).unwrap();
        assert_eq!(a.total_cost.to_bits(), b.total_cost.to_bits());
    }
}

#[test]
fn settlement_csv_has_one_row_per_scenario() {
    let rs = RevisedSimplex::default();
    let (case, sc) = one_bus();
    let rep = settle_sequential(&case, &OfferVector::new(vec![60.0]), &sc, &rs).unwrap();
    let rows = scenario_rows(&rep);
    assert!((rows[0].cost_rt - 400.0).abs() < 1e-9);
    assert!((rows[1].cost_rt + 100.0).abs() < 1e-9);
    let mut buf = Vec::new();
    write_settlement_csv(&mut buf, &rep).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scenario,weight,cost_rt,shed_total,curtail_total");
    assert_eq!(lines.len(), 3);
}

#[test]
fn oracle_finds_the_one_bus_optimum() {
    let (case, sc) = one_bus();
    let res = grid_oracle(&case, &sc, 1.0, &RevisedSimplex::default()).unwrap();
    assert!((res.offer.w[0] - 40.0).abs() < 1e-9);
    assert!((res.cost - 500.0).abs() < 1e-6);
    assert!(grid_oracle(&case, &sc, 0.0, &RevisedSimplex::default()).is_err());
    assert!(grid_oracle(&case, &sc, 1e-5, &RevisedSimplex::default()).is_err());
}

#[test]
fn experiment_specs_are_validated() {
    let spec = ExperimentSpec {
        case: "c.json".into(),
        scenarios: ScenarioSource::File("s.json".into()),
        methods: vec![Method::Std],
        options: RunOptions::default(),
        gammas: vec![],
        vres_scales: vec![1.0],
        line_scales: vec![],
        out_dir: "out".into(),
        backend: "revised".into(),
    };
    assert!(spec.validate().is_err());
    let ok = ExperimentSpec { line_scales: vec![1.0], ..spec.clone() };
    ok.validate().unwrap();
    assert!(ExperimentSpec { methods: vec![], ..ok.clone() }.validate().is_err());
    assert!(ExperimentSpec { gammas: vec![0.5], ..ok.clone() }.validate().is_err());
    let json = serde_json::to_string(&ok).unwrap();
    assert_eq!(serde_json::from_str::<ExperimentSpec>(&json).unwrap(), ok);
    assert!(Backend::by_name("dense").is_ok());
    assert!(Backend::by_name("cplex").is_err());
}
