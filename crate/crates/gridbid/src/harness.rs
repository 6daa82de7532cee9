//! Experiment runs: single methods, parameter sweeps, plot data and the
//! brute-force offer oracle.

use std::time::Instant;

use gridbid_core::bilevel::{
    compute_bounds, myd_offer, solve_bid_kkt, solve_bid_mccormick_with_bounds, solve_std, BilevelResult, Clock, KktConfig,
};
use gridbid_core::grid::{penetration_level, scale_case, GridCase, OfferVector, ScenarioSet};
use gridbid_core::lp::SolverBackend;
use gridbid_core::market::SettlementReport;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{settle_parallel, Timed, WallClock};
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Myd,
    Std,
    BidMccormick,
    BidKkt,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Myd, Method::Std, Method::BidMccormick, Method::BidKkt];

    /// Display name used in tables and plot series.
    pub fn label(self) -> &'static str {
        match self {
            Method::Myd => "MyD",
            Method::Std => "StD",
            Method::BidMccormick => "BiD-McCormick",
            Method::BidKkt => "BiD-KKT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub gamma: f64,
    /// Safety factor on the multiplier upper bounds of the envelope.
    pub lambda_inflation: f64,
    pub kkt: KktConfig,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { gamma: 1.0, lambda_inflation: 1.0, kkt: KktConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    /// Evaluated sequential cost; for StD the joint optimum.
    pub cost: f64,
    /// Aggregate day-ahead renewable schedule.
    pub da_vres: f64,
    pub settlement: Option<SettlementReport>,
    pub bilevel: Option<BilevelResult>,
    pub build_seconds: f64,
    pub solve_seconds: f64,
}

/// One line of a run summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub cost: f64,
    pub da_vres: f64,
    pub relaxed_objective: Option<f64>,
    pub exact_objective: Option<f64>,
    pub nodes: Option<usize>,
    pub gap: Option<f64>,
    pub scenarios: usize,
    pub build_seconds: f64,
    pub solve_seconds: f64,
}

impl MethodRun {
    pub fn summary(&self, scenarios: usize) -> SummaryRow {
        let b = self.bilevel.as_ref();
        SummaryRow {
            method: self.method.label().to_string(),
            cost: self.cost,
            da_vres: self.da_vres,
            relaxed_objective: b.and_then(|r| r.relaxed_objective),
            exact_objective: b.and_then(|r| r.exact_objective),
            nodes: b.map(|r| r.diagnostics.nodes),
            gap: b.map(|r| r.diagnostics.gap).filter(|g| g.is_finite()),
            scenarios,
            build_seconds: self.build_seconds,
            solve_seconds: self.solve_seconds,
        }
    }
}

/// Runs one method end to end on `case` and `scenarios`.
pub fn run_method<B: SolverBackend + Sync>(
    case: &GridCase,
    scenarios: &ScenarioSet,
    method: Method,
    opts: &RunOptions,
    backend: &B,
) -> Result<MethodRun, Error> {
    let timed = Timed::new(backend);
    let start = Instant::now();
    let (cost, da_vres, settlement, bilevel) = match method {
        Method::Myd => {
            let rep = settle_parallel(case, &myd_offer(scenarios), scenarios, &timed)?;
            (rep.total_cost, rep.da.p_vres.iter().sum(), Some(rep), None)
        }
        Method::Std => {
            let r = solve_std(case, scenarios, &timed)?;
            (r.objective, r.p_vres.iter().sum(), None, None)
        }
        Method::BidMccormick => {
            let bounds = compute_bounds(case, scenarios, opts.gamma, &timed)?.inflate_lambda(opts.lambda_inflation);
            let r = solve_bid_mccormick_with_bounds(case, scenarios, &bounds, &timed)?;
            (r.evaluated.total_cost, r.evaluated.da.p_vres.iter().sum(), None, Some(r))
        }
        Method::BidKkt => {
            let clock = WallClock::start();
            let r = solve_bid_kkt(case, scenarios, &timed, &opts.kkt, &clock as &dyn Clock)?;
            (r.evaluated.total_cost, r.evaluated.da.p_vres.iter().sum(), None, Some(r))
        }
    };
    let total = start.elapsed().as_secs_f64();
    let solve_seconds = timed.solve_seconds();
    Ok(MethodRun {
        method,
        cost,
        da_vres,
        settlement,
        bilevel,
        build_seconds: (total - solve_seconds).max(0.0),
        solve_seconds,
    })
}

/// Costs of the methods that were run, for the ordering check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostSet {
    pub myd: Option<f64>,
    pub std: Option<f64>,
    pub mccormick: Option<f64>,
    pub kkt: Option<f64>,
}

impl CostSet {
    pub fn from_runs(runs: &[MethodRun]) -> Self {
        let mut c = CostSet::default();
        for r in runs {
            let slot = match r.method {
                Method::Myd => &mut c.myd,
                Method::Std => &mut c.std,
                Method::BidMccormick => &mut c.mccormick,
                Method::BidKkt => &mut c.kkt,
            };
            *slot = Some(r.cost);
        }
        c
    }

    /// Checks MyD >= BiD-KKT >= StD and BiD-McCormick >= StD, each within
    /// `1e-6 (1 + |StD|)`. McCormick offers carry no guarantee against MyD.
    pub fn check(&self) -> Result<(), Error> {
        let base = self.std.or(self.kkt).or(self.myd).or(self.mccormick).unwrap_or(0.0);
        let tol = 1e-6 * (1.0 + base.abs());
        let mut problems = Vec::new();
        let mut need = |hi: Option<f64>, lo: Option<f64>, what: &str| {
            if let (Some(h), Some(l)) = (hi, lo) {
                if h < l - tol {
                    problems.push(format!("{what}: {h} < {l}"));
                }
            }
        };
        need(self.myd, self.kkt, "MyD >= BiD-KKT");
        need(self.kkt, self.std, "BiD-KKT >= StD");
        need(self.mccormick, self.std, "BiD-McCormick >= StD");
        need(self.myd, self.std, "MyD >= StD");
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Ordering(problems.join("; ")))
        }
    }
}

/// One gamma value of a bound sweep. Methods that do not depend on gamma
/// repeat their value in every row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub myd_cost: Option<f64>,
    pub myd_vres: Option<f64>,
    pub std_cost: Option<f64>,
    pub std_vres: Option<f64>,
    pub kkt_cost: Option<f64>,
    pub kkt_vres: Option<f64>,
    pub mccormick_cost: Option<f64>,
    pub mccormick_vres: Option<f64>,
    pub mccormick_relaxed: Option<f64>,
}

impl GammaRow {
    pub fn costs(&self) -> CostSet {
        CostSet { myd: self.myd_cost, std: self.std_cost, mccormick: self.mccormick_cost, kkt: self.kkt_cost }
    }
}

pub fn sweep_gamma<B: SolverBackend + Sync>(
    case: &GridCase,
    scenarios: &ScenarioSet,
    gammas: &[f64],
    methods: &[Method],
    opts: &RunOptions,
    backend: &B,
) -> Result<Vec<GammaRow>, Error> {
    if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(Error::Config(format!("gamma must be positive, got {g}")));
    }
    let fixed = |m: Method| -> Result<Option<MethodRun>, Error> {
        if methods.contains(&m) {
            run_method(case, scenarios, m, opts, backend).map(Some)
        } else {
            Ok(None)
        }
    };
    let myd = fixed(Method::Myd)?;
    let std = fixed(Method::Std)?;
    let kkt = fixed(Method::BidKkt)?;
    let mccormick: Vec<Option<MethodRun>> = gammas
        .par_iter()
        .map(|&gamma| {
            if methods.contains(&Method::BidMccormick) {
                let o = RunOptions { gamma, ..opts.clone() };
                run_method(case, scenarios, Method::BidMccormick, &o, backend).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_, Error>>()?;
    Ok(gammas
        .iter()
        .zip(mccormick)
        .map(|(&gamma, mc)| GammaRow {
            gamma,
            myd_cost: myd.as_ref().map(|r| r.cost),
            myd_vres: myd.as_ref().map(|r| r.da_vres),
            std_cost: std.as_ref().map(|r| r.cost),
            std_vres: std.as_ref().map(|r| r.da_vres),
            kkt_cost: kkt.as_ref().map(|r| r.cost),
            kkt_vres: kkt.as_ref().map(|r| r.da_vres),
            mccormick_cost: mc.as_ref().map(|r| r.cost),
            mccormick_vres: mc.as_ref().map(|r| r.da_vres),
            mccormick_relaxed: mc.as_ref().and_then(|r| r.bilevel.as_ref()).and_then(|b| b.relaxed_objective),
        })
        .collect())
}

/// One cell of a penetration sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PenetrationRow {
    pub vres_scale: f64,
    pub line_scale: f64,
    /// Expected renewable energy over demand after scaling.
    pub penetration: f64,
    /// `<penetration %>R-<line scale>L`.
    pub label: String,
    pub std_cost: Option<f64>,
    pub mccormick_cost: Option<f64>,
    pub myd_cost: Option<f64>,
    pub kkt_cost: Option<f64>,
}

impl PenetrationRow {
    pub fn costs(&self) -> CostSet {
        CostSet { myd: self.myd_cost, std: self.std_cost, mccormick: self.mccormick_cost, kkt: self.kkt_cost }
    }
}

/// Runs every `(vres_scale, line_scale)` cell; scenarios scale with the
/// renewable capacities.
pub fn sweep_penetration<B: SolverBackend + Sync>(
    case: &GridCase,
    scenarios: &ScenarioSet,
    vres_scales: &[f64],
    line_scales: &[f64],
    methods: &[Method],
    opts: &RunOptions,
    backend: &B,
) -> Result<Vec<PenetrationRow>, Error> {
    let cells: Vec<(f64, f64)> = vres_scales.iter().flat_map(|&v| line_scales.iter().map(move |&l| (v, l))).collect();
    cells
        .par_iter()
        .map(|&(v, l)| {
            let scaled = scale_case(case, v, l)?;
            let sc = scenarios.scaled(v);
            let penetration = penetration_level(&scaled, &sc)?;
            let mut row = PenetrationRow {
                vres_scale: v,
                line_scale: l,
                penetration,
                label: format!("{:.0}R-{}L", 100.0 * penetration, l),
                std_cost: None,
                mccormick_cost: None,
                myd_cost: None,
                kkt_cost: None,
            };
            for &m in methods {
                let cost = Some(run_method(&scaled, &sc, m, opts, backend)?.cost);
                match m {
                    Method::Std => row.std_cost = cost,
                    Method::BidMccormick => row.mccormick_cost = cost,
                    Method::Myd => row.myd_cost = cost,
                    Method::BidKkt => row.kkt_cost = cost,
                }
            }
            Ok(row)
        })
        .collect()
}

/// Long-format plot record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub x: f64,
    pub series: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaQuantity {
    Cost,
    DaVres,
}

/// Gamma sweep as `{x = gamma, series = method, value}`.
pub fn gamma_plotdata(rows: &[GammaRow], quantity: GammaQuantity) -> Vec<PlotPoint> {
    let mut out = Vec::new();
    for r in rows {
        let series = [
            (Method::Std, r.std_cost, r.std_vres),
            (Method::BidKkt, r.kkt_cost, r.kkt_vres),
            (Method::BidMccormick, r.mccormick_cost, r.mccormick_vres),
            (Method::Myd, r.myd_cost, r.myd_vres),
        ];
        for (m, cost, vres) in series {
            let v = match quantity {
                GammaQuantity::Cost => cost,
                GammaQuantity::DaVres => vres,
            };
            if let Some(value) = v {
                out.push(PlotPoint { x: r.gamma, series: m.label().to_string(), value });
            }
        }
    }
    out
}

/// Penetration sweep as `{x = penetration, series = "<method> <line>L", value = cost}`.
pub fn penetration_plotdata(rows: &[PenetrationRow]) -> Vec<PlotPoint> {
    let mut out = Vec::new();
    for r in rows {
        for (m, cost) in [
            (Method::Std, r.std_cost),
            (Method::BidMccormick, r.mccormick_cost),
            (Method::Myd, r.myd_cost),
            (Method::BidKkt, r.kkt_cost),
        ] {
            if let Some(value) = cost {
                out.push(PlotPoint { x: r.penetration, series: format!("{} {}L", m.label(), r.line_scale), value });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub offer: OfferVector,
    pub cost: f64,
    pub evaluations: usize,
}

/// Largest number of grid points the oracle will evaluate.
pub const ORACLE_MAX_POINTS: usize = 2_000_000;

/// Brute-force search over offers: every point of a grid with spacing
/// `step` on `[0, capacity]` per unit is settled sequentially, then each
/// coordinate of the best point is refined on grids 100 and 10,000 times
/// finer within one coarse step. Costs are piecewise linear in the offer, so
/// the refinement lands on the kink the coarse grid brackets.
pub fn grid_oracle<B: SolverBackend + Sync>(
    case: &GridCase,
    scenarios: &ScenarioSet,
    step: f64,
    backend: &B,
) -> Result<OracleResult, Error> {
    if !(step > 0.0) {
        return Err(Error::Config(format!("grid step must be positive, got {step}")));
    }
    let caps = case.vres_capacities();
    let axes: Vec<Vec<f64>> = caps
        .iter()
        .map(|&c| {
            let n = (c / step).ceil() as usize;
            (0..=n).map(|i| (i as f64 * step).min(c)).collect()
        })
        .collect();
    let points = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len())).unwrap_or(usize::MAX);
    if points > ORACLE_MAX_POINTS {
        return Err(Error::Config(format!("oracle grid has {points} points (limit {ORACLE_MAX_POINTS})")));
    }
    let eval = |w: &[f64]| -> Result<f64, Error> {
        Ok(gridbid_core::market::settle_sequential(case, &OfferVector::new(w.to_vec()), scenarios, backend)?.total_cost)
    };
    let coarse: Vec<(f64, Vec<f64>)> = (0..points)
        .into_par_iter()
        .map(|mut idx| {
            let w: Vec<f64> = axes
                .iter()
                .map(|a| {
                    let v = a[idx % a.len()];
                    idx /= a.len();
                    v
                })
                .collect();
            Ok((eval(&w)?, w))
        })
        .collect::<Result<_, Error>>()?;
    let mut evaluations = coarse.len();
    // first minimum in grid order keeps ties deterministic
    let (mut best_cost, mut best) = coarse.into_iter().fold((f64::INFINITY, Vec::new()), |b, c| if c.0 < b.0 { c } else { b });

    for fine in [step / 100.0, step / 10_000.0] {
        for k in 0..caps.len() {
            let center = best[k];
            let cands: Vec<f64> = (-100..=100)
                .map(|i| center + i as f64 * fine)
                .filter(|&v| (0.0..=caps[k]).contains(&v))
                .collect();
            let vals: Vec<(f64, f64)> = cands
                .par_iter()
                .map(|&v| {
                    let mut w = best.clone();
                    w[k] = v;
                    Ok((eval(&w)?, v))
                })
                .collect::<Result<_, Error>>()?;
            evaluations += vals.len();
            for (c, v) in vals {
                if c < best_cost {
                    best_cost = c;
                    best[k] = v;
                }
            }
        }
    }
    Ok(OracleResult { offer: OfferVector::new(best), cost: best_cost, evaluations })
}

/// Where the scenarios of an experiment come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    File(std::path::PathBuf),
    Generated(gridbid_core::scenarios::ScenarioConfig),
}

/// Everything needed to reproduce a run; written to the output manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub case: std::path::PathBuf,
    pub scenarios: ScenarioSource,
    pub methods: Vec<Method>,
    pub options: RunOptions,
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub vres_scales: Vec<f64>,
    #[serde(default)]
    pub line_scales: Vec<f64>,
    pub out_dir: std::path::PathBuf,
    pub backend: String,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.methods.is_empty() {
            return Err(Error::Config("no method selected".into()));
        }
        if !(self.options.gamma > 0.0 && self.options.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.options.gamma)));
        }
        if !self.gammas.is_empty() && !(self.vres_scales.is_empty() && self.line_scales.is_empty()) {
            return Err(Error::Config("a run sweeps either gamma or the penetration grid, not both".into()));
        }
        if self.vres_scales.is_empty() != self.line_scales.is_empty() {
            return Err(Error::Config("a penetration sweep needs both renewable and line scales".into()));
        }
        if let Some(s) = self.vres_scales.iter().chain(&self.line_scales).find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("scales must be positive, got {s}")));
        }
        Ok(())
    }

    /// Loads the case (JSON, or MATPOWER `.m` without renewables) and the scenarios.
    pub fn load_inputs(&self) -> Result<(GridCase, ScenarioSet), Error> {
        let case = if self.case.extension().is_some_and(|e| e == "m") {
            crate::matpower::import_matpower(&self.case, &crate::matpower::ImportOptions::default())?
        } else {
            crate::io::load_case(&self.case)?
        };
        let scenarios = match &self.scenarios {
            ScenarioSource::File(p) => crate::io::load_scenarios(p)?,
            ScenarioSource::Generated(cfg) => gridbid_core::scenarios::generate_scenarios(&case, cfg)?,
        };
        scenarios.check_against(&case)?;
        Ok((case, scenarios))
    }
}
