//! Shipped and generated study cases.
//!
//! * [`ieee118`] is the IEEE 118-bus network from `data/case118.m`.
//! * [`high_penetration_118`] adds 14 wind farms sized to a target share of
//!   demand and rates lines from a reference dispatch.
//! * [`large_grid`] generates a random planar network of about 1800 buses for
//!   scalability runs. It is synthetic and does not model any real system.

use gridbid_core::grid::{Bus, ConventionalUnit, GridCase, LoadPoint, Line, OfferVector, VresUnit};
use gridbid_core::lp::SolverBackend;
use gridbid_core::market::clear_da;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::matpower::{parse_matpower, ImportOptions};

pub const CASE118_M: &str = include_str!("../../../data/case118.m");

/// Bus labels of the 14 wind farms, spread over the three areas of the network.
pub const WIND_BUSES_118: [usize; 14] = [3, 11, 20, 28, 35, 44, 52, 58, 67, 75, 83, 94, 101, 114];

pub fn ieee118(opts: &ImportOptions) -> Result<GridCase, Error> {
    let parsed = parse_matpower(CASE118_M).map_err(Error::Config)?;
    parsed.to_grid_case(opts).map_err(Error::Config)
}

/// Sets every line rating to `max(floor, margin * |flow|)` where the flow is
/// that of the day-ahead dispatch without renewables and without line limits.
pub fn rate_lines_from_dispatch<B: SolverBackend + ?Sized>(
    case: &mut GridCase,
    margin: f64,
    floor_mw: f64,
    backend: &B,
) -> Result<(), Error> {
    let mut open = case.clone();
    let total: f64 = case.total_demand() + case.conventional_units.iter().map(|u| u.p_max).sum::<f64>();
    for l in &mut open.lines {
        l.capacity_mw = total;
    }
    let da = clear_da(&open, &OfferVector::zeros(open.vres_units.len()), backend)?;
    for (line, flow) in case.lines.iter_mut().zip(da.line_flows(&open)) {
        line.capacity_mw = (margin * flow.abs()).max(floor_mw);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighPenetrationOptions {
    pub import: ImportOptions,
    /// Expected renewable energy as a share of demand.
    pub penetration: f64,
    /// Forecast mean as a share of capacity, used to size the farms.
    pub mean_fraction: f64,
    /// Multiplier on the reference-dispatch line ratings.
    pub line_scale: f64,
    pub rating_margin: f64,
    pub rating_floor_mw: f64,
}

impl Default for HighPenetrationOptions {
    fn default() -> Self {
        HighPenetrationOptions {
            // real-time decrements are bought back at the day-ahead price, so
            // only shortfalls are penalized
            import: ImportOptions { up_factor: 2.0, down_factor: 1.0, voll: 1000.0, unlimited_rating_mw: 9900.0 },
            penetration: 0.7,
            mean_fraction: 0.5,
            line_scale: 2.0,
            rating_margin: 1.25,
            rating_floor_mw: 50.0,
        }
    }
}

/// The 118-bus network with 14 equal wind farms whose expected output is
/// `penetration` of total demand, and line ratings taken from the
/// no-wind dispatch then multiplied by `line_scale`.
pub fn high_penetration_118<B: SolverBackend + ?Sized>(opts: &HighPenetrationOptions, backend: &B) -> Result<GridCase, Error> {
    let mut case = ieee118(&opts.import)?;
    rate_lines_from_dispatch(&mut case, opts.rating_margin, opts.rating_floor_mw, backend)?;
    for l in &mut case.lines {
        l.capacity_mw *= opts.line_scale;
    }
    let per_farm = opts.penetration * case.total_demand() / (WIND_BUSES_118.len() as f64 * opts.mean_fraction);
    for label in WIND_BUSES_118 {
        let bus = case
            .buses
            .iter()
            .position(|b| b.name == label.to_string())
            .ok_or_else(|| Error::Config(format!("bus {label} missing from the 118-bus case")))?;
        case.vres_units.push(VresUnit { bus, capacity_mw: per_farm });
    }
    case.validate()?;
    Ok(case)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeGridSpec {
    pub buses: usize,
    pub lines: usize,
    pub units: usize,
    pub vres: usize,
    /// Expected renewable energy as a share of demand.
    pub penetration: f64,
    pub mean_fraction: f64,
    pub seed: u64,
}

impl Default for LargeGridSpec {
    fn default() -> Self {
        LargeGridSpec { buses: 1814, lines: 2260, units: 345, vres: 14, penetration: 0.3, mean_fraction: 0.5, seed: 7 }
    }
}

/// Random planar grid: buses scattered in the unit square, a nearest-neighbour
/// spanning tree plus short chords, reactance growing with distance. Line
/// ratings come from the no-wind dispatch with a 30% margin.
pub fn large_grid<B: SolverBackend + ?Sized>(spec: &LargeGridSpec, backend: &B) -> Result<GridCase, Error> {
    if spec.buses < 2 || spec.lines + 1 < spec.buses || spec.units == 0 {
        return Err(Error::Config("large grid needs at least 2 buses, a spanning tree of lines and one unit".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.buses;
    let pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let dist = |a: usize, b: usize| ((pos[a].0 - pos[b].0).powi(2) + (pos[a].1 - pos[b].1).powi(2)).sqrt();
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(spec.lines);
    let mut seen = std::collections::HashSet::new();
    for b in 1..n {
        let a = (0..b).min_by(|&x, &y| dist(b, x).total_cmp(&dist(b, y))).unwrap_or(0);
        edges.push((a, b));
        seen.insert((a.min(b), a.max(b)));
    }
    let mut guard = 0;
    while edges.len() < spec.lines && guard < 100 * spec.lines {
        guard += 1;
        let a = rng.random_range(0..n);
        // one of the five nearest other buses
        let mut near: Vec<usize> = (0..n).filter(|&x| x != a).collect();
        let k = 5.min(near.len() - 1);
        near.select_nth_unstable_by(k, |&x, &y| dist(a, x).total_cmp(&dist(a, y)));
        let mut five: Vec<usize> = near[..5.min(near.len())].to_vec();
        five.sort_by(|&x, &y| dist(a, x).total_cmp(&dist(a, y)));
        let b = five[rng.random_range(0..five.len())];
        if seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b));
        }
    }
    let lines: Vec<Line> = edges
        .iter()
        .map(|&(a, b)| Line { from_bus: a, to_bus: b, reactance_pu: 0.005 + 2.0 * dist(a, b) * rng.random_range(0.8..1.2), capacity_mw: 0.0 })
        .collect();

    let mut costs: Vec<f64> = (0..spec.units).map(|_| rng.random_range(15.0..120.0)).collect();
    costs.sort_by(f64::total_cmp);
    // spread ties apart so the day-ahead merit order is strict
    for i in 1..costs.len() {
        if costs[i] <= costs[i - 1] + 1e-3 {
            costs[i] = costs[i - 1] + 1e-3;
        }
    }
    costs.shuffle(&mut rng);
    let units: Vec<ConventionalUnit> = costs
        .iter()
        .map(|&c| ConventionalUnit {
            bus: rng.random_range(0..n),
            cost_da: c,
            cost_up: c * rng.random_range(1.3..1.8),
            cost_down: c * rng.random_range(0.6..0.9),
            p_max: rng.random_range(50.0..600.0),
            p_min: 0.0,
        })
        .collect();
    let capacity: f64 = units.iter().map(|u| u.p_max).sum();
    let mut load_buses: Vec<usize> = (0..n).collect();
    load_buses.shuffle(&mut rng);
    load_buses.truncate((0.7 * n as f64).ceil() as usize);
    let weights: Vec<f64> = load_buses.iter().map(|_| rng.random_range(0.2..1.0)).collect();
    let total_weight: f64 = weights.iter().sum();
    let demand = 0.55 * capacity;
    let loads: Vec<LoadPoint> =
        load_buses.iter().zip(&weights).map(|(&bus, w)| LoadPoint { bus, demand_mw: demand * w / total_weight }).collect();
    let per_unit = spec.penetration * demand / (spec.vres.max(1) as f64 * spec.mean_fraction);
    let vres_units: Vec<VresUnit> = (0..spec.vres).map(|_| VresUnit { bus: rng.random_range(0..n), capacity_mw: per_unit }).collect();

    let mut case = GridCase {
        buses: (0..n).map(|i| Bus { id: i, name: format!("syn{i}") }).collect(),
        lines,
        conventional_units: units,
        vres_units,
        loads,
        voll: 2000.0,
        reference_bus: 0,
    };
    rate_lines_from_dispatch(&mut case, 1.3, 20.0, backend)?;
    case.validate()?;
    Ok(case)
}
