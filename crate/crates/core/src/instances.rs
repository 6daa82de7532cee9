//! Seeded random small instances for property tests and oracle comparisons.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{Bus, ConventionalUnit, GridCase, LoadPoint, Line, OfferVector, ScenarioSet, VresUnit};
use crate::lp::SolverBackend;
use crate::market::clear_da;

/// Size ranges of a random instance (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub buses: (usize, usize),
    pub units: (usize, usize),
    pub vres: (usize, usize),
    pub scenarios: (usize, usize),
}

impl RandomSpec {
    /// Three buses, two conventional units, one renewable unit, 2 to 5 scenarios.
    pub fn tiny() -> Self {
        RandomSpec { buses: (3, 3), units: (2, 2), vres: (1, 1), scenarios: (2, 5) }
    }

    /// Up to ten buses and twenty scenarios.
    pub fn small() -> Self {
        RandomSpec { buses: (1, 10), units: (2, 4), vres: (1, 3), scenarios: (1, 20) }
    }
}

/// Draws a connected network with distinct unit costs, loads on random
/// buses and uniformly distributed renewable scenarios. Line ratings are
/// doubled until the day-ahead market clears with all offers at zero, so the
/// instance is feasible for every offer.
pub fn random_instance<B: SolverBackend + ?Sized>(
    seed: u64,
    spec: &RandomSpec,
    backend: &B,
) -> Result<(GridCase, ScenarioSet), Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)| rng.random_range(lo..=hi);
    let nb = pick(&mut rng, spec.buses);
    let nu = pick(&mut rng, spec.units);
    let nv = pick(&mut rng, spec.vres);
    let ns = pick(&mut rng, spec.scenarios);

    let buses: Vec<Bus> = (0..nb).map(|i| Bus { id: i, name: alloc::format!("bus{i}") }).collect();
    let mut lines = Vec::new();
    // random spanning tree plus a few chords
    for b in 1..nb {
        let to = rng.random_range(0..b);
        lines.push(Line { from_bus: b, to_bus: to, reactance_pu: rng.random_range(0.05..0.3), capacity_mw: rng.random_range(20.0..120.0) });
    }
    if nb >= 3 {
        for _ in 0..rng.random_range(0..=nb / 2) {
            let a = rng.random_range(0..nb);
            let b = rng.random_range(0..nb);
            if a != b {
                lines.push(Line { from_bus: a, to_bus: b, reactance_pu: rng.random_range(0.05..0.3), capacity_mw: rng.random_range(20.0..120.0) });
            }
        }
    }

    let mut conventional_units = Vec::with_capacity(nu);
    for i in 0..nu {
        // distinct costs keep the day-ahead optimum unique
        let cost = 10.0 + 8.0 * i as f64 + rng.random_range(0.0..7.0);
        let p_max = rng.random_range(60.0..160.0);
        conventional_units.push(ConventionalUnit {
            bus: rng.random_range(0..nb),
            cost_da: cost,
            cost_up: cost * rng.random_range(1.1..1.8),
            cost_down: cost * rng.random_range(0.3..0.9),
            p_max,
            p_min: if rng.random_bool(0.3) { rng.random_range(0.0..0.2) * p_max } else { 0.0 },
        });
    }
    let capacity: f64 = conventional_units.iter().map(|u| u.p_max).sum();
    let min_output: f64 = conventional_units.iter().map(|u| u.p_min).sum();
    let mut loads = Vec::new();
    let target = rng.random_range(0.35..0.7) * capacity;
    let nl = rng.random_range(1..=nb);
    for _ in 0..nl {
        let bus = rng.random_range(0..nb);
        loads.push(LoadPoint { bus, demand_mw: target / nl as f64 * rng.random_range(0.6..1.4) });
    }
    let total: f64 = loads.iter().map(|l| l.demand_mw).sum();
    if total < min_output * 1.05 {
        loads[0].demand_mw += min_output * 1.05 - total;
    }
    let vres_units: Vec<VresUnit> =
        (0..nv).map(|_| VresUnit { bus: rng.random_range(0..nb), capacity_mw: rng.random_range(20.0..0.6 * total.max(40.0)) }).collect();
    let realizations: Vec<Vec<f64>> =
        (0..ns).map(|_| vres_units.iter().map(|u| u.capacity_mw * rng.random_range(0.0..1.0)).collect()).collect();
    let voll = rng.random_range(300.0..1000.0);

    let mut case = GridCase { buses, lines, conventional_units, vres_units, loads, voll, reference_bus: 0 };
    case.validate()?;
    let scenarios = ScenarioSet::uniform(realizations)?;
    let zero = OfferVector::zeros(nv);
    for _ in 0..12 {
        if clear_da(&case, &zero, backend).is_ok() {
            return Ok((case, scenarios));
        }
        for l in &mut case.lines {
            l.capacity_mw *= 2.0;
        }
    }
    Err(Error::Validation("random instance stayed infeasible after widening lines".into()))
}
