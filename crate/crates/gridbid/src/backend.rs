//! Backend selection, wall clock, timing and parallel real-time clearing.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use gridbid_core::bilevel::Clock;
use gridbid_core::grid::{GridCase, OfferVector, ScenarioSet};
use gridbid_core::lp::{Basis, DenseSimplex, Interrupt, LpModel, LpSolution, RevisedSimplex, SolverBackend, Tolerances};
use gridbid_core::market::{clear_da, expected_cost, solve_rt_scenario, DaOutcome, RtOutcome, SettlementReport};
use rayon::prelude::*;

use crate::error::Error;

/// Environment variable naming the LP backend: `revised` (default) or `dense`.
pub const BACKEND_ENV: &str = "GRIDBID_BACKEND";

#[derive(Debug, Clone)]
pub enum Backend {
    Revised(RevisedSimplex),
    Dense(DenseSimplex),
}

impl Backend {
    pub fn by_name(name: &str) -> Result<Backend, Error> {
        match name.trim().to_ascii_lowercase().as_str() {
            "" | "revised" | "simplex" => Ok(Backend::Revised(RevisedSimplex::default())),
            "dense" => Ok(Backend::Dense(DenseSimplex::default())),
            other => Err(Error::Config(format!("unknown backend {other:?} (expected revised or dense)"))),
        }
    }

    /// Reads [`BACKEND_ENV`]; unset means the revised simplex.
    pub fn from_env() -> Result<Backend, Error> {
        Backend::by_name(&std::env::var(BACKEND_ENV).unwrap_or_default())
    }
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Revised(RevisedSimplex::default())
    }
}

impl SolverBackend for Backend {
    fn name(&self) -> &str {
        match self {
            Backend::Revised(b) => b.name(),
            Backend::Dense(b) => b.name(),
        }
    }

    fn tolerances(&self) -> Tolerances {
        match self {
            Backend::Revised(b) => b.tolerances(),
            Backend::Dense(b) => b.tolerances(),
        }
    }

    fn solve_with(&self, model: &LpModel, warm: Option<&Basis>, interrupt: &dyn Interrupt) -> Result<LpSolution, gridbid_core::Error> {
        match self {
            Backend::Revised(b) => b.solve_with(model, warm, interrupt),
            Backend::Dense(b) => b.solve_with(model, warm, interrupt),
        }
    }
}

/// Seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Accumulates the wall time spent inside LP solves so that model building
/// can be reported separately.
pub struct Timed<B> {
    inner: B,
    nanos: AtomicU64,
}

impl<B> Timed<B> {
    pub fn new(inner: B) -> Self {
        Timed { inner, nanos: AtomicU64::new(0) }
    }

    pub fn solve_seconds(&self) -> f64 {
        self.nanos.load(Ordering::Relaxed) as f64 * 1e-9
    }
}

impl<B: SolverBackend> SolverBackend for Timed<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn tolerances(&self) -> Tolerances {
        self.inner.tolerances()
    }

    fn solve_with(&self, model: &LpModel, warm: Option<&Basis>, interrupt: &dyn Interrupt) -> Result<LpSolution, gridbid_core::Error> {
        let t = Instant::now();
        let out = self.inner.solve_with(model, warm, interrupt);
        self.nanos.fetch_add(t.elapsed().as_nanos() as u64, Ordering::Relaxed);
        out
    }
}

/// Real-time clearing with scenarios solved on the rayon pool. Results are
/// gathered in scenario order, so costs match the serial path exactly.
pub fn clear_rt_parallel<B: SolverBackend + Sync + ?Sized>(
    case: &GridCase,
    da: &DaOutcome,
    scenarios: &ScenarioSet,
    backend: &B,
) -> Result<(Vec<RtOutcome>, f64), gridbid_core::Error> {
    scenarios.check_against(case)?;
    let outcomes = (0..scenarios.len())
        .into_par_iter()
        .map(|s| solve_rt_scenario(case, da, scenarios, s, backend))
        .collect::<Result<Vec<_>, _>>()?;
    let expected = expected_cost(scenarios, &outcomes);
    Ok((outcomes, expected))
}

/// Sequential settlement with the real-time stage run in parallel.
pub fn settle_parallel<B: SolverBackend + Sync + ?Sized>(
    case: &GridCase,
    offer: &OfferVector,
    scenarios: &ScenarioSet,
    backend: &B,
) -> Result<SettlementReport, gridbid_core::Error> {
    let da = clear_da(case, offer, backend)?;
    let (rt, _) = clear_rt_parallel(case, &da, scenarios, backend)?;
    Ok(SettlementReport::assemble(offer.clone(), da, rt, scenarios))
}
