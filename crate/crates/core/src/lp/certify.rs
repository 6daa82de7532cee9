use core::sync::atomic::{AtomicUsize, Ordering};

use super::{check_duality, Basis, Interrupt, LpModel, LpSolution, LpStatus, SolverBackend, Tolerances};
use crate::error::Error;

/// Wraps a backend and runs [`check_duality`] on every optimal solution it
/// returns, counting how many pass. Usable from several threads at once.
pub struct Certifying<B> {
    inner: B,
    checked: AtomicUsize,
    failed: AtomicUsize,
}

impl<B: SolverBackend> Certifying<B> {
    pub fn new(inner: B) -> Self {
        Certifying { inner, checked: AtomicUsize::new(0), failed: AtomicUsize::new(0) }
    }

    /// Number of optimal solutions checked so far.
    pub fn checked(&self) -> usize {
        self.checked.load(Ordering::Relaxed)
    }

    /// Number of optimal solutions whose certificate failed.
    pub fn failed(&self) -> usize {
        self.failed.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: SolverBackend> SolverBackend for Certifying<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn tolerances(&self) -> Tolerances {
        self.inner.tolerances()
    }

    fn solve_with(&self, model: &LpModel, warm: Option<&Basis>, interrupt: &dyn Interrupt) -> Result<LpSolution, Error> {
        let sol = self.inner.solve_with(model, warm, interrupt)?;
        if sol.status == LpStatus::Optimal {
            self.checked.fetch_add(1, Ordering::Relaxed);
            if !check_duality(model, &sol).ok(&self.inner.tolerances()) {
                self.failed.fetch_add(1, Ordering::Relaxed);
            }
        }
        Ok(sol)
    }
}
