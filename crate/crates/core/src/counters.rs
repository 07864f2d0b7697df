//! Evaluation counters.
//!
//! Counters are owned by a single solver run and passed explicitly to every
//! component that performs counted work. Interior mutability (`Cell`) lets the
//! reduced Jacobian count its applications through a shared reference while
//! it is being used as a [`LinearOperator`](crate::LinearOperator).

use std::cell::Cell;
use std::ops::Sub;

use serde::{Deserialize, Serialize};

/// Plain tally of counted operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    /// Nonlinear constraint solves `c(y, u) = 0` (one per `solve_state`).
    pub forward_solves: u64,
    /// Linearized solves with `c_y`.
    pub linearized_solves: u64,
    /// Adjoint solves with `c_yᵀ`.
    pub adjoint_solves: u64,
    /// Applications of the reduced Jacobian or its transpose.
    pub jacobian_applies: u64,
    /// Inner conjugate-gradient iterations.
    pub cg_iterations: u64,
}

impl Sub for CounterSnapshot {
    type Output = CounterSnapshot;

    fn sub(self, rhs: Self) -> Self::Output {
        CounterSnapshot {
            forward_solves: self.forward_solves - rhs.forward_solves,
            linearized_solves: self.linearized_solves - rhs.linearized_solves,
            adjoint_solves: self.adjoint_solves - rhs.adjoint_solves,
            jacobian_applies: self.jacobian_applies - rhs.jacobian_applies,
            cg_iterations: self.cg_iterations - rhs.cg_iterations,
        }
    }
}

/// Monotone counters for one solver run.
///
/// Work can be charged to a separate overhead tally with
/// [`EvalCounters::as_overhead`]; the solver uses this for the operator-norm
/// estimate the inexact step tolerance needs, which is not part of the
/// algorithm's own cost model.
#[derive(Debug, Default)]
pub struct EvalCounters {
    algorithm: Cell<CounterSnapshot>,
    overhead: Cell<CounterSnapshot>,
    overhead_mode: Cell<bool>,
}

impl EvalCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        self.algorithm.get()
    }

    pub fn overhead_snapshot(&self) -> CounterSnapshot {
        self.overhead.get()
    }

    /// Runs `f` with every increment charged to the overhead tally.
    pub fn as_overhead<R>(&self, f: impl FnOnce() -> R) -> R {
        let previous = self.overhead_mode.replace(true);
        let out = f();
        self.overhead_mode.set(previous);
        out
    }

    fn bump(&self, update: impl FnOnce(&mut CounterSnapshot)) {
        let cell = if self.overhead_mode.get() {
            &self.overhead
        } else {
            &self.algorithm
        };
        let mut tally = cell.get();
        update(&mut tally);
        cell.set(tally);
    }

    pub fn record_forward_solve(&self) {
        self.bump(|c| c.forward_solves += 1);
    }

    pub fn record_linearized_solve(&self) {
        self.bump(|c| c.linearized_solves += 1);
    }

    pub fn record_adjoint_solve(&self) {
        self.bump(|c| c.adjoint_solves += 1);
    }

    pub fn record_jacobian_apply(&self) {
        self.bump(|c| c.jacobian_applies += 1);
    }

    pub fn record_cg_iterations(&self, iterations: usize) {
        self.bump(|c| c.cg_iterations += iterations as u64);
    }
}
