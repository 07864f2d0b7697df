//! Matrix-free regularized Gauss-Newton for nonlinear least squares with
//! implicit equality constraints.
//!
//! The problems solved here have the form
//!
//! ```text
//! min_u  J(y, u) = ½‖R(y, u)‖²   subject to   c(y, u) = 0,
//! ```
//!
//! where the constraint can be solved for a unique state `y(u)` given the
//! control `u` (typically a discretized PDE). Eliminating `y` gives the reduced
//! objective `Ĵ(u) = ½‖R(y(u), u)‖²`. Derivatives of the reduced residual are
//! obtained with linearized and adjoint constraint solves ([`adjoint`]), and
//! the outer loop ([`solver`]) is a quadratic-regularization method whose
//! steps are computed exactly or by truncated conjugate gradient
//! ([`subproblem`]).
//!
//! Every constraint solve and Jacobian application is tallied in an
//! [`EvalCounters`] object so that the cost of a run can be read off in the
//! same units the complexity bounds use.
//!
//! Two benchmark problems are included: a linear elliptic control problem
//! ([`elliptic`]) and optimal control of the viscous Burgers equation
//! ([`burgers`]).

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod burgers;
pub mod counters;
pub mod elliptic;
mod error;
pub mod linalg;
pub mod operator;
pub mod oracle;
pub mod problem;
pub mod solver;
pub mod subproblem;
pub mod toy;

pub use adjoint::{reduced_gradient, GaussNewtonOperator, ReducedJacobian};
pub use counters::{CounterSnapshot, EvalCounters};
pub use error::{Error, Result};
pub use operator::LinearOperator;
pub use problem::{inner_product, norm, objective, ImplicitProblem, Linearization, ProblemDims};
pub use solver::{
    solve, HessianMode, IterationTrace, IterationView, SolveOutcome, SolverConfig, StopStatus,
    TraceSink,
};
pub use subproblem::{StepMode, StepResult, SubproblemSpec};

/// Dense real vector used for controls, states, residuals and directions.
pub type Vector = nalgebra::DVector<f64>;
