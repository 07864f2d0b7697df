//! The implicitly constrained least-squares problem contract.

use nalgebra::DVector;

use crate::counters::EvalCounters;
use crate::error::{check_dim, Result};
use crate::operator::LinearOperator;

/// Dimensions of an implicitly constrained least-squares problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProblemDims {
    /// Control dimension `n`.
    pub n: usize,
    /// State dimension `n_y`.
    pub n_y: usize,
    /// Residual dimension `m`.
    pub m: usize,
    /// Constraint dimension `p`; equal to `n_y` since `c_y` is square.
    pub p: usize,
}

/// `min_u ½‖R(y, u)‖²` subject to `c(y, u) = 0`, where the constraint
/// determines a unique state `y(u)` for every control `u`.
///
/// Jacobians are only ever exposed as operator actions, bundled in a
/// [`Linearization`] at a fixed point `(y, u)`. Implementations must be pure:
/// the same inputs always give the same outputs, and distinct solver runs may
/// call into one problem instance concurrently.
pub trait ImplicitProblem {
    fn dims(&self) -> ProblemDims;

    /// Solves `c(y, u) = 0` for `y`.
    fn solve_state(&self, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// `R(y, u)`.
    fn residual(&self, y: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// `c(y, u)`. Only used to check feasibility in tests.
    fn constraint_residual(&self, y: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// Bound on `‖c(y(u), u)‖` that `solve_state` guarantees at this point.
    fn feasibility_tolerance(&self, y: &DVector<f64>, u: &DVector<f64>) -> f64;

    /// Partial Jacobians of `R` and `c` at `(y, u)`, plus solves with `c_y`.
    fn linearize<'a>(
        &'a self,
        y: &DVector<f64>,
        u: &DVector<f64>,
    ) -> Result<Box<dyn Linearization + 'a>>;
}

/// First-order information at a fixed point `(y, u)`.
pub trait Linearization {
    /// `G_u = ∂R/∂u`, an `m × n` operator.
    fn g_u(&self) -> &dyn LinearOperator;
    /// `G_y = ∂R/∂y`, an `m × n_y` operator.
    fn g_y(&self) -> &dyn LinearOperator;
    /// `c_u = ∂c/∂u`, a `p × n` operator.
    fn c_u(&self) -> &dyn LinearOperator;
    /// Action of `c_y⁻¹`.
    fn solve_c_y(&self, rhs: &DVector<f64>) -> Result<DVector<f64>>;
    /// Action of `c_y⁻ᵀ`.
    fn solve_c_y_transpose(&self, rhs: &DVector<f64>) -> Result<DVector<f64>>;
}

/// `J(y, u) = ½‖R(y, u)‖²`.
pub fn objective<P: ImplicitProblem + ?Sized>(
    problem: &P,
    y: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<f64> {
    let dims = problem.dims();
    check_dim("objective (state)", dims.n_y, y.len())?;
    check_dim("objective (control)", dims.n, u.len())?;
    let r = problem.residual(y, u)?;
    Ok(0.5 * r.norm_squared())
}

/// Reduced objective `Ĵ(u) = J(y(u), u)`; performs one (uncounted) state solve.
pub fn reduced_objective<P: ImplicitProblem + ?Sized>(
    problem: &P,
    u: &DVector<f64>,
) -> Result<f64> {
    let y = problem.solve_state(u)?;
    objective(problem, &y, u)
}

/// `solve_state` with the forward solve charged to `counters`.
pub fn counted_solve_state<P: ImplicitProblem + ?Sized>(
    problem: &P,
    u: &DVector<f64>,
    counters: &EvalCounters,
) -> Result<DVector<f64>> {
    check_dim("solve_state (control)", problem.dims().n, u.len())?;
    let y = problem.solve_state(u)?;
    counters.record_forward_solve();
    Ok(y)
}

pub fn inner_product(a: &DVector<f64>, b: &DVector<f64>) -> Result<f64> {
    check_dim("inner product", a.len(), b.len())?;
    Ok(a.dot(b))
}

pub fn norm(a: &DVector<f64>) -> f64 {
    a.norm()
}
