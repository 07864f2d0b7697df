//! Independent reference computations for verifying derivative code.
//!
//! These are deliberately naive (finite differences, column-by-column dense
//! assembly) and only meant for small instances.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::ReducedJacobian;
use crate::counters::EvalCounters;
use crate::error::{check_dim, Error, Result};
use crate::operator::LinearOperator;
use crate::problem::ImplicitProblem;

pub use crate::problem::reduced_objective;

/// Largest dense Jacobian the oracle will assemble.
pub const DENSE_ORACLE_LIMIT: usize = 10_000;

/// Central-difference gradient of `Ĵ(u) = ½‖R(y(u), u)‖²`, one coordinate at a
/// time (`2n` state solves).
pub fn fd_gradient_oracle<P: ImplicitProblem + ?Sized>(
    problem: &P,
    u: &DVector<f64>,
    step: f64,
) -> Result<DVector<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    check_dim("fd gradient", problem.dims().n, u.len())?;
    let mut grad = DVector::zeros(u.len());
    let mut probe = u.clone();
    for i in 0..u.len() {
        probe[i] = u[i] + step;
        let plus = reduced_objective(problem, &probe)?;
        probe[i] = u[i] - step;
        let minus = reduced_objective(problem, &probe)?;
        probe[i] = u[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Dense matrix of an operator, assembled by applying it to basis vectors.
pub fn dense_matrix(op: &dyn LinearOperator) -> Result<DMatrix<f64>> {
    let (m, n) = (op.nrows(), op.ncols());
    let mut out = DMatrix::zeros(m, n);
    let mut e = DVector::zeros(n);
    for j in 0..n {
        e[j] = 1.0;
        out.set_column(j, &op.apply(&e)?);
        e[j] = 0.0;
    }
    Ok(out)
}

/// Dense reduced Jacobian `Ĝ(u)` assembled column by column through
/// [`ReducedJacobian::apply`]. Refuses instances with more than
/// [`DENSE_ORACLE_LIMIT`] entries.
pub fn dense_jacobian_oracle(
    problem: &dyn ImplicitProblem,
    u: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let dims = problem.dims();
    let entries = dims.n * dims.m;
    if entries > DENSE_ORACLE_LIMIT {
        return Err(Error::OracleSizeLimit {
            entries,
            limit: DENSE_ORACLE_LIMIT,
        });
    }
    let counters = EvalCounters::new();
    let y = problem.solve_state(u)?;
    let jac = ReducedJacobian::new(problem, u.clone(), y, &counters);
    dense_matrix(&jac)
}

/// Largest normalized violation `|⟨Av, w⟩ − ⟨v, Aᵀw⟩| / (1 + |⟨Av, w⟩|)` over
/// `probes` random pairs drawn uniformly from `[-1, 1]`.
pub fn adjoint_probe(op: &dyn LinearOperator, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let v = DVector::from_fn(op.ncols(), |_, _| rng.random_range(-1.0..1.0));
        let w = DVector::from_fn(op.nrows(), |_, _| rng.random_range(-1.0..1.0));
        let av = op.apply(&v).expect("adjoint probe apply");
        let atw = op
            .apply_transpose(&w)
            .expect("adjoint probe apply_transpose");
        let lhs = av.dot(&w);
        let rhs = v.dot(&atw);
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    worst
}
