//! Reduced Jacobian of `u ↦ R(y(u), u)` via linearized and adjoint solves.
//!
//! With `ζ(u)` solving `c_y ζ = −c_u`, the reduced Jacobian is
//! `Ĝ = G_u + G_y ζ`. It is never formed: a forward application costs one
//! linearized solve and a transposed application costs one adjoint solve.

use std::cell::OnceCell;

use nalgebra::DVector;

use crate::counters::EvalCounters;
use crate::error::{check_dim, Result};
use crate::operator::LinearOperator;
use crate::problem::{ImplicitProblem, Linearization};

/// `Ĝ(u)` bound to a feasible point `(u, y(u))`.
///
/// Construction is lazy: the problem is linearized on first use.
pub struct ReducedJacobian<'a> {
    problem: &'a dyn ImplicitProblem,
    u: DVector<f64>,
    y: DVector<f64>,
    counters: &'a EvalCounters,
    linearization: OnceCell<Box<dyn Linearization + 'a>>,
}

impl<'a> ReducedJacobian<'a> {
    pub fn new(
        problem: &'a dyn ImplicitProblem,
        u: DVector<f64>,
        y: DVector<f64>,
        counters: &'a EvalCounters,
    ) -> Self {
        Self {
            problem,
            u,
            y,
            counters,
            linearization: OnceCell::new(),
        }
    }

    pub fn control(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.y
    }

    fn linearization(&self) -> Result<&dyn Linearization> {
        if let Some(lin) = self.linearization.get() {
            return Ok(lin.as_ref());
        }
        let lin = self.problem.linearize(&self.y, &self.u)?;
        Ok(self.linearization.get_or_init(|| lin).as_ref())
    }
}

impl LinearOperator for ReducedJacobian<'_> {
    fn nrows(&self) -> usize {
        self.problem.dims().m
    }

    fn ncols(&self) -> usize {
        self.problem.dims().n
    }

    /// `Ĝ v = G_u v + G_y w` with `c_y w = −c_u v`.
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("reduced Jacobian apply", self.ncols(), v.len())?;
        let lin = self.linearization()?;
        let rhs = -lin.c_u().apply(v)?;
        let w = lin.solve_c_y(&rhs)?;
        self.counters.record_linearized_solve();
        let out = lin.g_u().apply(v)? + lin.g_y().apply(&w)?;
        self.counters.record_jacobian_apply();
        Ok(out)
    }

    /// `Ĝᵀ w = G_uᵀ w − c_uᵀ q` with `c_yᵀ q = G_yᵀ w`.
    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("reduced Jacobian apply_transpose", self.nrows(), w.len())?;
        let lin = self.linearization()?;
        let rhs = lin.g_y().apply_transpose(w)?;
        let q = lin.solve_c_y_transpose(&rhs)?;
        self.counters.record_adjoint_solve();
        let out = lin.g_u().apply_transpose(w)? - lin.c_u().apply_transpose(&q)?;
        self.counters.record_jacobian_apply();
        Ok(out)
    }
}

/// Gradient of the reduced objective, `Ĝᵀ R`, from one adjoint solve.
///
/// `residual` must be `R(y(u), u)` at the Jacobian's base point.
pub fn reduced_gradient(
    jacobian: &ReducedJacobian<'_>,
    residual: &DVector<f64>,
) -> Result<DVector<f64>> {
    jacobian.apply_transpose(residual)
}

/// Gauss-Newton matrix `ĜᵀĜ`, applied as two Jacobian products.
pub struct GaussNewtonOperator<'j, 'a> {
    pub jacobian: &'j ReducedJacobian<'a>,
}

impl LinearOperator for GaussNewtonOperator<'_, '_> {
    fn nrows(&self) -> usize {
        self.jacobian.ncols()
    }

    fn ncols(&self) -> usize {
        self.jacobian.ncols()
    }

    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let jv = self.jacobian.apply(v)?;
        self.jacobian.apply_transpose(&jv)
    }

    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::IdentityProblem;

    fn jacobian_at<'a>(
        p: &'a IdentityProblem,
        counters: &'a EvalCounters,
        u: DVector<f64>,
    ) -> ReducedJacobian<'a> {
        let y = p.solve_state(&u).unwrap();
        ReducedJacobian::new(p, u, y, counters)
    }

    #[test]
    fn identity_problem_has_identity_jacobian() {
        let p = IdentityProblem::new(4);
        let counters = EvalCounters::new();
        let jac = jacobian_at(&p, &counters, DVector::from_element(4, 0.3));
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        assert_eq!(jac.apply(&v).unwrap(), v);
        assert_eq!(jac.apply_transpose(&v).unwrap(), v);
    }

    #[test]
    fn zero_direction_maps_to_zero() {
        let p = IdentityProblem::new(3);
        let counters = EvalCounters::new();
        let jac = jacobian_at(&p, &counters, DVector::from_element(3, 1.0));
        assert_eq!(jac.apply(&DVector::zeros(3)).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn construction_is_lazy_and_each_application_counts_one_solve() {
        let p = IdentityProblem::new(2);
        let counters = EvalCounters::new();
        let jac = jacobian_at(&p, &counters, DVector::zeros(2));
        assert_eq!(counters.snapshot(), Default::default());

        jac.apply(&DVector::from_element(2, 1.0)).unwrap();
        let c = counters.snapshot();
        assert_eq!(
            (c.linearized_solves, c.adjoint_solves, c.jacobian_applies),
            (1, 0, 1)
        );

        jac.apply_transpose(&DVector::from_element(2, 1.0)).unwrap();
        let c = counters.snapshot();
        assert_eq!(
            (c.linearized_solves, c.adjoint_solves, c.jacobian_applies),
            (1, 1, 2)
        );

        let gn = GaussNewtonOperator { jacobian: &jac };
        gn.apply(&DVector::from_element(2, 1.0)).unwrap();
        assert_eq!(counters.snapshot().jacobian_applies, 4);
    }

    #[test]
    fn gradient_of_zero_residual_is_zero() {
        let p = IdentityProblem::new(3);
        let counters = EvalCounters::new();
        let jac = jacobian_at(&p, &counters, DVector::zeros(3));
        let g = reduced_gradient(&jac, &DVector::zeros(3)).unwrap();
        assert_eq!(g, DVector::zeros(3));
    }

    #[test]
    fn offset_residual_has_zero_gradient_block() {
        let p = IdentityProblem::with_offset(2, DVector::from_vec(vec![5.0]));
        let counters = EvalCounters::new();
        let u = DVector::from_vec(vec![1.0, 2.0]);
        let jac = jacobian_at(&p, &counters, u.clone());
        let r = p.residual(jac.state(), &u).unwrap();
        assert_eq!(reduced_gradient(&jac, &r).unwrap(), u);
    }
}
