//! Small analytic problems with known reduced maps, for tests and examples.

use nalgebra::DVector;

use crate::error::{check_dim, Result};
use crate::operator::{DenseOperator, LinearOperator, ScaledIdentity};
use crate::problem::{ImplicitProblem, Linearization, ProblemDims};

/// Constraint `c(y, u) = y − u` with residual `R(y, u) = (y, offset…)`.
///
/// The reduced residual is `R̂(u) = (u, offset)`, so `Ĝ = [I; 0]` and the
/// reduced gradient is `u`. A non-empty `offset` adds constant residual
/// entries that no control can remove.
#[derive(Clone, Debug)]
pub struct IdentityProblem {
    n: usize,
    offset: DVector<f64>,
}

impl IdentityProblem {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            offset: DVector::zeros(0),
        }
    }

    pub fn with_offset(n: usize, offset: DVector<f64>) -> Self {
        Self { n, offset }
    }
}

struct IdentityLinearization {
    g_u: DenseOperator,
    g_y: DenseOperator,
    c_u: ScaledIdentity,
}

impl Linearization for IdentityLinearization {
    fn g_u(&self) -> &dyn LinearOperator {
        &self.g_u
    }
    fn g_y(&self) -> &dyn LinearOperator {
        &self.g_y
    }
    fn c_u(&self) -> &dyn LinearOperator {
        &self.c_u
    }
    fn solve_c_y(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(rhs.clone())
    }
    fn solve_c_y_transpose(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(rhs.clone())
    }
}

impl ImplicitProblem for IdentityProblem {
    fn dims(&self) -> ProblemDims {
        ProblemDims {
            n: self.n,
            n_y: self.n,
            m: self.n + self.offset.len(),
            p: self.n,
        }
    }

    fn solve_state(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("identity solve_state", self.n, u.len())?;
        Ok(u.clone())
    }

    fn residual(&self, y: &DVector<f64>, _u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("identity residual", self.n, y.len())?;
        let mut r = DVector::zeros(self.n + self.offset.len());
        r.rows_mut(0, self.n).copy_from(y);
        r.rows_mut(self.n, self.offset.len())
            .copy_from(&self.offset);
        Ok(r)
    }

    fn constraint_residual(&self, y: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(y - u)
    }

    fn feasibility_tolerance(&self, _y: &DVector<f64>, _u: &DVector<f64>) -> f64 {
        0.0
    }

    fn linearize<'a>(
        &'a self,
        _y: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Result<Box<dyn Linearization + 'a>> {
        let m = self.dims().m;
        let mut g_y = nalgebra::DMatrix::zeros(m, self.n);
        g_y.view_mut((0, 0), (self.n, self.n)).fill_with_identity();
        Ok(Box::new(IdentityLinearization {
            g_u: DenseOperator(nalgebra::DMatrix::zeros(m, self.n)),
            g_y: DenseOperator(g_y),
            c_u: ScaledIdentity {
                dim: self.n,
                scale: -1.0,
            },
        }))
    }
}
