//! Matrix-free linear operators.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result};
use crate::linalg::{BandCholesky, CsrMatrix};

/// A linear map `ℝ^ncols → ℝ^nrows` known only through its action and the
/// action of its transpose.
///
/// Applications are fallible because some operators (the reduced Jacobian)
/// perform linear solves internally.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>>;
    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>>;
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn nrows(&self) -> usize {
        (**self).nrows()
    }
    fn ncols(&self) -> usize {
        (**self).ncols()
    }
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).apply(v)
    }
    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).apply_transpose(w)
    }
}

/// Explicit dense matrix as an operator. Used for small instances and tests.
#[derive(Clone, Debug)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("dense apply", self.0.ncols(), v.len())?;
        Ok(&self.0 * v)
    }
    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("dense apply_transpose", self.0.nrows(), w.len())?;
        Ok(self.0.tr_mul(w))
    }
}

/// Zero map on `ℝⁿ`.
#[derive(Clone, Copy, Debug)]
pub struct ZeroOperator(pub usize);

impl LinearOperator for ZeroOperator {
    fn nrows(&self) -> usize {
        self.0
    }
    fn ncols(&self) -> usize {
        self.0
    }
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("zero apply", self.0, v.len())?;
        Ok(DVector::zeros(self.0))
    }
    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(w)
    }
}

/// Identity scaled by a constant.
#[derive(Clone, Copy, Debug)]
pub struct ScaledIdentity {
    pub dim: usize,
    pub scale: f64,
}

impl LinearOperator for ScaledIdentity {
    fn nrows(&self) -> usize {
        self.dim
    }
    fn ncols(&self) -> usize {
        self.dim
    }
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("identity apply", self.dim, v.len())?;
        Ok(v * self.scale)
    }
    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(w)
    }
}

/// `scale · A` for a sparse matrix `A`.
#[derive(Clone, Copy, Debug)]
pub struct SparseOperator<'a> {
    pub matrix: &'a CsrMatrix,
    pub scale: f64,
}

impl LinearOperator for SparseOperator<'_> {
    fn nrows(&self) -> usize {
        self.matrix.nrows()
    }
    fn ncols(&self) -> usize {
        self.matrix.ncols()
    }
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("sparse apply", self.matrix.ncols(), v.len())?;
        Ok(self.matrix.mul_vec(v) * self.scale)
    }
    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("sparse apply_transpose", self.matrix.nrows(), w.len())?;
        Ok(self.matrix.mul_transpose_vec(w) * self.scale)
    }
}

/// Block operator built from a transposed Cholesky factor `Lᵀ`.
///
/// The input is split into `blocks` consecutive pieces of size `L.dim()`;
/// piece `i` is mapped to `scale · Lᵀ vᵢ` and written at output block
/// `first_output_block + i` of a vector with `output_blocks` blocks. This is
/// the shape of both residual Jacobians `G_y` and `G_u` in the benchmarks,
/// where `Lᵀ` plays the role of `M^{1/2}`.
#[derive(Clone, Copy, Debug)]
pub struct FactorBlockOperator<'a> {
    pub factor: &'a BandCholesky,
    pub scale: f64,
    pub blocks: usize,
    pub first_output_block: usize,
    pub output_blocks: usize,
}

impl FactorBlockOperator<'_> {
    fn block(&self) -> usize {
        self.factor.dim()
    }
}

impl LinearOperator for FactorBlockOperator<'_> {
    fn nrows(&self) -> usize {
        self.output_blocks * self.block()
    }
    fn ncols(&self) -> usize {
        self.blocks * self.block()
    }
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("factor block apply", self.ncols(), v.len())?;
        let b = self.block();
        let mut out = DVector::zeros(self.nrows());
        for i in 0..self.blocks {
            let piece = v.rows(i * b, b).clone_owned();
            let image = self.factor.lower_transpose_mul(&piece) * self.scale;
            out.rows_mut((self.first_output_block + i) * b, b)
                .copy_from(&image);
        }
        Ok(out)
    }
    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("factor block apply_transpose", self.nrows(), w.len())?;
        let b = self.block();
        let mut out = DVector::zeros(self.ncols());
        for i in 0..self.blocks {
            let piece = w.rows((self.first_output_block + i) * b, b).clone_owned();
            let image = self.factor.lower_mul(&piece) * self.scale;
            out.rows_mut(i * b, b).copy_from(&image);
        }
        Ok(out)
    }
}
