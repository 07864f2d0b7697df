//! Optimal control of the viscous Burgers equation.
//!
//! Backward Euler in time and P1 elements in space on `[0, 1]`, with the
//! homogeneous boundary values already eliminated. Each time step solves
//!
//! ```text
//! (1/δt) M (y_{i+1} − y_i) + ½ B (y_{i+1} ⊙ y_{i+1}) + ν C y_{i+1} − f − M u_{i+1} = 0
//! ```
//!
//! by Newton's method. The state trajectory includes `y_0`, pinned by the
//! extra constraint `y_0 − ŷ_0 = 0` so that `c_y` is square and block lower
//! bidiagonal.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{BandCholesky, CsrMatrix};
use crate::operator::{FactorBlockOperator, LinearOperator};
use crate::problem::{ImplicitProblem, Linearization, ProblemDims};

pub const DEFAULT_OMEGA: f64 = 0.05;
pub const DEFAULT_NEWTON_TOL: f64 = 1e-12;
pub const DEFAULT_NEWTON_MAX_ITER: usize = 25;

type DenseLu = LU<f64, Dyn, Dyn>;

#[derive(Clone, Debug)]
pub struct BurgersInstance {
    nx: usize,
    nt: usize,
    nu: f64,
    omega: f64,
    h: f64,
    dt: f64,
    mass: CsrMatrix,
    convection: CsrMatrix,
    diffusion: CsrMatrix,
    mass_factor: BandCholesky,
    f: DVector<f64>,
    y0: DVector<f64>,
    z: DVector<f64>,
    newton_tol: f64,
    newton_max_iter: usize,
}

/// Assembles the benchmark with `L = T = 1`, `f = 0` and
/// `y_0 = z = (1, …, 1, 0, …, 0)` carrying `⌊Nx/2⌋` ones.
///
/// Odd `Nx ≥ 3` is accepted so that tiny instances can be checked densely.
pub fn assemble_burgers(nx: usize, nt: usize, nu: f64, omega: f64) -> Result<BurgersInstance> {
    if nx < 3 || nt < 2 {
        return Err(Error::InvalidProblem(format!(
            "Burgers needs Nx >= 3 and Nt >= 2, got Nx = {nx}, Nt = {nt}"
        )));
    }
    if !(nu > 0.0 && nu.is_finite()) || !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "viscosity and control weight must be positive, got nu = {nu}, omega = {omega}"
        )));
    }
    let h = 1.0 / nx as f64;
    let dt = 1.0 / nt as f64;
    let mass = CsrMatrix::tridiagonal(nx, h / 6.0, 4.0 * h / 6.0, h / 6.0);
    let convection = CsrMatrix::tridiagonal(nx, -0.5, 0.0, 0.5);
    let diffusion = CsrMatrix::tridiagonal(nx, -1.0 / h, 2.0 / h, -1.0 / h);
    let mass_factor = BandCholesky::factor(&mass)?;
    let y0 = DVector::from_fn(nx, |i, _| if i < nx / 2 { 1.0 } else { 0.0 });
    Ok(BurgersInstance {
        nx,
        nt,
        nu,
        omega,
        h,
        dt,
        mass,
        convection,
        diffusion,
        mass_factor,
        f: DVector::zeros(nx),
        z: y0.clone(),
        y0,
        newton_tol: DEFAULT_NEWTON_TOL,
        newton_max_iter: DEFAULT_NEWTON_MAX_ITER,
    })
}

impl BurgersInstance {
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }
    pub fn convection(&self) -> &CsrMatrix {
        &self.convection
    }
    pub fn diffusion(&self) -> &CsrMatrix {
        &self.diffusion
    }
    pub fn mass_factor(&self) -> &BandCholesky {
        &self.mass_factor
    }
    pub fn initial_state(&self) -> &DVector<f64> {
        &self.y0
    }
    pub fn desired_state(&self) -> &DVector<f64> {
        &self.z
    }
    pub fn newton_tol(&self) -> f64 {
        self.newton_tol
    }

    pub fn with_initial_state(mut self, y0: DVector<f64>) -> Result<Self> {
        check_dim("Burgers initial state", self.nx, y0.len())?;
        self.y0 = y0;
        Ok(self)
    }

    pub fn with_newton(mut self, tol: f64, max_iter: usize) -> Result<Self> {
        if !(tol > 0.0) || max_iter == 0 {
            return Err(Error::InvalidProblem(format!(
                "bad Newton settings: tol = {tol}, max_iter = {max_iter}"
            )));
        }
        self.newton_tol = tol;
        self.newton_max_iter = max_iter;
        Ok(self)
    }

    /// Length of a trajectory vector, `(Nt + 1) Nx`.
    pub fn trajectory_len(&self) -> usize {
        (self.nt + 1) * self.nx
    }

    /// Initial control used by the reference experiments: zero.
    pub fn default_initial_control(&self) -> DVector<f64> {
        DVector::zeros(self.trajectory_len())
    }

    /// Block `i` of a trajectory vector.
    pub fn block(&self, v: &DVector<f64>, i: usize) -> DVector<f64> {
        v.rows(i * self.nx, self.nx).clone_owned()
    }

    /// `c_{i+1}(y_prev, y_next, u_next)`.
    pub fn step_residual(
        &self,
        y_prev: &DVector<f64>,
        y_next: &DVector<f64>,
        u_next: &DVector<f64>,
    ) -> DVector<f64> {
        let sq = y_next.component_mul(y_next);
        self.mass.mul_vec(&(y_next - y_prev)) / self.dt
            + self.convection.mul_vec(&sq) * 0.5
            + self.diffusion.mul_vec(y_next) * self.nu
            - &self.f
            - self.mass.mul_vec(u_next)
    }

    /// `A(y) = (1/δt) M + B diag(y) + ν C`, the derivative of the step
    /// residual in `y_next`.
    pub fn step_jacobian(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut a = self.mass.to_dense() / self.dt + self.diffusion.to_dense() * self.nu;
        for (i, (j, b)) in (0..self.nx).flat_map(|i| self.convection.row(i).map(move |e| (i, e))) {
            a[(i, j)] += b * y[j];
        }
        a
    }

    fn newton_step(
        &self,
        step: usize,
        y_prev: &DVector<f64>,
        u_next: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let mut y = y_prev.clone();
        let mut c = self.step_residual(y_prev, &y, u_next);
        let mut iterations = 0;
        while c.norm() > self.newton_tol {
            if iterations == self.newton_max_iter || !c.norm().is_finite() {
                return Err(Error::NewtonFailure {
                    step,
                    iterations,
                    residual: c.norm(),
                });
            }
            let delta =
                self.step_jacobian(&y)
                    .lu()
                    .solve(&c)
                    .ok_or_else(|| Error::NewtonFailure {
                        step,
                        iterations,
                        residual: c.norm(),
                    })?;
            y -= delta;
            c = self.step_residual(y_prev, &y, u_next);
            iterations += 1;
        }
        Ok(y)
    }
}

/// `c_u`: constraint block `i ≥ 1` receives `−M u_i`; `u_0` enters no
/// constraint.
struct ControlCoupling<'a> {
    mass: &'a CsrMatrix,
    nt: usize,
}

impl LinearOperator for ControlCoupling<'_> {
    fn nrows(&self) -> usize {
        (self.nt + 1) * self.mass.nrows()
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("Burgers c_u apply", self.ncols(), v.len())?;
        let nx = self.mass.nrows();
        let mut out = DVector::zeros(self.nrows());
        for i in 1..=self.nt {
            let piece = self.mass.mul_vec(&v.rows(i * nx, nx).clone_owned());
            out.rows_mut(i * nx, nx).copy_from(&(-piece));
        }
        Ok(out)
    }
    // M is symmetric.
    fn apply_transpose(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(w)
    }
}

struct BurgersLinearization<'a> {
    inst: &'a BurgersInstance,
    g_u: FactorBlockOperator<'a>,
    g_y: FactorBlockOperator<'a>,
    c_u: ControlCoupling<'a>,
    // diagonal blocks A_1..A_Nt and their transposes
    blocks: Vec<DenseLu>,
    blocks_t: Vec<DenseLu>,
}

impl BurgersLinearization<'_> {
    fn solve_block(lu: &DenseLu, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        lu.solve(rhs)
            .ok_or_else(|| Error::LinearSolve("singular Burgers time-step block".into()))
    }
}

impl Linearization for BurgersLinearization<'_> {
    fn g_u(&self) -> &dyn LinearOperator {
        &self.g_u
    }
    fn g_y(&self) -> &dyn LinearOperator {
        &self.g_y
    }
    fn c_u(&self) -> &dyn LinearOperator {
        &self.c_u
    }

    /// Forward block substitution.
    fn solve_c_y(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let inst = self.inst;
        let nx = inst.nx;
        check_dim("Burgers c_y solve", inst.trajectory_len(), rhs.len())?;
        let mut w = DVector::zeros(rhs.len());
        w.rows_mut(0, nx).copy_from(&rhs.rows(0, nx));
        for i in 0..inst.nt {
            let coupling = inst.mass.mul_vec(&w.rows(i * nx, nx).clone_owned()) / inst.dt;
            let b = rhs.rows((i + 1) * nx, nx) + coupling;
            let next = Self::solve_block(&self.blocks[i], &b)?;
            w.rows_mut((i + 1) * nx, nx).copy_from(&next);
        }
        Ok(w)
    }

    /// Backward block substitution.
    fn solve_c_y_transpose(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let inst = self.inst;
        let (nx, nt) = (inst.nx, inst.nt);
        check_dim(
            "Burgers c_y transpose solve",
            inst.trajectory_len(),
            rhs.len(),
        )?;
        let mut q = DVector::zeros(rhs.len());
        let mut carry = DVector::zeros(nx);
        for i in (1..=nt).rev() {
            let b = rhs.rows(i * nx, nx) + &carry;
            let qi = Self::solve_block(&self.blocks_t[i - 1], &b)?;
            carry = inst.mass.mul_vec(&qi) / inst.dt;
            q.rows_mut(i * nx, nx).copy_from(&qi);
        }
        let q0 = rhs.rows(0, nx) + carry;
        q.rows_mut(0, nx).copy_from(&q0);
        Ok(q)
    }
}

impl ImplicitProblem for BurgersInstance {
    fn dims(&self) -> ProblemDims {
        let n = self.trajectory_len();
        ProblemDims {
            n,
            n_y: n,
            m: 2 * n,
            p: n,
        }
    }

    /// Time stepping from `y_0`; each step is a Newton solve warm-started at
    /// the previous state.
    fn solve_state(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("Burgers solve_state", self.trajectory_len(), u.len())?;
        let nx = self.nx;
        let mut y = DVector::zeros(self.trajectory_len());
        y.rows_mut(0, nx).copy_from(&self.y0);
        for i in 0..self.nt {
            let prev = self.block(&y, i);
            let next = self.newton_step(i + 1, &prev, &self.block(u, i + 1))?;
            y.rows_mut((i + 1) * nx, nx).copy_from(&next);
        }
        Ok(y)
    }

    fn residual(&self, y: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("Burgers residual (state)", self.trajectory_len(), y.len())?;
        check_dim("Burgers residual (control)", self.trajectory_len(), u.len())?;
        let mut shifted = y.clone();
        for i in 0..=self.nt {
            let mut block = shifted.rows_mut(i * self.nx, self.nx);
            block -= &self.z;
        }
        Ok(self.g_y().apply(&shifted)? + self.g_u().apply(u)?)
    }

    fn constraint_residual(&self, y: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("Burgers constraint (state)", self.trajectory_len(), y.len())?;
        check_dim(
            "Burgers constraint (control)",
            self.trajectory_len(),
            u.len(),
        )?;
        let nx = self.nx;
        let mut c = DVector::zeros(self.trajectory_len());
        c.rows_mut(0, nx).copy_from(&(self.block(y, 0) - &self.y0));
        for i in 0..self.nt {
            let ci = self.step_residual(
                &self.block(y, i),
                &self.block(y, i + 1),
                &self.block(u, i + 1),
            );
            c.rows_mut((i + 1) * nx, nx).copy_from(&ci);
        }
        Ok(c)
    }

    /// Per-step Newton tolerance accumulated over the `Nt` steps.
    fn feasibility_tolerance(&self, _y: &DVector<f64>, _u: &DVector<f64>) -> f64 {
        self.newton_tol * (self.nt as f64).sqrt()
    }

    fn linearize<'a>(
        &'a self,
        y: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Result<Box<dyn Linearization + 'a>> {
        check_dim("Burgers linearize", self.trajectory_len(), y.len())?;
        let mut blocks = Vec::with_capacity(self.nt);
        let mut blocks_t = Vec::with_capacity(self.nt);
        for i in 1..=self.nt {
            let a = self.step_jacobian(&self.block(y, i));
            blocks_t.push(a.transpose().lu());
            blocks.push(a.lu());
        }
        Ok(Box::new(BurgersLinearization {
            inst: self,
            g_u: self.g_u(),
            g_y: self.g_y(),
            c_u: ControlCoupling {
                mass: &self.mass,
                nt: self.nt,
            },
            blocks,
            blocks_t,
        }))
    }
}

impl BurgersInstance {
    fn g_y(&self) -> FactorBlockOperator<'_> {
        FactorBlockOperator {
            factor: &self.mass_factor,
            scale: self.dt.sqrt(),
            blocks: self.nt + 1,
            first_output_block: 0,
            output_blocks: 2 * (self.nt + 1),
        }
    }

    fn g_u(&self) -> FactorBlockOperator<'_> {
        FactorBlockOperator {
            factor: &self.mass_factor,
            scale: (self.omega * self.dt).sqrt(),
            blocks: self.nt + 1,
            first_output_block: self.nt + 1,
            output_blocks: 2 * (self.nt + 1),
        }
    }
}
