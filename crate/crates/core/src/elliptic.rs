//! Linear elliptic optimal control on the unit square.
//!
//! Minimize `½(y − z)ᵀM(y − z) + (λ/2) uᵀMu` subject to `K y = M u + f`,
//! where `K` and `M` are the P1 stiffness and mass matrices on a uniform
//! right-triangle mesh with homogeneous Dirichlet data eliminated. The
//! residual is `R = [Lᵀ(y − z); √λ Lᵀu]` with `M = L Lᵀ`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{BandCholesky, CsrMatrix};
use crate::operator::{FactorBlockOperator, LinearOperator, SparseOperator};
use crate::problem::{ImplicitProblem, Linearization, ProblemDims};

/// Regularization weight used in the reference experiments.
pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// Desired state `z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesiredState {
    /// `z = 0`: the problem has a zero-residual solution at `u = 0`.
    Zero,
    /// `z = 1`: a large-residual problem.
    One,
}

#[derive(Clone, Debug)]
pub struct EllipticInstance {
    n_mesh: usize,
    lambda: f64,
    desired: DesiredState,
    stiffness: CsrMatrix,
    mass: CsrMatrix,
    stiffness_factor: BandCholesky,
    mass_factor: BandCholesky,
    z: DVector<f64>,
    f: DVector<f64>,
}

/// Vertex coordinates of the two triangles of cell `(i, j)`, split along the
/// diagonal from `(i, j)` to `(i + 1, j + 1)`.
fn cell_triangles(i: usize, j: usize) -> [[(usize, usize); 3]; 2] {
    [
        [(i, j), (i + 1, j), (i + 1, j + 1)],
        [(i, j), (i + 1, j + 1), (i, j + 1)],
    ]
}

/// Every triangle of the mesh as vertex index pairs `(i, j)`.
pub fn mesh_triangles(n_mesh: usize) -> Vec<[(usize, usize); 3]> {
    (0..n_mesh)
        .flat_map(|j| (0..n_mesh).flat_map(move |i| cell_triangles(i, j)))
        .collect()
}

/// Stiffness and mass matrices over all `(N + 1)²` mesh nodes (no boundary
/// elimination), node `(i, j)` at index `j (N + 1) + i`.
pub fn full_matrices(n_mesh: usize) -> (CsrMatrix, CsrMatrix) {
    let h = 1.0 / n_mesh as f64;
    let nodes = (n_mesh + 1) * (n_mesh + 1);
    let global = |(i, j): (usize, usize)| j * (n_mesh + 1) + i;
    let mut k_trip = Vec::new();
    let mut m_trip = Vec::new();
    for tri in mesh_triangles(n_mesh) {
        let xy: Vec<(f64, f64)> = tri
            .iter()
            .map(|&(i, j)| (i as f64 * h, j as f64 * h))
            .collect();
        let det =
            (xy[1].0 - xy[0].0) * (xy[2].1 - xy[0].1) - (xy[2].0 - xy[0].0) * (xy[1].1 - xy[0].1);
        let area = 0.5 * det.abs();
        // ∇φ_k = (b_k, c_k) / (2A)
        let b: Vec<f64> = (0..3)
            .map(|k| xy[(k + 1) % 3].1 - xy[(k + 2) % 3].1)
            .collect();
        let c: Vec<f64> = (0..3)
            .map(|k| xy[(k + 2) % 3].0 - xy[(k + 1) % 3].0)
            .collect();
        for a in 0..3 {
            for e in 0..3 {
                let (ga, ge) = (global(tri[a]), global(tri[e]));
                k_trip.push((ga, ge, (b[a] * b[e] + c[a] * c[e]) / (4.0 * area)));
                let mass = if a == e { area / 6.0 } else { area / 12.0 };
                m_trip.push((ga, ge, mass));
            }
        }
    }
    (
        CsrMatrix::from_triplets(nodes, nodes, &k_trip),
        CsrMatrix::from_triplets(nodes, nodes, &m_trip),
    )
}

/// Restricts a full-node matrix to interior nodes, ordered `(j − 1)(N − 1) + (i − 1)`.
fn restrict_to_interior(full: &CsrMatrix, n_mesh: usize) -> CsrMatrix {
    let interior = |g: usize| {
        let (i, j) = (g % (n_mesh + 1), g / (n_mesh + 1));
        (1..n_mesh).contains(&i) && (1..n_mesh).contains(&j)
    };
    let local = |g: usize| {
        let (i, j) = (g % (n_mesh + 1), g / (n_mesh + 1));
        (j - 1) * (n_mesh - 1) + (i - 1)
    };
    let n = (n_mesh - 1) * (n_mesh - 1);
    let mut trip = Vec::new();
    for g in (0..full.nrows()).filter(|&g| interior(g)) {
        for (h, v) in full.row(g).filter(|&(h, _)| interior(h)) {
            trip.push((local(g), local(h), v));
        }
    }
    CsrMatrix::from_triplets(n, n, &trip)
}

/// Assembles the elliptic benchmark on an `N × N` cell mesh (`N ≥ 2`).
pub fn assemble_elliptic(
    n_mesh: usize,
    lambda: f64,
    desired: DesiredState,
) -> Result<EllipticInstance> {
    if n_mesh < 2 {
        return Err(Error::InvalidProblem(format!(
            "mesh needs at least 2 subdivisions, got {n_mesh}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let (k_full, m_full) = full_matrices(n_mesh);
    let stiffness = restrict_to_interior(&k_full, n_mesh);
    let mass = restrict_to_interior(&m_full, n_mesh);
    let stiffness_factor = BandCholesky::factor(&stiffness)?;
    let mass_factor = BandCholesky::factor(&mass)?;
    let n = stiffness.nrows();
    let z = match desired {
        DesiredState::Zero => DVector::zeros(n),
        DesiredState::One => DVector::from_element(n, 1.0),
    };
    Ok(EllipticInstance {
        n_mesh,
        lambda,
        desired,
        stiffness,
        mass,
        stiffness_factor,
        mass_factor,
        z,
        f: DVector::zeros(n),
    })
}

impl EllipticInstance {
    pub fn n_mesh(&self) -> usize {
        self.n_mesh
    }

    /// Number of interior nodes, `(N − 1)²`.
    pub fn n(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn desired(&self) -> DesiredState {
        self.desired
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Cholesky factor `L` with `M = L Lᵀ`.
    pub fn mass_factor(&self) -> &BandCholesky {
        &self.mass_factor
    }

    pub fn desired_state(&self) -> &DVector<f64> {
        &self.z
    }

    /// Initial control used by the reference experiments: all ones.
    pub fn default_initial_control(&self) -> DVector<f64> {
        DVector::from_element(self.n(), 1.0)
    }

    fn g_y(&self) -> FactorBlockOperator<'_> {
        FactorBlockOperator {
            factor: &self.mass_factor,
            scale: 1.0,
            blocks: 1,
            first_output_block: 0,
            output_blocks: 2,
        }
    }

    fn g_u(&self) -> FactorBlockOperator<'_> {
        FactorBlockOperator {
            factor: &self.mass_factor,
            scale: self.lambda.sqrt(),
            blocks: 1,
            first_output_block: 1,
            output_blocks: 2,
        }
    }
}

struct EllipticLinearization<'a> {
    stiffness_factor: &'a BandCholesky,
    g_u: FactorBlockOperator<'a>,
    g_y: FactorBlockOperator<'a>,
    c_u: SparseOperator<'a>,
}

impl Linearization for EllipticLinearization<'_> {
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
        check_dim("elliptic c_y solve", self.stiffness_factor.dim(), rhs.len())?;
        Ok(self.stiffness_factor.solve(rhs))
    }
    // K is symmetric, so c_yᵀ = c_y.
    fn solve_c_y_transpose(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.solve_c_y(rhs)
    }
}

impl ImplicitProblem for EllipticInstance {
    fn dims(&self) -> ProblemDims {
        let n = self.n();
        ProblemDims {
            n,
            n_y: n,
            m: 2 * n,
            p: n,
        }
    }

    /// `y = K⁻¹(M u + f)` with the cached Cholesky factor of `K`.
    fn solve_state(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("elliptic solve_state", self.n(), u.len())?;
        Ok(self
            .stiffness_factor
            .solve(&(self.mass.mul_vec(u) + &self.f)))
    }

    fn residual(&self, y: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("elliptic residual (state)", self.n(), y.len())?;
        check_dim("elliptic residual (control)", self.n(), u.len())?;
        Ok(self.g_y().apply(&(y - &self.z))? + self.g_u().apply(u)?)
    }

    fn constraint_residual(&self, y: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("elliptic constraint (state)", self.n(), y.len())?;
        check_dim("elliptic constraint (control)", self.n(), u.len())?;
        Ok(self.stiffness.mul_vec(y) - self.mass.mul_vec(u) - &self.f)
    }

    fn feasibility_tolerance(&self, y: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let scale =
            self.stiffness.norm_inf() * y.norm() + self.mass.norm_inf() * u.norm() + self.f.norm();
        1e-12 * scale.max(f64::MIN_POSITIVE)
    }

    fn linearize<'a>(
        &'a self,
        _y: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Result<Box<dyn Linearization + 'a>> {
        Ok(Box::new(EllipticLinearization {
            stiffness_factor: &self.stiffness_factor,
            g_u: self.g_u(),
            g_y: self.g_y(),
            c_u: SparseOperator {
                matrix: &self.mass,
                scale: -1.0,
            },
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_interior_node() {
        let inst = assemble_elliptic(2, DEFAULT_LAMBDA, DesiredState::Zero).unwrap();
        assert_eq!(inst.n(), 1);
        assert!((inst.stiffness().get(0, 0) - 4.0).abs() < 1e-14);
        // h²/2 with h = 1/2
        assert!((inst.mass().get(0, 0) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(assemble_elliptic(1, 1e-3, DesiredState::Zero).is_err());
        assert!(assemble_elliptic(4, 0.0, DesiredState::Zero).is_err());
    }

    #[test]
    fn matrices_are_symmetric() {
        let inst = assemble_elliptic(6, DEFAULT_LAMBDA, DesiredState::One).unwrap();
        assert!(inst.stiffness().is_symmetric(1e-14));
        assert!(inst.mass().is_symmetric(1e-16));
    }

    #[test]
    fn zero_control_gives_zero_state() {
        let inst = assemble_elliptic(5, DEFAULT_LAMBDA, DesiredState::Zero).unwrap();
        let y = inst.solve_state(&DVector::zeros(inst.n())).unwrap();
        assert_eq!(y, DVector::zeros(inst.n()));
        let r = inst.residual(&y, &DVector::zeros(inst.n())).unwrap();
        assert_eq!(r.norm(), 0.0);
    }
}
