use icls::elliptic::{
    assemble_elliptic, full_matrices, mesh_triangles, DesiredState, DEFAULT_LAMBDA,
};
use icls::oracle::{adjoint_probe, dense_jacobian_oracle, fd_gradient_oracle, reduced_objective};
use icls::{reduced_gradient, EvalCounters, ImplicitProblem, LinearOperator, ReducedJacobian};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Element integrals by three-point edge-midpoint quadrature, exact for the
/// quadratic products of P1 basis functions.
fn quadrature_element(xy: [(f64, f64); 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let det = (xy[1].0 - xy[0].0) * (xy[2].1 - xy[0].1) - (xy[2].0 - xy[0].0) * (xy[1].1 - xy[0].1);
    let area = det.abs() / 2.0;
    // Barycentric coordinates at the edge midpoints.
    let points = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
    let mut mass = [[0.0; 3]; 3];
    for p in points {
        for a in 0..3 {
            for b in 0..3 {
                mass[a][b] += area / 3.0 * p[a] * p[b];
            }
        }
    }
    // Gradients from solving for the affine basis functions.
    let jac = DMatrix::from_row_slice(
        2,
        2,
        &[
            xy[1].0 - xy[0].0,
            xy[2].0 - xy[0].0,
            xy[1].1 - xy[0].1,
            xy[2].1 - xy[0].1,
        ],
    );
    let inv_t = jac.try_inverse().unwrap().transpose();
    let ref_grads = [(-1.0, -1.0), (1.0, 0.0), (0.0, 1.0)];
    let grads: Vec<DVector<f64>> = ref_grads
        .iter()
        .map(|&(a, b)| &inv_t * DVector::from_vec(vec![a, b]))
        .collect();
    let mut stiff = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            stiff[a][b] = area * grads[a].dot(&grads[b]);
        }
    }
    (stiff, mass)
}

#[test]
fn center_node_matches_quadrature_oracle() {
    let n_mesh = 2;
    let h = 0.5;
    let mut k = 0.0;
    let mut m = 0.0;
    for tri in mesh_triangles(n_mesh) {
        let xy = tri.map(|(i, j)| (i as f64 * h, j as f64 * h));
        let (ke, me) = quadrature_element(xy);
        if let Some(a) = tri.iter().position(|&v| v == (1, 1)) {
            k += ke[a][a];
            m += me[a][a];
        }
    }
    let inst = assemble_elliptic(n_mesh, DEFAULT_LAMBDA, DesiredState::Zero).unwrap();
    assert!((inst.stiffness().get(0, 0) - k).abs() < 1e-14);
    assert!((inst.mass().get(0, 0) - m).abs() < 1e-15);
    assert!((k - 4.0).abs() < 1e-14);
    assert!((m - h * h / 2.0).abs() < 1e-15);
}

#[test]
fn full_matrices_match_quadrature_oracle() {
    let n_mesh = 4;
    let h = 1.0 / n_mesh as f64;
    let nodes = (n_mesh + 1) * (n_mesh + 1);
    let mut k = DMatrix::zeros(nodes, nodes);
    let mut m = DMatrix::zeros(nodes, nodes);
    for tri in mesh_triangles(n_mesh) {
        let (ke, me) = quadrature_element(tri.map(|(i, j)| (i as f64 * h, j as f64 * h)));
        let g = tri.map(|(i, j)| j * (n_mesh + 1) + i);
        for a in 0..3 {
            for b in 0..3 {
                k[(g[a], g[b])] += ke[a][b];
                m[(g[a], g[b])] += me[a][b];
            }
        }
    }
    let (k_full, m_full) = full_matrices(n_mesh);
    assert!((k_full.to_dense() - k).amax() < 1e-13);
    assert!((m_full.to_dense() - m).amax() < 1e-15);
    // ∫ 1 over the unit square.
    assert!((m_full.to_dense().sum() - 1.0).abs() < 1e-14);
}

#[test]
fn interior_stiffness_is_five_point_laplacian() {
    let n_mesh = 6;
    let inst = assemble_elliptic(n_mesh, DEFAULT_LAMBDA, DesiredState::Zero).unwrap();
    let k = inst.stiffness().to_dense();
    let side = n_mesh - 1;
    for j in 0..side {
        for i in 0..side {
            let row = j * side + i;
            for jj in 0..side {
                for ii in 0..side {
                    let col = jj * side + ii;
                    let (di, dj) = (ii as i64 - i as i64, jj as i64 - j as i64);
                    let expected = match (di.abs() + dj.abs(), di, dj) {
                        (0, _, _) => 4.0,
                        (1, _, _) => -1.0,
                        _ => 0.0,
                    };
                    assert!((k[(row, col)] - expected).abs() < 1e-13, "K[{row},{col}]");
                }
            }
        }
    }
}

#[test]
fn stiffness_rows_with_interior_stencil_sum_to_zero() {
    let n_mesh = 7;
    let inst = assemble_elliptic(n_mesh, DEFAULT_LAMBDA, DesiredState::Zero).unwrap();
    let side = n_mesh - 1;
    let ones = DVector::from_element(inst.n(), 1.0);
    let sums = inst.stiffness().mul_vec(&ones);
    for j in 1..side - 1 {
        for i in 1..side - 1 {
            assert!(sums[j * side + i].abs() < 1e-13);
        }
    }
    let (k_full, _) = full_matrices(n_mesh);
    let full_sums = k_full.mul_vec(&DVector::from_element(k_full.nrows(), 1.0));
    assert!(full_sums.amax() < 1e-13);
}

#[test]
fn interior_mass_total_approaches_one() {
    let mut previous = 0.0;
    for n_mesh in [4, 8, 16, 32] {
        let inst = assemble_elliptic(n_mesh, DEFAULT_LAMBDA, DesiredState::Zero).unwrap();
        let ones = DVector::from_element(inst.n(), 1.0);
        let total = ones.dot(&inst.mass().mul_vec(&ones));
        assert!(total > previous && total < 1.0);
        previous = total;
    }
    assert!(previous > 0.8);
}

#[test]
fn mass_factor_reconstructs_mass() {
    let inst = assemble_elliptic(8, DEFAULT_LAMBDA, DesiredState::One).unwrap();
    let l = inst.mass_factor().lower_dense();
    let m = inst.mass().to_dense();
    assert!((&l * l.transpose() - &m).norm() <= 1e-12 * m.norm());
}

#[test]
fn state_solve_round_trip_and_linearity() {
    let inst = assemble_elliptic(6, DEFAULT_LAMBDA, DesiredState::Zero).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y_star = random_vector(inst.n(), &mut rng);
    let u = inst
        .mass()
        .to_dense()
        .lu()
        .solve(&inst.stiffness().mul_vec(&y_star))
        .unwrap();
    let y = inst.solve_state(&u).unwrap();
    assert!((&y - &y_star).amax() < 1e-10);
    assert!(inst.constraint_residual(&y, &u).unwrap().norm() <= inst.feasibility_tolerance(&y, &u));

    let u1 = random_vector(inst.n(), &mut rng);
    let u2 = random_vector(inst.n(), &mut rng);
    let lhs = inst.solve_state(&(&u1 + &u2)).unwrap();
    let rhs = inst.solve_state(&u1).unwrap() + inst.solve_state(&u2).unwrap();
    assert!((lhs - rhs).amax() < 1e-12);
}

#[test]
fn residual_norm_is_the_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for desired in [DesiredState::Zero, DesiredState::One] {
        let inst = assemble_elliptic(5, DEFAULT_LAMBDA, desired).unwrap();
        let y = random_vector(inst.n(), &mut rng);
        let u = random_vector(inst.n(), &mut rng);
        let r = inst.residual(&y, &u).unwrap();
        let m = inst.mass().to_dense();
        let d = &y - inst.desired_state();
        let expected = d.dot(&(&m * &d)) + DEFAULT_LAMBDA * u.dot(&(&m * &u));
        assert!((r.norm_squared() - expected).abs() <= 1e-12 * expected);

        let z = inst.desired_state().clone();
        assert_eq!(
            inst.residual(&z, &DVector::zeros(inst.n())).unwrap().norm(),
            0.0
        );
    }
}

#[test]
fn dense_jacobian_matches_block_formula() {
    let inst = assemble_elliptic(4, DEFAULT_LAMBDA, DesiredState::One).unwrap();
    let n = inst.n();
    let k = inst.stiffness().to_dense();
    let m = inst.mass().to_dense();
    let lt = m.clone().cholesky().unwrap().l().transpose();
    let mut expected = DMatrix::zeros(2 * n, n);
    expected
        .view_mut((0, 0), (n, n))
        .copy_from(&(&lt * k.lu().solve(&m).unwrap()));
    expected
        .view_mut((n, 0), (n, n))
        .copy_from(&(&lt * DEFAULT_LAMBDA.sqrt()));

    let u = DVector::from_element(n, 1.0);
    let dense = dense_jacobian_oracle(&inst, &u).unwrap();
    assert!((&dense - &expected).amax() < 1e-10);
    // Linear constraint: Ĝ does not depend on u.
    let other = dense_jacobian_oracle(&inst, &DVector::from_element(n, -3.0)).unwrap();
    assert!((dense - other).amax() < 1e-14);
}

#[test]
fn gradient_matches_finite_differences() {
    let inst = assemble_elliptic(5, DEFAULT_LAMBDA, DesiredState::One).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = random_vector(inst.n(), &mut rng);
    let counters = EvalCounters::new();
    let y = inst.solve_state(&u).unwrap();
    let r = inst.residual(&y, &u).unwrap();
    let jac = ReducedJacobian::new(&inst, u.clone(), y, &counters);
    let g = reduced_gradient(&jac, &r).unwrap();
    let fd = fd_gradient_oracle(&inst, &u, 1e-5).unwrap();
    assert!((&g - &fd).norm() / (1.0 + fd.norm()) <= 1e-5);
    assert_eq!(counters.snapshot().adjoint_solves, 1);

    // Directional derivative.
    let v = random_vector(inst.n(), &mut rng);
    let t = 1e-5;
    let dd = (reduced_objective(&inst, &(&u + &v * t)).unwrap()
        - reduced_objective(&inst, &(&u - &v * t)).unwrap())
        / (2.0 * t);
    assert!((dd - g.dot(&v)).abs() <= 1e-6 * (1.0 + dd.abs()));
}

#[test]
fn adjoint_identity_holds() {
    for n_mesh in [4, 8] {
        let inst = assemble_elliptic(n_mesh, DEFAULT_LAMBDA, DesiredState::One).unwrap();
        let u = inst.default_initial_control();
        let counters = EvalCounters::new();
        let jac = ReducedJacobian::new(&inst, u.clone(), inst.solve_state(&u).unwrap(), &counters);
        assert!(adjoint_probe(&jac, 20, 11) <= 1e-10);
    }
}

/// ‖R‖ and ĜᵀR do not depend on which square-root factor of M is used.
#[test]
fn residual_frame_is_irrelevant() {
    let inst = assemble_elliptic(4, DEFAULT_LAMBDA, DesiredState::One).unwrap();
    let n = inst.n();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
        .qr()
        .q();
    let u = random_vector(n, &mut rng);
    let y = inst.solve_state(&u).unwrap();
    let r = inst.residual(&y, &u).unwrap();
    let ghat = dense_jacobian_oracle(&inst, &u).unwrap();

    let mut rot = DMatrix::zeros(2 * n, 2 * n);
    rot.view_mut((0, 0), (n, n)).copy_from(&q);
    rot.view_mut((n, n), (n, n)).copy_from(&q);
    let r_rot = &rot * &r;
    let ghat_rot = &rot * &ghat;
    assert!((r_rot.norm() - r.norm()).abs() < 1e-12);
    assert!((ghat_rot.transpose() * r_rot - ghat.transpose() * r).amax() < 1e-12);
}

#[test]
fn jacobian_apply_counts_one_linearized_solve() {
    let inst = assemble_elliptic(4, DEFAULT_LAMBDA, DesiredState::Zero).unwrap();
    let u = inst.default_initial_control();
    let counters = EvalCounters::new();
    let jac = ReducedJacobian::new(&inst, u.clone(), inst.solve_state(&u).unwrap(), &counters);
    jac.apply(&u).unwrap();
    let snap = counters.snapshot();
    assert_eq!(
        (
            snap.linearized_solves,
            snap.adjoint_solves,
            snap.jacobian_applies
        ),
        (1, 0, 1)
    );
}
