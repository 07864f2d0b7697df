use icls::burgers::{assemble_burgers, BurgersInstance, DEFAULT_OMEGA};
use icls::oracle::{adjoint_probe, dense_jacobian_oracle, fd_gradient_oracle, reduced_objective};
use icls::{reduced_gradient, EvalCounters, ImplicitProblem, ReducedJacobian};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vector(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

fn at(v: &DVector<f64>, i: isize) -> f64 {
    if i < 0 || i as usize >= v.len() {
        0.0
    } else {
        v[i as usize]
    }
}

/// The step residual written out entry by entry from the three stencils.
fn expanded_step_residual(
    inst: &BurgersInstance,
    yp: &DVector<f64>,
    y: &DVector<f64>,
    u: &DVector<f64>,
) -> DVector<f64> {
    let (h, dt, nu) = (inst.h(), inst.dt(), inst.nu());
    DVector::from_fn(y.len(), |i, _| {
        let i = i as isize;
        let d = |k| at(y, k) - at(yp, k);
        let mass_d = h / 6.0 * (d(i - 1) + 4.0 * d(i) + d(i + 1));
        let conv = 0.5 * (-0.5 * at(y, i - 1).powi(2) + 0.5 * at(y, i + 1).powi(2));
        let diff = (-at(y, i - 1) + 2.0 * at(y, i) - at(y, i + 1)) / h;
        let mass_u = h / 6.0 * (at(u, i - 1) + 4.0 * at(u, i) + at(u, i + 1));
        mass_d / dt + conv + nu * diff - mass_u
    })
}

#[test]
fn step_residual_matches_expanded_oracle() {
    let inst = assemble_burgers(4, 5, 0.1, DEFAULT_OMEGA).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let yp = random_vector(4, 2.0, &mut rng);
        let y = random_vector(4, 2.0, &mut rng);
        let u = random_vector(4, 2.0, &mut rng);
        let got = inst.step_residual(&yp, &y, &u);
        let want = expanded_step_residual(&inst, &yp, &y, &u);
        assert!((got - &want).amax() <= 1e-14 * (1.0 + want.amax()));
    }
}

#[test]
fn step_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for nx in [4, 8] {
        let inst = assemble_burgers(nx, 4, 0.01, DEFAULT_OMEGA).unwrap();
        let yp = random_vector(nx, 1.0, &mut rng);
        let y = random_vector(nx, 1.0, &mut rng);
        let u = random_vector(nx, 1.0, &mut rng);
        let a = inst.step_jacobian(&y);
        let t = 1e-6;
        let mut fd = DMatrix::zeros(nx, nx);
        for j in 0..nx {
            let mut e = DVector::zeros(nx);
            e[j] = t;
            let col = (inst.step_residual(&yp, &(&y + &e), &u)
                - inst.step_residual(&yp, &(&y - &e), &u))
                / (2.0 * t);
            fd.set_column(j, &col);
        }
        assert!((&a - &fd).norm() <= 1e-6 * a.norm());
    }
}

#[test]
fn newton_recovers_manufactured_trajectory() {
    let (nx, nt) = (6, 5);
    let base = assemble_burgers(nx, nt, 0.1, DEFAULT_OMEGA).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y_star = random_vector((nt + 1) * nx, 1.0, &mut rng);
    let inst = base
        .with_initial_state(y_star.rows(0, nx).clone_owned())
        .unwrap();
    let m_lu = inst.mass().to_dense().lu();
    let mut u = DVector::zeros((nt + 1) * nx);
    for i in 0..nt {
        let yp = inst.block(&y_star, i);
        let y = inst.block(&y_star, i + 1);
        let gap = inst.step_residual(&yp, &y, &DVector::zeros(nx));
        u.rows_mut((i + 1) * nx, nx)
            .copy_from(&m_lu.solve(&gap).unwrap());
    }
    let y = inst.solve_state(&u).unwrap();
    assert!((&y - &y_star).amax() < 1e-10);
    let c = inst.constraint_residual(&y, &u).unwrap();
    assert!(c.norm() <= inst.feasibility_tolerance(&y, &u));
}

#[test]
fn half_residual_norm_is_discrete_objective() {
    let (nx, nt) = (6, 4);
    let inst = assemble_burgers(nx, nt, 0.1, DEFAULT_OMEGA).unwrap();
    let m = inst.mass().to_dense();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y = random_vector((nt + 1) * nx, 1.0, &mut rng);
    let u = random_vector((nt + 1) * nx, 1.0, &mut rng);
    let mut j = 0.0;
    for i in 0..=nt {
        let d = inst.block(&y, i) - inst.desired_state();
        let ui = inst.block(&u, i);
        j += inst.dt() * (0.5 * d.dot(&(&m * &d)) + 0.5 * DEFAULT_OMEGA * ui.dot(&(&m * &ui)));
    }
    let r = inst.residual(&y, &u).unwrap();
    assert!((0.5 * r.norm_squared() - j).abs() <= 1e-12 * j);

    let mut at_target = DVector::zeros((nt + 1) * nx);
    for i in 0..=nt {
        at_target
            .rows_mut(i * nx, nx)
            .copy_from(inst.desired_state());
    }
    assert_eq!(
        inst.residual(&at_target, &DVector::zeros((nt + 1) * nx))
            .unwrap()
            .norm(),
        0.0
    );
}

#[test]
fn uncontrolled_flow_drifts_from_target() {
    let inst = assemble_burgers(8, 8, 0.1, DEFAULT_OMEGA).unwrap();
    let u = inst.default_initial_control();
    let y = inst.solve_state(&u).unwrap();
    let r = inst.residual(&y, &u).unwrap();
    // y_0 is pinned to z, so the first block is exactly zero.
    assert_eq!(r.rows(0, 8).norm(), 0.0);
    assert!(r.norm() > 1e-2);
}

/// Ĝ = G_u − G_y c_y⁻¹ c_u with every block written out densely.
fn dense_block_jacobian(inst: &BurgersInstance, y: &DVector<f64>) -> DMatrix<f64> {
    let (nx, nt) = (inst.nx(), inst.nt());
    let n = (nt + 1) * nx;
    let m = inst.mass().to_dense();
    let lt = m.clone().cholesky().unwrap().l().transpose();
    let b = inst.convection().to_dense();
    let c = inst.diffusion().to_dense();
    let mut cy = DMatrix::zeros(n, n);
    let mut cu = DMatrix::zeros(n, n);
    cy.view_mut((0, 0), (nx, nx)).fill_with_identity();
    for i in 1..=nt {
        let yi = inst.block(y, i);
        let a = &m / inst.dt() + &b * DMatrix::from_diagonal(&yi) + &c * inst.nu();
        cy.view_mut((i * nx, i * nx), (nx, nx)).copy_from(&a);
        cy.view_mut((i * nx, (i - 1) * nx), (nx, nx))
            .copy_from(&(-&m / inst.dt()));
        cu.view_mut((i * nx, i * nx), (nx, nx)).copy_from(&(-&m));
    }
    let mut gy = DMatrix::zeros(2 * n, n);
    let mut gu = DMatrix::zeros(2 * n, n);
    for i in 0..=nt {
        gy.view_mut((i * nx, i * nx), (nx, nx))
            .copy_from(&(&lt * inst.dt().sqrt()));
        gu.view_mut((n + i * nx, i * nx), (nx, nx))
            .copy_from(&(&lt * (inst.omega() * inst.dt()).sqrt()));
    }
    gu - gy * cy.lu().solve(&cu).unwrap()
}

#[test]
fn dense_jacobian_matches_block_formula() {
    let inst = assemble_burgers(3, 3, 0.1, DEFAULT_OMEGA).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let u = random_vector(12, 0.5, &mut rng);
    let y = inst.solve_state(&u).unwrap();
    let dense = dense_jacobian_oracle(&inst, &u).unwrap();
    assert!((dense - dense_block_jacobian(&inst, &y)).amax() < 1e-9);
}

#[test]
fn gradient_matches_finite_differences() {
    let inst = assemble_burgers(8, 8, 0.1, DEFAULT_OMEGA).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u = random_vector(inst.trajectory_len(), 1.0, &mut rng);
    let counters = EvalCounters::new();
    let y = inst.solve_state(&u).unwrap();
    let r = inst.residual(&y, &u).unwrap();
    let jac = ReducedJacobian::new(&inst, u.clone(), y, &counters);
    let g = reduced_gradient(&jac, &r).unwrap();
    let fd = fd_gradient_oracle(&inst, &u, 1e-5).unwrap();
    assert!((&g - &fd).norm() / (1.0 + fd.norm()) <= 1e-4);

    let v = random_vector(inst.trajectory_len(), 1.0, &mut rng);
    let t = 1e-5;
    let dd = (reduced_objective(&inst, &(&u + &v * t)).unwrap()
        - reduced_objective(&inst, &(&u - &v * t)).unwrap())
        / (2.0 * t);
    assert!((dd - g.dot(&v)).abs() <= 1e-4 * (1.0 + dd.abs()));

    // u_0 only enters through its regularization term.
    let nx = inst.nx();
    let u0 = inst.block(&u, 0);
    let expected = inst.mass().mul_vec(&u0) * (inst.omega() * inst.dt());
    assert!((g.rows(0, nx) - expected).amax() < 1e-14);
}

#[test]
fn adjoint_identity_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [4, 8] {
        let inst = assemble_burgers(n, n, 0.1, DEFAULT_OMEGA).unwrap();
        let u = random_vector(inst.trajectory_len(), 1.0, &mut rng);
        let counters = EvalCounters::new();
        let jac = ReducedJacobian::new(&inst, u.clone(), inst.solve_state(&u).unwrap(), &counters);
        assert!(adjoint_probe(&jac, 20, n as u64) <= 1e-10);
    }
}
