mod common;

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;

use common::{pump_state_2d, Rng};
use spinpic::derham::build_complex_2d;
use spinpic::diagnostics::{hamiltonian_2d, poisson_residual_2d};
use spinpic::linalg::quadratic_form;
use spinpic::particles::Ensemble2D;
use spinpic::solver1d::SolverParams;
use spinpic::solver2d::{solve_initial_poisson_2d, Solver2D, State2D};

fn solver() -> Solver2D {
    Solver2D::new(SolverParams::default()).unwrap()
}

#[test]
fn uniform_magnetic_field_turns_momentum_a_quarter() {
    let cx = Arc::new(build_complex_2d([4, 4], [2, 2], [1.0, 1.0]).unwrap());
    let mut st = State2D::new(cx.clone(), 0.0);
    let b = 2.0;
    st.fields.bz = DVector::from_element(cx.dim2(), b);
    st.ensemble.push([0.3, 0.7], [1.0, 0.0], [1.0, 0.0, 0.0], 1.0);
    // gamma = sqrt(2), so this step turns by a right angle
    let dt = FRAC_PI_2 * 2f64.sqrt() / b;
    solver().step_subsystem2(&mut st, dt);
    let p = st.ensemble.p[0];
    assert!(p[0].abs() < 1e-14 && (p[1] + 1.0).abs() < 1e-14, "{p:?}");
    // the spin turns about B = (0, 0, b) by dt * b
    let s = st.ensemble.s[0];
    let angle = dt * b;
    assert!((s[0] - angle.cos()).abs() < 1e-14 && (s[1] - angle.sin()).abs() < 1e-14 && s[2].abs() < 1e-15);
}

#[test]
fn magnetic_rotation_leaves_positions_and_fields_alone() {
    let mut st = pump_state_2d(8, 200, 0.05, 1);
    let mut rng = Rng::new(2);
    st.fields.bz = rng.vector(st.complex.dim2(), 1.0);
    let before = st.clone();
    solver().step_subsystem2(&mut st, 0.1);
    assert_eq!(st.ensemble.x, before.ensemble.x);
    assert_eq!(st.fields, before.fields);
    for (p, q) in st.ensemble.p.iter().zip(&before.ensemble.p) {
        assert!((p[0].hypot(p[1]) - q[0].hypot(q[1])).abs() <= 1e-14);
    }
    let h0 = hamiltonian_2d(&before);
    assert!(((hamiltonian_2d(&st) - h0) / h0).abs() <= 1e-13);
}

#[test]
fn field_only_subsystems_conserve_quadratic_invariants() {
    let cx = Arc::new(build_complex_2d([6, 5], [2, 3], [3.0, 2.0]).unwrap());
    let mut st = State2D::new(cx.clone(), 0.0);
    let mut rng = Rng::new(3);
    st.fields.ez = rng.vector(cx.dim0(), 1.0);
    st.fields.az = rng.vector(cx.dim0(), 1.0);
    st.fields.exy = rng.vector(cx.dim1(), 1.0);
    st.fields.bz = rng.vector(cx.dim2(), 1.0);
    let potential = |s: &State2D| {
        0.5 * (quadratic_form(&cx.m0, &s.fields.ez) + quadratic_form(&cx.stiffness_star, &s.fields.az))
    };
    let maxwell = |s: &State2D| 0.5 * (quadratic_form(&cx.m1, &s.fields.exy) + quadratic_form(&cx.m2, &s.fields.bz));
    let (p0, m0) = (potential(&st), maxwell(&st));
    let mut s = solver();
    for _ in 0..1000 {
        assert!(s.step_subsystem3(&mut st, 0.02).unwrap() <= 2);
        s.step_subsystem4(&mut st, 0.02).unwrap();
    }
    let drift = [((potential(&st) - p0) / p0).abs(), ((maxwell(&st) - m0) / m0).abs()];
    assert!(drift[0] <= 1e-13 && drift[1] <= 1e-13, "{drift:?}");
}

#[test]
fn maxwell_step_keeps_gauss_residual() {
    let mut st = pump_state_2d(8, 300, 0.05, 4);
    let mut rng = Rng::new(5);
    st.fields.bz = rng.vector(st.complex.dim2(), 1.0);
    let (r0, _) = poisson_residual_2d(&st);
    let mut s = solver();
    for _ in 0..10 {
        s.step_subsystem4(&mut st, 0.05).unwrap();
    }
    let (r1, _) = poisson_residual_2d(&st);
    assert!((r1 - r0).amax() <= 1e-13);
}

#[test]
fn particle_push_keeps_gauss_residual_and_energy() {
    let mut st = pump_state_2d(8, 400, 0.05, 6);
    let mut s = solver();
    let (_, r0) = poisson_residual_2d(&st);
    let h0 = hamiltonian_2d(&st);
    for _ in 0..10 {
        s.step_subsystem1(&mut st, 0.02).unwrap();
    }
    let (_, r1) = poisson_residual_2d(&st);
    assert!((r1 - r0).abs() <= 1e-12, "{r0:e} -> {r1:e}");
    assert!(((hamiltonian_2d(&st) - h0) / h0).abs() <= 10.0 * 400.0 * s.params.tol);
}

#[test]
fn subsystem_energy_identities() {
    let mut st = pump_state_2d(8, 300, 0.1, 7);
    let mut s = solver();
    let scale = hamiltonian_2d(&st).abs();
    let tol = 10.0 * 300.0 * s.params.tol * scale;
    for _ in 0..3 {
        let h = hamiltonian_2d(&st);
        s.step_subsystem1(&mut st, 0.02).unwrap();
        let h1 = hamiltonian_2d(&st);
        assert!((h1 - h).abs() <= tol);
        s.step_subsystem2(&mut st, 0.02);
        let h2 = hamiltonian_2d(&st);
        assert!((h2 - h1).abs() <= 1e-13 * scale);
        s.step_subsystem3(&mut st, 0.02).unwrap();
        let h3 = hamiltonian_2d(&st);
        assert!((h3 - h2).abs() <= tol);
        s.step_subsystem4(&mut st, 0.02).unwrap();
        let h4 = hamiltonian_2d(&st);
        assert!((h4 - h3).abs() <= tol);
    }
}

#[test]
fn zero_step_is_identity() {
    let mut st = pump_state_2d(6, 100, 0.05, 8);
    let before = st.clone();
    solver().lie_trotter_step(&mut st, 0.0).unwrap();
    assert_eq!(st.ensemble, before.ensemble);
    assert_eq!(st.fields, before.fields);
}

#[test]
fn initial_poisson_solve_hits_the_gauss_law() {
    let cx = Arc::new(build_complex_2d([6, 6], [2, 2], [2.0, 2.0]).unwrap());
    let mut st = State2D::new(cx, 0.0);
    let mut rng = Rng::new(9);
    st.ensemble = Ensemble2D::empty();
    for _ in 0..400 {
        st.ensemble.push([rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)], [0.0; 2], [0.0; 3], 4.0 / 400.0);
    }
    solve_initial_poisson_2d(&mut st).unwrap();
    let (_, r) = poisson_residual_2d(&st);
    assert!(r <= 1e-13, "{r:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rotation_preserves_momentum_and_spin_norms(seed in any::<u64>(), dt in -0.5f64..0.5) {
        let mut st = pump_state_2d(6, 64, 0.05, seed % 100);
        let mut rng = Rng::new(seed);
        st.fields.bz = rng.vector(st.complex.dim2(), 3.0);
        for s in st.ensemble.s.iter_mut() {
            *s = rng.unit3();
        }
        let before = st.ensemble.clone();
        solver().step_subsystem2(&mut st, dt);
        for a in 0..before.len() {
            let (p, q) = (st.ensemble.p[a], before.p[a]);
            prop_assert!((p[0].hypot(p[1]) - q[0].hypot(q[1])).abs() <= 1e-14);
            let s = st.ensemble.s[a];
            prop_assert!(((s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt() - 1.0).abs() <= 1e-14);
        }
    }
}
