use nalgebra::DMatrix;
use proptest::prelude::*;
use qrcg2::dynamics::{
    evolve, evolve_observable_adjoint, lindblad_rhs, steady_state, IntegratorConfig, LindbladModel,
    Window,
};
use qrcg2::quantum::{
    expectation, mode_operator, trace_product, DensityMatrix, HilbertSpace, Ladder, ModeSpec,
    Operator, C64,
};
use qrcg2::Error;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn decay_model(d: usize, gamma: f64) -> LindbladModel {
    let s = HilbertSpace::single(ModeSpec::boson("a", d)).unwrap();
    let a = mode_operator(&s, "a", Ladder::Annihilate).unwrap();
    LindbladModel::new(&s).add_dissipator(a, gamma).unwrap()
}

#[test]
fn rhs_decay_rate_from_single_photon() {
    let gamma = 0.7;
    let m = decay_model(3, gamma);
    let rho = DensityMatrix::fock("a", 3, 1).unwrap();
    let drho = lindblad_rhs(&m, &rho, 0.0).unwrap();
    let n = mode_operator(m.space(), "a", Ladder::Number).unwrap();
    let dn = trace_product(n.matrix(), &drho);
    assert!((dn - c(-gamma)).norm() < 1e-14);
}

#[test]
fn rhs_of_empty_model_is_zero() {
    let s = HilbertSpace::single(ModeSpec::boson("a", 4)).unwrap();
    let m = LindbladModel::new(&s);
    let rho = DensityMatrix::fock("a", 4, 2).unwrap();
    let drho = lindblad_rhs(&m, &rho, 0.3).unwrap();
    assert!(drho.iter().all(|z| *z == c(0.0)));
}

#[test]
fn rhs_pump_from_ground_state() {
    let p = 0.3;
    let s = HilbertSpace::single(ModeSpec::two_level("q")).unwrap();
    let sp = mode_operator(&s, "q", Ladder::Raise).unwrap();
    let m = LindbladModel::new(&s)
        .add_dissipator(sp.clone(), p)
        .unwrap();
    let drho = lindblad_rhs(&m, &DensityMatrix::vacuum(&s), 0.0).unwrap();
    let ne = &sp * &sp.dagger();
    assert!((trace_product(ne.matrix(), &drho) - c(p)).norm() < 1e-15);
}

#[test]
fn rhs_respects_windows() {
    let s = HilbertSpace::single(ModeSpec::boson("a", 3)).unwrap();
    let a = mode_operator(&s, "a", Ladder::Annihilate).unwrap();
    let m = LindbladModel::new(&s)
        .add_pulsed_dissipator(a, 1.0, Window::new(1.0, 2.0).unwrap())
        .unwrap();
    let rho = DensityMatrix::fock("a", 3, 1).unwrap();
    assert!(lindblad_rhs(&m, &rho, 0.5).unwrap().norm() == 0.0);
    assert!(lindblad_rhs(&m, &rho, 1.0).unwrap().norm() > 0.0);
    assert!(lindblad_rhs(&m, &rho, 2.0).unwrap().norm() == 0.0);
}

#[test]
fn free_decay_matches_exponential() {
    let gamma = 1.7;
    let m = decay_model(3, gamma);
    let rho = DensityMatrix::fock("a", 3, 1).unwrap();
    let n = mode_operator(m.space(), "a", Ladder::Number).unwrap();
    let times = [1.0 / gamma, 2.0 / gamma];
    let r = evolve(&m, &rho, &times, &[n], &IntegratorConfig::default()).unwrap();
    for (i, t) in times.iter().enumerate() {
        let want = (-gamma * t).exp();
        assert!((r.observable_traces[i][0] - want).abs() < 1e-7);
    }
    assert!(r.max_trace_error < 1e-7);
    assert!(r.max_hermiticity_error < 1e-9);
}

#[test]
fn zero_model_leaves_state_unchanged() {
    let s = HilbertSpace::single(ModeSpec::boson("a", 5)).unwrap();
    let m = LindbladModel::new(&s);
    let rho = DensityMatrix::coherent("a", 30, C64::new(0.1, 0.05))
        .unwrap()
        .truncate_boson("a", 5)
        .unwrap()
        .0;
    let r = evolve(
        &m,
        &rho,
        &[0.0, 1.0, 4.0],
        &[],
        &IntegratorConfig::default(),
    )
    .unwrap();
    assert_eq!(r.final_state.matrix(), rho.matrix());
}

#[test]
fn resonance_fluorescence_population() {
    let (omega, gamma) = (0.4, 1.0);
    let s = HilbertSpace::single(ModeSpec::two_level("q")).unwrap();
    let sm = mode_operator(&s, "q", Ladder::Lower).unwrap();
    let h = &(&sm + &sm.dagger()) * omega;
    let m = LindbladModel::new(&s)
        .with_hamiltonian(h)
        .unwrap()
        .add_dissipator(sm.clone(), gamma)
        .unwrap();
    let want = 4.0 * omega * omega / (gamma * gamma + 8.0 * omega * omega);
    let ne = &sm.dagger() * &sm;

    let ss = steady_state(&m, &IntegratorConfig::default()).unwrap();
    assert!((expectation(&ss, &ne).unwrap().re - want).abs() < 1e-10);

    let r = evolve(
        &m,
        &DensityMatrix::vacuum(&s),
        &[60.0],
        &[ne],
        &IntegratorConfig::default(),
    )
    .unwrap();
    assert!((r.observable_traces[0][0] - want).abs() < 1e-7);
}

#[test]
fn steady_state_of_pure_decay_is_vacuum() {
    let m = decay_model(4, 1.0);
    let ss = steady_state(&m, &IntegratorConfig::default()).unwrap();
    assert!((ss.matrix()[(0, 0)] - c(1.0)).norm() < 1e-12);
    assert!((ss.trace() - 1.0).abs() < 1e-12);
}

#[test]
fn steady_state_pump_decay_balance() {
    let (p, gamma) = (0.2, 1.0);
    let s = HilbertSpace::single(ModeSpec::two_level("q")).unwrap();
    let sm = mode_operator(&s, "q", Ladder::Lower).unwrap();
    let m = LindbladModel::new(&s)
        .add_dissipator(sm.clone(), gamma)
        .unwrap()
        .add_dissipator(sm.dagger(), p)
        .unwrap();
    let ss = steady_state(&m, &IntegratorConfig::default()).unwrap();
    assert!((ss.matrix()[(0, 0)].re - gamma / (p + gamma)).abs() < 1e-12);
    assert!((ss.matrix()[(1, 1)].re - p / (p + gamma)).abs() < 1e-12);
    assert!(ss.matrix()[(0, 1)].norm() < 1e-14);
}

#[test]
fn steady_state_coherent_drive_mean_field() {
    let (delta, omega, gamma) = (0.8, 0.3, 1.0);
    let s = HilbertSpace::single(ModeSpec::boson("a", 20)).unwrap();
    let a = mode_operator(&s, "a", Ladder::Annihilate).unwrap();
    let h = &(&mode_operator(&s, "a", Ladder::Number).unwrap() * delta)
        + &(&(&a + &a.dagger()) * omega);
    let m = LindbladModel::new(&s)
        .with_hamiltonian(h)
        .unwrap()
        .add_dissipator(a.clone(), gamma)
        .unwrap();
    let ss = steady_state(&m, &IntegratorConfig::default()).unwrap();
    let mean = expectation(&ss, &a).unwrap();
    let want = -c(omega) / C64::new(delta, -gamma / 2.0);
    assert!((mean - want).norm() < 1e-6);
    // displaced vacuum: coherent statistics
    let g2 = qrcg2::quantum::second_order_coherence(&ss, &a).unwrap();
    assert!((g2 - 1.0).abs() < 1e-6);
}

#[test]
fn steady_state_detects_degenerate_null_space() {
    let s = HilbertSpace::single(ModeSpec::two_level("q")).unwrap();
    let m = LindbladModel::new(&s);
    let err = steady_state(&m, &IntegratorConfig::default()).unwrap_err();
    assert!(
        matches!(err, Error::NonUniqueSteadyState | Error::SteadyState(_)),
        "{err}"
    );
}

#[test]
fn steady_state_by_relaxation_above_direct_limit() {
    // 13 × 13 = 169 > 150 takes the evolution path
    let s = HilbertSpace::new(vec![ModeSpec::boson("a", 13), ModeSpec::boson("b", 13)]).unwrap();
    let a = mode_operator(&s, "a", Ladder::Annihilate).unwrap();
    let b = mode_operator(&s, "b", Ladder::Annihilate).unwrap();
    let h = &(&(&a + &a.dagger()) * 0.2) + &(&(&(&a.dagger() * &b) + &(&b.dagger() * &a)) * 0.5);
    let m = LindbladModel::new(&s)
        .with_hamiltonian(h)
        .unwrap()
        .add_dissipator(a.clone(), 1.0)
        .unwrap()
        .add_dissipator(b.clone(), 0.5)
        .unwrap();
    let ss = steady_state(&m, &IntegratorConfig::default()).unwrap();
    let resid = lindblad_rhs(&m, &ss, 0.0).unwrap().norm();
    assert!(resid < 1e-8);
}

#[test]
fn fixed_step_halving_gains_at_least_eightfold() {
    let gamma = 1.0;
    let m = decay_model(3, gamma);
    let rho = DensityMatrix::fock("a", 3, 1).unwrap();
    let n = mode_operator(m.space(), "a", Ladder::Number).unwrap();
    let err = |h: f64| {
        let cfg = IntegratorConfig {
            fixed_step: Some(h),
            ..Default::default()
        };
        let r = evolve(&m, &rho, &[2.0], std::slice::from_ref(&n), &cfg).unwrap();
        (r.observable_traces[0][0] - (-2.0 * gamma).exp()).abs()
    };
    let (e1, e2) = (err(0.25), err(0.125));
    assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
}

#[test]
fn adjoint_propagation_reproduces_forward_observables() {
    let s = HilbertSpace::new(vec![ModeSpec::two_level("q"), ModeSpec::boson("a", 4)]).unwrap();
    let sm = mode_operator(&s, "q", Ladder::Lower).unwrap();
    let a = mode_operator(&s, "a", Ladder::Annihilate).unwrap();
    let h = &(&sm + &sm.dagger()) * 0.3;
    let m = LindbladModel::new(&s)
        .with_hamiltonian(h)
        .unwrap()
        .add_dissipator(sm.clone(), 1.0)
        .unwrap()
        .add_dissipator(sm.dagger(), 0.2)
        .unwrap()
        .add_cascade(a.clone(), sm.clone(), 0.5, Window::new(0.0, 2.0).unwrap())
        .unwrap()
        .add_pulsed_dissipator(a.clone(), 0.5, Window::new(0.0, 2.0).unwrap())
        .unwrap();
    let q = DensityMatrix::vacuum(&HilbertSpace::single(ModeSpec::two_level("q")).unwrap());
    let f = DensityMatrix::fock("a", 4, 2).unwrap();
    use qrcg2::quantum::Tensor;
    let rho0 = q.tensor(&f).unwrap();
    let ne = &sm.dagger() * &sm;
    let times = [0.5, 1.5, 2.0, 3.0];
    let cfg = IntegratorConfig::default();
    let fwd = evolve(&m, &rho0, &times, std::slice::from_ref(&ne), &cfg).unwrap();
    let xs = evolve_observable_adjoint(&m, &ne, &times, &cfg).unwrap();
    for (i, x) in xs.iter().enumerate() {
        let v = trace_product(x, rho0.matrix()).re;
        assert!((v - fwd.observable_traces[i][0]).abs() < 1e-8);
    }
}

fn random_hermitian(d: usize, vals: &[f64]) -> DMatrix<C64> {
    let m = DMatrix::from_fn(d, d, |i, j| {
        C64::new(
            vals[(i * d + j) % vals.len()],
            vals[(j * d + i + 3) % vals.len()],
        )
    });
    (&m + m.adjoint()) * c(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolution_conserves_trace_and_hermiticity(
        vals in proptest::collection::vec(-1.0f64..1.0, 16),
        g1 in 0.0f64..2.0,
        g2 in 0.0f64..2.0,
        t in 0.1f64..5.0,
    ) {
        let s = HilbertSpace::new(vec![ModeSpec::two_level("q"), ModeSpec::boson("a", 3)]).unwrap();
        let h = Operator::from_matrix(s.clone(), random_hermitian(6, &vals)).unwrap();
        let sm = mode_operator(&s, "q", Ladder::Lower).unwrap();
        let a = mode_operator(&s, "a", Ladder::Annihilate).unwrap();
        let m = LindbladModel::new(&s)
            .with_hamiltonian(h).unwrap()
            .add_dissipator(sm, g1).unwrap()
            .add_dissipator(a, g2).unwrap();
        let rho0 = DensityMatrix::maximally_mixed(&s);
        let r = evolve(&m, &rho0, &[t * 0.5, t], &[], &IntegratorConfig::default()).unwrap();
        prop_assert!(r.max_trace_error < 1e-7);
        prop_assert!(r.max_hermiticity_error < 1e-9);
        prop_assert!(r.final_state.min_eigenvalue() > -1e-6);
    }
}
