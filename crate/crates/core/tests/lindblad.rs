use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use qmachine_core::lindblad::{
    integrate, piston_generator, squeezed_bath_generator, squeezed_bath_ramp, squeezed_coefficients, steady_state,
    thermal_generator, Coefficient, GeneratorSpec, HamiltonianTerm, IntegrationConfig, PumpKind,
};
use qmachine_core::passivity::{ledger_for_stroke, passive_state};
use qmachine_core::quantum_core::{
    fock_annihilation, gibbs_state, number_operator, sigma_x, sigma_z, trace_distance, trace_product,
    von_neumann_entropy, DensityOperator, HilbertSpace, C64,
};
use qmachine_core::Error;

#[test]
fn hamiltonian_only_evolution_preserves_purity() {
    let h = vec![
        HamiltonianTerm::new(sigma_z(), Coefficient::Const(0.7)).unwrap(),
        HamiltonianTerm::new(sigma_x(), Coefficient::Const(0.3)).unwrap(),
    ];
    let gen = GeneratorSpec::new("rabi", h, vec![], 1.0).unwrap();
    let psi = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let rho0 = DensityOperator::pure(&psi).unwrap();
    let cfg = IntegrationConfig {
        rel_tol: 1e-11,
        abs_tol: 1e-13,
        ..IntegrationConfig::default()
    };
    let traj = integrate(&gen, &rho0, (0.0, 20.0), &cfg).unwrap();
    for s in traj.states() {
        assert_abs_diff_eq!(s.purity(), 1.0, epsilon = 1e-9);
    }
    // a dissipator-free stroke books its (vanishing) energy change as work
    let l = ledger_for_stroke(&traj).unwrap();
    assert!(l.work.abs() < 1e-9);
    assert_eq!(l.dissipative_energy, 0.0);
}

#[test]
fn thermal_relaxation_reaches_gibbs_state() {
    let space = HilbertSpace::new(22).unwrap();
    let gen = thermal_generator(1.0, 0.5, 1.3, space).unwrap();
    let mut p = vec![0.0; 22];
    p[2] = 0.6;
    p[0] = 0.4;
    let rho0 = DensityOperator::from_populations(&p).unwrap();
    let traj = integrate(&gen, &rho0, (0.0, 12.0), &IntegrationConfig::default()).unwrap();
    let ss = steady_state(&gen, 0.0).unwrap();
    assert!(trace_distance(traj.last_state(), &ss).unwrap() < 1e-6);
    let t = qmachine_core::quantum_core::bose_temperature(1.3, 0.5);
    let g = gibbs_state(&number_operator(space).scaled(1.3), t).unwrap();
    assert!(trace_distance(&ss, &g).unwrap() < 1e-10);
}

#[test]
fn qubit_relaxation_dissipates_endpoint_energy() {
    let gen = qmachine_core::lindblad::qubit_thermal_generator(1.0, 0.3, 1.0).unwrap();
    let rho0 = DensityOperator::from_populations(&[1.0, 0.0]).unwrap();
    let traj = integrate(&gen, &rho0, (0.0, 15.0), &IntegrationConfig::default()).unwrap();
    let l = ledger_for_stroke(&traj).unwrap();
    let h = gen.hamiltonian_at(0.0);
    let e_inf = h.expectation(&steady_state(&gen, 0.0).unwrap());
    let e0 = h.expectation(&rho0);
    assert_abs_diff_eq!(l.dissipative_energy, e_inf - e0, epsilon = 1e-8);
    assert_eq!(l.work, 0.0);
}

#[test]
fn squeezed_vacuum_relaxation_from_vacuum() {
    let r = 0.5f64;
    let omega = 1.0;
    let space = HilbertSpace::fock(40).unwrap();
    let gen = squeezed_bath_generator(1.0, 0.0, r, omega, space).unwrap();
    let vac = DensityOperator::fock(space, 0).unwrap();
    let cfg = IntegrationConfig::default().with_store_every(0.1);
    let traj = integrate(&gen, &vac, (0.0, 12.0), &cfg).unwrap();
    let energies = traj.energies();
    // monotone up to integrator noise on the plateau (rel_tol 1e-8)
    assert!(energies.windows(2).all(|w| w[1] >= w[0] - 1e-7));
    let l = ledger_for_stroke(&traj).unwrap();
    assert_abs_diff_eq!(l.dissipative_energy, omega * r.sinh().powi(2), epsilon = 1e-6);
    // the bath leaves the mode non-passive
    let pd = passive_state(traj.last_state(), traj.last_hamiltonian()).unwrap();
    assert_abs_diff_eq!(l.dissipative_ergotropy, pd.ergotropy, epsilon = 1e-6);
    assert!(pd.ergotropy > 0.2);
    // squeezed vacuum is pure: entropy returns to zero
    let s_end = von_neumann_entropy(traj.last_state()).unwrap();
    assert!(s_end < 1e-5);
    let s_mid = von_neumann_entropy(&traj.states()[5]).unwrap();
    assert!(s_mid > 1e-3);
}

#[test]
fn gaussian_moments_match_closed_form_relaxation() {
    // d<n>/dt = -2k(<n> - N), d<a^2>/dt = -2k(<a^2> - M)
    let (kappa, nb, r) = (0.8, 1.5, 0.3);
    let space = HilbertSpace::fock(60).unwrap();
    let gen = squeezed_bath_generator(kappa, nb, r, 1.0, space).unwrap();
    let rho0 = gibbs_state(&number_operator(space), 1.0).unwrap();
    let n0 = number_operator(space).expectation(&rho0);
    let traj = integrate(&gen, &rho0, (0.0, 2.0), &IntegrationConfig::default()).unwrap();
    let (n_inf, m_inf) = squeezed_coefficients(nb, r);
    let a = fock_annihilation(space).unwrap();
    let a2 = a.product(&a).unwrap();
    for (t, s) in traj.times().iter().zip(traj.states()) {
        let decay = (-2.0 * kappa * t).exp();
        let n = number_operator(space).expectation(s);
        let m = trace_product(s.matrix(), a2.matrix()).re;
        assert_abs_diff_eq!(n, n_inf + (n0 - n_inf) * decay, epsilon = 1e-5 * n_inf);
        assert_abs_diff_eq!(m, m_inf * (1.0 - decay), epsilon = 1e-5 * m_inf.abs());
    }
}

#[test]
fn truncation_guard_trips_under_gain() {
    let space = HilbertSpace::new(10).unwrap();
    let gen = piston_generator(-1.0, 1.0, 0.0, PumpKind::None, 1.0, space).unwrap();
    let rho0 = DensityOperator::fock(space, 1).unwrap();
    let err = integrate(&gen, &rho0, (0.0, 30.0), &IntegrationConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Truncation(_)));
    assert!(err.is_numerical_guard());
}

#[test]
fn ramp_generator_reports_time_dependent_hamiltonian() {
    let space = HilbertSpace::new(20).unwrap();
    let omega = Arc::new(|t: f64| 5.0 - 0.05 * t);
    let gen = squeezed_bath_ramp(1.0, 2.0, 0.0, omega, space, "ramp").unwrap();
    assert!(!gen.is_static());
    let rho0 = gibbs_state(&gen.hamiltonian_at(0.0), 2.0).unwrap();
    let traj = integrate(&gen, &rho0, (0.0, 10.0), &IntegrationConfig::default()).unwrap();
    assert!(!traj.meta.flags.slow_driving_violated);
    let l = ledger_for_stroke(&traj).unwrap();
    assert!(l.work < 0.0);
    assert!(l.first_law_residual() < 1e-10);

    // a fast ramp raises the slow-driving flag
    let fast = Arc::new(|t: f64| 5.0 - 2.0 * t);
    let gen = squeezed_bath_ramp(1.0, 2.0, 0.0, fast, space, "ramp").unwrap();
    let rho0 = gibbs_state(&gen.hamiltonian_at(0.0), 2.0).unwrap();
    let traj = integrate(&gen, &rho0, (0.0, 1.0), &IntegrationConfig::default()).unwrap();
    assert!(traj.meta.flags.slow_driving_violated);
}
