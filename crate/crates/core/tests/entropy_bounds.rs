use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use qmachine_core::entropy_bounds::{
    auxiliary_passive_path, bound_profile, entropy_production_total, integrate_trace, passive_pair_inequality,
    second_law_bound, second_law_bound_nonthermal, spohn_trace, tight_bound_constant_h, tight_bound_time_dependent,
    Finality,
};
use qmachine_core::gaussian::{to_fock, GaussianState};
use qmachine_core::lindblad::{
    integrate, qubit_thermal_generator, squeezed_bath_generator, squeezed_bath_ramp, steady_state, thermal_generator,
    IntegrationConfig,
};
use qmachine_core::passivity::{ledger_for_stroke, passive_state};
use qmachine_core::quantum_core::{
    bose_temperature, gibbs_state, number_operator, squeeze_state, DensityOperator, HilbertSpace, C64,
};
use qmachine_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn qubit_state(p_excited: f64, coherence: f64) -> DensityOperator {
    DensityOperator::new(DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0 - p_excited, 0.0),
            C64::new(coherence, 0.0),
            C64::new(coherence, 0.0),
            C64::new(p_excited, 0.0),
        ],
    ))
    .unwrap()
}

#[test]
fn qubit_spohn_rate_is_positive_and_integrates_to_relative_entropy() {
    let gen = qubit_thermal_generator(1.0, 0.4, 1.0).unwrap();
    let ss = steady_state(&gen, 0.0).unwrap();
    let rho0 = qubit_state(0.8, 0.2);
    let cfg = IntegrationConfig::default().with_store_every(0.01);
    let traj = integrate(&gen, &rho0, (0.0, 12.0), &cfg).unwrap();
    let trace = spohn_trace(&traj, &gen, &ss).unwrap();
    assert!(trace.iter().all(|(_, s)| *s >= -1e-9));
    let total = entropy_production_total(&rho0, &ss).unwrap();
    assert_abs_diff_eq!(integrate_trace(&trace), total, epsilon = 1e-4);
}

#[test]
fn passive_start_makes_bounds_coincide() {
    let space = HilbertSpace::new(20).unwrap();
    let (nb, omega) = (0.5, 1.0);
    let gen = thermal_generator(1.0, nb, omega, space).unwrap();
    let t = bose_temperature(omega, nb);
    let rho0 = gibbs_state(&number_operator(space).scaled(omega), 0.4).unwrap();
    let traj = integrate(&gen, &rho0, (0.0, 15.0), &IntegrationConfig::default()).unwrap();
    let rep = tight_bound_constant_h(&traj, t, Finality::Require).unwrap();
    assert_abs_diff_eq!(rep.bound_second_law, rep.bound_tight, epsilon = 1e-12);
    assert!(rep.satisfied_tight && rep.satisfied_second_law);
    assert!(rep.sigma_trace.iter().all(|(_, s)| *s >= -1e-9));
}

#[test]
fn inverted_qubit_slack_gap_is_initial_ergotropy_over_t() {
    let (nb, omega) = (0.3, 1.0);
    let gen = qubit_thermal_generator(1.0, nb, omega).unwrap();
    let t = bose_temperature(omega, nb);
    let rho0 = DensityOperator::from_populations(&[0.2, 0.8]).unwrap();
    let w0 = passive_state(&rho0, &gen.hamiltonian_at(0.0)).unwrap().ergotropy;
    let traj = integrate(&gen, &rho0, (0.0, 15.0), &IntegrationConfig::default()).unwrap();
    let rep = second_law_bound(&traj, t, Finality::Require).unwrap();
    assert!(rep.slack_tight > 0.0);
    assert!(rep.slack_second_law > rep.slack_tight);
    assert_abs_diff_eq!(rep.slack_second_law - rep.slack_tight, w0 / t, epsilon = 1e-6);
}

#[test]
fn finality_is_enforced_unless_waived() {
    let gen = qubit_thermal_generator(1.0, 0.3, 1.0).unwrap();
    let rho0 = DensityOperator::from_populations(&[0.2, 0.8]).unwrap();
    let traj = integrate(&gen, &rho0, (0.0, 1.0), &IntegrationConfig::default()).unwrap();
    let err = second_law_bound(&traj, 1.0, Finality::Require).unwrap_err();
    assert!(matches!(err, Error::NotStationary(_)));
    assert!(second_law_bound(&traj, 1.0, Finality::Waive).is_ok());
    assert!(second_law_bound(&traj, 0.0, Finality::Waive).is_err());
}

#[test]
fn tight_time_dependent_bound_reduces_to_constant_h() {
    let space = HilbertSpace::new(40).unwrap();
    // mild bath: the truncated squeezed generator's fixed point sits within
    // 1e-10 of the exact one
    let gen = squeezed_bath_generator(1.0, 0.3, 0.2, 1.0, space).unwrap();
    let rho0 = squeeze_state(&DensityOperator::fock(space, 1).unwrap(), 0.2).unwrap();
    let cfg = IntegrationConfig::default().with_store_every(0.1);
    let traj = integrate(&gen, &rho0, (0.0, 25.0), &cfg).unwrap();
    let t = bose_temperature(1.0, 0.3);
    let rep_td = tight_bound_time_dependent(&traj, &gen, &cfg, Finality::Require).unwrap();
    let rep_c = second_law_bound_nonthermal(&traj, t, 0.2, Finality::Require).unwrap();
    assert_abs_diff_eq!(rep_td.bound_tight, rep_c.bound_tight, epsilon = 1e-8);
    assert_abs_diff_eq!(rep_td.bound_second_law, rep_c.bound_second_law, epsilon = 1e-12);
    assert!(rep_c.satisfied_second_law && rep_c.satisfied_tight);
    assert!(rep_c.slack_second_law > rep_c.slack_tight);
}

#[test]
fn auxiliary_path_checks_generator() {
    let space = HilbertSpace::new(12).unwrap();
    let gen = thermal_generator(1.0, 0.2, 1.0, space).unwrap();
    let other = thermal_generator(2.0, 0.2, 1.0, space).unwrap();
    let rho0 = gibbs_state(&number_operator(space), 0.5).unwrap();
    let traj = integrate(&gen, &rho0, (0.0, 1.0), &IntegrationConfig::default()).unwrap();
    let err = auxiliary_passive_path(&traj, &other, &IntegrationConfig::default()).unwrap_err();
    assert!(matches!(err, Error::GeneratorMismatch(_)));
    // a passive start makes the auxiliary path the physical path
    let aux = auxiliary_passive_path(&traj, &gen, &IntegrationConfig::default()).unwrap();
    for (a, b) in aux.states().iter().zip(traj.states()) {
        assert!((a.matrix() - b.matrix()).camax() < 1e-12);
    }
}

#[test]
fn vacuum_against_squeezed_thermal_steady_state() {
    let (nb, r) = (0.3f64, 0.2f64);
    let space = HilbertSpace::new(30).unwrap();
    let th = gibbs_state(&number_operator(space), bose_temperature(1.0, nb)).unwrap();
    let ss = squeeze_state(&th, r).unwrap();
    let vac = DensityOperator::fock(space, 0).unwrap();
    let s = entropy_production_total(&vac, &ss).unwrap();
    let closed = (nb + 1.0).ln() + r.sinh().powi(2) * ((nb + 1.0) / nb).ln();
    assert!(s > 0.0);
    assert_abs_diff_eq!(s, closed, epsilon = 1e-8);
    // the passive pair is tighter
    let h = number_operator(space);
    let pi0 = passive_state(&vac, &h).unwrap().passive_state;
    let pair = passive_pair_inequality(&pi0, &th).unwrap();
    assert!(pair <= s);
}

#[test]
fn passive_pair_is_tighter_for_random_squeezed_coherent_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // thermal tails must stay above the support floor of 1e-14
    let space = HilbertSpace::new(30).unwrap();
    let h = number_operator(space);
    for _ in 0..100 {
        let nb = rng.random_range(0.6..1.0);
        let r_bath = rng.random_range(0.0..0.3);
        let th = gibbs_state(&h, bose_temperature(1.0, nb)).unwrap();
        let state = GaussianState::squeezed_thermal(
            0.0,
            rng.random_range(0.0..0.3),
            rng.random_range(0.0..std::f64::consts::PI),
            (rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6)),
        );
        let rho0 = to_fock(&state, space).unwrap();
        let pi0 = passive_state(&rho0, &h).unwrap().passive_state;
        let pair = passive_pair_inequality(&pi0, &th).unwrap();
        let fictitious = entropy_production_total(&squeeze_state(&rho0, -r_bath).unwrap(), &th).unwrap();
        assert!(pair <= fictitious + 1e-9, "{pair} > {fictitious}");
    }
}

#[test]
fn driven_stroke_tight_bound_saturates_while_second_law_does_not() {
    let space = HilbertSpace::new(41).unwrap();
    let (kappa, t_h, r) = (1.0, 5.0, 0.2);
    let omega = Arc::new(|t: f64| 25.0 - 0.05 * t);
    let gen = squeezed_bath_ramp(kappa, t_h, r, omega, space, "isotherm").unwrap();
    let rho0 = gibbs_state(&gen.hamiltonian_at(0.0), t_h).unwrap();
    let cfg = IntegrationConfig::default().with_store_every(0.25);
    let traj = integrate(&gen, &rho0, (0.0, 60.0), &cfg).unwrap();
    let aux = auxiliary_passive_path(&traj, &gen, &cfg).unwrap();
    let profile = bound_profile(&traj, &aux, &gen).unwrap();
    let at = |t: f64| profile.iter().find(|p| (p.t - t).abs() < 1e-9).unwrap();
    let p = at(50.0);
    let rel_tight = (p.delta_s - p.tight).abs() / p.delta_s.abs();
    let rel_second = (p.delta_s - p.second_law).abs() / p.delta_s.abs();
    assert!(rel_tight <= 0.02, "tight relative slack {rel_tight}");
    assert!(rel_second > 5.0 * rel_tight);
    assert!(p.delta_s >= p.tight - 1e-8 && p.delta_s >= p.second_law);
    let l = ledger_for_stroke(&traj).unwrap();
    assert!(l.first_law_residual() < 1e-6 * l.delta_energy.abs().max(1.0));
}
