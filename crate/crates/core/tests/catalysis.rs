use approx::assert_abs_diff_eq;
use qmachine_core::catalysis::{
    drift_diffusion, efficiency_curve, engine_point, evolve_piston, linear_pump_work, optimal_preset, BathSpectrum,
    CatalysisConfig, QubitPopulations,
};
use qmachine_core::gaussian::{evolve, fock_moments, to_fock, GaussianBathDrive, GaussianState};
use qmachine_core::lindblad::{integrate, piston_generator, IntegrationConfig, PumpKind};
use qmachine_core::quantum_core::HilbertSpace;

fn grid(gamma: f64, from: f64, to: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| (from + (to - from) * i as f64 / n as f64) / gamma.abs())
        .collect()
}

#[test]
fn power_identity_holds_for_every_pump() {
    let s0 = GaussianState::squeezed_thermal(0.3, 0.2, 0.4, (0.8, -0.3));
    for kind in [PumpKind::None, PumpKind::Linear, PumpKind::Quadratic] {
        let cfg = optimal_preset(kind).unwrap();
        let (gamma, _) = drift_diffusion(&cfg).unwrap();
        let run = evolve_piston(&cfg, &s0, &grid(gamma, 0.0, 6.0, 60)).unwrap();
        assert_eq!(run.points.len(), 61);
        for p in &run.points {
            assert!(p.identity_residual <= 1e-8);
            assert!(p.heat_flux_h >= 0.0);
        }
    }
}

#[test]
fn quadratic_pump_outperforms_linear_and_none() {
    let s0 = GaussianState::coherent(1.0, 0.0);
    let runs: Vec<_> = [PumpKind::Quadratic, PumpKind::Linear, PumpKind::None]
        .into_iter()
        .map(|k| {
            let cfg = optimal_preset(k).unwrap();
            let (gamma, _) = drift_diffusion(&cfg).unwrap();
            evolve_piston(&cfg, &s0, &grid(gamma, 1.0, 5.0, 40)).unwrap()
        })
        .collect();
    for i in 0..=40 {
        let (q, l, n) = (&runs[0].points[i], &runs[1].points[i], &runs[2].points[i]);
        assert!(q.power_max > l.power_max && l.power_max > n.power_max);
        assert!(q.ergotropy > l.ergotropy && l.ergotropy > n.ergotropy);
        assert!(q.eta > n.eta);
    }
}

#[test]
fn efficiency_rises_toward_eta_max_below_carnot() {
    let cfg = optimal_preset(PumpKind::Quadratic).unwrap();
    let (gamma, _) = drift_diffusion(&cfg).unwrap();
    let run = evolve_piston(&cfg, &GaussianState::coherent(1.0, 0.0), &grid(gamma, 0.0, 5.0, 100)).unwrap();
    let curve = efficiency_curve(&cfg, &run, 1.0);
    for w in curve.eta.windows(2) {
        assert!(w[1] >= w[0]);
    }
    assert!(curve
        .eta
        .iter()
        .all(|e| *e <= cfg.eta_max() && *e <= cfg.eta_carnot() + 1e-9));
    assert!(curve.eta_unpumped < cfg.eta_max());
}

#[test]
fn means_follow_pump_rates() {
    let cfg = optimal_preset(PumpKind::Quadratic).unwrap();
    let (gamma, d) = drift_diffusion(&cfg).unwrap();
    let (gp, gm) = (-gamma / 2.0 + cfg.kappa_pump, -gamma / 2.0 - cfg.kappa_pump);
    let s0 = GaussianState::coherent(0.7, -0.4);
    let drive = GaussianBathDrive::new(gamma, d, cfg.kappa_pump, PumpKind::Quadratic).unwrap();
    for t in [10.0, 500.0, 3000.0] {
        let s = evolve(&s0, &drive, t).unwrap();
        assert_abs_diff_eq!(s.x1_mean, 0.7 * (gp * t).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.x2_mean, -0.4 * (gm * t).exp(), epsilon = 1e-12);
    }
}

fn lossy_config() -> CatalysisConfig {
    // hot bath only at omega_-: pure loss, Gamma > 0
    let hot = BathSpectrum::from_positive(1.0, &[(1.5, 0.0), (1.0, 0.0), (0.5, 1.0)]).unwrap();
    let cold = BathSpectrum::from_positive(0.6, &[(1.5, 0.0), (1.0, 1.0), (0.5, 0.0)]).unwrap();
    CatalysisConfig {
        omega0: 1.0,
        nu: 0.5,
        g: 0.1,
        kappa_pump: 0.0,
        pump_kind: PumpKind::None,
        hot,
        cold,
        populations: QubitPopulations::Derive,
    }
}

#[test]
fn unpumped_lossy_piston_thermalizes_and_stops_producing_power() {
    let cfg = lossy_config();
    let (gamma, d) = drift_diffusion(&cfg).unwrap();
    assert!(gamma > 0.0);
    let run = evolve_piston(&cfg, &GaussianState::coherent(1.0, 0.5), &[0.0, 40.0 / gamma]).unwrap();
    let late = &run.points[1];
    assert_abs_diff_eq!(late.piston.mean_number(), d / gamma, epsilon = 1e-9);
    assert!(late.power_max.abs() < 1e-12);
    // exactly at the fixed point all rates vanish
    let drive = GaussianBathDrive::new(gamma, d, 0.0, PumpKind::None).unwrap();
    let p = engine_point(0.0, GaussianState::thermal(d / gamma), &drive, cfg.nu, cfg.omega_plus()).unwrap();
    assert!(p.power_max.abs() < 1e-15 && p.energy_rate.abs() < 1e-15);
}

#[test]
fn carnot_saturating_choice() {
    let (omega0, nu) = (1.0, 0.5);
    let t_h = 1.0;
    let t_c = t_h * omega0 / (omega0 + nu);
    let mut cfg = optimal_preset(PumpKind::None).unwrap();
    cfg.hot = BathSpectrum::from_positive(t_h, &[(1.5, 1.0), (1.0, 0.01), (0.5, 0.0)]).unwrap();
    cfg.cold = BathSpectrum::from_positive(t_c, &[(1.5, 0.01), (1.0, 1.0), (0.5, 0.0)]).unwrap();
    cfg.validate().unwrap();
    assert_abs_diff_eq!(cfg.eta_max(), cfg.eta_carnot(), epsilon = 1e-15);
    // a slightly colder hot bath puts nu/omega_+ above Carnot
    cfg.hot = BathSpectrum::from_positive(0.95, &[(1.5, 1.0), (1.0, 0.01), (0.5, 0.0)]).unwrap();
    assert!(cfg.validate().is_err());
}

#[test]
fn linear_pump_work_limits() {
    let mut cfg = optimal_preset(PumpKind::Linear).unwrap();
    let (gamma, _) = drift_diffusion(&cfg).unwrap();
    let s0 = GaussianState::coherent(0.8, 0.0);
    assert_abs_diff_eq!(
        linear_pump_work(&cfg, &s0, 0.0).unwrap(),
        cfg.nu * 0.64,
        epsilon = 1e-15
    );
    cfg.kappa_pump = 0.0;
    let t = 700.0;
    assert_abs_diff_eq!(
        linear_pump_work(&cfg, &s0, t).unwrap(),
        cfg.nu * 0.64 * (-gamma * t).exp(),
        epsilon = 1e-12
    );
    cfg.pump_kind = PumpKind::Quadratic;
    assert!(linear_pump_work(&cfg, &s0, t).is_err());
}

#[test]
fn squeezing_raises_efficiency_when_passive_occupation_dominates() {
    let cfg = optimal_preset(PumpKind::Quadratic).unwrap();
    let (gamma, d) = drift_diffusion(&cfg).unwrap();
    let drive = GaussianBathDrive::new(gamma, d, cfg.kappa_pump, PumpKind::Quadratic).unwrap();
    let n_pas = 10.0 * d / gamma.abs();
    for mean in [0.0, 1.0, 3.0] {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..10 {
            let s = GaussianState::squeezed_thermal(n_pas, 0.1 * k as f64, 0.0, (mean, 0.0));
            let p = engine_point(0.0, s, &drive, cfg.nu, cfg.omega_plus()).unwrap();
            assert!(p.eta >= prev);
            prev = p.eta;
        }
    }
}

#[test]
fn gaussian_piston_matches_fock_integration() {
    let space = HilbertSpace::new(60).unwrap();
    // moderate rates keep the Fock run short; same reduced equation
    let (gamma, d, kappa) = (-0.1, 0.15, 0.05);
    for kind in [PumpKind::Quadratic, PumpKind::Linear] {
        let drive = GaussianBathDrive::new(gamma, d, kappa, kind).unwrap();
        let s0 = GaussianState::coherent(0.6, 0.1);
        let gen = piston_generator(gamma, d, kappa, kind, 0.5, space).unwrap();
        let cfg = IntegrationConfig::default().with_store_every(1.0);
        let traj = integrate(&gen, &to_fock(&s0, space).unwrap(), (0.0, 4.0), &cfg).unwrap();
        for (t, rho) in traj.times().iter().zip(traj.states()) {
            let g = evolve(&s0, &drive, *t).unwrap();
            let (n, b2) = fock_moments(rho).unwrap();
            assert!((n - g.mean_number()).abs() <= 1e-4 * g.mean_number());
            let (re, im) = g.b_squared();
            let scale = (re * re + im * im).sqrt().max(1e-2);
            assert!(((b2.re - re).powi(2) + (b2.im - im).powi(2)).sqrt() <= 1e-4 * scale);
        }
    }
}
