use approx::assert_abs_diff_eq;
use qmachine_core::cycles::{
    run_equivalent_hybrid, run_modified_carnot, run_modified_otto, zero_temperature_work, Backend, CarnotConfig,
    HotBath, OttoConfig, Regime,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fock_otto_matches_closed_form() {
    let mut cfg = OttoConfig::new(0.6, 1.0, 0.4, 1.2, 0.4);
    cfg.fock_dim = 61;
    let res = run_modified_otto(&cfg).unwrap();
    let a = cfg.analytic();
    let e = a.efficiencies(&cfg).unwrap();
    assert_eq!(res.regime, Regime::Engine);
    assert_eq!(
        res.stroke_names,
        [
            "compression",
            "hot_isochore",
            "extraction",
            "expansion",
            "cold_isochore"
        ]
    );
    assert!((res.efficiency - e.eta).abs() <= 0.02 * e.eta);
    assert_abs_diff_eq!(res.net_work, a.net_work(&cfg, true), epsilon = 1e-5);
    assert_abs_diff_eq!(res.eta_max, e.eta_max, epsilon = 1e-5);
    assert_abs_diff_eq!(res.eta_sigma, e.eta_sigma, epsilon = 1e-5);
    assert!(res.cyclicity_residual < 1e-6);
    assert!(res.efficiency <= res.eta_max && res.eta_max <= res.eta_sigma);
}

#[test]
fn zero_temperature_work_without_extraction() {
    let mut cfg = OttoConfig::new(0.5, 1.0, 0.0, 0.0, 0.5);
    cfg.fock_dim = 30;
    cfg.extraction = false;
    let res = run_modified_otto(&cfg).unwrap();
    assert_abs_diff_eq!(res.net_work, zero_temperature_work(0.5, 1.0, 0.5), epsilon = 1e-6);
    // with the extraction stroke all of the hot bath's excess is turned into work
    cfg.extraction = true;
    let res = run_modified_otto(&cfg).unwrap();
    assert_abs_diff_eq!(res.net_work, -0.5f64.sinh().powi(2), epsilon = 1e-6);
}

#[test]
fn gaussian_backend_is_exact() {
    let mut cfg = OttoConfig::new(0.7, 1.0, 0.3, 1.0, 0.6);
    cfg.backend = Backend::Gaussian;
    cfg.stroke_time = 20.0;
    let res = run_modified_otto(&cfg).unwrap();
    let a = cfg.analytic();
    let e = a.efficiencies(&cfg).unwrap();
    assert_abs_diff_eq!(res.efficiency, e.eta, epsilon = 1e-12);
    assert_abs_diff_eq!(res.eta_max, e.eta_max, epsilon = 1e-12);
    assert_abs_diff_eq!(res.eta_sigma, e.eta_sigma, epsilon = 1e-12);
    cfg.extraction = false;
    let res = run_modified_otto(&cfg).unwrap();
    assert_abs_diff_eq!(res.net_work, a.net_work(&cfg, false), epsilon = 1e-12);
}

#[test]
fn hybrid_cycle_reproduces_modified_otto() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let omega_h = 1.0;
        let t_h = rng.random_range(0.5..2.0);
        let t_c = t_h * rng.random_range(0.1..0.6);
        let omega_c = rng.random_range(t_c / t_h..1.0);
        let mut cfg = OttoConfig::new(omega_c, omega_h, t_c, t_h, rng.random_range(0.1..1.0));
        cfg.backend = Backend::Gaussian;
        cfg.stroke_time = 25.0;
        let a = run_modified_otto(&cfg).unwrap();
        let b = run_equivalent_hybrid(&cfg).unwrap();
        assert!(b.external_work > 0.0);
        assert_abs_diff_eq!(a.net_work, b.net_work, epsilon = 1e-6);
        assert_abs_diff_eq!(a.efficiency, b.efficiency, epsilon = 1e-6);
    }
}

#[test]
fn refrigerating_engine_has_unit_efficiency() {
    let mut cfg = OttoConfig::new(0.2, 1.0, 0.5, 1.0, 0.8);
    cfg.backend = Backend::Gaussian;
    cfg.stroke_time = 25.0;
    let res = run_modified_otto(&cfg).unwrap();
    assert_eq!(res.regime, Regime::EngineAndRefrigerator);
    assert_eq!(res.efficiency, 1.0);
    assert!(res.eta_sigma > 1.0);
    assert!(res.cold_exchange > 0.0);
}

#[test]
fn second_kind_engine_stays_below_real_carnot() {
    let mut cfg = OttoConfig::new(0.5, 1.0, 0.3, 1.0, 0.7);
    cfg.backend = Backend::Gaussian;
    cfg.hot_bath = HotBath::SecondKind;
    cfg.stroke_time = 25.0;
    let res = run_modified_otto(&cfg).unwrap();
    assert_eq!(res.regime, Regime::SecondKind);
    assert_abs_diff_eq!(res.efficiency, 0.5, epsilon = 1e-9);
    assert!(res.efficiency < res.eta_carnot);
    let t_real = cfg.analytic().t_h_real;
    assert_abs_diff_eq!(res.eta_carnot, 1.0 - 0.3 / t_real, epsilon = 1e-12);
}

#[test]
fn slow_carnot_approaches_eta_max() {
    let cfg = CarnotConfig {
        omega_c: 2.0,
        omega_h: 2.5,
        t_c: 1.0,
        t_h: 2.0,
        r: 0.2,
        kappa: 1.0,
        ramp_rate: 0.01,
        fock_dim: 30,
        store_every: 1.0,
    };
    let res = run_modified_carnot(&cfg).unwrap();
    assert_eq!(res.regime, Regime::Engine);
    assert!(res.efficiency <= res.eta_max + 1e-9);
    assert!(
        (res.eta_max - res.efficiency) <= 0.03 * res.eta_max,
        "eta {} vs eta_max {}",
        res.efficiency,
        res.eta_max
    );
}
