//! Engine cycles driven by a squeezed thermal bath, and their efficiency
//! bounds.
//!
//! A cycle is a list of strokes, each with its own [`EnergyLedger`]. The
//! piston work is the sum of the stroke works (negative when the engine
//! delivers work); the efficiency is `-W / E_d,h`.
//!
//! Adiabatic strokes are population-preserving frequency maps: the state is
//! left as it is and only `H = omega a^dagger a` changes.

use std::sync::Arc;

use crate::entropy_bounds::{squeezed_frame_hamiltonian, ZERO_TEMPERATURE};
use crate::error::{Error, Result};
use crate::gaussian::{squeezed_bath_relaxation, GaussianState};
use crate::lindblad::{
    integrate, late_change, squeezed_bath_generator, squeezed_bath_ramp, squeezing_excess, IntegrationConfig,
};
use crate::passivity::{ledger_for_stroke, passive_state, EnergyLedger, StrokeKind, Trajectory};
use crate::quantum_core::{
    bose_occupation, bose_temperature, gibbs_state, number_operator, squeeze_state, DensityOperator, HilbertSpace,
    Operator,
};

/// Ratio `T_c / T_h` with the zero-temperature conventions: `0` when only
/// `T_c` vanishes, `NaN` when both do.
fn temperature_ratio(t_c: f64, t_h: f64) -> f64 {
    match (t_c < ZERO_TEMPERATURE, t_h < ZERO_TEMPERATURE) {
        (true, true) => f64::NAN,
        (true, false) => 0.0,
        (false, true) => f64::INFINITY,
        (false, false) => t_c / t_h,
    }
}

pub fn eta_carnot(t_c: f64, t_h: f64) -> f64 {
    1.0 - temperature_ratio(t_c, t_h)
}

/// `eta_max = 1 - (T_c / T_h) Q'_h / E_d,h`, valid while the hot bath
/// supplies energy (`E_d,h > 0`) and heat (`Q'_h >= 0`).
pub fn eta_max_general(t_c: f64, t_h: f64, q_prime_h: f64, e_dh: f64) -> Result<f64> {
    if !(e_dh > 0.0) {
        return Err(Error::Regime(format!("E_d,h = {e_dh} must be positive")));
    }
    if !(q_prime_h >= 0.0) {
        return Err(Error::Regime(format!("Q'_h = {q_prime_h} must be non-negative")));
    }
    Ok(1.0 - temperature_ratio(t_c, t_h) * q_prime_h / e_dh)
}

/// `eta_Sigma = 1 - (T_c / T_h) E~_d,h / E_d,h`, the bound from the second
/// law alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaBound {
    pub value: f64,
    /// Set when the bound exceeds 1.
    pub unphysical: bool,
}

pub fn eta_sigma_general(t_c: f64, t_h: f64, e_tilde_dh: f64, e_dh: f64) -> Result<SigmaBound> {
    if !(e_dh > 0.0) {
        return Err(Error::Regime(format!("E_d,h = {e_dh} must be positive")));
    }
    let value = 1.0 - temperature_ratio(t_c, t_h) * e_tilde_dh / e_dh;
    Ok(SigmaBound {
        value,
        unphysical: value > 1.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// `E_d,h >= 0`, `E_d,c <= 0`.
    Engine,
    /// Work is delivered while the cold bath is also cooled; `eta = 1`.
    EngineAndRefrigerator,
    /// The hot bath thermalizes the working fluid at `T_h(real)`.
    SecondKind,
    NoEngine,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Engine => "engine",
            Regime::EngineAndRefrigerator => "engine_and_refrigerator",
            Regime::SecondKind => "second_kind",
            Regime::NoEngine => "no_engine",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OttoEfficiencies {
    pub eta: f64,
    pub eta_max: f64,
    pub eta_sigma: f64,
    pub sigma_unphysical: bool,
    pub regime: Regime,
}

/// Closed-form efficiencies of the modified Otto cycle.
///
/// `delta_n_c` defaults to `(2 n_c + 1) sinh^2 r` through
/// [`OttoAnalytic`]; pass `0` for the bare thermal reading. In the
/// engine-and-refrigerator regime (`n_c > n_h`) `eta = 1` and `eta_max` is
/// capped at 1.
#[allow(clippy::too_many_arguments)]
pub fn otto_efficiencies(
    n_c: f64,
    n_h: f64,
    delta_n_h: f64,
    delta_n_c: f64,
    omega_c: f64,
    omega_h: f64,
    t_c: f64,
    t_h: f64,
) -> Result<OttoEfficiencies> {
    let input = n_h + delta_n_h - n_c;
    if !(input > 0.0) {
        return Err(Error::Regime(format!(
            "no engine: n_h + dn_h - n_c = {input} must be positive"
        )));
    }
    let ratio = temperature_ratio(t_c, t_h);
    let eta_sigma = 1.0 - ratio * (n_h - n_c - delta_n_c) / input;
    if n_c > n_h {
        return Ok(OttoEfficiencies {
            eta: 1.0,
            eta_max: 1.0,
            eta_sigma,
            sigma_unphysical: eta_sigma > 1.0,
            regime: Regime::EngineAndRefrigerator,
        });
    }
    Ok(OttoEfficiencies {
        eta: 1.0 - (n_h - n_c) * omega_c / (input * omega_h),
        eta_max: 1.0 - ratio * (n_h - n_c) / input,
        eta_sigma,
        sigma_unphysical: eta_sigma > 1.0,
        regime: Regime::Engine,
    })
}

/// `W = -(omega_h - omega_c) sinh^2 r` at `T_c = T_h = 0`.
pub fn zero_temperature_work(omega_c: f64, omega_h: f64, r: f64) -> f64 {
    -(omega_h - omega_c) * r.sinh().powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Truncated Fock space with the Lindblad integrator.
    Fock,
    /// Closed-form Gaussian moments.
    Gaussian,
}

/// Hot bath of an Otto cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HotBath {
    /// Squeezed thermal bath at `T_h` with squeezing `r`.
    Squeezed,
    /// Thermal bath at the real temperature that reproduces the squeezed
    /// bath's excitation `n_h + dn_h`.
    SecondKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OttoConfig {
    pub omega_c: f64,
    pub omega_h: f64,
    pub t_c: f64,
    pub t_h: f64,
    pub r: f64,
    pub kappa: f64,
    pub stroke_time: f64,
    pub fock_dim: usize,
    pub backend: Backend,
    /// Include the unitary ergotropy-extraction stroke after the hot
    /// isochore.
    pub extraction: bool,
    pub hot_bath: HotBath,
    /// Override for the cold-stroke excess `dn_c` in `eta_Sigma`.
    pub delta_n_c: Option<f64>,
    pub store_every: f64,
}

impl OttoConfig {
    pub fn new(omega_c: f64, omega_h: f64, t_c: f64, t_h: f64, r: f64) -> Self {
        Self {
            omega_c,
            omega_h,
            t_c,
            t_h,
            r,
            kappa: 1.0,
            stroke_time: 14.0,
            fock_dim: 41,
            backend: Backend::Fock,
            extraction: true,
            hot_bath: HotBath::Squeezed,
            delta_n_c: None,
            store_every: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.omega_c,
            self.omega_h,
            self.kappa,
            self.stroke_time,
            self.store_every,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "frequencies, kappa, stroke_time and store_every must be positive".into(),
            ));
        }
        if !(self.t_c >= 0.0 && self.t_h >= 0.0 && self.r >= 0.0) {
            return Err(Error::Config("temperatures and squeezing must be non-negative".into()));
        }
        if self.omega_c > self.omega_h {
            return Err(Error::Config(format!(
                "omega_c = {} exceeds omega_h = {}",
                self.omega_c, self.omega_h
            )));
        }
        if self.t_c > self.t_h {
            return Err(Error::Config(format!("T_c = {} exceeds T_h = {}", self.t_c, self.t_h)));
        }
        if self.fock_dim < 2 {
            return Err(Error::Config("fock_dim must be at least 2".into()));
        }
        Ok(())
    }

    pub fn analytic(&self) -> OttoAnalytic {
        OttoAnalytic::new(self)
    }
}

/// Occupations and closed forms of one Otto configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OttoAnalytic {
    pub n_c: f64,
    pub n_h: f64,
    /// `(2 n_h + 1) sinh^2 r`.
    pub delta_n_h: f64,
    /// `(2 n_c + 1) sinh^2 r`: the excess of `S^dagger rho S` over the
    /// thermal state entering the hot stroke.
    pub delta_n_c: f64,
    /// `T_h(real)` with `n_B(omega_h, T_h(real)) = n_h + dn_h`.
    pub t_h_real: f64,
}

impl OttoAnalytic {
    pub fn new(cfg: &OttoConfig) -> Self {
        let n_c = bose_occupation(cfg.omega_c, cfg.t_c);
        let n_h = bose_occupation(cfg.omega_h, cfg.t_h);
        let delta_n_h = squeezing_excess(n_h, cfg.r);
        let delta_n_c = cfg.delta_n_c.unwrap_or_else(|| squeezing_excess(n_c, cfg.r));
        Self {
            n_c,
            n_h,
            delta_n_h,
            delta_n_c,
            t_h_real: bose_temperature(cfg.omega_h, n_h + delta_n_h),
        }
    }

    /// `(eta, eta_max, eta_Sigma)` of the cycle with extraction stroke.
    pub fn efficiencies(&self, cfg: &OttoConfig) -> Result<OttoEfficiencies> {
        otto_efficiencies(
            self.n_c,
            self.n_h,
            self.delta_n_h,
            self.delta_n_c,
            cfg.omega_c,
            cfg.omega_h,
            cfg.t_c,
            cfg.t_h,
        )
    }

    /// Net piston work of the cycle with (`extraction`) or without the
    /// ergotropy-extraction stroke.
    pub fn net_work(&self, cfg: &OttoConfig, extraction: bool) -> f64 {
        let (wc, wh) = (cfg.omega_c, cfg.omega_h);
        if extraction {
            -(wh * (self.n_h + self.delta_n_h - self.n_c) + wc * (self.n_c - self.n_h))
        } else {
            -(wh - wc) * (self.n_h + self.delta_n_h - self.n_c)
        }
    }
}

/// Per-cycle flags collected from the numerical strokes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CycleFlags {
    pub slow_driving_violated: bool,
    pub truncation_weight: f64,
    pub positivity_repair: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CycleResult {
    pub stroke_names: Vec<&'static str>,
    pub stroke_ledgers: Vec<EnergyLedger>,
    /// Piston work (negative when delivered); excludes external work.
    pub net_work: f64,
    pub efficiency: f64,
    pub eta_max: f64,
    pub eta_sigma: f64,
    pub eta_carnot: f64,
    pub regime: Regime,
    /// Energy supplied by the hot side: `E_d,h`, plus `W_ext` in the hybrid
    /// cycle.
    pub hot_input: f64,
    pub cold_exchange: f64,
    /// `Q'_h`.
    pub hot_heat: f64,
    /// `E~_d,h`.
    pub hot_energy_tilde: f64,
    /// Work invested by the external source of the hybrid cycle.
    pub external_work: f64,
    /// `|sum of stroke Delta E|`.
    pub cyclicity_residual: f64,
    pub flags: CycleFlags,
}

/// Regime and efficiency from the cycle's hot/cold energies and piston work.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    pub efficiency: f64,
    /// Carnot bound at `T_h`, or at `T_h(real)` for the second kind.
    pub carnot_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BathKind {
    FirstKind,
    SecondKind { t_h_real: f64 },
}

/// Classifies a completed cycle. `ledgers` must close (sum of `Delta E`
/// within `1e-6 x scale`), where `scale` is the largest stroke energy
/// change, floored at 1.
pub fn classify_regime(
    ledgers: &[EnergyLedger],
    hot_input: f64,
    cold_exchange: f64,
    piston_work: f64,
    t_c: f64,
    t_h: f64,
    bath: BathKind,
) -> Result<RegimeReport> {
    let scale = ledgers.iter().fold(1.0f64, |a, l| a.max(l.delta_energy.abs()));
    let residual: f64 = ledgers.iter().map(|l| l.delta_energy).sum::<f64>().abs();
    if residual > 1e-6 * scale {
        return Err(Error::Model(format!(
            "cycle does not close: sum of stroke energy changes {residual:e}"
        )));
    }
    let delivers = piston_work < 0.0 && hot_input > 0.0;
    let efficiency = if delivers { -piston_work / hot_input } else { 0.0 };
    if let BathKind::SecondKind { t_h_real } = bath {
        return Ok(RegimeReport {
            regime: if delivers { Regime::SecondKind } else { Regime::NoEngine },
            efficiency,
            carnot_bound: eta_carnot(t_c, t_h_real),
        });
    }
    let carnot_bound = eta_carnot(t_c, t_h);
    let (regime, efficiency) = if !delivers {
        (Regime::NoEngine, 0.0)
    } else if cold_exchange > 0.0 {
        (Regime::EngineAndRefrigerator, 1.0)
    } else {
        (Regime::Engine, efficiency)
    };
    Ok(RegimeReport {
        regime,
        efficiency,
        carnot_bound,
    })
}

fn thermal_fock(space: HilbertSpace, omega: f64, t: f64) -> Result<DensityOperator> {
    if t < ZERO_TEMPERATURE {
        return DensityOperator::fock(space, 0);
    }
    gibbs_state(&number_operator(space).scaled(omega), t)
}

struct FockCycle {
    space: HilbertSpace,
    names: Vec<&'static str>,
    ledgers: Vec<EnergyLedger>,
    flags: CycleFlags,
}

impl FockCycle {
    fn new(space: HilbertSpace) -> Self {
        Self {
            space,
            names: vec![],
            ledgers: vec![],
            flags: CycleFlags::default(),
        }
    }

    fn h(&self, omega: f64) -> Operator {
        number_operator(self.space).scaled(omega)
    }

    fn unitary(
        &mut self,
        name: &'static str,
        rho0: &DensityOperator,
        w0: f64,
        rho1: DensityOperator,
        w1: f64,
    ) -> Result<DensityOperator> {
        let traj = Trajectory::two_point(StrokeKind::Unitary, rho0.clone(), self.h(w0), rho1.clone(), self.h(w1))?;
        self.names.push(name);
        self.ledgers.push(ledger_for_stroke(&traj)?);
        Ok(rho1)
    }

    /// Ergotropy extraction: the unitary onto the passive state. On a
    /// squeezed thermal state this is the unsqueezing `S(r)^dagger`, but it
    /// acts within the truncated space and so cannot leak weight.
    fn extract(&mut self, rho: &DensityOperator, omega: f64) -> Result<DensityOperator> {
        let passive = passive_state(rho, &self.h(omega))?.passive_state;
        self.unitary("extraction", rho, omega, passive, omega)
    }

    fn record(&mut self, name: &'static str, traj: &Trajectory) -> Result<EnergyLedger> {
        let l = ledger_for_stroke(traj)?;
        let f = &traj.meta.flags;
        self.flags.slow_driving_violated |= f.slow_driving_violated;
        self.flags.truncation_weight = self.flags.truncation_weight.max(f.truncation_weight);
        self.flags.positivity_repair = self.flags.positivity_repair.max(f.positivity_repair);
        self.names.push(name);
        self.ledgers.push(l);
        Ok(l)
    }
}

/// `||rho(t_end) - rho(t_end - 1/kappa)||_tr < 1e-7`.
fn require_stationary(traj: &Trajectory, kappa: f64, stroke: &str) -> Result<()> {
    let change = late_change(traj, 1.0 / kappa)?;
    if change >= 1e-7 {
        return Err(Error::NotStationary(format!(
            "{stroke}: state still changes by {change:e} per 1/kappa; increase stroke_time"
        )));
    }
    Ok(())
}

/// Energy change of `S^dagger rho S` between two states at fixed `H`.
fn squeezed_frame_change(rho0: &DensityOperator, rho1: &DensityOperator, h: &Operator, r: f64) -> Result<f64> {
    let ht = squeezed_frame_hamiltonian(h, r)?;
    Ok(ht.expectation(rho1) - ht.expectation(rho0))
}

/// Modified Otto cycle: adiabatic compression, squeezed-bath isochore,
/// unsqueezing (ergotropy extraction), adiabatic expansion, cold thermal
/// isochore. With `extraction = false` the unsqueezing stroke is skipped
/// and the squeezed state goes straight into the expansion.
pub fn run_modified_otto(cfg: &OttoConfig) -> Result<CycleResult> {
    cfg.validate()?;
    match cfg.backend {
        Backend::Fock => otto_fock(cfg, false),
        Backend::Gaussian => otto_gaussian(cfg, false),
    }
}

/// Thermal hot isochore at `T_h`, followed by an external unitary that
/// squeezes the working fluid into the state the squeezed bath would have
/// produced (`W_ext` = its ergotropy), then the same remaining strokes.
pub fn run_equivalent_hybrid(cfg: &OttoConfig) -> Result<CycleResult> {
    cfg.validate()?;
    match cfg.backend {
        Backend::Fock => otto_fock(cfg, true),
        Backend::Gaussian => otto_gaussian(cfg, true),
    }
}

fn otto_fock(cfg: &OttoConfig, hybrid: bool) -> Result<CycleResult> {
    let a = cfg.analytic();
    let space = HilbertSpace::new(cfg.fock_dim)?;
    let mut cycle = FockCycle::new(space);
    let icfg = IntegrationConfig::default().with_store_every(cfg.store_every);
    let (wc, wh) = (cfg.omega_c, cfg.omega_h);

    let rho0 = thermal_fock(space, wc, cfg.t_c)?;
    let rho = cycle.unitary("compression", &rho0, wc, rho0.clone(), wh)?;

    let (bath_n, bath_r) = match (cfg.hot_bath, hybrid) {
        (HotBath::SecondKind, _) => (a.n_h + a.delta_n_h, 0.0),
        (HotBath::Squeezed, true) => (a.n_h, 0.0),
        (HotBath::Squeezed, false) => (a.n_h, cfg.r),
    };
    let gen = squeezed_bath_generator(cfg.kappa, bath_n, bath_r, wh, space)?;
    let hot = integrate(&gen, &rho, (0.0, cfg.stroke_time), &icfg)?;
    require_stationary(&hot, cfg.kappa, "hot isochore")?;
    let hot_ledger = cycle.record("hot_isochore", &hot)?;
    let mut rho = hot.last_state().clone();
    let e_tilde = squeezed_frame_change(hot.first_state(), &rho, &cycle.h(wh), cfg.r)?;

    let mut external_work = 0.0;
    let squeezes = cfg.hot_bath == HotBath::Squeezed && cfg.r > 0.0;
    if hybrid && squeezes {
        let squeezed = squeeze_state(&rho, cfg.r)?;
        rho = cycle.unitary("external_squeezing", &rho, wh, squeezed, wh)?;
        external_work = cycle.ledgers.last().expect("pushed").work;
    }
    if cfg.extraction && squeezes {
        rho = cycle.extract(&rho, wh)?;
    }
    let rho = cycle.unitary("expansion", &rho, wh, rho.clone(), wc)?;

    let cold_gen = squeezed_bath_generator(cfg.kappa, a.n_c, 0.0, wc, space)?;
    let cold = integrate(&cold_gen, &rho, (0.0, cfg.stroke_time), &icfg)?;
    require_stationary(&cold, cfg.kappa, "cold isochore")?;
    let cold_ledger = cycle.record("cold_isochore", &cold)?;

    let hot_input = hot_ledger.dissipative_energy + external_work;
    finish(
        cfg,
        cycle.names,
        cycle.ledgers,
        hot_input,
        cold_ledger.dissipative_energy,
        hot_ledger.heat,
        e_tilde,
        external_work,
        cycle.flags,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cfg: &OttoConfig,
    stroke_names: Vec<&'static str>,
    stroke_ledgers: Vec<EnergyLedger>,
    hot_input: f64,
    cold_exchange: f64,
    hot_heat: f64,
    hot_energy_tilde: f64,
    external_work: f64,
    flags: CycleFlags,
) -> Result<CycleResult> {
    let piston: f64 = stroke_names
        .iter()
        .zip(&stroke_ledgers)
        .filter(|(n, _)| **n != "external_squeezing")
        .map(|(_, l)| l.work)
        .sum();
    let bath = match cfg.hot_bath {
        HotBath::SecondKind => BathKind::SecondKind {
            t_h_real: cfg.analytic().t_h_real,
        },
        HotBath::Squeezed => BathKind::FirstKind,
    };
    let rep = classify_regime(
        &stroke_ledgers,
        hot_input,
        cold_exchange,
        piston,
        cfg.t_c,
        cfg.t_h,
        bath,
    )?;
    let cyclicity_residual = stroke_ledgers.iter().map(|l| l.delta_energy).sum::<f64>().abs();
    let (eta_max, eta_sigma) = if hot_input > 0.0 {
        let em = match rep.regime {
            Regime::EngineAndRefrigerator => 1.0,
            _ => eta_max_general(cfg.t_c, cfg.t_h, hot_heat.max(0.0), hot_input)?,
        };
        (
            em,
            eta_sigma_general(cfg.t_c, cfg.t_h, hot_energy_tilde, hot_input)?.value,
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(CycleResult {
        stroke_names,
        stroke_ledgers,
        net_work: piston,
        efficiency: rep.efficiency,
        eta_max,
        eta_sigma,
        eta_carnot: rep.carnot_bound,
        regime: rep.regime,
        hot_input,
        cold_exchange,
        hot_heat,
        hot_energy_tilde,
        external_work,
        cyclicity_residual,
        flags,
    })
}

/// Ledger of a fixed-`H` bath stroke between two Gaussian states.
fn gaussian_isochore(s0: &GaussianState, s1: &GaussianState, omega: f64) -> Result<EnergyLedger> {
    let e0 = crate::gaussian::gaussian_energy_ergotropy(s0, omega)?;
    let e1 = crate::gaussian::gaussian_energy_ergotropy(s1, omega)?;
    let de = e1.energy - e0.energy;
    let heat = e1.passive_energy - e0.passive_energy;
    Ok(EnergyLedger {
        work: 0.0,
        dissipative_energy: de,
        heat,
        dissipative_ergotropy: de - heat,
        delta_energy: de,
    })
}

fn gaussian_unitary(s0: &GaussianState, w0: f64, s1: &GaussianState, w1: f64) -> EnergyLedger {
    let de = w1 * s1.mean_number() - w0 * s0.mean_number();
    EnergyLedger {
        work: de,
        delta_energy: de,
        ..EnergyLedger::default()
    }
}

/// `Tr[rho S H S^dagger]` for a Gaussian state and `H = omega b^dagger b`.
fn gaussian_squeezed_frame_energy(s: &GaussianState, omega: f64, r: f64) -> f64 {
    let (re_b2, _) = s.b_squared();
    omega * ((2.0 * r).cosh() * s.mean_number() + r.sinh().powi(2) + (2.0 * r).sinh() * re_b2)
}

fn otto_gaussian(cfg: &OttoConfig, hybrid: bool) -> Result<CycleResult> {
    let a = cfg.analytic();
    let (wc, wh) = (cfg.omega_c, cfg.omega_h);
    let mut names = vec![];
    let mut ledgers = vec![];
    let s0 = GaussianState::thermal(a.n_c);
    names.push("compression");
    ledgers.push(gaussian_unitary(&s0, wc, &s0, wh));

    let (bath_n, bath_r) = match (cfg.hot_bath, hybrid) {
        (HotBath::SecondKind, _) => (a.n_h + a.delta_n_h, 0.0),
        (HotBath::Squeezed, true) => (a.n_h, 0.0),
        (HotBath::Squeezed, false) => (a.n_h, cfg.r),
    };
    let s_hot = squeezed_bath_relaxation(&s0, cfg.kappa, bath_n, bath_r, cfg.stroke_time)?;
    let hot_ledger = gaussian_isochore(&s0, &s_hot, wh)?;
    names.push("hot_isochore");
    ledgers.push(hot_ledger);
    let e_tilde = gaussian_squeezed_frame_energy(&s_hot, wh, cfg.r) - gaussian_squeezed_frame_energy(&s0, wh, cfg.r);

    let mut s = s_hot;
    let mut external_work = 0.0;
    let squeezes = cfg.hot_bath == HotBath::Squeezed && cfg.r > 0.0;
    if hybrid && squeezes {
        let sq = crate::gaussian::squeeze_gaussian(&s, cfg.r);
        let l = gaussian_unitary(&s, wh, &sq, wh);
        external_work = l.work;
        names.push("external_squeezing");
        ledgers.push(l);
        s = sq;
    }
    if cfg.extraction && squeezes {
        let un = crate::gaussian::squeeze_gaussian(&s, -cfg.r);
        names.push("extraction");
        ledgers.push(gaussian_unitary(&s, wh, &un, wh));
        s = un;
    }
    names.push("expansion");
    ledgers.push(gaussian_unitary(&s, wh, &s, wc));
    let s_cold = squeezed_bath_relaxation(&s, cfg.kappa, a.n_c, 0.0, cfg.stroke_time)?;
    let cold_ledger = gaussian_isochore(&s, &s_cold, wc)?;
    names.push("cold_isochore");
    ledgers.push(cold_ledger);

    finish(
        cfg,
        names,
        ledgers,
        hot_ledger.dissipative_energy + external_work,
        cold_ledger.dissipative_energy,
        hot_ledger.heat,
        e_tilde,
        external_work,
        CycleFlags::default(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct CarnotConfig {
    pub omega_c: f64,
    pub omega_h: f64,
    pub t_c: f64,
    pub t_h: f64,
    pub r: f64,
    pub kappa: f64,
    /// `|d omega / dt|` on the isothermal strokes.
    pub ramp_rate: f64,
    pub fock_dim: usize,
    pub store_every: f64,
}

impl CarnotConfig {
    /// `omega_2 = omega_c T_h / T_c`, end of the adiabatic compression.
    pub fn omega_2(&self) -> f64 {
        self.omega_c * self.t_h / self.t_c
    }

    /// `omega_1 = omega_h T_c / T_h`, end of the adiabatic expansion.
    pub fn omega_1(&self) -> f64 {
        self.omega_h * self.t_c / self.t_h
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.omega_c,
            self.omega_h,
            self.t_c,
            self.t_h,
            self.kappa,
            self.ramp_rate,
            self.store_every,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("Carnot parameters must be positive".into()));
        }
        if !(self.r >= 0.0) || self.t_c >= self.t_h {
            return Err(Error::Config("need r >= 0 and T_c < T_h".into()));
        }
        if self.omega_h > self.omega_2() {
            return Err(Error::Config(format!(
                "omega_h = {} exceeds omega_2 = {}",
                self.omega_h,
                self.omega_2()
            )));
        }
        Ok(())
    }
}

/// Five-stroke Carnot cycle with a squeezed hot bath: adiabatic compression
/// to `omega_2`, isothermal expansion to `omega_h` in the squeezed bath,
/// unsqueezing, adiabatic expansion to `omega_1`, isothermal compression
/// back to `omega_c` in the cold thermal bath.
pub fn run_modified_carnot(cfg: &CarnotConfig) -> Result<CycleResult> {
    cfg.validate()?;
    let space = HilbertSpace::new(cfg.fock_dim)?;
    let mut cycle = FockCycle::new(space);
    let icfg = IntegrationConfig::default().with_store_every(cfg.store_every);
    let (w1, w2) = (cfg.omega_1(), cfg.omega_2());

    let rho0 = thermal_fock(space, cfg.omega_c, cfg.t_c)?;
    let rho = cycle.unitary("compression", &rho0, cfg.omega_c, rho0.clone(), w2)?;

    let rate = cfg.ramp_rate;
    let hot_time = (w2 - cfg.omega_h) / rate;
    let mut hot_ledger = EnergyLedger::default();
    let mut e_tilde = 0.0;
    let mut rho = rho;
    if hot_time > 0.0 {
        let omega = Arc::new(move |t: f64| w2 - rate * t);
        let gen = squeezed_bath_ramp(cfg.kappa, cfg.t_h, cfg.r, omega, space, "hot_isotherm")?;
        let hot = integrate(&gen, &rho, (0.0, hot_time), &icfg)?;
        hot_ledger = cycle.record("hot_isotherm", &hot)?;
        let aux = crate::entropy_bounds::auxiliary_passive_path(&hot, &gen, &icfg)?;
        let profile = crate::entropy_bounds::bound_profile(&hot, &aux, &gen)?;
        let last = profile.last().expect("non-empty");
        // profile values are divided by T_h
        hot_ledger.heat = last.tight * cfg.t_h;
        e_tilde = last.second_law * cfg.t_h;
        rho = hot.last_state().clone();
    }
    if cfg.r > 0.0 {
        rho = cycle.extract(&rho, cfg.omega_h)?;
    }
    let rho = cycle.unitary("expansion", &rho, cfg.omega_h, rho.clone(), w1)?;

    let cold_time = (cfg.omega_c - w1) / rate;
    let omega = Arc::new(move |t: f64| w1 + rate * t);
    let gen = squeezed_bath_ramp(cfg.kappa, cfg.t_c, 0.0, omega, space, "cold_isotherm")?;
    let cold = integrate(&gen, &rho, (0.0, cold_time), &icfg)?;
    let mut cold_ledger = cycle.record("cold_isotherm", &cold)?;
    // a finite ramp leaves the state lagging behind the Gibbs state; a short
    // isochore at omega_c closes the cycle
    let close_gen = squeezed_bath_generator(
        cfg.kappa,
        bose_occupation(cfg.omega_c, cfg.t_c),
        0.0,
        cfg.omega_c,
        space,
    )?;
    let close = integrate(&close_gen, cold.last_state(), (0.0, 14.0 / cfg.kappa), &icfg)?;
    require_stationary(&close, cfg.kappa, "closing isochore")?;
    cold_ledger.dissipative_energy += cycle.record("closing_isochore", &close)?.dissipative_energy;
    if cycle.flags.slow_driving_violated {
        return Err(Error::Regime(format!(
            "ramp rate {rate} violates slow driving; lower ramp_rate"
        )));
    }

    let otto_like = OttoConfig {
        omega_c: cfg.omega_c,
        omega_h: cfg.omega_h,
        t_c: cfg.t_c,
        t_h: cfg.t_h,
        r: cfg.r,
        kappa: cfg.kappa,
        stroke_time: hot_time.max(1e-9),
        fock_dim: cfg.fock_dim,
        backend: Backend::Fock,
        extraction: true,
        hot_bath: HotBath::Squeezed,
        delta_n_c: None,
        store_every: cfg.store_every,
    };
    finish(
        &otto_like,
        cycle.names,
        cycle.ledgers,
        hot_ledger.dissipative_energy,
        cold_ledger.dissipative_energy,
        hot_ledger.heat,
        e_tilde,
        0.0,
        cycle.flags,
    )
}

/// Root of a sign change of `f` on `[lo, hi]` by bisection to `tol`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (mut f_lo, f_hi) = (f(lo), f(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Domain(format!("no sign change on [{lo}, {hi}]")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest squeezing for which the hot bath supplies energy,
/// `n_h + dn_h(r) = n_c` (sign change of `E_d,h`).
pub fn engine_threshold_squeezing(cfg: &OttoConfig, r_max: f64) -> Result<f64> {
    let base = cfg.analytic();
    bisect(
        |r| base.n_h + squeezing_excess(base.n_h, r) - base.n_c,
        0.0,
        r_max,
        1e-12,
    )
}

/// Frequency ratio `omega_c / omega_h` at which `E_d,c` changes sign
/// (`n_c = n_h`), i.e. where the engine starts cooling the cold bath.
pub fn refrigeration_threshold_ratio(cfg: &OttoConfig) -> Result<f64> {
    let n_h = bose_occupation(cfg.omega_h, cfg.t_h);
    bisect(|x| bose_occupation(x * cfg.omega_h, cfg.t_c) - n_h, 1e-6, 1.0, 1e-12)
}
