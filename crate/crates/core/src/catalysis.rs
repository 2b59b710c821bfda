//! Catalyzed heat engine: a qubit working fluid between a hot and a cold
//! bath, dispersively coupled to a harmonic piston that may be pumped
//! linearly or quadratically.
//!
//! The piston obeys the reduced master equation with drift `Gamma` and
//! diffusion `D` set by the bath spectra at `omega_0 +- nu`. Everything here
//! is closed-form Gaussian evaluation (see [`crate::gaussian`]); the Fock
//! cross-check goes through [`crate::lindblad::piston_generator`].

use crate::error::{Error, Result};
use crate::gaussian::{evolve, gaussian_energy_ergotropy, n_passive, rates_at, GaussianBathDrive, GaussianState};
use crate::lindblad::PumpKind;

const KMS_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-8;
/// Occupation beyond which the linear gain model is not followed further.
pub const OCCUPATION_CAP: f64 = 1e6;

/// Point values of one bath's response spectrum `G_j(omega)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BathSpectrum {
    values: Vec<(f64, f64)>,
    pub temperature: f64,
}

fn same_frequency(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl BathSpectrum {
    /// Validates `G >= 0` and KMS on every stored `+-omega` pair.
    pub fn new(temperature: f64, values: Vec<(f64, f64)>) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::Config(format!(
                "bath temperature {temperature} must be positive"
            )));
        }
        if let Some((w, g)) = values.iter().find(|(w, g)| !w.is_finite() || !(*g >= 0.0)) {
            return Err(Error::Config(format!("G({w}) = {g} must be finite and non-negative")));
        }
        let s = Self { values, temperature };
        for &(w, g) in s.values.iter().filter(|(w, _)| *w > 0.0) {
            if let Some(gm) = s.get(-w) {
                let expect = (w / temperature).exp() * gm;
                if (g - expect).abs() > KMS_TOL * g.max(1.0) {
                    return Err(Error::Config(format!(
                        "KMS violated at omega = {w}: G = {g}, e^(omega/T) G(-omega) = {expect}"
                    )));
                }
            }
        }
        Ok(s)
    }

    /// Builds the spectrum from its positive-frequency values, filling in
    /// `G(-omega) = e^{-omega/T} G(omega)`.
    pub fn from_positive(temperature: f64, positive: &[(f64, f64)]) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::Config(format!(
                "bath temperature {temperature} must be positive"
            )));
        }
        let mut values = Vec::with_capacity(2 * positive.len());
        for &(w, g) in positive {
            if !(w > 0.0) {
                return Err(Error::Config(format!("frequency {w} must be positive")));
            }
            values.push((w, g));
            values.push((-w, (-w / temperature).exp() * g));
        }
        Self::new(temperature, values)
    }

    pub fn get(&self, omega: f64) -> Option<f64> {
        self.values
            .iter()
            .find(|(w, _)| same_frequency(*w, omega))
            .map(|(_, g)| *g)
    }

    pub fn values(&self) -> &[(f64, f64)] {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QubitPopulations {
    /// `(rho_00, rho_11)`.
    Explicit(f64, f64),
    /// Steady state of the qubit under both baths at `omega_0`.
    Derive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalysisConfig {
    pub omega0: f64,
    pub nu: f64,
    pub g: f64,
    pub kappa_pump: f64,
    pub pump_kind: PumpKind,
    pub hot: BathSpectrum,
    pub cold: BathSpectrum,
    pub populations: QubitPopulations,
}

impl CatalysisConfig {
    pub fn omega_plus(&self) -> f64 {
        self.omega0 + self.nu
    }

    pub fn omega_minus(&self) -> f64 {
        self.omega0 - self.nu
    }

    /// `nu / omega_+`.
    pub fn eta_max(&self) -> f64 {
        self.nu / self.omega_plus()
    }

    pub fn eta_carnot(&self) -> f64 {
        1.0 - self.cold.temperature / self.hot.temperature
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.g >= 0.0) {
            return Err(Error::Config("need nu > 0 and g >= 0".into()));
        }
        if self.g / self.nu > 0.2 {
            return Err(Error::Config(format!(
                "g/nu = {} exceeds the weak dispersive limit 0.2",
                self.g / self.nu
            )));
        }
        if !(self.omega_minus() > 0.0) {
            return Err(Error::Config("omega_0 - nu must be positive".into()));
        }
        if !(self.kappa_pump.abs() <= 1.0) {
            return Err(Error::Config(format!("|kappa| = {} exceeds 1", self.kappa_pump.abs())));
        }
        if self.cold.temperature >= self.hot.temperature {
            return Err(Error::Config("cold bath must be colder than the hot bath".into()));
        }
        if self.eta_max() > self.eta_carnot() + 1e-12 {
            return Err(Error::Config(format!(
                "nu/omega_+ = {} exceeds the Carnot efficiency {}",
                self.eta_max(),
                self.eta_carnot()
            )));
        }
        if let QubitPopulations::Explicit(p0, p1) = self.populations {
            if !(p0 >= 0.0 && p1 >= 0.0 && (p0 + p1 - 1.0).abs() < 1e-9) {
                return Err(Error::Config(format!(
                    "qubit populations ({p0}, {p1}) must be a distribution"
                )));
            }
        }
        Ok(())
    }

    /// Summed response `G = G_h + G_c` at `omega`.
    fn total(&self, omega: f64) -> Result<f64> {
        match (self.hot.get(omega), self.cold.get(omega)) {
            (Some(h), Some(c)) => Ok(h + c),
            _ => Err(Error::Config(format!(
                "bath spectra are missing the point omega = {omega}"
            ))),
        }
    }
}

/// `(rho_00, rho_11)`; derived ones satisfy `rho_11 / rho_00 = G(-omega_0) / G(omega_0)`.
pub fn resolve_qubit_populations(cfg: &CatalysisConfig) -> Result<(f64, f64)> {
    match cfg.populations {
        QubitPopulations::Explicit(p0, p1) => Ok((p0, p1)),
        QubitPopulations::Derive => {
            let up = cfg.total(cfg.omega0)?;
            if up <= 0.0 {
                return Err(Error::Config(
                    "G(omega_0) = 0: the qubit populations must be given explicitly".into(),
                ));
            }
            let ratio = cfg.total(-cfg.omega0)? / up;
            Ok((1.0 / (1.0 + ratio), ratio / (1.0 + ratio)))
        }
    }
}

/// Drift `Gamma` and diffusion `D` of the piston.
pub fn drift_diffusion(cfg: &CatalysisConfig) -> Result<(f64, f64)> {
    let (p0, p1) = resolve_qubit_populations(cfg)?;
    let (wp, wm) = (cfg.omega_plus(), cfg.omega_minus());
    let c = (cfg.g / cfg.nu).powi(2);
    let gamma = c * ((cfg.total(wp)? - cfg.total(wm)?) * p1 + (cfg.total(-wm)? - cfg.total(-wp)?) * p0);
    let diffusion = c * (cfg.total(wm)? * p1 + cfg.total(-wp)? * p0);
    if diffusion + gamma < -1e-15 {
        return Err(Error::Model(format!("D + Gamma = {} is negative", diffusion + gamma)));
    }
    Ok((gamma, diffusion))
}

/// The piston drive implied by `cfg`.
pub fn piston_drive(cfg: &CatalysisConfig) -> Result<GaussianBathDrive> {
    let (gamma, diffusion) = drift_diffusion(cfg)?;
    GaussianBathDrive::new(gamma, diffusion, cfg.kappa_pump, cfg.pump_kind)
}

/// Rates and energetics of the piston at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct EnginePoint {
    pub time: f64,
    pub piston: GaussianState,
    /// `d<H_P>/dt - T_P dS_P/dt - dW_pump/dt`.
    pub power_max: f64,
    /// `dW_pump/dt`.
    pub pump_power: f64,
    /// `d<H_P>/dt`.
    pub energy_rate: f64,
    /// `dQ_SP/h / dt`.
    pub heat_flux_h: f64,
    /// `power_max / heat_flux_h`, `NaN` when no heat flows in.
    pub eta: f64,
    pub ergotropy: f64,
    pub n_pas: f64,
    pub n_pas_rate: f64,
    /// Squeezing `r(t)` of the piston.
    pub r: f64,
    /// Residual of `d<H_P>/dt - dW_pump/dt = (nu/omega_+) dQ/dt`, relative
    /// to the largest gross rate entering it.
    pub identity_residual: f64,
}

/// `dQ_SP/h / dt = -omega_+ Gamma <b^dagger b> + omega_+ D`, checked against
/// the expanded Gaussian form
/// `omega_+ (D + Gamma/2) - omega_+ Gamma [(n_pas + 1/2) cosh 2r + x1^2 + x2^2]`.
pub fn heat_flux_hot(state: &GaussianState, drive: &GaussianBathDrive, omega_plus: f64) -> Result<f64> {
    let (gamma, d) = (drive.gamma, drive.diffusion);
    let direct = -omega_plus * gamma * state.mean_number() + omega_plus * d;
    let p = n_passive(state)?;
    let means = state.x1_mean.powi(2) + state.x2_mean.powi(2);
    let expanded = omega_plus * (d + 0.5 * gamma) - omega_plus * gamma * ((p.n_pas + 0.5) * (2.0 * p.r).cosh() + means);
    let scale = direct
        .abs()
        .max(expanded.abs())
        .max(omega_plus * d.abs().max(gamma.abs()));
    if (direct - expanded).abs() > IDENTITY_TOL * scale {
        return Err(Error::Model(format!(
            "heat flux forms disagree: {direct} vs {expanded}"
        )));
    }
    Ok(direct)
}

/// `dn_pas/dt` from the exact covariance rates; for pump-aligned states it
/// equals `-Gamma (n_pas + 1/2) + (D + Gamma/2) cosh 2r`.
fn n_pas_rate(state: &GaussianState, drive: &GaussianBathDrive) -> f64 {
    let c = state.covariance();
    let rates = rates_at(state, drive);
    let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
    let d_det = rates.d_s11 * c[(1, 1)] + c[(0, 0)] * rates.d_s22 - 2.0 * c[(0, 1)] * rates.d_s12;
    // n_pas + 1/2 = 2 sqrt(det)
    d_det / det.sqrt()
}

/// `P_max = d<H_P>/dt - nu dn_pas/dt - dW_pump/dt`, using
/// `T_P dS_P/dt = nu dn_pas/dt` for Gaussian states.
pub fn max_power(energy_rate: f64, pump_power: f64, n_pas_rate: f64, nu: f64) -> f64 {
    energy_rate - nu * n_pas_rate - pump_power
}

/// Evaluates the engine at one piston state.
pub fn engine_point(
    time: f64,
    state: GaussianState,
    drive: &GaussianBathDrive,
    nu: f64,
    omega_plus: f64,
) -> Result<EnginePoint> {
    let rates = rates_at(&state, drive);
    let dn = rates.d_s11 + rates.d_s22 + 2.0 * (state.x1_mean * rates.d_x1 + state.x2_mean * rates.d_x2);
    let energy_rate = nu * dn;
    // pump contribution to dn/dt: 2 kappa Re<b^2> or 2 kappa Re<b>
    let pump_power = nu
        * match drive.pump {
            PumpKind::None => 0.0,
            PumpKind::Quadratic => 2.0 * drive.kappa_pump * state.b_squared().0,
            PumpKind::Linear => 2.0 * drive.kappa_pump * state.x1_mean,
        };
    let heat_flux_h = heat_flux_hot(&state, drive, omega_plus)?;
    let n_rate = n_pas_rate(&state, drive);
    let power_max = max_power(energy_rate, pump_power, n_rate, nu);
    let p = n_passive(&state)?;
    let ergotropy = gaussian_energy_ergotropy(&state, nu)?.ergotropy;
    let rhs = nu / omega_plus * heat_flux_h;
    let lhs = energy_rate - pump_power;
    // at a fixed point both sides vanish; measure against the gross rates
    let scale = lhs
        .abs()
        .max(rhs.abs())
        .max(nu * (drive.gamma.abs() * state.mean_number() + drive.diffusion) + pump_power.abs())
        .max(f64::MIN_POSITIVE);
    let identity_residual = (lhs - rhs).abs() / scale;
    let point = EnginePoint {
        time,
        power_max,
        pump_power,
        energy_rate,
        heat_flux_h,
        eta: if heat_flux_h > 0.0 {
            power_max / heat_flux_h
        } else {
            f64::NAN
        },
        ergotropy,
        n_pas: p.n_pas,
        n_pas_rate: n_rate,
        r: p.r,
        identity_residual,
        piston: state,
    };
    if identity_residual > IDENTITY_TOL {
        return Err(Error::Model(format!(
            "power identity violated at t = {time}: relative residual {identity_residual:e}"
        )));
    }
    Ok(point)
}

/// Piston trajectory sampled on a time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PistonRun {
    pub gamma: f64,
    pub diffusion: f64,
    pub points: Vec<EnginePoint>,
    /// First grid time at which `<b^dagger b>` passed [`OCCUPATION_CAP`];
    /// later grid points are not evaluated.
    pub capped_at: Option<f64>,
}

pub fn evolve_piston(cfg: &CatalysisConfig, state0: &GaussianState, t_grid: &[f64]) -> Result<PistonRun> {
    cfg.validate()?;
    let drive = piston_drive(cfg)?;
    let mut points = Vec::with_capacity(t_grid.len());
    let mut capped_at = None;
    for &t in t_grid {
        let s = evolve(state0, &drive, t)?;
        if s.mean_number() > OCCUPATION_CAP {
            capped_at = Some(t);
            break;
        }
        points.push(engine_point(t, s, &drive, cfg.nu, cfg.omega_plus())?);
    }
    Ok(PistonRun {
        gamma: drive.gamma,
        diffusion: drive.diffusion,
        points,
        capped_at,
    })
}

/// Efficiencies along a run with their reference values.
#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyCurve {
    pub times: Vec<f64>,
    /// `P_max / dQ/dt`.
    pub eta: Vec<f64>,
    /// `(nu/omega_+) [1 - (n_pas + 1/2) / ((n_pas + 1/2) cosh 2r + x1^2 + x2^2)]`.
    pub eta_approx: Vec<f64>,
    /// Whether `n_pas >= 10 D/|Gamma|` holds at each point (validity of the
    /// approximate form).
    pub approx_valid: Vec<bool>,
    /// `nu / omega_+`.
    pub eta_max: f64,
    /// Unpumped gain-regime value `(nu/omega_+) / (1 + D / (|Gamma| |alpha(0)|^2))`;
    /// `NaN` without gain.
    pub eta_unpumped: f64,
}

pub fn efficiency_curve(cfg: &CatalysisConfig, run: &PistonRun, alpha0_sq: f64) -> EfficiencyCurve {
    let eta_max = cfg.eta_max();
    let (gamma, d) = (run.gamma, run.diffusion);
    let ratio = if gamma != 0.0 { d / gamma.abs() } else { f64::INFINITY };
    let mut curve = EfficiencyCurve {
        times: vec![],
        eta: vec![],
        eta_approx: vec![],
        approx_valid: vec![],
        eta_max,
        eta_unpumped: if gamma < 0.0 {
            eta_max / (1.0 + d / (gamma.abs() * alpha0_sq))
        } else {
            f64::NAN
        },
    };
    for p in &run.points {
        let s = &p.piston;
        let base = p.n_pas + 0.5;
        let denom = base * (2.0 * p.r).cosh() + s.x1_mean.powi(2) + s.x2_mean.powi(2);
        curve.times.push(p.time);
        curve.eta.push(p.eta);
        curve.eta_approx.push(eta_max * (1.0 - base / denom));
        curve.approx_valid.push(p.n_pas >= 10.0 * ratio);
    }
    curve
}

/// Late-time limit of the linear-pump efficiency,
/// `(nu/omega_+) |a|^2 / (|a|^2 + n_pas(0) + D/|Gamma|)` with
/// `a = alpha(0) + 2 kappa/|Gamma|`.
pub fn eta_linear_limit(cfg: &CatalysisConfig, gamma: f64, diffusion: f64, alpha0: f64, n_pas0: f64) -> f64 {
    let a2 = (alpha0 + 2.0 * cfg.kappa_pump / gamma.abs()).powi(2);
    cfg.eta_max() * a2 / (a2 + n_pas0 + diffusion / gamma.abs())
}

/// Work capacity `nu |alpha(t)|^2` of the linearly pumped piston, with
/// `alpha(t) = alpha(0) e^{-Gamma t/2} + (2 kappa/Gamma)(1 - e^{-Gamma t/2})`.
pub fn linear_pump_work(cfg: &CatalysisConfig, state0: &GaussianState, t: f64) -> Result<f64> {
    if cfg.pump_kind != PumpKind::Linear {
        return Err(Error::Config("linear_pump_work needs a linear pump".into()));
    }
    let drive = piston_drive(cfg)?;
    let s = evolve(state0, &drive, t)?;
    Ok(cfg.nu * (s.x1_mean.powi(2) + s.x2_mean.powi(2)))
}

/// Spectra with the hot bath concentrated at `omega_0 + nu`, the cold bath
/// at `omega_0`, and nothing at `omega_0 - nu`. `T_c = 0.6 T_h`,
/// `omega_0 = 1`, `nu = 0.5`, `g = 0.1`, derived qubit populations. The
/// pump rate is set to `|kappa| = 0.1 |Gamma|`.
pub fn optimal_preset(pump_kind: PumpKind) -> Result<CatalysisConfig> {
    let (t_h, t_c) = (1.0, 0.6);
    let (omega0, nu) = (1.0, 0.5);
    let (wp, wm) = (omega0 + nu, omega0 - nu);
    let hot = BathSpectrum::from_positive(t_h, &[(wp, 1.0), (omega0, 0.01), (wm, 0.0)])?;
    let cold = BathSpectrum::from_positive(t_c, &[(wp, 0.01), (omega0, 1.0), (wm, 0.0)])?;
    let mut cfg = CatalysisConfig {
        omega0,
        nu,
        g: 0.1,
        kappa_pump: 0.0,
        pump_kind,
        hot,
        cold,
        populations: QubitPopulations::Derive,
    };
    if pump_kind != PumpKind::None {
        cfg.kappa_pump = 0.1 * drift_diffusion(&cfg)?.0.abs();
    }
    cfg.validate()?;
    Ok(cfg)
}
