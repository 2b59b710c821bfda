//! Single-mode Gaussian states in closed form.
//!
//! Quadratures are `X1 = (b + b^dagger)/2` and `X2 = (b - b^dagger)/(2i)`, so
//! the vacuum has variance `1/4` along every axis and
//! `<b^dagger b> = f_+ + f_- - 1/2 + x1^2 + x2^2`. The means are
//! `x1 = Re <b>`, `x2 = Im <b>`. The wider principal axis (`f_+`) points
//! along `X1 cos(theta) + X2 sin(theta)` with `theta = axis_phase`; the
//! pump-aligned frame has `theta = 0`.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::lindblad::{squeezed_coefficients, PumpKind};
use crate::quantum_core::{
    bose_entropy, bose_temperature, conjugate_truncated, fock_annihilation, unitary_exp, CMatrix, DensityOperator,
    HilbertSpace, Operator, C64, ENLARGEMENT,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianState {
    pub x1_mean: f64,
    pub x2_mean: f64,
    pub f_plus: f64,
    pub f_minus: f64,
    pub axis_phase: f64,
}

impl GaussianState {
    pub fn new(x1_mean: f64, x2_mean: f64, f_plus: f64, f_minus: f64, axis_phase: f64) -> Result<Self> {
        let s = Self {
            x1_mean,
            x2_mean,
            f_plus,
            f_minus,
            axis_phase,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn vacuum() -> Self {
        Self {
            x1_mean: 0.0,
            x2_mean: 0.0,
            f_plus: 0.25,
            f_minus: 0.25,
            axis_phase: 0.0,
        }
    }

    pub fn coherent(alpha_re: f64, alpha_im: f64) -> Self {
        Self {
            x1_mean: alpha_re,
            x2_mean: alpha_im,
            ..Self::vacuum()
        }
    }

    pub fn thermal(n: f64) -> Self {
        let f = 0.5 * (n + 0.5);
        Self {
            f_plus: f,
            f_minus: f,
            ..Self::vacuum()
        }
    }

    /// Squeezed thermal state `D(alpha) S(xi) rho_th(n) S(xi)^dagger D(alpha)^dagger`
    /// with the wider axis at `axis_phase`; `r >= 0`.
    pub fn squeezed_thermal(n: f64, r: f64, axis_phase: f64, alpha: (f64, f64)) -> Self {
        let base = 0.5 * (n + 0.5);
        Self {
            x1_mean: alpha.0,
            x2_mean: alpha.1,
            f_plus: base * (2.0 * r).exp(),
            f_minus: base * (-2.0 * r).exp(),
            axis_phase,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.x1_mean, self.x2_mean, self.f_plus, self.f_minus, self.axis_phase]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidState("non-finite Gaussian parameters".into()));
        }
        if self.f_minus < 1e-12 || self.f_plus < self.f_minus {
            return Err(Error::InvalidState(format!(
                "widths must satisfy f+ >= f- >= 1e-12, got ({}, {})",
                self.f_plus, self.f_minus
            )));
        }
        if 4.0 * (self.f_plus * self.f_minus).sqrt() < 1.0 - 1e-9 {
            return Err(Error::InvalidState(format!(
                "widths ({}, {}) violate the uncertainty floor",
                self.f_plus, self.f_minus
            )));
        }
        Ok(())
    }

    /// Symmetrized quadrature covariance in the `(X1, X2)` frame.
    pub fn covariance(&self) -> Matrix2<f64> {
        let (c, s) = (self.axis_phase.cos(), self.axis_phase.sin());
        let rot = Matrix2::new(c, -s, s, c);
        rot * Matrix2::new(self.f_plus, 0.0, 0.0, self.f_minus) * rot.transpose()
    }

    /// Principal widths and axis from a covariance matrix.
    pub fn from_covariance(x1_mean: f64, x2_mean: f64, cov: &Matrix2<f64>) -> Result<Self> {
        let (a, b, d) = (cov[(0, 0)], 0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)]);
        let mean = 0.5 * (a + d);
        let half = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let axis_phase = if half == 0.0 { 0.0 } else { 0.5 * (2.0 * b).atan2(a - d) };
        Self::new(x1_mean, x2_mean, mean + half, mean - half, axis_phase)
    }

    /// `<b^dagger b>`.
    pub fn mean_number(&self) -> f64 {
        self.f_plus + self.f_minus - 0.5 + self.x1_mean.powi(2) + self.x2_mean.powi(2)
    }

    /// `<b^2>` as `(re, im)`.
    pub fn b_squared(&self) -> (f64, f64) {
        let df = self.f_plus - self.f_minus;
        let (c2, s2) = ((2.0 * self.axis_phase).cos(), (2.0 * self.axis_phase).sin());
        let (x1, x2) = (self.x1_mean, self.x2_mean);
        (df * c2 + x1 * x1 - x2 * x2, df * s2 + 2.0 * x1 * x2)
    }
}

/// Image of a state under `S(r) = exp(r (b^2 - b^dagger^2) / 2)`, which
/// scales `X1` by `e^{-r}` and `X2` by `e^{r}`. Negative `r` applies the
/// inverse.
pub fn squeeze_gaussian(state: &GaussianState, r: f64) -> GaussianState {
    let t = Matrix2::new((-r).exp(), 0.0, 0.0, r.exp());
    let cov = t * state.covariance() * t;
    GaussianState::from_covariance(state.x1_mean * t[(0, 0)], state.x2_mean * t[(1, 1)], &cov)
        .expect("symplectic map preserves validity")
}

/// Passive occupation and squeezing of a Gaussian state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PassiveOccupation {
    /// `2 sqrt(f_+ f_-) - 1/2`.
    pub n_pas: f64,
    /// `r` from `cosh 2r = (f_+ + f_-) / (2 sqrt(f_+ f_-))`.
    pub r: f64,
}

pub fn n_passive(state: &GaussianState) -> Result<PassiveOccupation> {
    state.validate()?;
    let g = (state.f_plus * state.f_minus).sqrt();
    let n_pas = (2.0 * g - 0.5).max(0.0);
    // cosh 2r = (f+ + f-)/(2g) equals 2r = ln(f+/f-)/2 exactly
    let r = 0.25 * (state.f_plus / state.f_minus).ln();
    Ok(PassiveOccupation { n_pas, r })
}

/// `cosh 2r` of the state, `(f_+ + f_-) / (2 sqrt(f_+ f_-))`.
pub fn cosh_two_r(state: &GaussianState) -> f64 {
    (state.f_plus + state.f_minus) / (2.0 * (state.f_plus * state.f_minus).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianEnergetics {
    pub energy: f64,
    pub passive_energy: f64,
    pub ergotropy: f64,
    /// Temperature of the passive (thermal) counterpart; `0` when
    /// `n_pas < 1e-12`.
    pub passive_temperature: f64,
}

/// Energy, passive energy and ergotropy for `H = nu b^dagger b`.
pub fn gaussian_energy_ergotropy(state: &GaussianState, nu: f64) -> Result<GaussianEnergetics> {
    let p = n_passive(state)?;
    let energy = nu * state.mean_number();
    let passive_energy = nu * p.n_pas;
    Ok(GaussianEnergetics {
        energy,
        passive_energy,
        ergotropy: energy - passive_energy,
        passive_temperature: bose_temperature(nu, p.n_pas),
    })
}

/// Von Neumann entropy, the Bose entropy of `n_pas`.
pub fn gaussian_entropy(state: &GaussianState) -> Result<f64> {
    Ok(bose_entropy(n_passive(state)?.n_pas))
}

/// Density operator of `state` on `space`; moments reproduce the Gaussian
/// data up to the truncated tail.
pub fn to_fock(state: &GaussianState, space: HilbertSpace) -> Result<DensityOperator> {
    state.validate()?;
    let p = n_passive(state)?;
    let big = HilbertSpace::new(space.dim() + ENLARGEMENT)?;
    let b = fock_annihilation(big)?;
    let bm = b.matrix();
    let bd = bm.adjoint();

    // thermal seed on the target space; its tail must already be negligible
    let n = p.n_pas;
    let q = if n > 0.0 { n / (n + 1.0) } else { 0.0 };
    let mut pops = vec![0.0; space.dim()];
    let mut w = 1.0 / (n + 1.0);
    for pk in pops.iter_mut() {
        *pk = w;
        w *= q;
    }
    let kept: f64 = pops.iter().sum();
    if 1.0 - kept > 1e-9 {
        return Err(Error::Truncation(format!(
            "thermal occupation {n} leaves weight {:e} above level {}",
            1.0 - kept,
            space.dim() - 1
        )));
    }
    pops.iter_mut().for_each(|x| *x /= kept);
    let seed = DensityOperator::from_populations(&pops)?;

    // S(xi) with xi = r e^{i phi}, phi = 2 theta + pi, then D(alpha)
    let xi = C64::from_polar(p.r, 2.0 * state.axis_phase + std::f64::consts::PI);
    let b2 = bm * bm;
    let bd2 = &bd * &bd;
    let k_sq = (b2 * xi.conj() - bd2 * xi) * C64::new(0.0, 0.5);
    let alpha = C64::new(state.x1_mean, state.x2_mean);
    let k_disp = (&bd * alpha - bm * alpha.conj()) * C64::new(0.0, 1.0);
    let u: CMatrix = unitary_exp(&k_disp) * unitary_exp(&k_sq);
    conjugate_truncated(&seed, &u)
}

/// Reduced piston drive: drift `Gamma`, diffusion `D`, pump rate `kappa`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBathDrive {
    pub gamma: f64,
    pub diffusion: f64,
    pub kappa_pump: f64,
    pub pump: PumpKind,
}

impl GaussianBathDrive {
    pub fn new(gamma: f64, diffusion: f64, kappa_pump: f64, pump: PumpKind) -> Result<Self> {
        if !(diffusion >= 0.0) || diffusion + gamma < 0.0 {
            return Err(Error::Model(format!(
                "drift {gamma} and diffusion {diffusion} violate D >= 0, D + Gamma >= 0"
            )));
        }
        Ok(Self {
            gamma,
            diffusion,
            kappa_pump,
            pump,
        })
    }

    /// `(Gamma_+, Gamma_-) = (-Gamma/2 + kappa, -Gamma/2 - kappa)` for the
    /// quadratic pump, both `-Gamma/2` otherwise.
    pub fn rates(&self) -> (f64, f64) {
        let base = -0.5 * self.gamma;
        match self.pump {
            PumpKind::Quadratic => (base + self.kappa_pump, base - self.kappa_pump),
            _ => (base, base),
        }
    }

    /// Diffusion source `D + Gamma/2` of the widths.
    pub fn source(&self) -> f64 {
        self.diffusion + 0.5 * self.gamma
    }
}

/// `f(t) = f0 e^{2 g t} + s/(4 g) (e^{2 g t} - 1)`, with the `g -> 0` limit
/// `f0 + s t / 2`.
fn width_evolution(f0: f64, g: f64, source: f64, t: f64) -> f64 {
    let x = 2.0 * g * t;
    if x.abs() < 1e-8 {
        // second-order expansion of the removable singularity
        return f0 * x.exp() + 0.5 * source * t * (1.0 + 0.5 * x);
    }
    f0 * x.exp() + source / (4.0 * g) * x.exp_m1()
}

fn width_rate(f: f64, g: f64, source: f64) -> f64 {
    2.0 * g * f + 0.5 * source
}

/// Pump-frame widths from the vacuum.
pub fn widths_at(drive: &GaussianBathDrive, t: f64) -> (f64, f64) {
    let (gp, gm) = drive.rates();
    let s = drive.source();
    (width_evolution(0.25, gp, s, t), width_evolution(0.25, gm, s, t))
}

/// Means `(x1, x2)` at time `t`.
pub fn means_at(state0: &GaussianState, drive: &GaussianBathDrive, t: f64) -> (f64, f64) {
    let (gp, gm) = drive.rates();
    match drive.pump {
        PumpKind::Quadratic => (state0.x1_mean * (gp * t).exp(), state0.x2_mean * (gm * t).exp()),
        PumpKind::None => {
            let e = (-0.5 * drive.gamma * t).exp();
            (state0.x1_mean * e, state0.x2_mean * e)
        }
        PumpKind::Linear => {
            let (a, b) = linear_displacement(drive.gamma, drive.kappa_pump, state0.x1_mean, t);
            (a, state0.x2_mean * b)
        }
    }
}

/// `alpha(t) = alpha0 e^{-Gamma t/2} + (2 kappa/Gamma)(1 - e^{-Gamma t/2})`
/// for the real part; returns it with the decay factor applied to the
/// imaginary part.
fn linear_displacement(gamma: f64, kappa: f64, re0: f64, t: f64) -> (f64, f64) {
    let x = -0.5 * gamma * t;
    let e = x.exp();
    let driven = if x.abs() < 1e-12 {
        kappa * t
    } else {
        -(2.0 * kappa / gamma) * x.exp_m1()
    };
    (re0 * e + driven, e)
}

/// Full Gaussian state at time `t` under `drive`, from any initial state.
/// The pump-frame covariance evolves as
/// `S11 -> f(S11, Gamma_+)`, `S22 -> f(S22, Gamma_-)`, `S12 -> S12 e^{-Gamma t}`.
pub fn evolve(state0: &GaussianState, drive: &GaussianBathDrive, t: f64) -> Result<GaussianState> {
    let (gp, gm) = drive.rates();
    let s = drive.source();
    let c0 = state0.covariance();
    let cov = Matrix2::new(
        width_evolution(c0[(0, 0)], gp, s, t),
        c0[(0, 1)] * ((gp + gm) * t).exp(),
        c0[(1, 0)] * ((gp + gm) * t).exp(),
        width_evolution(c0[(1, 1)], gm, s, t),
    );
    let (x1, x2) = means_at(state0, drive, t);
    GaussianState::from_covariance(x1, x2, &cov)
}

/// Time derivatives of the pump-frame covariance entries and means.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianRates {
    pub d_s11: f64,
    pub d_s22: f64,
    pub d_s12: f64,
    pub d_x1: f64,
    pub d_x2: f64,
}

/// Analytic time derivatives at `state` (same closed-form equations of
/// motion used by [`evolve`]).
pub fn rates_at(state: &GaussianState, drive: &GaussianBathDrive) -> GaussianRates {
    let (gp, gm) = drive.rates();
    let s = drive.source();
    let c = state.covariance();
    let (d_x1, d_x2) = match drive.pump {
        PumpKind::Quadratic => (gp * state.x1_mean, gm * state.x2_mean),
        PumpKind::None => (-0.5 * drive.gamma * state.x1_mean, -0.5 * drive.gamma * state.x2_mean),
        PumpKind::Linear => (
            -0.5 * drive.gamma * state.x1_mean + drive.kappa_pump,
            -0.5 * drive.gamma * state.x2_mean,
        ),
    };
    GaussianRates {
        d_s11: width_rate(c[(0, 0)], gp, s),
        d_s22: width_rate(c[(1, 1)], gm, s),
        d_s12: (gp + gm) * c[(0, 1)],
        d_x1,
        d_x2,
    }
}

/// Squeezed-bath relaxation: means decay as `e^{-kappa t}`, covariance
/// relaxes as `e^{-2 kappa t}` toward `Var X1 = (2N + 2M + 1)/4`,
/// `Var X2 = (2N - 2M + 1)/4`.
pub fn squeezed_bath_relaxation(
    state0: &GaussianState,
    kappa: f64,
    n_bar: f64,
    r: f64,
    t: f64,
) -> Result<GaussianState> {
    let (n, m) = squeezed_coefficients(n_bar, r);
    let ss = Matrix2::new(
        (2.0 * n + 2.0 * m + 1.0) / 4.0,
        0.0,
        0.0,
        (2.0 * n - 2.0 * m + 1.0) / 4.0,
    );
    let decay = (-2.0 * kappa * t).exp();
    let cov = state0.covariance() * decay + ss * (1.0 - decay);
    let e = (-kappa * t).exp();
    GaussianState::from_covariance(state0.x1_mean * e, state0.x2_mean * e, &cov)
}

/// Steady state of the squeezed bath: `n_pas = n`, squeezing `r`, wide axis
/// along `X2`.
pub fn squeezed_bath_steady_state(n_bar: f64, r: f64) -> GaussianState {
    GaussianState::squeezed_thermal(n_bar, r, std::f64::consts::FRAC_PI_2, (0.0, 0.0))
}

/// `<b^dagger b>` and `<b^2>` of a Fock-space state.
pub fn fock_moments(rho: &DensityOperator) -> Result<(f64, C64)> {
    let space = HilbertSpace::new(rho.dim())?;
    let b = fock_annihilation(space)?;
    let n = crate::quantum_core::number_operator(space).expectation(rho);
    let b2: Operator = b.product(&b)?;
    Ok((n, crate::quantum_core::trace_product(rho.matrix(), b2.matrix())))
}
