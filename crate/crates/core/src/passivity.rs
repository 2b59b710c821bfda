//! Ergotropy, passive states and the first-law split of exchanged energy
//! into work, heat and dissipated ergotropy.
//!
//! Path integrals use one quadrature for all four quantities. On each stored
//! interval `[t_i, t_{i+1}]` the integrands are evaluated with the secant
//! derivative and the trapezoid average of the other factor:
//!
//! ```text
//! W_i   = Tr[(rho_i + rho_{i+1})/2 (H_{i+1} - H_i)]
//! E_d,i = Tr[(rho_{i+1} - rho_i) (H_i + H_{i+1})/2]
//! Q_i   = Tr[(pi_{i+1} - pi_i) (H_i + H_{i+1})/2]
//! ```
//!
//! so `W + E_d` telescopes to `E(t_f) - E(t_0)` and constant `H` gives
//! `W = 0` exactly.

use crate::error::{Error, Result};
use crate::quantum_core::{trace_product, CMatrix, DensityOperator, Operator, SpectralDecomposition, C64};

#[derive(Clone, Debug)]
pub struct PassiveDecomposition {
    pub passive_state: DensityOperator,
    /// `V` with `pi = V rho V^dagger`.
    pub extraction_unitary: Operator,
    pub total_energy: f64,
    pub passive_energy: f64,
    pub ergotropy: f64,
}

/// `Re Tr[rho H]`.
pub fn energy(rho: &DensityOperator, h: &Operator) -> f64 {
    trace_product(rho.matrix(), h.matrix()).re
}

/// Passive state of `rho` with respect to `h`.
///
/// The largest population of `rho` goes to the lowest level of `h`. Ties in
/// either spectrum are broken by a stable sort, so the result inside a
/// degenerate block of `h` depends on the eigenbasis chosen there; the
/// passive energy does not.
pub fn passive_state(rho: &DensityOperator, h: &Operator) -> Result<PassiveDecomposition> {
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: h.dim(),
        });
    }
    let hs = h.spectral()?;
    let rs = rho.spectral();
    Ok(passive_from_spectra(rho, h, &rs, &hs))
}

fn passive_from_spectra(
    rho: &DensityOperator,
    h: &Operator,
    rs: &SpectralDecomposition,
    hs: &SpectralDecomposition,
) -> PassiveDecomposition {
    let n = rho.dim();
    let descending: Vec<f64> = rs.eigenvalues().iter().rev().copied().collect();
    let passive_energy = passive_energy_of(rs, hs);
    let pi = DensityOperator::from_matrix_unchecked(hs.with_eigenvalues(&descending));

    // V maps the k-th largest eigenvector of rho onto the k-th lowest level.
    let w = hs.eigenvectors();
    let u = rs.eigenvectors();
    let mut v = CMatrix::zeros(n, n);
    for j in 0..n {
        let uj = u.column(n - 1 - j);
        v += w.column(j) * uj.adjoint();
    }
    let total_energy = energy(rho, h);
    PassiveDecomposition {
        passive_state: pi,
        extraction_unitary: Operator::new(v).expect("square by construction"),
        total_energy,
        passive_energy,
        ergotropy: total_energy - passive_energy,
    }
}

fn passive_energy_of(rs: &SpectralDecomposition, hs: &SpectralDecomposition) -> f64 {
    rs.eigenvalues()
        .iter()
        .rev()
        .zip(hs.eigenvalues())
        .fold(0.0, |acc, (p, e)| acc + p * e)
}

/// Whether a stroke is generated by a Hamiltonian alone or with a bath.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrokeKind {
    Dissipative,
    Unitary,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryFlags {
    /// `||dH/dt|| / ||H||` exceeded `0.1 kappa` somewhere.
    pub slow_driving_violated: bool,
    /// Two levels of `H` came within `1e-9 ||H||` of each other, so the
    /// passive ordering may jump.
    pub passive_crossing: bool,
    /// Number of times the stored grid was halved to resolve the passive
    /// energy.
    pub refinements: u32,
    /// Largest population found in the top two Fock levels.
    pub truncation_weight: f64,
    /// Largest negative eigenvalue (in magnitude) zeroed at a stored point;
    /// the removed weight is taken from the largest eigenvalue so the trace
    /// is unchanged.
    pub positivity_repair: f64,
}

#[derive(Clone, Debug)]
pub struct TrajectoryMeta {
    pub generator_label: Option<String>,
    pub kind: StrokeKind,
    pub flags: TrajectoryFlags,
}

impl Default for TrajectoryMeta {
    fn default() -> Self {
        Self {
            generator_label: None,
            kind: StrokeKind::Dissipative,
            flags: TrajectoryFlags::default(),
        }
    }
}

/// Sampled path `(t_i, rho(t_i), H(t_i))`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityOperator>,
    hamiltonians: Vec<Operator>,
    derivatives: Option<Vec<CMatrix>>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<DensityOperator>, hamiltonians: Vec<Operator>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Trajectory("empty trajectory".into()));
        }
        if states.len() != times.len() || hamiltonians.len() != times.len() {
            return Err(Error::Trajectory(format!(
                "{} times, {} states, {} Hamiltonians",
                times.len(),
                states.len(),
                hamiltonians.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Trajectory("times must be strictly increasing".into()));
        }
        let dim = states[0].dim();
        for (s, h) in states.iter().zip(&hamiltonians) {
            if s.dim() != dim || h.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: if s.dim() != dim { s.dim() } else { h.dim() },
                });
            }
            if !h.is_hermitian() {
                return Err(Error::NotHermitian(crate::quantum_core::hermitian_deviation(
                    h.matrix(),
                )));
            }
        }
        let mut traj = Self {
            times,
            states,
            hamiltonians,
            derivatives: None,
            meta: TrajectoryMeta::default(),
        };
        traj.meta.flags.passive_crossing = traj.detect_level_crossing();
        Ok(traj)
    }

    /// Two-point stroke between `(rho0, h0)` and `(rho1, h1)`.
    pub fn two_point(
        kind: StrokeKind,
        rho0: DensityOperator,
        h0: Operator,
        rho1: DensityOperator,
        h1: Operator,
    ) -> Result<Self> {
        let mut t = Self::new(vec![0.0, 1.0], vec![rho0, rho1], vec![h0, h1])?;
        t.meta.kind = kind;
        Ok(t)
    }

    pub fn with_derivatives(mut self, derivatives: Vec<CMatrix>) -> Result<Self> {
        if derivatives.len() != self.times.len() {
            return Err(Error::Trajectory("one derivative per stored state required".into()));
        }
        self.derivatives = Some(derivatives);
        Ok(self)
    }

    pub fn with_kind(mut self, kind: StrokeKind) -> Self {
        self.meta.kind = kind;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.meta.generator_label = Some(label.into());
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn hamiltonians(&self) -> &[Operator] {
        &self.hamiltonians
    }

    /// `rho_dot = L rho` at each stored point when the generator supplied it.
    pub fn derivatives(&self) -> Option<&[CMatrix]> {
        self.derivatives.as_deref()
    }

    pub fn first_state(&self) -> &DensityOperator {
        &self.states[0]
    }

    pub fn last_state(&self) -> &DensityOperator {
        self.states.last().expect("non-empty")
    }

    pub fn first_hamiltonian(&self) -> &Operator {
        &self.hamiltonians[0]
    }

    pub fn last_hamiltonian(&self) -> &Operator {
        self.hamiltonians.last().expect("non-empty")
    }

    /// True when every stored Hamiltonian equals the first one exactly.
    pub fn has_constant_hamiltonian(&self) -> bool {
        let h0 = self.hamiltonians[0].matrix();
        self.hamiltonians.iter().all(|h| h.matrix() == h0)
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states
            .iter()
            .zip(&self.hamiltonians)
            .map(|(s, h)| energy(s, h))
            .collect()
    }

    fn hamiltonian_spectra(&self) -> Result<Vec<SpectralDecomposition>> {
        let mut out: Vec<SpectralDecomposition> = Vec::with_capacity(self.len());
        for (i, h) in self.hamiltonians.iter().enumerate() {
            // reuse the spectrum of H while it does not change
            if i > 0 && self.hamiltonians[i - 1].matrix() == h.matrix() {
                let prev = out[i - 1].clone();
                out.push(prev);
            } else {
                out.push(h.spectral()?);
            }
        }
        Ok(out)
    }

    pub fn passive_decompositions(&self) -> Result<Vec<PassiveDecomposition>> {
        let hs = self.hamiltonian_spectra()?;
        Ok(self
            .states
            .iter()
            .zip(&self.hamiltonians)
            .zip(&hs)
            .map(|((s, h), hsd)| passive_from_spectra(s, h, s.spectrum_ref(), hsd))
            .collect())
    }

    /// `Tr[pi(t_i) H(t_i)]` at each stored point.
    pub fn passive_energies(&self) -> Result<Vec<f64>> {
        let hs = self.hamiltonian_spectra()?;
        Ok(self
            .states
            .iter()
            .zip(&hs)
            .map(|(s, hsd)| passive_energy_of(s.spectrum_ref(), hsd))
            .collect())
    }

    /// Largest change of passive energy between neighbouring stored points.
    pub fn max_passive_energy_step(&self) -> Result<f64> {
        let e = self.passive_energies()?;
        Ok(e.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max))
    }

    fn detect_level_crossing(&self) -> bool {
        if self.has_constant_hamiltonian() {
            return false;
        }
        self.hamiltonians.iter().any(|h| match h.spectral() {
            Ok(sd) => {
                let e = sd.eigenvalues();
                let scale = e.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
                e.windows(2).any(|w| (w[1] - w[0]) < 1e-9 * scale)
            }
            Err(_) => false,
        })
    }

    fn require_two_points(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::Trajectory(format!(
                "path integrals need at least 2 points, got {}",
                self.len()
            )));
        }
        Ok(())
    }
}

fn half_sum(a: &CMatrix, b: &CMatrix) -> CMatrix {
    (a + b) * C64::new(0.5, 0.0)
}

/// Work `W = int Tr[rho dH/dt] dt`; negative when extracted.
pub fn work_along(traj: &Trajectory) -> Result<f64> {
    traj.require_two_points()?;
    if traj.meta.kind == StrokeKind::Unitary {
        let e = traj.energies();
        return Ok(e[e.len() - 1] - e[0]);
    }
    let mut w = 0.0;
    for i in 0..traj.len() - 1 {
        let h0 = traj.hamiltonians[i].matrix();
        let h1 = traj.hamiltonians[i + 1].matrix();
        if h0 == h1 {
            continue;
        }
        let rho_bar = half_sum(traj.states[i].matrix(), traj.states[i + 1].matrix());
        w += trace_product(&rho_bar, &(h1 - h0)).re;
    }
    Ok(w)
}

/// Energy exchanged with the bath, `E_d = int Tr[d rho/dt H] dt`.
pub fn dissipative_energy_along(traj: &Trajectory) -> Result<f64> {
    traj.require_two_points()?;
    if traj.meta.kind == StrokeKind::Unitary {
        return Ok(0.0);
    }
    let mut e = 0.0;
    for i in 0..traj.len() - 1 {
        let h_bar = half_sum(traj.hamiltonians[i].matrix(), traj.hamiltonians[i + 1].matrix());
        let d_rho = traj.states[i + 1].matrix() - traj.states[i].matrix();
        e += trace_product(&d_rho, &h_bar).re;
    }
    Ok(e)
}

/// Heat `Q = int Tr[d pi/dt H] dt` along the passive path.
pub fn heat_along(traj: &Trajectory) -> Result<f64> {
    traj.require_two_points()?;
    if traj.meta.kind == StrokeKind::Unitary {
        return Ok(0.0);
    }
    heat_quadrature(traj)
}

fn heat_quadrature(traj: &Trajectory) -> Result<f64> {
    let energies = traj.passive_energies()?;
    let mut pd: Vec<Option<PassiveDecomposition>> = vec![None; traj.len()];
    let mut q = 0.0;
    for i in 0..traj.len() - 1 {
        let h0 = traj.hamiltonians[i].matrix();
        let h1 = traj.hamiltonians[i + 1].matrix();
        if h0 == h1 {
            // Tr[pi H] is the passive energy, so the interval term is exact
            q += energies[i + 1] - energies[i];
            continue;
        }
        for k in [i, i + 1] {
            if pd[k].is_none() {
                pd[k] = Some(passive_state(&traj.states[k], &traj.hamiltonians[k])?);
            }
        }
        let h_bar = half_sum(h0, h1);
        let p0 = pd[i].as_ref().expect("filled");
        let p1 = pd[i + 1].as_ref().expect("filled");
        let d_pi = p1.passive_state.matrix() - p0.passive_state.matrix();
        q += trace_product(&d_pi, &h_bar).re;
    }
    Ok(q)
}

/// Dissipative ergotropy change `E_d - Q`.
pub fn dissipative_ergotropy_along(traj: &Trajectory) -> Result<f64> {
    Ok(dissipative_energy_along(traj)? - heat_along(traj)?)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyLedger {
    pub work: f64,
    pub dissipative_energy: f64,
    pub heat: f64,
    pub dissipative_ergotropy: f64,
    /// `E(t_f) - E(t_0)`.
    pub delta_energy: f64,
}

impl EnergyLedger {
    /// `|Delta E - W - E_d|`.
    pub fn first_law_residual(&self) -> f64 {
        (self.delta_energy - self.work - self.dissipative_energy).abs()
    }

    /// `|E_d - Q - Delta W_d|`.
    pub fn split_residual(&self) -> f64 {
        (self.dissipative_energy - self.heat - self.dissipative_ergotropy).abs()
    }
}

/// All four path integrals of one stroke.
pub fn ledger_for_stroke(traj: &Trajectory) -> Result<EnergyLedger> {
    traj.require_two_points()?;
    let energies = traj.energies();
    let delta_energy = energies[energies.len() - 1] - energies[0];
    if traj.meta.kind == StrokeKind::Unitary {
        return Ok(EnergyLedger {
            work: delta_energy,
            delta_energy,
            ..EnergyLedger::default()
        });
    }
    let work = work_along(traj)?;
    let dissipative_energy = dissipative_energy_along(traj)?;
    let heat = heat_quadrature(traj)?;
    let ledger = EnergyLedger {
        work,
        dissipative_energy,
        heat,
        dissipative_ergotropy: dissipative_energy - heat,
        delta_energy,
    };
    let scale = energies.iter().fold(1.0f64, |a, e| a.max(e.abs()));
    if ledger.first_law_residual() > 1e-6 * scale {
        return Err(Error::Integration(format!(
            "first-law residual {:e} exceeds 1e-6 x {scale}",
            ledger.first_law_residual()
        )));
    }
    Ok(ledger)
}
