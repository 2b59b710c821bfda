//! Entropy production and the bounds it places on entropy change.
//!
//! Three bounds on `Delta S` of a bath stroke are compared:
//! the second law `E_d / T` (or `E~_d / T` in the unitarily equivalent
//! thermal frame of a squeezed bath), the passive-path bound `Q / T` for a
//! constant Hamiltonian, and `Q' / T` for a driven Hamiltonian, where `Q'`
//! is the energy exchanged along an auxiliary thermal trajectory started
//! from the passive state `pi_0`.

use crate::error::{Error, Result};
use crate::lindblad::{integrate_on_grid, late_change, BathTag, GeneratorSpec, IntegrationConfig};
use crate::passivity::{dissipative_energy_along, heat_along, passive_state, StrokeKind, Trajectory};
use crate::quantum_core::{
    fock_annihilation, gibbs_state, number_operator, relative_entropy, trace_product, von_neumann_entropy, CMatrix,
    DensityOperator, HilbertSpace, Operator, C64, SUPPORT_TOL,
};

/// Slack tolerance when deciding whether a bound holds.
pub const BOUND_TOL: f64 = 1e-8;
/// Below this temperature `1/T` bounds are replaced by infinite sentinels.
pub const ZERO_TEMPERATURE: f64 = 1e-9;
/// Largest trace distance between the last state and the state one window
/// earlier that still counts as stationary.
pub const FINALITY_TOL: f64 = 1e-6;

/// Whether a bound evaluation insists that the trajectory has relaxed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Finality {
    Require,
    Waive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub delta_s: f64,
    pub temperature: f64,
    /// `E_d / T`, or `E~_d / T` for a squeezed bath.
    pub bound_second_law: f64,
    /// `Q / T` or `Q' / T`; `NaN` when not evaluated.
    pub bound_tight: f64,
    /// `(t, sigma(t))` where the instantaneous steady state is known.
    pub sigma_trace: Vec<(f64, f64)>,
    pub satisfied_second_law: bool,
    pub satisfied_tight: bool,
    pub slack_second_law: f64,
    pub slack_tight: f64,
    /// `T < 1e-9`: the bounds are infinite sentinels.
    pub zero_temperature: bool,
}

impl BoundReport {
    fn assemble(delta_s: f64, temperature: f64, second: f64, tight: f64, sigma_trace: Vec<(f64, f64)>) -> Self {
        let slack_second_law = delta_s - second;
        let slack_tight = delta_s - tight;
        Self {
            delta_s,
            temperature,
            bound_second_law: second,
            bound_tight: tight,
            sigma_trace,
            satisfied_second_law: slack_second_law >= -BOUND_TOL,
            satisfied_tight: slack_tight >= -BOUND_TOL,
            slack_second_law,
            slack_tight,
            zero_temperature: temperature < ZERO_TEMPERATURE,
        }
    }

    /// `slack / |Delta S|` for the tight bound.
    pub fn relative_slack_tight(&self) -> f64 {
        self.slack_tight / self.delta_s.abs()
    }

    pub fn relative_slack_second_law(&self) -> f64 {
        self.slack_second_law / self.delta_s.abs()
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("temperature must be positive, got {t}")));
    }
    Ok(())
}

/// `x / T`, with signed infinities (and `0` for `x = 0`) below
/// [`ZERO_TEMPERATURE`].
pub fn over_temperature(x: f64, t: f64) -> f64 {
    if t >= ZERO_TEMPERATURE {
        return x / t;
    }
    if x > 0.0 {
        f64::INFINITY
    } else if x < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

/// `ln rho` with eigenvalues floored at the smallest normal float, so that
/// `Tr[rho_dot ln rho]` stays finite on rank-deficient states.
fn floored_log(rho: &DensityOperator) -> CMatrix {
    rho.spectrum_ref().map(|l| l.max(f64::MIN_POSITIVE).ln())
}

fn full_rank_log(rho_ss: &DensityOperator) -> Result<CMatrix> {
    let sd = rho_ss.spectrum_ref();
    let min = sd.eigenvalues()[0];
    if min < SUPPORT_TOL {
        return Err(Error::DivergentRelativeEntropy(format!(
            "steady state is rank deficient (eigenvalue {min:e})"
        )));
    }
    Ok(sd.map(f64::ln))
}

/// `sigma = -Tr[rho_dot (ln rho - ln rho_ss)]`.
pub fn spohn_rate(rho: &DensityOperator, rho_ss: &DensityOperator, rho_dot: &CMatrix) -> Result<f64> {
    if rho.dim() != rho_ss.dim() || rho_dot.nrows() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: if rho_ss.dim() != rho.dim() {
                rho_ss.dim()
            } else {
                rho_dot.nrows()
            },
        });
    }
    let log_ss = full_rank_log(rho_ss)?;
    Ok(spohn_with_log(rho, &log_ss, rho_dot))
}

fn spohn_with_log(rho: &DensityOperator, log_ss: &CMatrix, rho_dot: &CMatrix) -> f64 {
    let diff = floored_log(rho) - log_ss;
    -trace_product(rho_dot, &diff).re
}

/// `sigma(t_i)` along a trajectory relaxing toward the fixed `rho_ss`, with
/// `rho_dot` taken from the generator.
pub fn spohn_trace(traj: &Trajectory, gen: &GeneratorSpec, rho_ss: &DensityOperator) -> Result<Vec<(f64, f64)>> {
    let log_ss = full_rank_log(rho_ss)?;
    Ok(traj
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let rho = &traj.states()[i];
            let sigma = match traj.derivatives() {
                Some(d) => spohn_with_log(rho, &log_ss, &d[i]),
                None => spohn_with_log(rho, &log_ss, &gen.apply(t, rho.matrix())),
            };
            (t, sigma)
        })
        .collect())
}

/// Integral of a `(t, sigma)` trace: Simpson's rule over interval pairs
/// (non-uniform spacing allowed), trapezoid on a leftover interval.
pub fn integrate_trace(trace: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < trace.len() {
        let ((t0, f0), (t1, f1), (t2, f2)) = (trace[i], trace[i + 1], trace[i + 2]);
        let (h0, h1) = (t1 - t0, t2 - t1);
        total += (h0 + h1) / 6.0 * ((2.0 - h1 / h0) * f0 + (h0 + h1).powi(2) / (h0 * h1) * f1 + (2.0 - h0 / h1) * f2);
        i += 2;
    }
    if i + 1 < trace.len() {
        let ((t0, f0), (t1, f1)) = (trace[i], trace[i + 1]);
        total += 0.5 * (t1 - t0) * (f0 + f1);
    }
    total
}

/// Total entropy production of a relaxation, `S(rho_0 || rho_ss)`.
pub fn entropy_production_total(rho0: &DensityOperator, rho_ss: &DensityOperator) -> Result<f64> {
    relative_entropy(rho0, rho_ss)
}

fn check_finality(traj: &Trajectory, finality: Finality) -> Result<()> {
    if finality == Finality::Waive {
        return Ok(());
    }
    let t = traj.times();
    let window = 0.05 * (t[t.len() - 1] - t[0]);
    let change = late_change(traj, window)?;
    if change > FINALITY_TOL {
        return Err(Error::NotStationary(format!(
            "state still moves by {change:e} in trace distance over the last {window}"
        )));
    }
    Ok(())
}

fn entropy_change(traj: &Trajectory) -> Result<f64> {
    Ok(von_neumann_entropy(traj.last_state())? - von_neumann_entropy(traj.first_state())?)
}

/// `sigma(t)` against the instantaneous Gibbs state of `H(t)` at `T`; empty
/// without stored derivatives or at zero temperature.
fn thermal_sigma_trace(traj: &Trajectory, temperature: f64) -> Result<Vec<(f64, f64)>> {
    let Some(derivs) = traj.derivatives() else {
        return Ok(vec![]);
    };
    if temperature < ZERO_TEMPERATURE {
        return Ok(vec![]);
    }
    let mut out = Vec::with_capacity(traj.len());
    let mut cached: Option<(CMatrix, CMatrix)> = None;
    for (i, &t) in traj.times().iter().enumerate() {
        let h = traj.hamiltonians()[i].matrix();
        let log_ss = match &cached {
            Some((hm, l)) if hm == h => l.clone(),
            _ => {
                let g = gibbs_state(&traj.hamiltonians()[i], temperature)?;
                let l = full_rank_log(&g)?;
                cached = Some((h.clone(), l.clone()));
                l
            }
        };
        out.push((t, spohn_with_log(&traj.states()[i], &log_ss, &derivs[i])));
    }
    Ok(out)
}

/// `Delta S` against `E_d / T` for a thermal bath.
///
/// `bound_tight` holds `Q / T` when `H` is constant and `NaN` otherwise (use
/// [`tight_bound_time_dependent`] for a driven Hamiltonian).
pub fn second_law_bound(traj: &Trajectory, temperature: f64, finality: Finality) -> Result<BoundReport> {
    check_temperature(temperature)?;
    check_finality(traj, finality)?;
    let delta_s = entropy_change(traj)?;
    let e_d = dissipative_energy_along(traj)?;
    let tight = if traj.has_constant_hamiltonian() {
        over_temperature(heat_along(traj)?, temperature)
    } else {
        f64::NAN
    };
    Ok(BoundReport::assemble(
        delta_s,
        temperature,
        over_temperature(e_d, temperature),
        tight,
        thermal_sigma_trace(traj, temperature)?,
    ))
}

/// `Delta S` against `Q / T = Delta E_pas / T`; requires a constant
/// Hamiltonian.
pub fn tight_bound_constant_h(traj: &Trajectory, temperature: f64, finality: Finality) -> Result<BoundReport> {
    if !traj.has_constant_hamiltonian() {
        return Err(Error::Trajectory(
            "Hamiltonian varies along the trajectory; use tight_bound_time_dependent".into(),
        ));
    }
    second_law_bound(traj, temperature, finality)
}

/// `S(r) H S(r)^dagger` for `H = omega a^dagger a`, i.e.
/// `omega [cosh 2r n + sinh^2 r + sinh 2r (a^2 + a^dagger^2) / 2]`. Its
/// expectation in `rho` is the energy of `S^dagger rho S`.
pub fn squeezed_frame_hamiltonian(h: &Operator, r: f64) -> Result<Operator> {
    let d = h.dim();
    let m = h.matrix();
    let omega = m[(1, 1)].re - m[(0, 0)].re;
    let ladder = (0..d).all(|k| (m[(k, k)].re - k as f64 * omega).abs() <= 1e-12 * omega.abs().max(1.0));
    if !h.is_diagonal() || !ladder {
        return Err(Error::Domain("expected H = omega a^dagger a".into()));
    }
    let space = HilbertSpace::new(d)?;
    let a = fock_annihilation(space)?;
    let a2 = a.matrix() * a.matrix();
    let quad = (&a2 + a2.adjoint()) * C64::new(0.5 * (2.0 * r).sinh(), 0.0);
    let n = number_operator(space).matrix() * C64::new((2.0 * r).cosh(), 0.0);
    let shift = CMatrix::identity(d, d) * C64::new(r.sinh().powi(2), 0.0);
    Operator::hermitian((n + shift + quad) * C64::new(omega, 0.0))
}

/// Running `E~_d(t_i) = int_0^{t_i} Tr[d rho/dt S H S^dagger] dt`.
fn squeezed_frame_dissipation_profile(traj: &Trajectory, r: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; traj.len()];
    let mut h_tilde: Vec<CMatrix> = Vec::with_capacity(traj.len());
    for (i, h) in traj.hamiltonians().iter().enumerate() {
        if i > 0 && traj.hamiltonians()[i - 1].matrix() == h.matrix() {
            let prev = h_tilde[i - 1].clone();
            h_tilde.push(prev);
        } else {
            h_tilde.push(squeezed_frame_hamiltonian(h, r)?.into_matrix());
        }
    }
    for i in 0..traj.len() - 1 {
        let h_bar = (&h_tilde[i] + &h_tilde[i + 1]) * C64::new(0.5, 0.0);
        let d_rho = traj.states()[i + 1].matrix() - traj.states()[i].matrix();
        out[i + 1] = out[i] + trace_product(&d_rho, &h_bar).re;
    }
    Ok(out)
}

/// Squeezed thermal bath of squeezing `r` at constant `H`: the second-law
/// bound is `E~_d / T`, the energy change of `S^dagger rho S` in the
/// unitarily equivalent thermal frame; the tight bound is `Q / T`.
pub fn second_law_bound_nonthermal(
    traj: &Trajectory,
    temperature: f64,
    r: f64,
    finality: Finality,
) -> Result<BoundReport> {
    check_temperature(temperature)?;
    check_finality(traj, finality)?;
    let delta_s = entropy_change(traj)?;
    let e_tilde = *squeezed_frame_dissipation_profile(traj, r)?.last().expect("non-empty");
    let tight = if traj.has_constant_hamiltonian() {
        over_temperature(heat_along(traj)?, temperature)
    } else {
        f64::NAN
    };
    Ok(BoundReport::assemble(
        delta_s,
        temperature,
        over_temperature(e_tilde, temperature),
        tight,
        vec![],
    ))
}

fn bath_temperature(gen: &GeneratorSpec) -> Result<f64> {
    match gen.bath() {
        BathTag::Thermal { temperature } | BathTag::Squeezed { temperature, .. } => Ok(*temperature),
        BathTag::Custom => Err(Error::GeneratorMismatch(format!(
            "generator '{}' has no thermal family",
            gen.label()
        ))),
    }
}

/// Auxiliary trajectory `varrho(t)`: the thermal member of `gen`'s family
/// started from the passive state `pi_0`, on the grid of `traj`.
pub fn auxiliary_passive_path(traj: &Trajectory, gen: &GeneratorSpec, cfg: &IntegrationConfig) -> Result<Trajectory> {
    match &traj.meta.generator_label {
        Some(l) if l == gen.label() => {}
        other => {
            return Err(Error::GeneratorMismatch(format!(
                "trajectory was produced by {:?}, not '{}'",
                other,
                gen.label()
            )))
        }
    }
    bath_temperature(gen)?;
    let thermal = gen.thermal_counterpart().unwrap_or(gen);
    let pi0 = passive_state(traj.first_state(), traj.first_hamiltonian())?.passive_state;
    integrate_on_grid(thermal, &pi0, traj.times(), cfg)
}

/// `Delta S` against `Q' / T` for a driven Hamiltonian. `gen` must be the
/// generator that produced `traj`; the auxiliary path uses its thermal
/// counterpart. The second-law entry is `E_d / T` (thermal bath) or
/// `E~_d / T` (squeezed bath).
pub fn tight_bound_time_dependent(
    traj: &Trajectory,
    gen: &GeneratorSpec,
    cfg: &IntegrationConfig,
    finality: Finality,
) -> Result<BoundReport> {
    check_finality(traj, finality)?;
    let aux = auxiliary_passive_path(traj, gen, cfg)?;
    let profile = bound_profile(traj, &aux, gen)?;
    let last = profile.last().expect("non-empty");
    let temperature = bath_temperature(gen)?;
    let sigma = match gen.bath() {
        BathTag::Thermal { .. } => thermal_sigma_trace(traj, temperature)?,
        _ => vec![],
    };
    Ok(BoundReport::assemble(
        last.delta_s,
        temperature,
        last.second_law,
        last.tight,
        sigma,
    ))
}

/// Running values of the three quantities for every prefix of a stroke.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundPoint {
    pub t: f64,
    pub delta_s: f64,
    /// `E_d / T` or `E~_d / T`.
    pub second_law: f64,
    /// `Q' / T`.
    pub tight: f64,
}

/// Bounds as functions of stroke duration: point `i` treats the prefix
/// `[t_0, t_i]` as a complete stroke.
pub fn bound_profile(traj: &Trajectory, aux: &Trajectory, gen: &GeneratorSpec) -> Result<Vec<BoundPoint>> {
    if aux.times() != traj.times() {
        return Err(Error::Trajectory(
            "auxiliary path must share the trajectory grid".into(),
        ));
    }
    let temperature = bath_temperature(gen)?;
    let second = match gen.bath() {
        BathTag::Squeezed { r, .. } => squeezed_frame_dissipation_profile(traj, *r)?,
        _ => running_dissipation(traj),
    };
    let tight = running_dissipation(aux);
    let s0 = von_neumann_entropy(traj.first_state())?;
    traj.times()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            Ok(BoundPoint {
                t,
                delta_s: von_neumann_entropy(&traj.states()[i])? - s0,
                second_law: over_temperature(second[i], temperature),
                tight: over_temperature(tight[i], temperature),
            })
        })
        .collect()
}

fn running_dissipation(traj: &Trajectory) -> Vec<f64> {
    let mut out = vec![0.0; traj.len()];
    if traj.meta.kind == StrokeKind::Unitary {
        return out;
    }
    for i in 0..traj.len() - 1 {
        let h_bar = (traj.hamiltonians()[i].matrix() + traj.hamiltonians()[i + 1].matrix()) * C64::new(0.5, 0.0);
        let d_rho = traj.states()[i + 1].matrix() - traj.states()[i].matrix();
        out[i + 1] = out[i] + trace_product(&d_rho, &h_bar).re;
    }
    out
}

/// `S(pi_0 || pi_ss)`, the relative entropy of the passive counterparts.
pub fn passive_pair_inequality(pi0: &DensityOperator, pi_ss: &DensityOperator) -> Result<f64> {
    relative_entropy(pi0, pi_ss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_core::{sigma_z, HilbertSpace};
    use approx::assert_abs_diff_eq;

    #[test]
    fn stationary_point_has_zero_rate() {
        let g = gibbs_state(&sigma_z().scaled(0.5), 0.7).unwrap();
        let zero = CMatrix::zeros(2, 2);
        assert_eq!(spohn_rate(&g, &g, &zero).unwrap(), 0.0);
    }

    #[test]
    fn rank_deficient_steady_state_is_rejected() {
        let pure = DensityOperator::from_populations(&[1.0, 0.0]).unwrap();
        let mixed = DensityOperator::from_populations(&[0.5, 0.5]).unwrap();
        let err = spohn_rate(&mixed, &pure, &CMatrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::DivergentRelativeEntropy(_)));
    }

    #[test]
    fn production_examples() {
        let a = DensityOperator::from_populations(&[0.7, 0.3]).unwrap();
        let b = DensityOperator::from_populations(&[0.5, 0.5]).unwrap();
        assert_eq!(entropy_production_total(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(entropy_production_total(&a, &b).unwrap(), 0.0823, epsilon = 5e-5);
        assert_eq!(passive_pair_inequality(&b, &b).unwrap(), 0.0);
    }

    #[test]
    fn zero_temperature_sentinels() {
        assert_eq!(over_temperature(1.0, 0.0), f64::INFINITY);
        assert_eq!(over_temperature(-1.0, 1e-12), f64::NEG_INFINITY);
        assert_eq!(over_temperature(0.0, 0.0), 0.0);
        assert_eq!(over_temperature(1.0, 2.0), 0.5);
    }

    #[test]
    fn squeezed_frame_maps_steady_state_to_thermal_energy() {
        let (nb, r, omega) = (0.4, 0.3, 1.7);
        let space = HilbertSpace::new(40).unwrap();
        let h = number_operator(space).scaled(omega);
        let th = gibbs_state(&h, crate::quantum_core::bose_temperature(omega, nb)).unwrap();
        let ss = crate::quantum_core::squeeze_state(&th, r).unwrap();
        let ht = squeezed_frame_hamiltonian(&h, r).unwrap();
        assert_abs_diff_eq!(ht.expectation(&ss), omega * nb, epsilon = 1e-8);
        assert!(squeezed_frame_hamiltonian(&sigma_z(), r).is_err());
    }
}
