//! Markovian master equations `d rho/dt = L(t) rho` with
//!
//! ```text
//! L(t) rho = -i [H_c(t), rho] + sum_k gamma_k(t) D(A_k, B_k) rho,
//! D(A, B) rho = 2 A rho B - B A rho - rho B A.
//! ```
//!
//! Bath generators are written in the frame co-rotating with the free
//! oscillator, where the squeezing phase is stationary. The free Hamiltonian
//! `omega(t) a^dagger a` commutes with itself at all times and the
//! dissipators are covariant under the rotation, so this frame changes
//! coherences only by a phase: populations, energies, passive energies,
//! ergotropies and entropies are the same as in the lab frame. Each
//! generator therefore carries two Hamiltonians, the coherent part that
//! enters the dynamics and the observable `H(t)` that is reported with the
//! trajectory and used for energy accounting.
//!
//! Superoperators use column stacking, `vec(X)[i + j d] = X[i, j]`, so that
//! `vec(A X B) = (B^T (x) A) vec(X)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, FullPivLU};

use crate::error::{Error, Result};
use crate::passivity::{StrokeKind, Trajectory};
use crate::quantum_core::{
    bose_occupation, fock_annihilation, fock_creation, number_operator, trace_distance, CMatrix, DensityOperator,
    HilbertSpace, Operator, SparseOp, SpectralDecomposition, C64,
};

/// Scalar time dependence of a generator term.
#[derive(Clone)]
pub enum Coefficient {
    Const(f64),
    Fn(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Coefficient {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Coefficient::Const(c) => *c,
            Coefficient::Fn(f) => f(t),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Coefficient::Const(_))
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Const(c) => write!(f, "Const({c})"),
            Coefficient::Fn(_) => write!(f, "Fn(..)"),
        }
    }
}

/// `coefficient(t) * op`.
#[derive(Clone, Debug)]
pub struct HamiltonianTerm {
    op: Operator,
    sparse: SparseOp,
    coefficient: Coefficient,
}

impl HamiltonianTerm {
    pub fn new(op: Operator, coefficient: Coefficient) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian(crate::quantum_core::hermitian_deviation(
                op.matrix(),
            )));
        }
        let sparse = SparseOp::from_dense(op.matrix());
        Ok(Self {
            op,
            sparse,
            coefficient,
        })
    }
}

/// One dissipator `rate(t) * D(A, B)`.
#[derive(Clone, Debug)]
pub struct DissipatorSpec {
    a: Operator,
    b: Operator,
    rate: Coefficient,
    sa: SparseOp,
    sb: SparseOp,
    sba: SparseOp,
}

impl DissipatorSpec {
    pub fn new(a: Operator, b: Operator, rate: Coefficient) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        let ba = b.matrix() * a.matrix();
        Ok(Self {
            sa: SparseOp::from_dense(a.matrix()),
            sb: SparseOp::from_dense(b.matrix()),
            sba: SparseOp::from_dense(&ba),
            a,
            b,
            rate,
        })
    }

    pub fn a(&self) -> &Operator {
        &self.a
    }

    pub fn b(&self) -> &Operator {
        &self.b
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.rate.at(t)
    }
}

/// Physical origin of a generator, used to pair trajectories with the
/// thermal generator of the auxiliary passive path.
#[derive(Clone, Debug, PartialEq)]
pub enum BathTag {
    Thermal { temperature: f64 },
    Squeezed { temperature: f64, r: f64 },
    Custom,
}

#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    label: String,
    dim: usize,
    observable: Vec<HamiltonianTerm>,
    coherent: Vec<HamiltonianTerm>,
    dissipators: Vec<DissipatorSpec>,
    rate_scale: f64,
    fock_guard: bool,
    bath: BathTag,
    thermal_counterpart: Option<Box<GeneratorSpec>>,
    squeezing: f64,
}

impl GeneratorSpec {
    /// Generator whose coherent part is also the reported Hamiltonian.
    pub fn new(
        label: impl Into<String>,
        hamiltonian: Vec<HamiltonianTerm>,
        dissipators: Vec<DissipatorSpec>,
        rate_scale: f64,
    ) -> Result<Self> {
        Self::with_frames(label, hamiltonian.clone(), hamiltonian, dissipators, rate_scale)
    }

    /// Generator with separate reported and dynamical Hamiltonians.
    pub fn with_frames(
        label: impl Into<String>,
        observable: Vec<HamiltonianTerm>,
        coherent: Vec<HamiltonianTerm>,
        dissipators: Vec<DissipatorSpec>,
        rate_scale: f64,
    ) -> Result<Self> {
        let dim = observable
            .first()
            .map(|t| t.op.dim())
            .or_else(|| dissipators.first().map(|d| d.a.dim()))
            .ok_or_else(|| Error::Domain("generator has no terms".into()))?;
        for d in observable
            .iter()
            .chain(&coherent)
            .map(|t| t.op.dim())
            .chain(dissipators.iter().map(|d| d.a.dim()))
        {
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: d });
            }
        }
        if !(rate_scale > 0.0) {
            return Err(Error::Domain(format!("rate scale must be positive, got {rate_scale}")));
        }
        Ok(Self {
            label: label.into(),
            dim,
            observable,
            coherent,
            dissipators,
            rate_scale,
            fock_guard: false,
            bath: BathTag::Custom,
            thermal_counterpart: None,
            squeezing: 0.0,
        })
    }

    /// Enables the truncation guard on the top two Fock levels.
    pub fn with_fock_guard(mut self) -> Self {
        self.fock_guard = true;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    pub fn bath(&self) -> &BathTag {
        &self.bath
    }

    pub fn dissipators(&self) -> &[DissipatorSpec] {
        &self.dissipators
    }

    /// Thermal (`r = 0`) generator sharing this one's rates, frequencies and
    /// temperature; present for squeezed baths.
    pub fn thermal_counterpart(&self) -> Option<&GeneratorSpec> {
        self.thermal_counterpart.as_deref()
    }

    /// Squeezing `r` of the unitary `U = S(r)` relating this generator to its
    /// thermal counterpart, `L_sq = U L_th(U^dagger . U) U^dagger`.
    pub fn equivalence_squeezing(&self) -> f64 {
        self.squeezing
    }

    /// True when no term depends on time.
    pub fn is_static(&self) -> bool {
        self.observable.iter().all(|t| t.coefficient.is_const())
            && self.coherent.iter().all(|t| t.coefficient.is_const())
            && self.dissipators.iter().all(|d| d.rate.is_const())
    }

    /// Reported Hamiltonian `H(t)`.
    pub fn hamiltonian_at(&self, t: f64) -> Operator {
        sum_terms(&self.observable, t, self.dim)
    }

    pub fn coherent_hamiltonian_at(&self, t: f64) -> Operator {
        sum_terms(&self.coherent, t, self.dim)
    }

    /// `L(t) rho`.
    pub fn apply(&self, t: f64, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        self.apply_into(t, rho, &mut out);
        out
    }

    fn apply_into(&self, t: f64, rho: &CMatrix, out: &mut CMatrix) {
        out.fill(C64::new(0.0, 0.0));
        for term in &self.coherent {
            let c = term.coefficient.at(t);
            if c == 0.0 {
                continue;
            }
            term.sparse.left_mul_into(rho, C64::new(0.0, -c), out);
            term.sparse.right_mul_into(rho, C64::new(0.0, c), out);
        }
        for d in &self.dissipators {
            let g = d.rate.at(t);
            if g == 0.0 {
                continue;
            }
            let rho_b = d.sb.right_mul(rho);
            d.sa.left_mul_into(&rho_b, C64::new(2.0 * g, 0.0), out);
            d.sba.left_mul_into(rho, C64::new(-g, 0.0), out);
            d.sba.right_mul_into(rho, C64::new(-g, 0.0), out);
        }
    }

    /// Column-stacked Liouvillian at time `t`.
    pub fn liouvillian(&self, t: f64) -> CMatrix {
        let d = self.dim;
        let mut l = CMatrix::zeros(d * d, d * d);
        let idx = |i: usize, j: usize| i + j * d;
        // c A X: entries A[i,k] couple X[k,j] -> out[i,j]
        let add_left = |l: &mut CMatrix, s: &SparseOp, c: C64| {
            for &(i, k, v) in s_entries(s) {
                for j in 0..d {
                    l[(idx(i, j), idx(k, j))] += c * v;
                }
            }
        };
        for term in &self.coherent {
            let c = term.coefficient.at(t);
            add_left(&mut l, &term.sparse, C64::new(0.0, -c));
            add_right(&mut l, &term.sparse, C64::new(0.0, c), d);
        }
        for ds in &self.dissipators {
            let g = ds.rate.at(t);
            if g == 0.0 {
                continue;
            }
            for &(i, k, av) in s_entries(&ds.sa) {
                for &(m, j, bv) in s_entries(&ds.sb) {
                    l[(idx(i, j), idx(k, m))] += C64::new(2.0 * g, 0.0) * av * bv;
                }
            }
            add_left(&mut l, &ds.sba, C64::new(-g, 0.0));
            add_right(&mut l, &ds.sba, C64::new(-g, 0.0), d);
        }
        l
    }
}

fn s_entries(s: &SparseOp) -> &[(usize, usize, C64)] {
    s.entries()
}

// c X B: entries B[k,j] couple X[i,k] -> out[i,j]
fn add_right(l: &mut CMatrix, s: &SparseOp, c: C64, d: usize) {
    for &(k, j, v) in s.entries() {
        for i in 0..d {
            l[(i + j * d, i + k * d)] += c * v;
        }
    }
}

fn sum_terms(terms: &[HamiltonianTerm], t: f64, dim: usize) -> Operator {
    let mut m = CMatrix::zeros(dim, dim);
    for term in terms {
        m += term.op.matrix() * C64::new(term.coefficient.at(t), 0.0);
    }
    Operator::hermitian(m).expect("sum of Hermitian terms")
}

/// `N = n (cosh^2 r + sinh^2 r) + sinh^2 r`, `M = -cosh r sinh r (2 n + 1)`.
pub fn squeezed_coefficients(n_bar: f64, r: f64) -> (f64, f64) {
    let (c, s) = (r.cosh(), r.sinh());
    let n = n_bar * (c * c + s * s) + s * s;
    let m = -c * s * (2.0 * n_bar + 1.0);
    (n, m)
}

/// Extra steady-state excitation of a squeezed bath, `(2 n + 1) sinh^2 r`.
pub fn squeezing_excess(n_bar: f64, r: f64) -> f64 {
    (2.0 * n_bar + 1.0) * r.sinh().powi(2)
}

fn check_complete_positivity(n: f64, m: f64) {
    assert!(
        n * (n + 1.0) - m * m >= -1e-12 * (1.0 + n * n),
        "squeezed-bath coefficients violate complete positivity: N = {n}, M = {m}"
    );
}

fn squeezed_dissipators(
    space: HilbertSpace,
    kappa: f64,
    nm: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
    static_nm: Option<(f64, f64)>,
) -> Result<Vec<DissipatorSpec>> {
    let a = fock_annihilation(space)?;
    let ad = fock_creation(space)?;
    let coef = |f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, v: Option<f64>| match v {
        Some(c) => Coefficient::Const(c),
        None => Coefficient::Fn(f),
    };
    let (n1, n2, n3) = (nm.clone(), nm.clone(), nm);
    let mut out = vec![
        DissipatorSpec::new(
            a.clone(),
            ad.clone(),
            coef(
                Arc::new(move |t| kappa * (n1(t).0 + 1.0)),
                static_nm.map(|(n, _)| kappa * (n + 1.0)),
            ),
        )?,
        DissipatorSpec::new(
            ad.clone(),
            a.clone(),
            coef(Arc::new(move |t| kappa * n2(t).0), static_nm.map(|(n, _)| kappa * n)),
        )?,
    ];
    let squeezed = static_nm.map(|(_, m)| m != 0.0).unwrap_or(true);
    if squeezed {
        let n3b = n3.clone();
        out.push(DissipatorSpec::new(
            a.clone(),
            a.clone(),
            coef(Arc::new(move |t| -kappa * n3(t).1), static_nm.map(|(_, m)| -kappa * m)),
        )?);
        out.push(DissipatorSpec::new(
            ad.clone(),
            ad,
            coef(Arc::new(move |t| -kappa * n3b(t).1), static_nm.map(|(_, m)| -kappa * m)),
        )?);
    }
    Ok(out)
}

fn check_truncation(space: HilbertSpace, occupation: f64) -> Result<()> {
    let n_max = (space.dim() - 1) as f64;
    if n_max < 10.0 * occupation {
        return Err(Error::Truncation(format!(
            "N_max = {n_max} is below 10 x the steady-state occupation {occupation}"
        )));
    }
    Ok(())
}

/// Oscillator of frequency `omega` coupled at rate `kappa` to a squeezed
/// thermal bath of occupation `n_bar` and squeezing `r` (phase zero):
///
/// `kappa (N+1) D(a, a^dagger) + kappa N D(a^dagger, a) - kappa M D(a, a) - kappa M D(a^dagger, a^dagger)`.
///
/// The steady state is `S(r) rho_th S(r)^dagger` with `<a^dagger a> = N` and
/// `<a^2> = M`.
pub fn squeezed_bath_generator(
    kappa: f64,
    n_bar: f64,
    r: f64,
    omega: f64,
    space: HilbertSpace,
) -> Result<GeneratorSpec> {
    validate_bath(kappa, n_bar, r, omega)?;
    let (n, m) = squeezed_coefficients(n_bar, r);
    check_complete_positivity(n, m);
    check_truncation(space, n)?;
    let temperature = if n_bar > 0.0 {
        omega / (1.0 / n_bar).ln_1p()
    } else {
        0.0
    };
    let observable = vec![HamiltonianTerm::new(number_operator(space), Coefficient::Const(omega))?];
    let label = format!("squeezed-bath(kappa={kappa}, n={n_bar}, omega={omega})");
    let nm: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync> = Arc::new(move |_| (n, m));
    let dissipators = squeezed_dissipators(space, kappa, nm, Some((n, m)))?;
    let mut gen = GeneratorSpec::with_frames(label, observable, vec![], dissipators, kappa)?.with_fock_guard();
    if r == 0.0 {
        gen.bath = BathTag::Thermal { temperature };
        return Ok(gen);
    }
    gen.bath = BathTag::Squeezed { temperature, r };
    gen.squeezing = r;
    gen.thermal_counterpart = Some(Box::new(squeezed_bath_generator(kappa, n_bar, 0.0, omega, space)?));
    Ok(gen)
}

/// Squeezed thermal bath at temperature `T` acting on an oscillator whose
/// frequency follows `omega(t)`; the occupation `n(t) = n_B(omega(t), T)`
/// tracks the instantaneous frequency.
pub fn squeezed_bath_ramp(
    kappa: f64,
    temperature: f64,
    r: f64,
    omega: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    space: HilbertSpace,
    label: &str,
) -> Result<GeneratorSpec> {
    if !(kappa > 0.0) || !(temperature >= 0.0) || !(r >= 0.0) {
        return Err(Error::Domain(format!(
            "invalid ramp bath kappa={kappa}, T={temperature}, r={r}"
        )));
    }
    let w = omega.clone();
    let nm: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync> = Arc::new(move |t| {
        let (n, m) = squeezed_coefficients(bose_occupation(w(t), temperature), r);
        check_complete_positivity(n, m);
        (n, m)
    });
    let w = omega.clone();
    let observable = vec![HamiltonianTerm::new(
        number_operator(space),
        Coefficient::Fn(Arc::new(move |t| w(t))),
    )?];
    let mut dissipators = squeezed_dissipators(space, kappa, nm, None)?;
    if r == 0.0 {
        dissipators.truncate(2);
    }
    let mut gen = GeneratorSpec::with_frames(
        format!("{label}(kappa={kappa}, T={temperature})"),
        observable,
        vec![],
        dissipators,
        kappa,
    )?
    .with_fock_guard();
    if r == 0.0 {
        gen.bath = BathTag::Thermal { temperature };
        return Ok(gen);
    }
    gen.bath = BathTag::Squeezed { temperature, r };
    gen.squeezing = r;
    gen.thermal_counterpart = Some(Box::new(squeezed_bath_ramp(
        kappa,
        temperature,
        0.0,
        omega,
        space,
        label,
    )?));
    Ok(gen)
}

/// Plain thermal oscillator bath (`r = 0`).
pub fn thermal_generator(kappa: f64, n_bar: f64, omega: f64, space: HilbertSpace) -> Result<GeneratorSpec> {
    squeezed_bath_generator(kappa, n_bar, 0.0, omega, space)
}

/// Qubit `H = (omega0 / 2) sigma_z` with emission rate `gamma (n + 1)` and
/// absorption rate `gamma n`.
pub fn qubit_thermal_generator(gamma: f64, n_bar: f64, omega0: f64) -> Result<GeneratorSpec> {
    validate_bath(gamma, n_bar, 0.0, omega0)?;
    let sm = crate::quantum_core::sigma_minus();
    let sp = sm.dagger();
    let h = vec![HamiltonianTerm::new(
        crate::quantum_core::sigma_z(),
        Coefficient::Const(omega0 / 2.0),
    )?];
    let dissipators = vec![
        DissipatorSpec::new(sm.clone(), sp.clone(), Coefficient::Const(gamma * (n_bar + 1.0)))?,
        DissipatorSpec::new(sp, sm, Coefficient::Const(gamma * n_bar))?,
    ];
    let mut gen = GeneratorSpec::new(
        format!("qubit-thermal(gamma={gamma}, n={n_bar}, omega={omega0})"),
        h,
        dissipators,
        gamma,
    )?;
    let temperature = if n_bar > 0.0 {
        omega0 / (1.0 / n_bar).ln_1p()
    } else {
        0.0
    };
    gen.bath = BathTag::Thermal { temperature };
    Ok(gen)
}

/// Pump term of the reduced piston dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PumpKind {
    None,
    Linear,
    Quadratic,
}

/// Reduced piston master equation in the frame rotating at `nu`:
///
/// `(Gamma + D)/2 D(b, b^dagger) + D/2 D(b^dagger, b)` plus the pump
/// `H = i kappa/2 (b^dagger^2 - b^2)` (quadratic) or
/// `H = i kappa (b^dagger - b)` (linear). The reported Hamiltonian is
/// `nu b^dagger b`.
pub fn piston_generator(
    gamma: f64,
    diffusion: f64,
    kappa_pump: f64,
    pump: PumpKind,
    nu: f64,
    space: HilbertSpace,
) -> Result<GeneratorSpec> {
    if diffusion < 0.0 || diffusion + gamma < 0.0 {
        return Err(Error::Model(format!(
            "drift {gamma} and diffusion {diffusion} violate D >= 0, D + Gamma >= 0"
        )));
    }
    let b = fock_annihilation(space)?;
    let bd = fock_creation(space)?;
    let coherent = match pump {
        PumpKind::None => vec![],
        PumpKind::Quadratic => {
            let b2 = b.matrix() * b.matrix();
            let m = (b2.adjoint() - b2) * C64::new(0.0, 0.5 * kappa_pump);
            vec![HamiltonianTerm::new(Operator::hermitian(m)?, Coefficient::Const(1.0))?]
        }
        PumpKind::Linear => {
            let m = (bd.matrix() - b.matrix()) * C64::new(0.0, kappa_pump);
            vec![HamiltonianTerm::new(Operator::hermitian(m)?, Coefficient::Const(1.0))?]
        }
    };
    let observable = vec![HamiltonianTerm::new(number_operator(space), Coefficient::Const(nu))?];
    let dissipators = vec![
        DissipatorSpec::new(b.clone(), bd.clone(), Coefficient::Const(0.5 * (gamma + diffusion)))?,
        DissipatorSpec::new(bd, b, Coefficient::Const(0.5 * diffusion))?,
    ];
    let scale = gamma.abs().max(diffusion).max(kappa_pump.abs()).max(1e-300);
    Ok(GeneratorSpec::with_frames(
        format!("piston(Gamma={gamma}, D={diffusion}, kappa={kappa_pump}, pump={pump:?})"),
        observable,
        coherent,
        dissipators,
        scale,
    )?
    .with_fock_guard())
}

fn validate_bath(kappa: f64, n_bar: f64, r: f64, omega: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("rate must be positive, got {kappa}")));
    }
    if !(n_bar >= 0.0) || !n_bar.is_finite() {
        return Err(Error::Domain(format!("occupation must be non-negative, got {n_bar}")));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("squeezing must be non-negative, got {r}")));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {omega}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub struct IntegrationConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Spacing of stored points.
    pub store_every: f64,
    /// For time-dependent `H`, split intervals (up to `2^8` parts) where the
    /// passive energy changes by more than `1e-3` of the energy scale.
    pub refine_passive: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: f64::INFINITY,
            store_every: 0.05,
            refine_passive: true,
        }
    }
}

impl IntegrationConfig {
    pub fn with_store_every(mut self, dt: f64) -> Self {
        self.store_every = dt;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0 && self.store_every > 0.0) {
            return Err(Error::Domain(
                "integration tolerances and steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Tolerance on `|Tr rho - 1|` at stored points.
pub const TRACE_DRIFT_TOL: f64 = 1e-8;
/// Smallest admissible eigenvalue at stored points.
pub const POSITIVITY_FLOOR: f64 = -1e-8;
/// Largest admissible population of the top two Fock levels.
pub const TRUNCATION_WEIGHT_TOL: f64 = 1e-6;

/// Integrates `gen` from `rho0` over `t_span`, storing every
/// `cfg.store_every` plus the end point.
pub fn integrate(
    gen: &GeneratorSpec,
    rho0: &DensityOperator,
    t_span: (f64, f64),
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::Domain(format!("empty time span ({t0}, {t1})")));
    }
    let grid = uniform_grid(t0, t1, cfg.store_every);
    let traj = integrate_on_grid(gen, rho0, &grid, cfg)?;
    // with constant H the heat quadrature telescopes exactly, so the grid
    // only needs refining when H moves
    if !cfg.refine_passive || gen.is_static() {
        return Ok(traj);
    }
    let threshold = 1e-3 * energy_scale(&traj)?;
    let e_pas = traj.passive_energies()?;
    // split each interval by the power of two its passive-energy step needs
    let mut refined = vec![grid[0]];
    let mut deepest = 0u32;
    for (i, w) in grid.windows(2).enumerate() {
        let step = (e_pas[i + 1] - e_pas[i]).abs();
        let level = if step > threshold {
            (step / threshold).log2().ceil().clamp(1.0, 8.0) as u32
        } else {
            0
        };
        deepest = deepest.max(level);
        let parts = 1usize << level;
        for k in 1..parts {
            refined.push(w[0] + (w[1] - w[0]) * k as f64 / parts as f64);
        }
        refined.push(w[1]);
    }
    if deepest == 0 {
        return Ok(traj);
    }
    let mut traj = integrate_on_grid(gen, rho0, &refined, cfg)?;
    traj.meta.flags.refinements = deepest;
    Ok(traj)
}

/// Energy scale for the passive-grid criterion: the larger of the largest
/// `|E(t)|` and the smallest non-zero level spacing of `H(t_0)`.
fn energy_scale(traj: &Trajectory) -> Result<f64> {
    let e_max = traj.energies().iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let levels = traj.first_hamiltonian().spectral()?;
    let gap = levels
        .eigenvalues()
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 1e-12)
        .fold(f64::INFINITY, f64::min);
    let gap = if gap.is_finite() { gap } else { 0.0 };
    Ok(e_max.max(gap).max(1e-300))
}

pub fn uniform_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let mut g: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    g.push(t1);
    g
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lin(base: &CMatrix, terms: &[(f64, &CMatrix)]) -> CMatrix {
    let mut out = base.clone();
    for (c, m) in terms {
        out.zip_apply(*m, |o, v| *o += v * *c);
    }
    out
}

/// Integrates on a caller-supplied grid; the first grid point is the
/// initial time.
pub fn integrate_on_grid(
    gen: &GeneratorSpec,
    rho0: &DensityOperator,
    grid: &[f64],
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            got: rho0.dim(),
        });
    }
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "grid must be strictly increasing with >= 2 points".into(),
        ));
    }
    let t_end = *grid.last().expect("non-empty");
    let span = t_end - grid[0];
    let mut t = grid[0];
    let mut y = rho0.matrix().clone();
    let mut f = gen.apply(t, &y);
    let mut h = (0.01 / gen.rate_scale()).min(cfg.max_step).min(span);
    let mut recorder = Recorder::new(gen, grid.len());
    recorder.push(gen, t, y.clone())?;
    let mut next = 1;
    let mut steps = 0usize;
    let mut k = vec![CMatrix::zeros(gen.dim(), gen.dim()); 7];
    while next < grid.len() {
        if steps > 5_000_000 {
            return Err(Error::Integration("step budget exhausted".into()));
        }
        h = h.min(cfg.max_step).min(t_end - t);
        if h < 1e-14 * span.max(1.0) {
            return Err(Error::Integration(format!("step size collapsed at t = {t}")));
        }
        k[0].copy_from(&f);
        gen.apply_into(t + 0.2 * h, &lin(&y, &[(h * A21, &k[0])]), &mut k[1]);
        gen.apply_into(t + 0.3 * h, &lin(&y, &[(h * A31, &k[0]), (h * A32, &k[1])]), &mut k[2]);
        gen.apply_into(
            t + 0.8 * h,
            &lin(&y, &[(h * A41, &k[0]), (h * A42, &k[1]), (h * A43, &k[2])]),
            &mut k[3],
        );
        gen.apply_into(
            t + 8.0 / 9.0 * h,
            &lin(
                &y,
                &[(h * A51, &k[0]), (h * A52, &k[1]), (h * A53, &k[2]), (h * A54, &k[3])],
            ),
            &mut k[4],
        );
        gen.apply_into(
            t + h,
            &lin(
                &y,
                &[
                    (h * A61, &k[0]),
                    (h * A62, &k[1]),
                    (h * A63, &k[2]),
                    (h * A64, &k[3]),
                    (h * A65, &k[4]),
                ],
            ),
            &mut k[5],
        );
        let y_new = lin(
            &y,
            &[
                (h * B1, &k[0]),
                (h * B3, &k[2]),
                (h * B4, &k[3]),
                (h * B5, &k[4]),
                (h * B6, &k[5]),
            ],
        );
        let mut k6 = CMatrix::zeros(gen.dim(), gen.dim());
        gen.apply_into(t + h, &y_new, &mut k6);
        k[6].copy_from(&k6);
        let zero = CMatrix::zeros(gen.dim(), gen.dim());
        let err = lin(
            &zero,
            &[
                (h * E1, &k[0]),
                (h * E3, &k[2]),
                (h * E4, &k[3]),
                (h * E5, &k[4]),
                (h * E6, &k[5]),
                (h * E7, &k[6]),
            ],
        );
        let mut norm = 0.0f64;
        for ((e, a), b) in err.iter().zip(y.iter()).zip(y_new.iter()) {
            let sc = cfg.abs_tol + cfg.rel_tol * a.norm().max(b.norm());
            norm = norm.max(e.norm() / sc);
        }
        steps += 1;
        if !norm.is_finite() {
            h *= 0.2;
            continue;
        }
        if norm <= 1.0 {
            let t_new = t + h;
            // dense output on stored points inside (t, t_new]
            while next < grid.len() && grid[next] <= t_new * (1.0 + 1e-15) + 1e-300 {
                let ts = grid[next];
                let state = if next == grid.len() - 1 && (ts - t_new).abs() <= 1e-12 * span.max(1.0) {
                    y_new.clone()
                } else {
                    hermite(&y, &f, &y_new, &k6, t, h, ts)
                };
                recorder.push(gen, ts, state)?;
                next += 1;
            }
            t = t_new;
            y = y_new;
            f = k6;
            let fac = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            h *= (0.9 * norm.powf(-0.2)).clamp(0.1, 0.9);
        }
    }
    recorder.finish(gen, grid.to_vec())
}

fn hermite(y0: &CMatrix, f0: &CMatrix, y1: &CMatrix, f1: &CMatrix, t0: f64, h: f64, t: f64) -> CMatrix {
    let s = ((t - t0) / h).clamp(0.0, 1.0);
    let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
    let h10 = s * s * s - 2.0 * s * s + s;
    let h01 = -2.0 * s * s * s + 3.0 * s * s;
    let h11 = s * s * s - s * s;
    let mut out = y0 * C64::new(h00, 0.0);
    out.zip_apply(f0, |o, v| *o += v * (h10 * h));
    out.zip_apply(y1, |o, v| *o += v * h01);
    out.zip_apply(f1, |o, v| *o += v * (h11 * h));
    out
}

struct Recorder {
    states: Vec<DensityOperator>,
    hamiltonians: Vec<Operator>,
    derivatives: Vec<CMatrix>,
    slow_violation: bool,
    truncation_weight: f64,
    repaired: f64,
}

impl Recorder {
    fn new(_gen: &GeneratorSpec, n: usize) -> Self {
        Self {
            states: Vec::with_capacity(n),
            hamiltonians: Vec::with_capacity(n),
            derivatives: Vec::with_capacity(n),
            slow_violation: false,
            truncation_weight: 0.0,
            repaired: 0.0,
        }
    }

    fn push(&mut self, gen: &GeneratorSpec, t: f64, m: CMatrix) -> Result<()> {
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let tr = m.trace();
        let drift = (tr - C64::new(1.0, 0.0)).norm();
        if drift > TRACE_DRIFT_TOL {
            return Err(Error::TraceDrift(drift));
        }
        let sd = SpectralDecomposition::of_hermitian(&m);
        let min = sd.eigenvalues()[0];
        if min < POSITIVITY_FLOOR {
            return Err(Error::PositivityLost(min));
        }
        let state = if min < 0.0 {
            self.repaired = self.repaired.max(-min);
            DensityOperator::from_matrix_unchecked(repair_positivity(&sd))
        } else {
            DensityOperator::from_parts_unchecked(m, sd)
        };
        let m = state.matrix();
        let d = gen.dim();
        if gen.fock_guard && d > 2 {
            let top = m[(d - 1, d - 1)].re + m[(d - 2, d - 2)].re;
            self.truncation_weight = self.truncation_weight.max(top);
            if top >= TRUNCATION_WEIGHT_TOL {
                return Err(Error::Truncation(format!(
                    "population {top:e} in the top two Fock levels at t = {t}"
                )));
            }
        }
        let h = gen.hamiltonian_at(t);
        if !gen.is_static() {
            let dt = 1e-6 * (1.0 + t.abs());
            let hp = gen.hamiltonian_at(t + dt);
            let hm = gen.hamiltonian_at(t - dt);
            let hdot = (hp.matrix() - hm.matrix()).norm() / (2.0 * dt);
            let hn = h.matrix().norm();
            if hn > 0.0 && hdot / hn > 0.1 * gen.rate_scale() {
                self.slow_violation = true;
            }
        }
        self.derivatives.push(gen.apply(t, m));
        self.states.push(state);
        self.hamiltonians.push(h);
        Ok(())
    }

    fn finish(self, gen: &GeneratorSpec, times: Vec<f64>) -> Result<Trajectory> {
        let mut traj = Trajectory::new(times, self.states, self.hamiltonians)?
            .with_derivatives(self.derivatives)?
            .with_kind(
                if gen
                    .dissipators
                    .iter()
                    .all(|d| d.rate.is_const() && d.rate.at(0.0) == 0.0)
                {
                    StrokeKind::Unitary
                } else {
                    StrokeKind::Dissipative
                },
            )
            .with_label(gen.label.clone());
        traj.meta.flags.slow_driving_violated = self.slow_violation;
        traj.meta.flags.truncation_weight = self.truncation_weight;
        traj.meta.flags.positivity_repair = self.repaired;
        Ok(traj)
    }
}

/// Zeroes eigenvalues in `[POSITIVITY_FLOOR, 0)` and removes the added
/// weight from the largest eigenvalue, keeping the trace unchanged.
fn repair_positivity(sd: &SpectralDecomposition) -> CMatrix {
    let mut values = sd.eigenvalues().to_vec();
    let mut added = 0.0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            added -= *v;
            *v = 0.0;
        }
    }
    let last = values.len() - 1;
    values[last] -= added;
    let m = sd.with_eigenvalues(&values);
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `||L rho||_max <= 1e-8 x rate scale`.
pub fn is_stationary(gen: &GeneratorSpec, t: f64, rho: &DensityOperator) -> bool {
    gen.apply(t, rho.matrix()).camax() <= 1e-8 * gen.rate_scale()
}

/// Largest dimension accepted by [`steady_state`]; the dense Liouvillian has
/// `dim^4` entries.
pub const STEADY_STATE_MAX_DIM: usize = 40;

/// Unique stationary state of `L(t)`.
///
/// Full-pivot LU of the column-stacked Liouvillian; the number of pivots
/// below `1e-9` times the largest is the numerical nullity and must be one.
/// The null vector comes from back substitution with the last pivot
/// dropped.
pub fn steady_state(gen: &GeneratorSpec, t: f64) -> Result<DensityOperator> {
    let d = gen.dim();
    if d > STEADY_STATE_MAX_DIM {
        return Err(Error::Domain(format!(
            "steady_state supports dim <= {STEADY_STATE_MAX_DIM}, got {d}"
        )));
    }
    let n = d * d;
    let lu = FullPivLU::new(gen.liouvillian(t));
    let (_, _, u, q) = lu.unpack();
    let pivots: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let largest = pivots.iter().cloned().fold(0.0, f64::max);
    let nullity = pivots.iter().filter(|p| **p <= 1e-9 * largest).count();
    if nullity != 1 {
        return Err(Error::DegenerateSteadyState(format!(
            "numerical nullity {nullity} (pivot ratio threshold 1e-9)"
        )));
    }
    // full pivoting puts the vanishing pivot last
    let mut z = DVector::from_element(n, C64::new(0.0, 0.0));
    z[n - 1] = C64::new(1.0, 0.0);
    for i in (0..n - 1).rev() {
        let mut acc = C64::new(0.0, 0.0);
        for j in i + 1..n {
            acc += u[(i, j)] * z[j];
        }
        z[i] = -acc / u[(i, i)];
    }
    q.inv_permute_rows(&mut z);
    let m = DMatrix::from_fn(d, d, |i, j| z[i + j * d]);
    let tr = m.trace();
    let m = m / tr;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    DensityOperator::new(m)
}

/// Trace distance between `rho(t_end)` and `rho(t_end - window)` along a
/// trajectory, using the stored point closest to `t_end - window`.
pub fn late_change(traj: &Trajectory, window: f64) -> Result<f64> {
    let times = traj.times();
    let t_end = *times.last().expect("non-empty");
    let target = t_end - window;
    let k = times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map(|(i, _)| i)
        .expect("non-empty");
    trace_distance(&traj.states()[k], traj.last_state())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_core::{gibbs_state, trace_product};
    use approx::assert_abs_diff_eq;

    #[test]
    fn squeezed_coefficient_examples() {
        let (n, m) = squeezed_coefficients(0.0, 0.5);
        assert_abs_diff_eq!(n, 0.5f64.sinh().powi(2), epsilon = 1e-15);
        assert_abs_diff_eq!(n, 0.27154, epsilon = 1e-5);
        assert_abs_diff_eq!(m, -0.58760, epsilon = 1e-5);
        assert_eq!(squeezed_coefficients(1.3, 0.0), (1.3, 0.0));
        for &(nb, r) in &[(0.0, 0.5), (2.0, 1.1), (0.3, 0.01)] {
            let (n, m) = squeezed_coefficients(nb, r);
            // N(N+1) - M^2 = n(n+1): saturated only for a squeezed vacuum
            assert_abs_diff_eq!(n * (n + 1.0) - m * m, nb * (nb + 1.0), epsilon = 1e-12 * (1.0 + n * n));
        }
    }

    #[test]
    fn generator_annihilates_trace() {
        let space = HilbertSpace::new(8).unwrap();
        let gen = squeezed_bath_generator(1.0, 0.2, 0.1, 1.0, space);
        // N_max = 7 is enough for n + dn ~ 0.23
        let gen = gen.unwrap();
        let psi = DVector::from_fn(8, |i, _| C64::new(0.3 * i as f64 - 1.0, 0.1 * (i * i) as f64));
        let rho = DensityOperator::pure(&psi).unwrap();
        let out = gen.apply(0.0, rho.matrix());
        assert!(out.trace().norm() <= 1e-12);
    }

    #[test]
    fn liouvillian_matches_apply() {
        let space = HilbertSpace::new(5).unwrap();
        let gen = piston_generator(-0.2, 0.5, 0.05, PumpKind::Quadratic, 0.3, space).unwrap();
        let x = CMatrix::from_fn(5, 5, |i, j| C64::new((i + 2 * j) as f64 * 0.1, i as f64 - j as f64));
        let direct = gen.apply(0.0, &x);
        let l = gen.liouvillian(0.0);
        let v = DVector::from_fn(25, |k, _| x[(k % 5, k / 5)]);
        let lv = l * v;
        for i in 0..5 {
            for j in 0..5 {
                assert!((lv[i + 5 * j] - direct[(i, j)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn steady_state_examples() {
        // thermal oscillator: Gibbs state of the truncated ladder
        let space = HilbertSpace::new(12).unwrap();
        let gen = thermal_generator(1.0, 0.4, 1.0, space).unwrap();
        let ss = steady_state(&gen, 0.0).unwrap();
        let t = crate::quantum_core::bose_temperature(1.0, 0.4);
        let g = gibbs_state(&number_operator(space), t).unwrap();
        assert!(trace_distance(&ss, &g).unwrap() < 1e-10);

        // qubit detailed balance
        let q = qubit_thermal_generator(0.7, 0.25, 2.0).unwrap();
        let p = steady_state(&q, 0.0).unwrap().populations();
        assert_abs_diff_eq!(p[1] / p[0], 0.25 / 1.25, epsilon = 1e-12);

        // squeezed bath moments
        let space = HilbertSpace::new(36).unwrap();
        let gen = squeezed_bath_generator(1.0, 0.3, 0.4, 1.0, space).unwrap();
        let ss = steady_state(&gen, 0.0).unwrap();
        let (n, m) = squeezed_coefficients(0.3, 0.4);
        let a = fock_annihilation(space).unwrap();
        let a2 = a.product(&a).unwrap();
        // squeezed tails reach the truncation edge at the 1e-7 level
        assert_abs_diff_eq!(number_operator(space).expectation(&ss), n, epsilon = 1e-6);
        assert_abs_diff_eq!(trace_product(ss.matrix(), a2.matrix()).re, m, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_steady_state_is_reported() {
        // no dissipation: every diagonal state is stationary
        let space = HilbertSpace::new(3).unwrap();
        let h = vec![HamiltonianTerm::new(number_operator(space), Coefficient::Const(1.0)).unwrap()];
        let gen = GeneratorSpec::new("free", h, vec![], 1.0).unwrap();
        assert!(matches!(steady_state(&gen, 0.0), Err(Error::DegenerateSteadyState(_))));
    }

    #[test]
    fn truncation_precondition() {
        let space = HilbertSpace::new(10).unwrap();
        assert!(matches!(
            squeezed_bath_generator(1.0, 1.0, 0.5, 1.0, space),
            Err(Error::Truncation(_))
        ));
    }

    #[test]
    fn uniform_grid_ends_on_span() {
        let g = uniform_grid(0.0, 1.0, 0.3);
        assert_eq!(g, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert_eq!(uniform_grid(0.0, 1.0, 0.5), vec![0.0, 0.5, 1.0]);
    }
}
