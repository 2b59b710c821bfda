//! Finite-dimensional operator algebra.
//!
//! Natural units throughout: `hbar = k_B = 1`, so temperatures, frequencies
//! and rates share one scale and entropies are in nats.
//!
//! Basis ordering: index `n` is the `n`-th excitation. For a qubit index 0 is
//! the ground state and index 1 the excited state, so `sigma_z = diag(-1, 1)`
//! and the qubit lowering operator coincides with the two-level truncation of
//! the oscillator annihilation operator.

mod sparse;
mod spectral;

pub use sparse::SparseOp;
pub use spectral::SpectralDecomposition;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Element-wise Hermiticity tolerance for operators and states.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Unit-trace tolerance for density operators.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues in `[-POSITIVITY_TOL, 0]` are round-off and clamped to zero.
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    dim: usize,
}

impl HilbertSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidSpace(format!("dimension {dim} < 2")));
        }
        Ok(Self { dim })
    }

    /// Two-level working fluid.
    pub fn qubit() -> Self {
        Self { dim: 2 }
    }

    /// Oscillator truncated above Fock level `n_max`.
    pub fn fock(n_max: usize) -> Result<Self> {
        Self::new(n_max + 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Largest element-wise deviation `|A_ij - conj(A_ji)|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Dense square operator with a cached Hermiticity flag.
#[derive(Clone, Debug)]
pub struct Operator {
    entries: CMatrix,
    hermitian: bool,
}

impl Operator {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        let hermitian = hermitian_deviation(&entries) <= HERMITIAN_TOL;
        Ok(Self { entries, hermitian })
    }

    /// Builds an operator that must be Hermitian.
    pub fn hermitian(entries: CMatrix) -> Result<Self> {
        let op = Self::new(entries)?;
        if !op.hermitian {
            return Err(Error::NotHermitian(hermitian_deviation(&op.entries)));
        }
        Ok(op)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let entries = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self {
            entries,
            hermitian: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: CMatrix::identity(dim, dim),
            hermitian: true,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            entries: CMatrix::zeros(dim, dim),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dagger(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
            hermitian: self.hermitian,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            entries: &self.entries * C64::new(s, 0.0),
            hermitian: self.hermitian,
        }
    }

    pub fn product(&self, other: &Operator) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Self::new(&self.entries * &other.entries)
    }

    pub fn sum(&self, other: &Operator) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Self::new(&self.entries + &other.entries)
    }

    /// `Re Tr[rho A]`; exact expectation value for Hermitian `A`.
    pub fn expectation(&self, rho: &DensityOperator) -> f64 {
        trace_product(rho.matrix(), &self.entries).re
    }

    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        if !self.hermitian {
            return Err(Error::NotHermitian(hermitian_deviation(&self.entries)));
        }
        Ok(SpectralDecomposition::of_hermitian(&self.entries))
    }

    /// Largest absolute eigenvalue for Hermitian operators, max-abs entry
    /// bound otherwise.
    pub fn norm(&self) -> f64 {
        if self.hermitian {
            let sd = SpectralDecomposition::of_hermitian(&self.entries);
            sd.eigenvalues().iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
        } else {
            self.entries.iter().fold(0.0f64, |acc, v| acc.max(v.norm())) * self.dim() as f64
        }
    }

    pub fn is_diagonal(&self) -> bool {
        is_exactly_diagonal(&self.entries)
    }
}

pub(crate) fn is_exactly_diagonal(m: &CMatrix) -> bool {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != C64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Hermitian, unit-trace, positive semidefinite matrix.
///
/// The spectral decomposition is computed at most once and cached.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    entries: CMatrix,
    spectrum: OnceLock<SpectralDecomposition>,
}

impl DensityOperator {
    /// Validates Hermiticity, trace and positivity at the module tolerances.
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        if entries.nrows() < 2 {
            return Err(Error::InvalidSpace(format!("dimension {} < 2", entries.nrows())));
        }
        let dev = hermitian_deviation(&entries);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let entries = hermitize(&entries);
        let sd = SpectralDecomposition::of_hermitian(&entries);
        let min = sd.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self::with_spectrum(entries, sd))
    }

    fn with_spectrum(entries: CMatrix, sd: SpectralDecomposition) -> Self {
        let spectrum = OnceLock::new();
        let _ = spectrum.set(sd);
        Self { entries, spectrum }
    }

    /// Skips the eigenvalue check; callers must have validated positivity
    /// (the integrator checks stored states itself).
    pub(crate) fn from_matrix_unchecked(entries: CMatrix) -> Self {
        Self {
            entries: hermitize(&entries),
            spectrum: OnceLock::new(),
        }
    }

    /// As [`Self::from_matrix_unchecked`] with a spectrum already computed
    /// from the (Hermitian) matrix.
    pub(crate) fn from_parts_unchecked(entries: CMatrix, sd: SpectralDecomposition) -> Self {
        Self::with_spectrum(entries, sd)
    }

    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = psi / C64::new(norm, 0.0);
        Self::new(&v * v.adjoint())
    }

    pub fn fock(space: HilbertSpace, n: usize) -> Result<Self> {
        if n >= space.dim() {
            return Err(Error::Truncation(format!(
                "Fock level {n} outside dimension {}",
                space.dim()
            )));
        }
        let mut p = vec![0.0; space.dim()];
        p[n] = 1.0;
        Self::from_populations(&p)
    }

    pub fn maximally_mixed(space: HilbertSpace) -> Self {
        let d = space.dim();
        Self::from_matrix_unchecked(CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0))
    }

    /// Diagonal state in the computational basis.
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        Self::new(Operator::from_real_diagonal(p).into_matrix())
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.entries, &self.entries).re
    }

    pub fn spectral(&self) -> SpectralDecomposition {
        self.spectrum_ref().clone()
    }

    pub fn spectrum_ref(&self) -> &SpectralDecomposition {
        self.spectrum
            .get_or_init(|| SpectralDecomposition::of_hermitian(&self.entries))
    }

    /// Diagonal entries (populations in the computational basis).
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    /// `U rho U^dagger`.
    pub fn transformed(&self, u: &CMatrix) -> Result<Self> {
        check_dims(self.dim(), u.nrows())?;
        Self::new(u * &self.entries * u.adjoint())
    }

    pub fn as_operator(&self) -> Operator {
        Operator {
            entries: self.entries.clone(),
            hermitian: true,
        }
    }
}

fn ladder(space: HilbertSpace, create: bool) -> Operator {
    let d = space.dim();
    let mut m = CMatrix::zeros(d, d);
    for n in 1..d {
        let v = C64::new((n as f64).sqrt(), 0.0);
        if create {
            m[(n, n - 1)] = v;
        } else {
            m[(n - 1, n)] = v;
        }
    }
    Operator {
        entries: m,
        hermitian: false,
    }
}

/// Truncated annihilation operator, `<n-1|a|n> = sqrt(n)`.
pub fn fock_annihilation(space: HilbertSpace) -> Result<Operator> {
    if space.dim() < 2 {
        return Err(Error::InvalidSpace(format!("dimension {} < 2", space.dim())));
    }
    Ok(ladder(space, false))
}

pub fn fock_creation(space: HilbertSpace) -> Result<Operator> {
    Ok(fock_annihilation(space)?.dagger())
}

/// `a^dagger a` with diagonal `0, 1, ..., dim-1`.
pub fn number_operator(space: HilbertSpace) -> Operator {
    let diag: Vec<f64> = (0..space.dim()).map(|n| n as f64).collect();
    Operator::from_real_diagonal(&diag)
}

pub fn sigma_z() -> Operator {
    Operator::from_real_diagonal(&[-1.0, 1.0])
}

pub fn sigma_x() -> Operator {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    Operator {
        entries: CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        hermitian: true,
    }
}

/// Qubit lowering operator `|g><e|`.
pub fn sigma_minus() -> Operator {
    ladder(HilbertSpace::qubit(), false)
}

/// Von Neumann entropy in nats, `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    let sd = rho.spectral();
    entropy_of_spectrum(sd.eigenvalues())
}

pub(crate) fn entropy_of_spectrum(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigenvalues {
        if l < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {l:e}")));
        }
        if l > 0.0 {
            s -= l * l.ln();
        }
    }
    Ok(s.max(0.0))
}

/// Eigenvalues of `sigma` below this count as outside its support.
pub const SUPPORT_TOL: f64 = 1e-14;

/// `S(rho || sigma) = Tr[rho (ln rho - ln sigma)]`.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    let sr = rho.spectral();
    let mut neg_entropy = 0.0;
    for &l in sr.eigenvalues() {
        if l < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {l:e}")));
        }
        if l > 0.0 {
            neg_entropy += l * l.ln();
        }
    }
    let ss = sigma.spectral();
    let mut cross = 0.0;
    for (k, &s) in ss.eigenvalues().iter().enumerate() {
        let v = ss.eigenvectors().column(k);
        let w = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        if s < SUPPORT_TOL {
            if w > 1e-12 {
                return Err(Error::DivergentRelativeEntropy(format!(
                    "rho has weight {w:e} on a direction where sigma has eigenvalue {s:e}"
                )));
            }
            continue;
        }
        cross += w * s.ln();
    }
    let d = neg_entropy - cross;
    Ok(if d < 0.0 && d > -1e-12 { 0.0 } else { d })
}

/// `V f(Lambda) V^dagger` for Hermitian `A`.
pub fn matrix_function(a: &Operator, f: impl Fn(f64) -> f64) -> Result<Operator> {
    let sd = a.spectral()?;
    let m = sd.map(f);
    Ok(Operator {
        entries: hermitize(&m),
        hermitian: true,
    })
}

/// Thermal state `exp(-H/T)/Z`.
///
/// Temperatures at or above `1e6 * ||H||` return the maximally mixed state.
pub fn gibbs_state(h: &Operator, temperature: f64) -> Result<DensityOperator> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let sd = h.spectral()?;
    let norm = sd.eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let d = h.dim();
    if temperature >= 1e6 * norm {
        return Ok(DensityOperator::maximally_mixed(HilbertSpace::new(d)?));
    }
    let e0 = sd.eigenvalues()[0];
    let w: Vec<f64> = sd
        .eigenvalues()
        .iter()
        .map(|e| (-(e - e0) / temperature).exp())
        .collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / z).collect();
    Ok(DensityOperator::from_matrix_unchecked(sd.with_eigenvalues(&p)))
}

/// `(1/2) || rho - sigma ||_1`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    check_dims(rho.dim(), sigma.dim())?;
    let diff = hermitize(&(rho.matrix() - sigma.matrix()));
    let sd = SpectralDecomposition::of_hermitian(&diff);
    Ok(0.5 * sd.eigenvalues().iter().map(|v| v.abs()).sum::<f64>())
}

/// `S(r) rho S(r)^dagger` with `S(r) = exp(r (a^2 - a^dagger^2) / 2)`.
///
/// For real `r > 0` this maps a thermal state onto the squeezed thermal state
/// with `<a^2> = -cosh r sinh r (2 n + 1)`. The exponential is taken in an
/// enlarged Fock space so that the truncation edge does not reflect
/// amplitude back into the retained block; the weight pushed above the
/// original truncation must stay below `1e-9`.
pub fn squeeze_state(rho: &DensityOperator, r: f64) -> Result<DensityOperator> {
    if r == 0.0 {
        return Ok(rho.clone());
    }
    let d = rho.dim();
    let big = HilbertSpace::new(d + ENLARGEMENT)?;
    let a = fock_annihilation(big)?;
    let a2 = a.matrix() * a.matrix();
    // K = i r (a^2 - a^dagger^2) / 2 is Hermitian and S = exp(-i K)
    let k = (&a2 - a2.adjoint()) * C64::new(0.0, 0.5 * r);
    let s = unitary_exp(&k);
    conjugate_truncated(rho, &s)
}

/// Extra Fock levels used when exponentiating ladder-operator generators.
pub(crate) const ENLARGEMENT: usize = 60;

/// `exp(-i K)` for Hermitian `K`.
pub fn unitary_exp(k: &CMatrix) -> CMatrix {
    let sd = SpectralDecomposition::of_hermitian(&hermitize(k));
    let v = sd.eigenvectors();
    let n = v.nrows();
    let mut scaled = v.clone();
    for (j, &l) in sd.eigenvalues().iter().enumerate() {
        let phase = C64::new(0.0, -l).exp();
        for i in 0..n {
            scaled[(i, j)] *= phase;
        }
    }
    scaled * v.adjoint()
}

/// `U rho U^dagger` with `rho` embedded in the larger space of `U`, then
/// truncated back. Fails when more than `1e-9` of the weight leaves the
/// original space.
pub(crate) fn conjugate_truncated(rho: &DensityOperator, u: &CMatrix) -> Result<DensityOperator> {
    let d = rho.dim();
    let big = u.nrows();
    let mut embedded = CMatrix::zeros(big, big);
    embedded.view_mut((0, 0), (d, d)).copy_from(rho.matrix());
    let out = u * embedded * u.adjoint();
    let kept = out.view((0, 0), (d, d)).into_owned();
    let tr = kept.trace().re;
    if 1.0 - tr > 1e-9 {
        return Err(Error::Truncation(format!(
            "weight {:e} leaves the space above level {}",
            1.0 - tr,
            d - 1
        )));
    }
    DensityOperator::new(hermitize(&(kept * C64::new(1.0 / tr, 0.0))))
}

/// Bose-Einstein occupation `1/(exp(omega/T) - 1)`; zero at `T = 0`.
pub fn bose_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (omega / temperature).exp_m1()
}

/// Temperature whose Bose occupation at `omega` is `n`; `0` for `n < 1e-12`.
pub fn bose_temperature(omega: f64, n: f64) -> f64 {
    if n < 1e-12 {
        return 0.0;
    }
    omega / (1.0 / n).ln_1p()
}

/// Entropy of a thermal oscillator with mean occupation `n`.
pub fn bose_entropy(n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    (n + 1.0) * (n + 1.0).ln() - n * n.ln()
}
