use nalgebra::SymmetricEigen;

use super::{is_exactly_diagonal, CMatrix, C64};

/// Eigenvalues in ascending order with matching orthonormal eigenvector
/// columns.
///
/// Equal eigenvalues keep their original index order (stable sort). For
/// exactly diagonal input the decomposition is read off directly, so the
/// eigenvectors are unit vectors and the eigenvalues are bit-identical to
/// the diagonal entries.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// Decomposes a matrix that the caller guarantees to be Hermitian.
    pub fn of_hermitian(m: &CMatrix) -> Self {
        let n = m.nrows();
        let (values, vectors) = if is_exactly_diagonal(m) {
            let values: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
            (values, CMatrix::identity(n, n))
        } else if m.iter().all(|v| v.im == 0.0) {
            // real symmetric input: the real solver is several times faster
            let eig = SymmetricEigen::new(m.map(|v| v.re));
            (
                eig.eigenvalues.iter().copied().collect(),
                eig.eigenvectors.map(|v| C64::new(v, 0.0)),
            )
        } else {
            let eig = SymmetricEigen::new(m.clone());
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let eigenvalues = order.iter().map(|&k| values[k]).collect();
        let eigenvectors = CMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(values) V^dagger`.
    pub fn with_eigenvalues(&self, values: &[f64]) -> CMatrix {
        let v = &self.eigenvectors;
        let n = self.dim();
        let mut scaled = v.clone();
        for j in 0..n {
            let s = C64::new(values[j], 0.0);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        scaled * v.adjoint()
    }

    /// `V f(Lambda) V^dagger`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let values: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.with_eigenvalues(&values)
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.with_eigenvalues(&self.eigenvalues)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..12 {
            let m = random_hermitian(&mut rng, n);
            let sd = SpectralDecomposition::of_hermitian(&m);
            assert!((sd.reconstruct() - &m).camax() <= 1e-10);
            let v = sd.eigenvectors();
            assert!((v.adjoint() * v - CMatrix::identity(n, n)).camax() <= 1e-10);
            assert!(sd.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn diagonal_input_is_read_exactly_with_stable_ties() {
        let d = [0.3, -1.0, 0.3, 2.0];
        let m = CMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let sd = SpectralDecomposition::of_hermitian(&m);
        assert_eq!(sd.eigenvalues(), &[-1.0, 0.3, 0.3, 2.0]);
        // the two 0.3 entries keep index order 0 then 2
        assert_eq!(sd.eigenvectors()[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(sd.eigenvectors()[(2, 2)], C64::new(1.0, 0.0));
    }
}
