use super::{CMatrix, C64};

/// Coordinate-list operator used on the hot path of the master-equation
/// right-hand side. Ladder operators and their products have O(dim)
/// nonzeros, so `S X` and `X S` cost O(nnz * dim) instead of O(dim^3).
#[derive(Clone, Debug)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut entries = Vec::new();
        for j in 0..dim {
            for i in 0..dim {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `(row, column, value)` triplets in column-major order.
    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `out += c * S X`.
    pub fn left_mul_into(&self, x: &CMatrix, c: C64, out: &mut CMatrix) {
        let n = self.dim;
        for &(i, k, v) in &self.entries {
            let s = c * v;
            for j in 0..n {
                out[(i, j)] += s * x[(k, j)];
            }
        }
    }

    /// `out += c * X S`.
    pub fn right_mul_into(&self, x: &CMatrix, c: C64, out: &mut CMatrix) {
        let n = self.dim;
        for &(k, j, v) in &self.entries {
            let s = c * v;
            for i in 0..n {
                out[(i, j)] += s * x[(i, k)];
            }
        }
    }

    pub fn left_mul(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, x.ncols());
        self.left_mul_into(x, C64::new(1.0, 0.0), &mut out);
        out
    }

    pub fn right_mul(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), self.dim);
        self.right_mul_into(x, C64::new(1.0, 0.0), &mut out);
        out
    }
}
