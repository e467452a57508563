use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Compressed-row complex matrix used on the propagation hot paths.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "square matrix required");
        let dim = m.nrows();
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..dim {
            for j in 0..dim {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        SparseMatrix { dim, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.indptr[i]..self.indptr[i + 1] {
                m[(i, self.indices[k])] += self.values[k];
            }
        }
        m
    }

    /// `y += alpha * A x`
    #[inline]
    pub fn mul_vec_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yi += alpha * acc;
        }
    }

    /// `Y += alpha * A X` for a column-major dense `X` with `dim` rows.
    pub fn mul_dense_add(&self, alpha: C64, x: &[C64], ncols: usize, y: &mut [C64]) {
        let d = self.dim;
        for c in 0..ncols {
            self.mul_vec_add(alpha, &x[c * d..(c + 1) * d], &mut y[c * d..(c + 1) * d]);
        }
    }

    /// `Y += alpha * X A` for a column-major dense `X` with `nrows` rows and `dim` columns.
    pub fn dense_mul_add(&self, alpha: C64, x: &[C64], nrows: usize, y: &mut [C64]) {
        // (X A)[:, j] = sum_k X[:, k] A[k, j]
        for k in 0..self.dim {
            let xk = &x[k * nrows..(k + 1) * nrows];
            for p in self.indptr[k]..self.indptr[k + 1] {
                let j = self.indices[p];
                let w = alpha * self.values[p];
                let yj = &mut y[j * nrows..(j + 1) * nrows];
                for (yv, xv) in yj.iter_mut().zip(xk) {
                    *yv += w * xv;
                }
            }
        }
    }

    pub fn adjoint(&self) -> SparseMatrix {
        SparseMatrix::from_dense(&self.to_dense().adjoint())
    }
}
