use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Compressed sparse row matrix, used on the hot path of the integrators.
///
/// Dense `(i, j)` storage in [`DMatrix`] is column-major; all slice-based
/// kernels below follow the same layout (`rho[i + j * dim]`).
#[derive(Clone, Debug, Default)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "sparse kernels need square matrices");
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for j in 0..dim {
                let v = m[(i, j)];
                if v != C64::new(0.0, 0.0) {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + other` (same dimension).
    pub fn add(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.dim, other.dim);
        let mut dense = self.to_dense();
        dense += other.to_dense();
        SparseMatrix::from_dense(&dense)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }

    /// `y += s * A x`
    pub fn mul_vec_acc(&self, s: C64, x: &[C64], y: &mut [C64]) {
        for i in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] += s * acc;
        }
    }

    /// `out += s * A rho` for column-major square `rho`.
    pub fn mul_left_acc(&self, s: C64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for i in 0..d {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = s * self.vals[k];
                let c = self.cols[k];
                for j in 0..d {
                    out[i + j * d] += a * rho[c + j * d];
                }
            }
        }
    }

    /// `out += s * rho A^†` for column-major square `rho`.
    pub fn mul_right_adjoint_acc(&self, s: C64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        // (rho A^†)_{ij} = sum_k rho_{ik} conj(A_{jk})
        for j in 0..d {
            for k in self.row_ptr[j]..self.row_ptr[j + 1] {
                let a = s * self.vals[k].conj();
                let c = self.cols[k];
                let src = &rho[c * d..(c + 1) * d];
                let dst = &mut out[j * d..(j + 1) * d];
                for (o, r) in dst.iter_mut().zip(src) {
                    *o += a * r;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(d: usize, seed: u64) -> DMatrix<C64> {
        let mut x = seed;
        DMatrix::from_fn(d, d, |_, _| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((x >> 33) % 7) as f64 - 3.0;
            let b = ((x >> 13) % 5) as f64 - 2.0;
            if (x >> 40) % 3 == 0 { C64::new(0.0, 0.0) } else { C64::new(a, b) }
        })
    }

    #[test]
    fn kernels_match_dense_products() {
        let a = sample(6, 1);
        let rho = sample(6, 2);
        let sp = SparseMatrix::from_dense(&a);
        let s = C64::new(0.3, -1.1);

        let mut out = vec![C64::new(0.0, 0.0); 36];
        sp.mul_left_acc(s, rho.as_slice(), &mut out);
        let expect = (&a * &rho) * s;
        for (o, e) in out.iter().zip(expect.as_slice()) {
            assert!((o - e).norm() < 1e-12);
        }

        let mut out = vec![C64::new(0.0, 0.0); 36];
        sp.mul_right_adjoint_acc(s, rho.as_slice(), &mut out);
        let expect = (&rho * a.adjoint()) * s;
        for (o, e) in out.iter().zip(expect.as_slice()) {
            assert!((o - e).norm() < 1e-12);
        }

        let x: Vec<C64> = rho.column(0).iter().copied().collect();
        let mut y = vec![C64::new(0.0, 0.0); 6];
        sp.mul_vec_acc(s, &x, &mut y);
        let expect = (&a * rho.column(0)) * s;
        for (o, e) in y.iter().zip(expect.iter()) {
            assert!((o - e).norm() < 1e-12);
        }
        assert!((sp.to_dense() - a).norm() == 0.0);
    }
}
