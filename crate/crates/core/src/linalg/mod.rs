//! Dense f64 linear algebra: the matrix type, norms, stable rank, products,
//! factorizations and random matrix generators.
//!
//! Matrices are stored row-major. Everything is plain f64; there are no
//! sparse or reduced-precision paths. Products may run row-parallel via
//! rayon, with a fixed sequential inner loop so results are bit-identical
//! regardless of thread count.

mod io;
mod qr;
mod random;
mod spectral;
mod svd;

pub use io::{
    read_matrix, read_matrix_from, write_matrix, write_matrix_csv, write_matrix_to, MATRIX_MAGIC,
};
pub use qr::{qr_thin, QrThin};
pub use random::{
    sample_gaussian_matrix, sample_haar_frame, sample_haar_orthogonal, sample_unit_sphere,
};
pub use spectral::{cholesky_solve, spectral_norm, symmetric_eigenvalues, symmetric_eigen};
pub use svd::{svd, Svd};

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("stable rank undefined for the zero matrix")]
    UndefinedStableRank,
    #[error("{algorithm} did not converge within {iterations} iterations")]
    NonConvergence {
        algorithm: &'static str,
        iterations: usize,
    },
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },
    #[error("non-finite value produced by {context}")]
    NonFinite { context: &'static str },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad matrix file: {0}")]
    BadFormat(String),
}

/// Dense row-major matrix of f64 entries.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty());
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols));
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Square diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    /// Rectangular embedding of a diagonal: `values` fill the leading
    /// min(rows, cols) diagonal slots, the rest is zero.
    pub fn rect_diag(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert!(values.len() <= rows.min(cols));
        let mut m = Matrix::zeros(rows, cols);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * cols + i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// C = self · other.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        let a = &self.data;
        let b = &other.data;
        par_rows(&mut out.data, n, m, |i, crow| {
            let arow = &a[i * k..(i + 1) * k];
            for (p, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let brow = &b[p * n..(p + 1) * n];
                for (cv, &bv) in crow.iter_mut().zip(brow) {
                    *cv += av * bv;
                }
            }
        });
        out
    }

    /// C = self · otherᵀ (dot products of row pairs; cache friendly).
    pub fn matmul_transb(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "inner dimensions must agree");
        let (m, k, n) = (self.rows, self.cols, other.rows);
        let mut out = Matrix::zeros(m, n);
        let a = &self.data;
        let b = &other.data;
        par_rows(&mut out.data, n, m, |i, crow| {
            let arow = &a[i * k..(i + 1) * k];
            for (j, cv) in crow.iter_mut().enumerate() {
                let brow = &b[j * k..(j + 1) * k];
                *cv = dot(arow, brow);
            }
        });
        out
    }

    /// self · v for a column vector v.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// selfᵀ · v.
    pub fn matvec_t(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Row-parallel fill of an output buffer. Each row is produced by exactly one
/// closure call with a fixed inner order, so the result does not depend on
/// the thread count.
fn par_rows(out: &mut [f64], ncols: usize, nrows: usize, f: impl Fn(usize, &mut [f64]) + Sync) {
    // Below this size the rayon dispatch overhead is not worth it.
    if nrows * ncols < 16_384 {
        for (i, crow) in out.chunks_mut(ncols).enumerate() {
            f(i, crow);
        }
    } else {
        out.par_chunks_mut(ncols)
            .enumerate()
            .for_each(|(i, crow)| f(i, crow));
    }
    let _ = nrows;
}

/// √(Σ aᵢⱼ²).
pub fn frobenius_norm(a: &Matrix) -> f64 {
    dot(a.data(), a.data()).sqrt()
}

/// ‖A‖_F² / ‖A‖₂², the continuous rank proxy. Scale- and orthogonal-invariant;
/// lies in [1, rank(A)] for any nonzero matrix. The zero matrix has no stable
/// rank (0/0) and is reported as an error rather than a silent 0.
pub fn stable_rank(a: &Matrix) -> Result<f64, LinalgError> {
    if a.is_zero() {
        return Err(LinalgError::UndefinedStableRank);
    }
    let f = frobenius_norm(a);
    let s = spectral_norm(a);
    Ok((f / s) * (f / s))
}

/// Stable rank of a diagonal spectrum given as a value list.
pub fn stable_rank_of_values(values: &[f64]) -> Result<f64, LinalgError> {
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if top == 0.0 {
        return Err(LinalgError::UndefinedStableRank);
    }
    Ok(values.iter().map(|v| (v / top) * (v / top)).sum())
}
