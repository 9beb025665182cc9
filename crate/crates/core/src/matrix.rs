//! Dense row-major matrices over `f64`.
//!
//! This is the only array type used by the toolkit. It is deliberately
//! small: construction validates shape and finiteness once, after which a
//! matrix is immutable and every operation is a pure function producing a
//! new matrix. All kernels run in a fixed iteration order with no
//! platform-dependent dispatch, so results are reproducible bit for bit.

use std::fmt;

/// Error raised by [`Matrix`] constructors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixError {
    /// Rows or columns was zero; matrices must have at least one of each.
    ZeroDimension { rows: usize, cols: usize },
    /// The backing buffer does not hold exactly `rows * cols` values.
    WrongLength {
        rows: usize,
        cols: usize,
        actual: usize,
    },
    /// A NaN or infinite entry was found at `(row, col)`.
    NonFinite { row: usize, col: usize },
}

impl fmt::Display for MatrixError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixError::ZeroDimension { rows, cols } => {
                write!(f, "matrix dimensions must be positive, got {rows}x{cols}")
            }
            MatrixError::WrongLength { rows, cols, actual } => write!(
                f,
                "buffer of length {actual} cannot back a {rows}x{cols} matrix (expected {})",
                rows * cols
            ),
            MatrixError::NonFinite { row, col } => {
                write!(f, "non-finite entry at ({row}, {col})")
            }
        }
    }
}

impl std::error::Error for MatrixError {}

/// A dense `rows x cols` matrix of `f64` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from a row-major buffer.
    ///
    /// # Errors
    ///
    /// Returns [`MatrixError`] if either dimension is zero, the buffer
    /// length does not match, or any entry is NaN or infinite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::ZeroDimension { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(MatrixError::WrongLength {
                rows,
                cols,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix by evaluating `f(row, col)` at every position.
    ///
    /// # Errors
    ///
    /// Same conditions as [`Matrix::from_vec`].
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::ZeroDimension { rows, cols });
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    /// The `n x n` identity matrix.
    ///
    /// # Panics
    ///
    /// Panics if `n == 0`.
    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity requires n > 0");
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, data }
    }

    /// Internal constructor for buffers produced by our own kernels.
    /// Skips the finiteness scan; shape must already be consistent.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert!(rows > 0 && cols > 0 && data.len() == rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at `(i, j)`.
    ///
    /// # Panics
    ///
    /// Panics if the position is out of bounds.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j]
    }

    /// Row `i` as a contiguous slice.
    ///
    /// # Panics
    ///
    /// Panics if `i` is out of bounds.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows, "row index out of bounds");
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// The whole buffer in row-major order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// True if every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            let row = self.row(i);
            for (j, &v) in row.iter().enumerate() {
                out[j * self.rows + i] = v;
            }
        }
        Matrix::from_raw(self.cols, self.rows, out)
    }

    /// `self * other`.
    ///
    /// # Panics
    ///
    /// Panics if the inner dimensions disagree. Shape checks against user
    /// input belong to the callers; by the time two matrices meet here the
    /// shapes are an internal contract.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let n = other.cols;
        let mut out = vec![0.0; self.rows * n];
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out[i * n..(i + 1) * n];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Matrix::from_raw(self.rows, n, out)
    }

    /// `self * other^T` without materialising the transpose; both operands
    /// are walked along contiguous rows.
    ///
    /// # Panics
    ///
    /// Panics if the column counts disagree.
    pub fn matmul_transpose(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.cols,
            "matmul_transpose shape mismatch: {}x{} * ({}x{})^T",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = vec![0.0; self.rows * other.rows];
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                out[i * other.rows + j] = dot(a_row, other.row(j));
            }
        }
        Matrix::from_raw(self.rows, other.rows, out)
    }

    /// The Gram matrix `self * self^T`, exploiting symmetry.
    pub fn gram(&self) -> Matrix {
        let m = self.rows;
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            let row_i = self.row(i);
            for j in i..m {
                let v = dot(row_i, self.row(j));
                out[i * m + j] = v;
                out[j * m + i] = v;
            }
        }
        Matrix::from_raw(m, m, out)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        let data = self.data.iter().map(|v| v * factor).collect();
        Matrix::from_raw(self.rows, self.cols, data)
    }

    /// Entrywise `self - other`.
    ///
    /// # Panics
    ///
    /// Panics if the shapes differ.
    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "sub shape mismatch: {}x{} vs {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix::from_raw(self.rows, self.cols, data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Euclidean norm of each column.
    pub fn column_l2_norms(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(i)) {
                *s += v * v;
            }
        }
        sums.iter().map(|s| s.sqrt()).collect()
    }

    /// Multiplies column `j` by `factors[j]`.
    ///
    /// # Panics
    ///
    /// Panics if `factors.len() != self.cols()`.
    pub fn scale_columns(&self, factors: &[f64]) -> Matrix {
        assert_eq!(factors.len(), self.cols, "one factor per column required");
        let mut data = self.data.clone();
        for i in 0..self.rows {
            let row = &mut data[i * self.cols..(i + 1) * self.cols];
            for (v, &f) in row.iter_mut().zip(factors) {
                *v *= f;
            }
        }
        Matrix::from_raw(self.rows, self.cols, data)
    }
}

/// Dot product with four independent accumulators so the additions do not
/// form one long serial dependency chain. The split is fixed, keeping the
/// result deterministic.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let a_chunks = a.chunks_exact(4);
    let b_chunks = b.chunks_exact(4);
    let a_rem = a_chunks.remainder();
    let b_rem = b_chunks.remainder();
    for (ca, cb) in a_chunks.zip(b_chunks) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    for (x, y) in a_rem.iter().zip(b_rem) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}
