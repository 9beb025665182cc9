//! Symmetric eigendecomposition and the Sylvester equation solver.
//!
//! The mapping matrix is the solution of `AW + WB = C` with `A` and `B`
//! symmetric positive semidefinite, so the solver uses the two-sided
//! eigendecomposition method: diagonalize both sides, divide entrywise by
//! eigenvalue pair sums, and rotate back. The eigensolver is the classic
//! Householder tridiagonalization followed by implicit-shift QL iteration
//! (the EISPACK `tred2`/`tql2` pair), hand-rolled so the toolkit has no
//! opaque numerical dependencies and behaves identically on every platform.
//!
//! `solve_sylvester_oracle` solves the same equation by brute force —
//! Gaussian elimination on the Kronecker-vectorized `(kd)×(kd)` system —
//! and exists purely to cross-check the fast path in tests and the
//! `oracle-check` CLI command.

use std::fmt;

use crate::matrix::Matrix;

/// Size cap on `k·d` for the dense vectorized oracle system.
pub const ORACLE_MAX_ELEMENTS: usize = 400;

/// Iteration budget multiplier for the QL eigenvalue iteration: a matrix of
/// size `n` gets `30·n` implicit-shift sweeps in total before the solver
/// reports failure.
pub const EIG_SWEEPS_PER_DIM: usize = 30;

/// Errors from the linear-algebra kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// The operation requires a square matrix.
    NonSquare { rows: usize, cols: usize },
    /// A non-finite value appeared in an input or result.
    NonFinite,
    /// The eigenvalue iteration did not converge within its sweep budget.
    NoConvergence { cap: usize, residual: f64 },
    /// Operand shapes are inconsistent for the requested operation.
    DimensionMismatch(String),
    /// A matrix required to be positive semidefinite has an eigenvalue
    /// below the clamping tolerance.
    NotPositiveSemiDefinite { eigenvalue: f64, tolerance: f64 },
    /// Some eigenvalue pair sum of (A, B) is at or below the singularity
    /// guard, so the Sylvester equation has no unique solution.
    SingularPair { pair_sum: f64, threshold: f64 },
    /// The vectorized oracle system would exceed its size cap.
    TooLarge { size: usize, cap: usize },
    /// Gaussian elimination hit a numerically zero pivot.
    SingularSystem,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NonSquare { rows, cols } => {
                write!(f, "expected a square matrix, got {rows}x{cols}")
            }
            LinalgError::NonFinite => write!(f, "non-finite value in computation"),
            LinalgError::NoConvergence { cap, residual } => write!(
                f,
                "eigenvalue iteration exceeded {cap} sweeps (off-diagonal residual {residual:e})"
            ),
            LinalgError::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            LinalgError::NotPositiveSemiDefinite { eigenvalue, tolerance } => write!(
                f,
                "matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}"
            ),
            LinalgError::SingularPair { pair_sum, threshold } => write!(
                f,
                "singular eigenvalue pair: sum {pair_sum:e} <= guard {threshold:e}; \
                 the equation has no unique solution"
            ),
            LinalgError::TooLarge { size, cap } => {
                write!(f, "vectorized system of size {size} exceeds the oracle cap {cap}")
            }
            LinalgError::SingularSystem => write!(f, "linear system is numerically singular"),
        }
    }
}

impl std::error::Error for LinalgError {}

/// Eigendecomposition of a symmetric matrix: `M = V diag(λ) Vᵀ` with
/// eigenvalues ascending and orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    eigenvalues: Vec<f64>,
    eigenvectors: Matrix,
}

impl SymEig {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Matrix whose column `j` is the eigenvector for `eigenvalues()[j]`.
    pub fn eigenvectors(&self) -> &Matrix {
        &self.eigenvectors
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized as `(M + Mᵀ)/2` before decomposing, so callers
/// may pass Gram matrices carrying round-off asymmetry.
///
/// # Errors
///
/// [`LinalgError::NonSquare`] for rectangular input, [`LinalgError::NonFinite`]
/// if any entry is NaN or infinite, and [`LinalgError::NoConvergence`] if the
/// QL iteration exhausts its `30·n` sweep budget.
pub fn sym_eig(m: &Matrix) -> Result<SymEig, LinalgError> {
    let n = m.rows();
    if n != m.cols() {
        return Err(LinalgError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }

    // Work on the symmetrized copy; `v` is rotated in place into the
    // eigenvector matrix.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = 0.5 * (m.at(i, j) + m.at(j, i));
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    tridiagonalize(&mut v, &mut d, &mut e, n);
    ql_iterate(&mut v, &mut d, &mut e, n)?;
    sort_ascending(&mut v, &mut d, n);

    Ok(SymEig {
        eigenvalues: d,
        eigenvectors: Matrix::from_raw(n, n, v),
    })
}

/// Householder reduction of a symmetric matrix to tridiagonal form
/// (EISPACK `tred2`). On entry `v` holds the symmetric matrix; on exit it
/// holds the accumulated orthogonal transformation, `d` the diagonal and
/// `e` the subdiagonal (with `e[0] = 0`).
fn tridiagonalize(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    d.copy_from_slice(&v[(n - 1) * n..n * n]);

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            // Form the Householder vector in d[0..i].
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            // Apply the similarity transformation to the remaining block.
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate the transformations.
    for i in 0..n - 1 {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for (k, item) in d.iter_mut().enumerate().take(i + 1) {
                *item = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + (n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit-shift QL iteration on the tridiagonal form (EISPACK `tql2`),
/// accumulating rotations into `v`. The total sweep budget across all
/// eigenvalues is `EIG_SWEEPS_PER_DIM · n`.
fn ql_iterate(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) -> Result<(), LinalgError> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON / 2.0; // 2^-53, the classic tql2 threshold scale
    let cap = EIG_SWEEPS_PER_DIM * n;
    let mut total_sweeps = 0usize;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;

    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());

        // Find the first small subdiagonal element at or beyond l.
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] is exactly zero, so m <= n-1 here.

        if m > l {
            loop {
                total_sweeps += 1;
                if total_sweeps > cap {
                    return Err(LinalgError::NoConvergence {
                        cap,
                        residual: e[l].abs(),
                    });
                }

                // Compute the implicit shift.
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                // One QL sweep with the implicit shift.
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    for k in 0..n {
                        h = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * h;
                        v[k * n + i] = c * v[k * n + i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Sorts eigenvalues ascending, permuting eigenvector columns alongside.
fn sort_ascending(v: &mut [f64], d: &mut [f64], n: usize) {
    for i in 0..n.saturating_sub(1) {
        let mut min_idx = i;
        let mut min_val = d[i];
        for (j, &val) in d.iter().enumerate().take(n).skip(i + 1) {
            if val < min_val {
                min_idx = j;
                min_val = val;
            }
        }
        if min_idx != i {
            d.swap(i, min_idx);
            for row in 0..n {
                v.swap(row * n + i, row * n + min_idx);
            }
        }
    }
}

#[inline]
fn hypot(a: f64, b: f64) -> f64 {
    // Overflow-safe sqrt(a² + b²), same construction tql2 traditionally
    // uses; std's hypot defers to the platform libm, which we avoid for
    // reproducibility.
    let (a, b) = (a.abs(), b.abs());
    let (big, small) = if a > b { (a, b) } else { (b, a) };
    if big == 0.0 {
        return 0.0;
    }
    let ratio = small / big;
    big * (1.0 + ratio * ratio).sqrt()
}

/// Solves `AW + WB = C` for symmetric PSD `A` (k×k) and `B` (d×d).
///
/// Solution path: `A = U Λ_A Uᵀ`, `B = V Λ_B Vᵀ`, then
/// `W = U · ((Uᵀ C V) ⊘ (Λ_A[i] + Λ_B[j])) · Vᵀ`. Both inputs are
/// symmetrized before decomposition. Eigenvalues in `[-1e-9·‖M‖₂, 0)` are
/// clamped to zero (Gram matrices accumulate tiny negative round-off);
/// anything more negative is rejected.
///
/// # Errors
///
/// [`LinalgError::DimensionMismatch`] on inconsistent shapes,
/// [`LinalgError::NotPositiveSemiDefinite`] if an input fails the PSD
/// tolerance, [`LinalgError::SingularPair`] if some eigenvalue pair sum
/// falls at or below `ε_sing = 1e-12·(‖A‖₂ + ‖B‖₂)`, and
/// [`LinalgError::NonFinite`] if a non-finite value appears.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix, LinalgError> {
    check_sylvester_dims(a, b, c)?;

    let ea = sym_eig(a)?;
    let eb = sym_eig(b)?;

    let norm_a = spectral_norm(ea.eigenvalues());
    let norm_b = spectral_norm(eb.eigenvalues());
    let lam_a = clamp_psd(ea.eigenvalues(), norm_a)?;
    let lam_b = clamp_psd(eb.eigenvalues(), norm_b)?;

    // Eigenvalues are ascending, so the smallest pair sum is the first of
    // each. The guard is strict: legitimate training always has λ > 0 mass
    // on the data span, so hitting it means the instance is degenerate.
    let threshold = 1e-12 * (norm_a + norm_b);
    let min_pair = lam_a[0] + lam_b[0];
    if min_pair <= threshold {
        return Err(LinalgError::SingularPair {
            pair_sum: min_pair,
            threshold,
        });
    }

    let u = ea.eigenvectors();
    let v = eb.eigenvectors();
    let ct = u.transpose().matmul(c).matmul(v);

    let k = a.rows();
    let d = b.rows();
    let mut wt = vec![0.0; k * d];
    for i in 0..k {
        let row = ct.row(i);
        let out = &mut wt[i * d..(i + 1) * d];
        for j in 0..d {
            out[j] = row[j] / (lam_a[i] + lam_b[j]);
        }
    }
    let w = u.matmul(&Matrix::from_raw(k, d, wt)).matmul_transpose(v);

    if !w.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(w)
}

/// Brute-force Sylvester solver: Gaussian elimination with partial
/// pivoting on the vectorized system `(I_d ⊗ A + Bᵀ ⊗ I_k)·vec(W) = vec(C)`
/// (column-major `vec`). Exists to cross-check [`solve_sylvester`]; capped
/// at `k·d ≤ 400`.
///
/// # Errors
///
/// [`LinalgError::DimensionMismatch`], [`LinalgError::TooLarge`] above the
/// cap, and [`LinalgError::SingularSystem`] on a numerically zero pivot.
pub fn solve_sylvester_oracle(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix, LinalgError> {
    check_sylvester_dims(a, b, c)?;
    let k = a.rows();
    let d = b.rows();
    let n = k * d;
    if n > ORACLE_MAX_ELEMENTS {
        return Err(LinalgError::TooLarge {
            size: n,
            cap: ORACLE_MAX_ELEMENTS,
        });
    }

    // Row (j1·k + i1), column (j2·k + i2) of the Kronecker operator.
    let mut m = vec![0.0; n * n];
    for j1 in 0..d {
        for i1 in 0..k {
            let row = j1 * k + i1;
            for j2 in 0..d {
                for i2 in 0..k {
                    let mut val = 0.0;
                    if j1 == j2 {
                        val += a.at(i1, i2);
                    }
                    if i1 == i2 {
                        val += b.at(j2, j1);
                    }
                    m[row * n + j2 * k + i2] = val;
                }
            }
        }
    }
    let mut rhs = vec![0.0; n];
    for j in 0..d {
        for i in 0..k {
            rhs[j * k + i] = c.at(i, j);
        }
    }

    solve_dense(&mut m, &mut rhs, n)?;

    let mut w = vec![0.0; k * d];
    for j in 0..d {
        for i in 0..k {
            w[i * d + j] = rhs[j * k + i];
        }
    }
    Ok(Matrix::from_raw(k, d, w))
}

/// In-place Gaussian elimination with partial pivoting; `rhs` holds the
/// solution on success.
fn solve_dense(m: &mut [f64], rhs: &mut [f64], n: usize) -> Result<(), LinalgError> {
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(LinalgError::SingularSystem);
    }
    let tiny = 1e-13 * scale;

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_abs = m[col * n + col].abs();
        for row in (col + 1)..n {
            let a = m[row * n + col].abs();
            if a > pivot_abs {
                pivot_row = row;
                pivot_abs = a;
            }
        }
        if pivot_abs <= tiny {
            return Err(LinalgError::SingularSystem);
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            rhs.swap(col, pivot_row);
        }

        let pivot = m[col * n + col];
        for row in (col + 1)..n {
            let factor = m[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            m[row * n + col] = 0.0;
            for j in (col + 1)..n {
                m[row * n + j] -= factor * m[col * n + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }

    for col in (0..n).rev() {
        let mut sum = rhs[col];
        for j in (col + 1)..n {
            sum -= m[col * n + j] * rhs[j];
        }
        rhs[col] = sum / m[col * n + col];
    }
    Ok(())
}

/// Relative residual `‖AW + WB − C‖_F / max(1, ‖C‖_F)`.
///
/// # Errors
///
/// [`LinalgError::DimensionMismatch`] on inconsistent shapes.
pub fn sylvester_residual(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    w: &Matrix,
) -> Result<f64, LinalgError> {
    check_sylvester_dims(a, b, c)?;
    if w.rows() != c.rows() || w.cols() != c.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "W must be {}x{} like C, got {}x{}",
            c.rows(),
            c.cols(),
            w.rows(),
            w.cols()
        )));
    }
    let aw = a.matmul(w);
    let wb = w.matmul(b);
    let mut sq = 0.0;
    for ((x, y), z) in aw
        .as_slice()
        .iter()
        .zip(wb.as_slice())
        .zip(c.as_slice())
    {
        let r = x + y - z;
        sq += r * r;
    }
    Ok(sq.sqrt() / c.frobenius_norm().max(1.0))
}

fn check_sylvester_dims(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<(), LinalgError> {
    if a.rows() != a.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "A must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.rows() != b.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "B must be square, got {}x{}",
            b.rows(),
            b.cols()
        )));
    }
    if c.rows() != a.rows() || c.cols() != b.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "C must be {}x{}, got {}x{}",
            a.rows(),
            b.rows(),
            c.rows(),
            c.cols()
        )));
    }
    Ok(())
}

/// Spectral norm of a symmetric matrix from its ascending eigenvalues.
fn spectral_norm(eigenvalues: &[f64]) -> f64 {
    let lo = eigenvalues.first().copied().unwrap_or(0.0).abs();
    let hi = eigenvalues.last().copied().unwrap_or(0.0).abs();
    lo.max(hi)
}

/// Clamps tiny negative eigenvalues to zero; rejects real negativity.
fn clamp_psd(eigenvalues: &[f64], spectral_norm: f64) -> Result<Vec<f64>, LinalgError> {
    let tolerance = 1e-9 * spectral_norm;
    let mut out = Vec::with_capacity(eigenvalues.len());
    for &lam in eigenvalues {
        if lam < -tolerance {
            return Err(LinalgError::NotPositiveSemiDefinite {
                eigenvalue: lam,
                tolerance,
            });
        }
        out.push(lam.max(0.0));
    }
    Ok(out)
}
