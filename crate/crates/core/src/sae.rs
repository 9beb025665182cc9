//! Semantic auto-encoder training and projection.
//!
//! Training minimizes `‖X − WᵀS‖² + λ‖WX − S‖²` over the mapping `W`
//! (`k x d`). Setting the gradient to zero gives the normal equations
//! `SSᵀ·W + W·λXXᵀ = (1+λ)SXᵀ`, a Sylvester equation solved in closed
//! form by [`crate::linalg::solve_sylvester`] — there is no iterative
//! optimization anywhere. The learned `W` projects features into semantic
//! space (the encoder); its transpose projects semantics back into feature
//! space (the decoder).

use std::borrow::Cow;
use std::fmt;
use std::path::Path;

use crate::data::{self, DataError};
use crate::linalg::{self, LinalgError};
use crate::matrix::Matrix;

/// Residual bound a successful training run must satisfy.
pub const TRAIN_RESIDUAL_BOUND: f64 = 1e-8;

/// Errors from model construction, training, and projection.
#[derive(Debug)]
pub enum SaeError {
    /// Operand shapes are inconsistent.
    DimensionMismatch(String),
    /// λ must be a positive finite value.
    NonPositiveLambda(f64),
    /// Column normalization hit an all-zero column (index reported).
    ZeroNormColumn(usize),
    /// The training data is rank-deficient enough that the Sylvester pair
    /// is singular; raise λ, add data, or reduce the semantic dimension.
    DegenerateData(String),
    /// The closed-form solve produced a residual above
    /// [`TRAIN_RESIDUAL_BOUND`], so the result cannot be trusted.
    ExcessiveResidual { residual: f64, bound: f64 },
    /// Propagated numerical failure.
    Numeric(LinalgError),
}

impl fmt::Display for SaeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SaeError::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            SaeError::NonPositiveLambda(l) => {
                write!(f, "lambda must be positive and finite, got {l}")
            }
            SaeError::ZeroNormColumn(idx) => {
                write!(f, "column {idx} has zero norm and cannot be normalized")
            }
            SaeError::DegenerateData(msg) => write!(f, "degenerate training data: {msg}"),
            SaeError::ExcessiveResidual { residual, bound } => write!(
                f,
                "solver residual {residual:e} exceeds the trust bound {bound:e}"
            ),
            SaeError::Numeric(e) => write!(f, "numeric failure: {e}"),
        }
    }
}

impl std::error::Error for SaeError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            SaeError::Numeric(e) => Some(e),
            _ => None,
        }
    }
}

impl From<LinalgError> for SaeError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::SingularPair { .. } => SaeError::DegenerateData(e.to_string()),
            other => SaeError::Numeric(other),
        }
    }
}

/// A trained mapping `W` (`k x d`) plus the settings it was trained with.
/// Immutable once built; projections re-apply the recorded preprocessing
/// so evaluation matches training.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeModel {
    w: Matrix,
    lambda: f64,
    normalized_inputs: bool,
}

impl SaeModel {
    /// Assembles a model from parts (used by model-file loading and
    /// constructed test cases).
    ///
    /// # Errors
    ///
    /// [`SaeError::NonPositiveLambda`].
    pub fn from_parts(w: Matrix, lambda: f64, normalized_inputs: bool) -> Result<Self, SaeError> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(SaeError::NonPositiveLambda(lambda));
        }
        Ok(Self {
            w,
            lambda,
            normalized_inputs,
        })
    }

    /// The learned mapping, semantic dimension by feature dimension.
    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Whether training L2-normalized the feature columns; projections
    /// apply the same treatment to their inputs.
    pub fn normalized_inputs(&self) -> bool {
        self.normalized_inputs
    }

    pub fn semantic_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.w.cols()
    }
}

/// Diagnostics of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainDiagnostics {
    /// `‖X − WᵀWX‖_F` over the training columns as the solver saw them
    /// (i.e. after any normalization).
    pub reconstruction_error: f64,
    /// Relative Sylvester residual of the returned `W`; at most
    /// [`TRAIN_RESIDUAL_BOUND`] for any successful train.
    pub sylvester_residual: f64,
    pub lambda: f64,
}

/// Training options. `normalize_semantics` is an advanced switch that
/// additionally L2-normalizes the semantic columns before building the
/// normal matrices; it affects only what the solver sees and is not
/// recorded in the model, so downstream evaluation always consumes
/// semantics as-is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainOptions {
    pub normalize_features: bool,
    pub normalize_semantics: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            normalize_features: true,
            normalize_semantics: false,
        }
    }
}

/// Builds the normal matrices `A = SSᵀ`, `B = λXXᵀ`, `C = (1+λ)SXᵀ` of the
/// Sylvester system `AW + WB = C`.
///
/// # Errors
///
/// [`SaeError::DimensionMismatch`] if `X` and `S` disagree on the sample
/// count, [`SaeError::NonPositiveLambda`] otherwise.
pub fn build_normal_matrices(
    x: &Matrix,
    s: &Matrix,
    lambda: f64,
) -> Result<(Matrix, Matrix, Matrix), SaeError> {
    if x.cols() != s.cols() {
        return Err(SaeError::DimensionMismatch(format!(
            "X has {} sample columns but S has {}",
            x.cols(),
            s.cols()
        )));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(SaeError::NonPositiveLambda(lambda));
    }
    let a = s.gram();
    let b = x.gram().scale(lambda);
    let c = s.matmul_transpose(x).scale(1.0 + lambda);
    Ok((a, b, c))
}

/// L2-normalizes every column.
///
/// # Errors
///
/// [`SaeError::ZeroNormColumn`] with the first offending column index.
pub fn normalize_columns(m: &Matrix) -> Result<Matrix, SaeError> {
    let norms = m.column_l2_norms();
    if let Some(idx) = norms.iter().position(|&n| n == 0.0) {
        return Err(SaeError::ZeroNormColumn(idx));
    }
    let factors: Vec<f64> = norms.iter().map(|n| 1.0 / n).collect();
    Ok(m.scale_columns(&factors))
}

/// Trains a model: builds the normal matrices and solves the Sylvester
/// system once. `normalize` switches per-column L2 normalization of `X`
/// (the default elsewhere in the toolkit is on).
///
/// # Errors
///
/// Shape and λ violations as in [`build_normal_matrices`];
/// [`SaeError::ZeroNormColumn`] when normalizing degenerate columns;
/// [`SaeError::DegenerateData`] when the data leaves the Sylvester pair
/// singular; [`SaeError::Numeric`] for propagated numerical failures.
pub fn train(
    x: &Matrix,
    s: &Matrix,
    lambda: f64,
    normalize: bool,
) -> Result<(SaeModel, TrainDiagnostics), SaeError> {
    train_with(
        x,
        s,
        lambda,
        TrainOptions {
            normalize_features: normalize,
            normalize_semantics: false,
        },
    )
}

/// [`train`] with full options.
pub fn train_with(
    x: &Matrix,
    s: &Matrix,
    lambda: f64,
    options: TrainOptions,
) -> Result<(SaeModel, TrainDiagnostics), SaeError> {
    if x.cols() != s.cols() {
        return Err(SaeError::DimensionMismatch(format!(
            "X has {} sample columns but S has {}",
            x.cols(),
            s.cols()
        )));
    }
    let x_work: Cow<'_, Matrix> = if options.normalize_features {
        Cow::Owned(normalize_columns(x)?)
    } else {
        Cow::Borrowed(x)
    };
    let s_work: Cow<'_, Matrix> = if options.normalize_semantics {
        Cow::Owned(normalize_columns(s)?)
    } else {
        Cow::Borrowed(s)
    };

    let (a, b, c) = build_normal_matrices(&x_work, &s_work, lambda)?;
    let w = linalg::solve_sylvester(&a, &b, &c)?;
    let sylvester_residual = linalg::sylvester_residual(&a, &b, &c, &w)?;
    if sylvester_residual > TRAIN_RESIDUAL_BOUND {
        return Err(SaeError::ExcessiveResidual {
            residual: sylvester_residual,
            bound: TRAIN_RESIDUAL_BOUND,
        });
    }

    let model = SaeModel {
        w,
        lambda,
        normalized_inputs: options.normalize_features,
    };
    let reconstruction_error = frobenius_reconstruction(&model.w, &x_work);
    Ok((
        model,
        TrainDiagnostics {
            reconstruction_error,
            sylvester_residual,
            lambda,
        },
    ))
}

/// Projects features into semantic space: `W·X`, after applying the
/// model's recorded normalization to the columns of `X`.
///
/// # Errors
///
/// [`SaeError::DimensionMismatch`]; [`SaeError::ZeroNormColumn`] if the
/// model normalizes and a column is all-zero.
pub fn encode(model: &SaeModel, x: &Matrix) -> Result<Matrix, SaeError> {
    if x.rows() != model.feature_dim() {
        return Err(SaeError::DimensionMismatch(format!(
            "model expects feature dimension {}, got {}",
            model.feature_dim(),
            x.rows()
        )));
    }
    let x_work: Cow<'_, Matrix> = if model.normalized_inputs {
        Cow::Owned(normalize_columns(x)?)
    } else {
        Cow::Borrowed(x)
    };
    Ok(model.w.matmul(&x_work))
}

/// Projects semantics back into feature space: `Wᵀ·S`. Semantic inputs are
/// taken as-is; the normalization flag concerns feature columns only.
///
/// # Errors
///
/// [`SaeError::DimensionMismatch`].
pub fn decode(model: &SaeModel, s: &Matrix) -> Result<Matrix, SaeError> {
    if s.rows() != model.semantic_dim() {
        return Err(SaeError::DimensionMismatch(format!(
            "model expects semantic dimension {}, got {}",
            model.semantic_dim(),
            s.rows()
        )));
    }
    Ok(model.w.transpose().matmul(s))
}

/// The reconstruction error `‖X − WᵀWX‖_F` on `X` exactly as given (no
/// normalization is applied; training diagnostics report this quantity on
/// the columns the solver saw).
///
/// # Errors
///
/// [`SaeError::DimensionMismatch`].
pub fn reconstruction_error(model: &SaeModel, x: &Matrix) -> Result<f64, SaeError> {
    if x.rows() != model.feature_dim() {
        return Err(SaeError::DimensionMismatch(format!(
            "model expects feature dimension {}, got {}",
            model.feature_dim(),
            x.rows()
        )));
    }
    Ok(frobenius_reconstruction(&model.w, x))
}

fn frobenius_reconstruction(w: &Matrix, x: &Matrix) -> f64 {
    let wx = w.matmul(x);
    let back = w.transpose().matmul(&wx);
    x.sub(&back).frobenius_norm()
}

/// Writes a model as a `key = value` header file plus the mapping matrix
/// at `<path>.w` (normative matrix text format, FNV-1a checksummed).
/// Reloading reproduces the model bit for bit.
///
/// # Errors
///
/// [`DataError::Io`]; [`DataError::InvalidParams`] if `path` has no file
/// name to derive the sibling matrix file from.
pub fn save_model(model: &SaeModel, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file_name = path
        .file_name()
        .ok_or_else(|| DataError::InvalidParams("model path has no file name".to_string()))?
        .to_string_lossy()
        .into_owned();
    let w_name = format!("{file_name}.w");
    let w_path = path.with_file_name(&w_name);

    let w_text = data::render_matrix(model.w());
    let checksum = format!("{:016x}", data::fnv1a64(w_text.as_bytes()));
    std::fs::write(&w_path, &w_text).map_err(|source| DataError::Io {
        path: w_path.clone(),
        source,
    })?;

    let header = format!(
        "k = {}\nd = {}\nlambda = {}\nnormalized_inputs = {}\nfile.w = {}\nchecksum.w = {}\n",
        model.semantic_dim(),
        model.feature_dim(),
        model.lambda(),
        model.normalized_inputs(),
        w_name,
        checksum,
    );
    std::fs::write(path, header).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a model written by [`save_model`], verifying the checksum and the
/// declared dimensions.
///
/// # Errors
///
/// [`DataError::Io`], [`DataError::Format`] (malformed or unknown keys),
/// [`DataError::ChecksumMismatch`], [`DataError::ManifestInconsistent`].
pub fn load_model(path: impl AsRef<Path>) -> Result<SaeModel, DataError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;

    let fmt_err = |line: usize, message: String| DataError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| fmt_err(line_no, format!("expected `key = value`, got `{raw}`")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !matches!(
            key.as_str(),
            "k" | "d" | "lambda" | "normalized_inputs" | "file.w" | "checksum.w"
        ) {
            return Err(fmt_err(line_no, format!("unknown key `{key}`")));
        }
        if pairs.iter().any(|(k, _)| *k == key) {
            return Err(fmt_err(line_no, format!("duplicate key `{key}`")));
        }
        pairs.push((key, value));
    }
    let get = |field: &str| -> Result<String, DataError> {
        pairs
            .iter()
            .find(|(k, _)| k == field)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| DataError::ManifestInconsistent {
                field: field.to_string(),
                message: "missing".to_string(),
            })
    };
    let inconsistent = |field: &str, message: String| DataError::ManifestInconsistent {
        field: field.to_string(),
        message,
    };

    let k: usize = get("k")?
        .parse()
        .map_err(|_| inconsistent("k", "not a count".to_string()))?;
    let d: usize = get("d")?
        .parse()
        .map_err(|_| inconsistent("d", "not a count".to_string()))?;
    let lambda: f64 = get("lambda")?
        .parse()
        .map_err(|_| inconsistent("lambda", "not a number".to_string()))?;
    let normalized_inputs = match get("normalized_inputs")?.as_str() {
        "true" => true,
        "false" => false,
        other => {
            return Err(inconsistent(
                "normalized_inputs",
                format!("expected true or false, got `{other}`"),
            ))
        }
    };

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let w_path = base.join(get("file.w")?);
    let bytes = std::fs::read(&w_path).map_err(|source| DataError::Io {
        path: w_path.clone(),
        source,
    })?;
    let actual = format!("{:016x}", data::fnv1a64(&bytes));
    let declared = get("checksum.w")?;
    if actual != declared {
        return Err(DataError::ChecksumMismatch {
            path: w_path,
            expected: declared,
            actual,
        });
    }
    let text = String::from_utf8(bytes).map_err(|e| DataError::Format {
        path: w_path.clone(),
        line: 0,
        message: format!("not UTF-8: {e}"),
    })?;
    let w = data::parse_matrix(&text, &w_path)?;
    if w.rows() != k || w.cols() != d {
        return Err(inconsistent(
            "k",
            format!("header declares {k}x{d}, matrix file is {}x{}", w.rows(), w.cols()),
        ));
    }
    SaeModel::from_parts(w, lambda, normalized_inputs)
        .map_err(|e| inconsistent("lambda", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.next_gaussian()).unwrap()
    }

    /// Random k×d with orthonormal rows (requires k ≤ d).
    fn orthonormal_rows(rng: &mut SplitMix64, k: usize, d: usize) -> Matrix {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
        for _ in 0..k {
            let mut v: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
            for prev in &rows {
                let proj: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (x, p) in v.iter_mut().zip(prev) {
                    *x -= proj * p;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in v.iter_mut() {
                *x /= norm;
            }
            rows.push(v);
        }
        Matrix::from_vec(k, d, rows.concat()).unwrap()
    }

    #[test]
    fn identity_data_gives_identity_normal_matrices() {
        let i2 = Matrix::identity(2);
        let (a, b, c) = build_normal_matrices(&i2, &i2, 1.0).unwrap();
        assert_eq!(a, Matrix::identity(2));
        assert_eq!(b, Matrix::identity(2));
        assert_eq!(c, Matrix::identity(2).scale(2.0));
    }

    #[test]
    fn diagonal_data_gives_diagonal_normal_matrices() {
        let x = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let (a, b, c) = build_normal_matrices(&x, &x, 1.0).unwrap();
        let diag14 = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(a, diag14);
        assert_eq!(b, diag14);
        assert_eq!(c, diag14.scale(2.0));
    }

    #[test]
    fn normal_matrices_match_naive_triple_loop() {
        let mut rng = SplitMix64::new(31);
        let (d, k, n) = (4, 3, 10);
        let x = random_matrix(&mut rng, d, n);
        let s = random_matrix(&mut rng, k, n);
        let lambda = 0.7;
        let (a, b, c) = build_normal_matrices(&x, &s, lambda).unwrap();

        for i in 0..k {
            for j in 0..k {
                let naive: f64 = (0..n).map(|t| s.at(i, t) * s.at(j, t)).sum();
                assert!((a.at(i, j) - naive).abs() < 1e-12);
            }
        }
        for i in 0..d {
            for j in 0..d {
                let naive: f64 = (0..n).map(|t| x.at(i, t) * x.at(j, t)).sum();
                assert!((b.at(i, j) - lambda * naive).abs() < 1e-12);
            }
        }
        for i in 0..k {
            for j in 0..d {
                let naive: f64 = (0..n).map(|t| s.at(i, t) * x.at(j, t)).sum();
                assert!((c.at(i, j) - (1.0 + lambda) * naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_must_be_positive_and_finite() {
        let i2 = Matrix::identity(2);
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                build_normal_matrices(&i2, &i2, bad),
                Err(SaeError::NonPositiveLambda(_))
            ));
            assert!(matches!(
                train(&i2, &i2, bad, false),
                Err(SaeError::NonPositiveLambda(_))
            ));
        }
    }

    #[test]
    fn self_mapping_trains_to_identity() {
        let mut rng = SplitMix64::new(8);
        let x = random_matrix(&mut rng, 3, 8);
        let (model, diag) = train(&x, &x, 1.0, false).unwrap();
        let err = model.w().sub(&Matrix::identity(3)).frobenius_norm();
        assert!(err <= 1e-8, "W deviates from identity by {err}");
        assert!(diag.sylvester_residual <= TRAIN_RESIDUAL_BOUND);
        assert!(diag.reconstruction_error >= 0.0);
    }

    #[test]
    fn planted_model_is_recovered_within_tolerance() {
        // Plant an orthonormal-row mapping, draw features in its row
        // space, and check the encoder fit of the trained model.
        let mut rng = SplitMix64::new(4242);
        let w_star = orthonormal_rows(&mut rng, 3, 5);
        let sem = random_matrix(&mut rng, 3, 50);
        let x = w_star.transpose().matmul(&sem);
        let s = w_star.matmul(&x);
        let (model, _) = train(&x, &s, 1.0, false).unwrap();
        let fit = model.w().matmul(&x).sub(&s).frobenius_norm() / s.frobenius_norm();
        assert!(fit <= 0.05, "encoder fit {fit}");
    }

    #[test]
    fn train_rejects_zero_norm_column_when_normalizing() {
        let x = Matrix::from_vec(2, 3, vec![1.0, 0.0, 2.0, 1.0, 0.0, 1.0]).unwrap();
        let s = Matrix::from_vec(2, 3, vec![1.0; 6]).unwrap();
        assert!(matches!(
            train(&x, &s, 1.0, true),
            Err(SaeError::ZeroNormColumn(1))
        ));
        // Without normalization the zero column is legal data.
        assert!(train(&x, &s, 1.0, false).is_ok());
    }

    #[test]
    fn train_reports_degenerate_data() {
        // One repeated sample: both Gram matrices are rank 1, so the pair
        // shares a null space and the solve must fail loudly.
        let x = Matrix::from_vec(2, 2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let s = Matrix::from_vec(2, 2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            train(&x, &s, 1.0, false),
            Err(SaeError::DegenerateData(_))
        ));
    }

    #[test]
    fn permuting_samples_leaves_w_unchanged() {
        let mut rng = SplitMix64::new(15);
        let (d, k, n) = (6, 4, 30);
        let x = random_matrix(&mut rng, d, n);
        let s = random_matrix(&mut rng, k, n);
        // Fixed permutation: reverse, then swap halves.
        let perm: Vec<usize> = (0..n).map(|i| (n - 1 - i + n / 2) % n).collect();
        let xp = Matrix::from_fn(d, n, |i, j| x.at(i, perm[j])).unwrap();
        let sp = Matrix::from_fn(k, n, |i, j| s.at(i, perm[j])).unwrap();
        let (m1, _) = train(&x, &s, 1.0, false).unwrap();
        let (m2, _) = train(&xp, &sp, 1.0, false).unwrap();
        let diff = m1.w().sub(m2.w()).frobenius_norm();
        assert!(diff <= 1e-10, "permutation changed W by {diff}");
    }

    #[test]
    fn growing_lambda_improves_encoder_fit() {
        // On an exactly consistent planted instance both extremes fit to
        // round-off, so the comparison holds with slack.
        let mut rng = SplitMix64::new(2024);
        let w_star = orthonormal_rows(&mut rng, 3, 5);
        let sem = random_matrix(&mut rng, 3, 40);
        let x = w_star.transpose().matmul(&sem);
        let s = w_star.matmul(&x);
        let fit = |lambda: f64| {
            let (model, _) = train(&x, &s, lambda, false).unwrap();
            model.w().matmul(&x).sub(&s).frobenius_norm()
        };
        assert!(fit(100.0) <= fit(0.01) + 1e-9);

        // With an inconsistent instance (features perturbed off the row
        // space) the trade-off is real and the ordering is strict.
        let noise = random_matrix(&mut rng, 5, 40).scale(0.3);
        let x_noisy = x.sub(&noise);
        let fit_noisy = |lambda: f64| {
            let (model, _) = train(&x_noisy, &s, lambda, false).unwrap();
            model.w().matmul(&x_noisy).sub(&s).frobenius_norm()
        };
        assert!(fit_noisy(100.0) < fit_noisy(0.01));
    }

    #[test]
    fn encode_applies_model_mapping_and_normalization() {
        let mut rng = SplitMix64::new(77);
        let w = random_matrix(&mut rng, 3, 4);
        let x = random_matrix(&mut rng, 4, 6);

        // Without normalization: plain product, checked against a naive loop.
        let model = SaeModel::from_parts(w.clone(), 1.0, false).unwrap();
        let enc = encode(&model, &x).unwrap();
        for i in 0..3 {
            for j in 0..6 {
                let naive: f64 = (0..4).map(|t| w.at(i, t) * x.at(t, j)).sum();
                assert!((enc.at(i, j) - naive).abs() < 1e-12);
            }
        }

        // With normalization: equals the product against normalized columns.
        let model_n = SaeModel::from_parts(w.clone(), 1.0, true).unwrap();
        let enc_n = encode(&model_n, &x).unwrap();
        let xn = normalize_columns(&x).unwrap();
        assert!(enc_n.sub(&w.matmul(&xn)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn encode_identity_and_zero_inputs() {
        let model = SaeModel::from_parts(Matrix::identity(3), 1.0, false).unwrap();
        let mut rng = SplitMix64::new(5);
        let x = random_matrix(&mut rng, 3, 4);
        assert_eq!(encode(&model, &x).unwrap(), x);
        let zero = Matrix::from_vec(3, 2, vec![0.0; 6]).unwrap();
        assert_eq!(encode(&model, &zero).unwrap(), zero);
    }

    #[test]
    fn decode_is_transpose_product() {
        let mut rng = SplitMix64::new(78);
        let w = random_matrix(&mut rng, 3, 4);
        let s = random_matrix(&mut rng, 3, 5);
        let model = SaeModel::from_parts(w.clone(), 1.0, true).unwrap();
        let dec = decode(&model, &s).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let naive: f64 = (0..3).map(|t| w.at(t, i) * s.at(t, j)).sum();
                assert!((dec.at(i, j) - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthonormal_round_trip_restores_row_space_inputs() {
        let mut rng = SplitMix64::new(90);
        let w = orthonormal_rows(&mut rng, 3, 5);
        let sem = random_matrix(&mut rng, 3, 7);
        let x = w.transpose().matmul(&sem); // lies in the row space of W
        let model = SaeModel::from_parts(w, 1.0, false).unwrap();
        let back = decode(&model, &encode(&model, &x).unwrap()).unwrap();
        let err = back.sub(&x).frobenius_norm();
        assert!(err <= 1e-8, "round trip error {err}");
    }

    #[test]
    fn projection_dimension_mismatches_are_rejected() {
        let model = SaeModel::from_parts(Matrix::identity(3), 1.0, false).unwrap();
        let wrong = Matrix::identity(4);
        assert!(matches!(
            encode(&model, &wrong),
            Err(SaeError::DimensionMismatch(_))
        ));
        assert!(matches!(
            decode(&model, &wrong),
            Err(SaeError::DimensionMismatch(_))
        ));
        assert!(matches!(
            reconstruction_error(&model, &wrong),
            Err(SaeError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn reconstruction_error_vanishes_for_orthogonal_w() {
        let (c, s) = (0.6, 0.8); // a rotation: WᵀW = I
        let w = Matrix::from_vec(2, 2, vec![c, -s, s, c]).unwrap();
        let model = SaeModel::from_parts(w, 1.0, false).unwrap();
        let mut rng = SplitMix64::new(17);
        let x = random_matrix(&mut rng, 2, 9);
        assert!(reconstruction_error(&model, &x).unwrap() < 1e-12);
        let zero = Matrix::from_vec(2, 3, vec![0.0; 6]).unwrap();
        assert_eq!(reconstruction_error(&model, &zero).unwrap(), 0.0);
    }

    #[test]
    fn reconstruction_error_matches_direct_formula() {
        let mut rng = SplitMix64::new(18);
        let w = random_matrix(&mut rng, 2, 5);
        let x = random_matrix(&mut rng, 5, 6);
        let model = SaeModel::from_parts(w.clone(), 1.0, false).unwrap();
        let got = reconstruction_error(&model, &x).unwrap();
        let mut sq = 0.0;
        for i in 0..5 {
            for j in 0..6 {
                let mut back = 0.0;
                for t in 0..2 {
                    let mut wx = 0.0;
                    for r in 0..5 {
                        wx += w.at(t, r) * x.at(r, j);
                    }
                    back += w.at(t, i) * wx;
                }
                let r = x.at(i, j) - back;
                sq += r * r;
            }
        }
        assert!((got - sq.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn model_file_round_trip_is_bit_exact() {
        let mut rng = SplitMix64::new(123);
        let x = random_matrix(&mut rng, 5, 20);
        let s = random_matrix(&mut rng, 3, 20);
        let (model, _) = train(&x, &s, 2.5, true).unwrap();

        let dir = std::env::temp_dir().join(format!(
            "sae-model-test-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.sae");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
        for (a, b) in model.w().as_slice().iter().zip(back.w().as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        // Tampering with the matrix file must surface as a checksum error.
        let w_path = dir.join("model.sae.w");
        let mut text = std::fs::read_to_string(&w_path).unwrap();
        text.push('\n');
        std::fs::write(&w_path, text).unwrap();
        assert!(matches!(
            load_model(&path),
            Err(DataError::ChecksumMismatch { .. })
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn model_header_rejects_unknown_keys() {
        let dir = std::env::temp_dir().join(format!(
            "sae-model-badkey-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.sae");
        std::fs::write(&path, "k = 1\nd = 1\nbogus = 1\n").unwrap();
        assert!(matches!(load_model(&path), Err(DataError::Format { .. })));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn large_realistic_shape_trains_cleanly() {
        // Attribute-benchmark scale: d=1024 features, k=85 semantics,
        // n=24295 samples of full-rank random data. Verifies the closed
        // form holds its residual bound at size, not just on toys.
        let mut rng = SplitMix64::new(2);
        let (d, k, n) = (1024, 85, 24295);
        let x = random_matrix(&mut rng, d, n);
        let s = random_matrix(&mut rng, k, n);
        let (model, diag) = train(&x, &s, 1.0, true).unwrap();
        assert_eq!(model.semantic_dim(), k);
        assert_eq!(model.feature_dim(), d);
        assert!(
            diag.sylvester_residual <= TRAIN_RESIDUAL_BOUND,
            "residual {}",
            diag.sylvester_residual
        );
    }
}
