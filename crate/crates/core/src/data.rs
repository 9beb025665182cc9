//! Dataset model, on-disk formats, and the synthetic planted-model
//! generator.
//!
//! On-disk formats are normative and bit-exact:
//!
//! - **Matrix files**: plain text; line 1 is `rows cols`, followed by one
//!   line per row of space-separated decimal values rendered with the
//!   shortest representation that parses back to the identical 64-bit
//!   float.
//! - **Label files**: line 1 is the count, followed by one unsigned
//!   integer label per line.
//! - **Manifests**: UTF-8 `key = value` lines; unknown keys are rejected;
//!   blank lines are permitted. File paths are resolved relative to the
//!   manifest's directory.
//! - **Checksums**: 64-bit FNV-1a over the raw file bytes, rendered as 16
//!   lowercase hex digits.
//!
//! The synthetic generator plants a ground-truth mapping `W*` with
//! orthonormal rows and rejection-samples well-separated unit prototypes,
//! so the noiseless classification task is solvable exactly and the
//! planted mapping doubles as a test oracle. Every draw comes from the
//! seeded [`SplitMix64`](crate::rng::SplitMix64) stream, making datasets a
//! pure function of their parameters.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::matrix::{dot, Matrix};
use crate::rng::SplitMix64;

/// Maximum attempts when rejection-sampling separated prototypes.
pub const PROTOTYPE_REJECTION_CAP: usize = 10_000;

/// Pairwise cosine bound enforced between class prototypes.
pub const PROTOTYPE_MAX_COSINE: f64 = 0.8;

/// Errors from dataset I/O, validation, and generation.
#[derive(Debug)]
pub enum DataError {
    /// Underlying filesystem failure.
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// Malformed text at a specific line of a data file.
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// A matrix file contains NaN or an infinity.
    NonFinite { path: PathBuf, line: usize },
    /// File bytes do not hash to the checksum declared in the manifest.
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    /// A manifest field conflicts with the referenced data or with
    /// another field.
    ManifestInconsistent { field: String, message: String },
    /// A label in the training split also appears among the unseen
    /// (test-time) classes.
    LabelLeak { label: u32 },
    /// Synthetic-generation parameters are out of range.
    InvalidParams(String),
    /// Could not place well-separated prototypes within the attempt cap —
    /// reduce the class count or raise the semantic dimension.
    RejectionOverflow { attempts: usize },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io { path, source } => {
                write!(f, "io error on {}: {source}", path.display())
            }
            DataError::Format { path, line, message } => {
                write!(f, "{}:{line}: {message}", path.display())
            }
            DataError::NonFinite { path, line } => {
                write!(f, "{}:{line}: non-finite value", path.display())
            }
            DataError::ChecksumMismatch { path, expected, actual } => write!(
                f,
                "checksum mismatch for {}: manifest declares {expected}, file hashes to {actual}",
                path.display()
            ),
            DataError::ManifestInconsistent { field, message } => {
                write!(f, "manifest field `{field}` inconsistent: {message}")
            }
            DataError::LabelLeak { label } => write!(
                f,
                "label {label} appears in the training split and among unseen classes"
            ),
            DataError::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            DataError::RejectionOverflow { attempts } => write!(
                f,
                "could not place well-separated prototypes after {attempts} attempts; \
                 reduce the class count or raise the semantic dimension"
            ),
        }
    }
}

impl std::error::Error for DataError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            DataError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

/// 64-bit FNV-1a hash of a byte stream.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a::new();
    h.update(bytes);
    h.finish()
}

/// Incremental FNV-1a hasher, used for file checksums and dataset
/// fingerprints.
#[derive(Debug, Clone)]
pub struct Fnv1a {
    state: u64,
}

impl Fnv1a {
    pub fn new() -> Self {
        Self {
            state: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.state ^= u64::from(b);
            self.state = self.state.wrapping_mul(0x100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.state
    }
}

impl Default for Fnv1a {
    fn default() -> Self {
        Self::new()
    }
}

fn checksum_hex(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a64(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Renders a matrix in the normative text format.
pub fn render_matrix(m: &Matrix) -> String {
    // 18 characters is a typical shortest rendering of a float plus its
    // separator; the estimate only sizes the allocation.
    let mut out = String::with_capacity(m.rows() * m.cols() * 18 + 16);
    out.push_str(&format!("{} {}\n", m.rows(), m.cols()));
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

/// Parses the normative matrix text format.
///
/// # Errors
///
/// [`DataError::Format`] with a 1-based line number for structural
/// problems and [`DataError::NonFinite`] for NaN/infinite entries.
pub fn parse_matrix(content: &str, path: &Path) -> Result<Matrix, DataError> {
    let fmt_err = |line: usize, message: String| DataError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| fmt_err(1, "empty file, expected `rows cols` header".into()))?;
    let mut parts = header.split_whitespace();
    let rows: usize = parts
        .next()
        .ok_or_else(|| fmt_err(1, "missing row count".into()))?
        .parse()
        .map_err(|_| fmt_err(1, format!("invalid row count in header `{header}`")))?;
    let cols: usize = parts
        .next()
        .ok_or_else(|| fmt_err(1, "missing column count".into()))?
        .parse()
        .map_err(|_| fmt_err(1, format!("invalid column count in header `{header}`")))?;
    if parts.next().is_some() {
        return Err(fmt_err(1, format!("trailing tokens in header `{header}`")));
    }
    if rows == 0 || cols == 0 {
        return Err(fmt_err(1, format!("dimensions must be positive, got {rows}x{cols}")));
    }
    let total = rows
        .checked_mul(cols)
        .ok_or_else(|| fmt_err(1, format!("dimensions {rows}x{cols} overflow")))?;

    let mut data = Vec::with_capacity(total);
    let mut filled_rows = 0usize;
    for (idx, line) in lines {
        let line_no = idx + 1;
        if filled_rows == rows {
            if !line.trim().is_empty() {
                return Err(fmt_err(line_no, "unexpected content after final row".into()));
            }
            continue;
        }
        let mut count = 0usize;
        for token in line.split_whitespace() {
            let value: f64 = token
                .parse()
                .map_err(|_| fmt_err(line_no, format!("invalid value `{token}`")))?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    path: path.to_path_buf(),
                    line: line_no,
                });
            }
            data.push(value);
            count += 1;
        }
        if count != cols {
            return Err(fmt_err(
                line_no,
                format!("expected {cols} values in row, found {count}"),
            ));
        }
        filled_rows += 1;
    }
    if filled_rows != rows {
        return Err(fmt_err(
            content.lines().count().max(1),
            format!("expected {rows} data rows, found {filled_rows}"),
        ));
    }
    Ok(Matrix::from_raw(rows, cols, data))
}

/// Loads a matrix from the normative text format.
///
/// # Errors
///
/// [`DataError::Io`] plus the [`parse_matrix`] conditions.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix, DataError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_matrix(&content, path)
}

/// Saves a matrix in the normative text format; a reload is bit-identical.
///
/// # Errors
///
/// [`DataError::Io`].
pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    std::fs::write(path, render_matrix(m)).map_err(io_err(path))
}

/// Renders a label list in the normative text format: a count header
/// followed by one label per line.
pub fn render_labels(labels: &[u32]) -> String {
    let mut out = String::with_capacity(labels.len() * 4 + 16);
    out.push_str(&format!("{}\n", labels.len()));
    for l in labels {
        out.push_str(&format!("{l}\n"));
    }
    out
}

/// Parses the label text format; the inverse of [`render_labels`].
///
/// # Errors
///
/// [`DataError::Format`] with the offending line on any deviation.
pub fn parse_labels(content: &str, path: &Path) -> Result<Vec<u32>, DataError> {
    let fmt_err = |line: usize, message: String| DataError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| fmt_err(1, "empty file, expected label count header".into()))?;
    let count: usize = header
        .trim()
        .parse()
        .map_err(|_| fmt_err(1, format!("invalid label count `{header}`")))?;
    let mut labels = Vec::with_capacity(count);
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if labels.len() == count {
            if !trimmed.is_empty() {
                return Err(fmt_err(line_no, "unexpected content after final label".into()));
            }
            continue;
        }
        let label: u32 = trimmed
            .parse()
            .map_err(|_| fmt_err(line_no, format!("invalid label `{trimmed}`")))?;
        labels.push(label);
    }
    if labels.len() != count {
        return Err(fmt_err(
            content.lines().count().max(1),
            format!("expected {count} labels, found {}", labels.len()),
        ));
    }
    Ok(labels)
}

/// The file roles referenced by a dataset manifest, in canonical order.
const ROLES: [&str; 7] = [
    "x_train",
    "s_train",
    "y_train",
    "x_test",
    "y_test",
    "prototypes",
    "unseen_labels",
];

/// Parsed form of a dataset manifest: declared statistics plus one file
/// path and checksum per matrix/label role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub d: usize,
    pub k: usize,
    pub total_classes: usize,
    pub seen_classes: usize,
    pub unseen_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Relative (or absolute) path per role, keyed in [`ROLES`] order.
    pub files: Vec<String>,
    /// Declared lowercase-hex checksum per role, same order as `files`.
    pub checksums: Vec<String>,
}

impl DatasetManifest {
    /// Parses manifest text. Unknown keys and duplicates are rejected;
    /// blank lines are permitted.
    ///
    /// # Errors
    ///
    /// [`DataError::Format`] for malformed lines or unknown keys,
    /// [`DataError::ManifestInconsistent`] for missing fields or count
    /// contradictions.
    pub fn parse(content: &str, path: &Path) -> Result<Self, DataError> {
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
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(fmt_err(line_no, format!("duplicate key `{key}`")));
            }
            let known = matches!(
                key.as_str(),
                "name" | "d" | "k" | "total_classes" | "seen_classes" | "unseen_classes"
                    | "n_train" | "n_test"
            ) || ROLES
                .iter()
                .any(|r| key == format!("file.{r}") || key == format!("checksum.{r}"));
            if !known {
                return Err(fmt_err(line_no, format!("unknown key `{key}`")));
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
        let get_count = |field: &str| -> Result<usize, DataError> {
            let value = get(field)?;
            let parsed = value
                .parse::<usize>()
                .map_err(|_| DataError::ManifestInconsistent {
                    field: field.to_string(),
                    message: format!("not a count: `{value}`"),
                })?;
            if parsed == 0 {
                return Err(DataError::ManifestInconsistent {
                    field: field.to_string(),
                    message: "must be at least 1".to_string(),
                });
            }
            Ok(parsed)
        };

        let manifest = DatasetManifest {
            name: get("name")?,
            d: get_count("d")?,
            k: get_count("k")?,
            total_classes: get_count("total_classes")?,
            seen_classes: get_count("seen_classes")?,
            unseen_classes: get_count("unseen_classes")?,
            n_train: get_count("n_train")?,
            n_test: get_count("n_test")?,
            files: ROLES
                .iter()
                .map(|r| get(&format!("file.{r}")))
                .collect::<Result<_, _>>()?,
            checksums: ROLES
                .iter()
                .map(|r| get(&format!("checksum.{r}")))
                .collect::<Result<_, _>>()?,
        };
        if manifest.seen_classes + manifest.unseen_classes != manifest.total_classes {
            return Err(DataError::ManifestInconsistent {
                field: "total_classes".to_string(),
                message: format!(
                    "{} seen + {} unseen != {} total",
                    manifest.seen_classes, manifest.unseen_classes, manifest.total_classes
                ),
            });
        }
        Ok(manifest)
    }

    /// Renders the manifest with a fixed key order, so rendering is
    /// byte-deterministic.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("name = {}\n", self.name));
        out.push_str(&format!("d = {}\n", self.d));
        out.push_str(&format!("k = {}\n", self.k));
        out.push_str(&format!("total_classes = {}\n", self.total_classes));
        out.push_str(&format!("seen_classes = {}\n", self.seen_classes));
        out.push_str(&format!("unseen_classes = {}\n", self.unseen_classes));
        out.push_str(&format!("n_train = {}\n", self.n_train));
        out.push_str(&format!("n_test = {}\n", self.n_test));
        for (role, file) in ROLES.iter().zip(&self.files) {
            out.push_str(&format!("file.{role} = {file}\n"));
        }
        for (role, sum) in ROLES.iter().zip(&self.checksums) {
            out.push_str(&format!("checksum.{role} = {sum}\n"));
        }
        out
    }
}

/// A zero-shot dataset: a seen-class training split with per-sample
/// semantics, an unseen-class test split, and one semantic prototype per
/// unseen class. Construction validates every structural invariant, so a
/// value of this type is always internally consistent.
#[derive(Debug, Clone)]
pub struct ZslDataset {
    name: String,
    x_train: Matrix,
    s_train: Matrix,
    y_train: Vec<u32>,
    x_test: Matrix,
    y_test: Vec<u32>,
    prototypes: Matrix,
    unseen_labels: Vec<u32>,
}

impl ZslDataset {
    /// Validates and assembles a dataset.
    ///
    /// # Errors
    ///
    /// [`DataError::ManifestInconsistent`] for any dimension or label-set
    /// violation and [`DataError::LabelLeak`] if a training label appears
    /// among the unseen classes.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        x_train: Matrix,
        s_train: Matrix,
        y_train: Vec<u32>,
        x_test: Matrix,
        y_test: Vec<u32>,
        prototypes: Matrix,
        unseen_labels: Vec<u32>,
    ) -> Result<Self, DataError> {
        let inconsistent = |field: &str, message: String| DataError::ManifestInconsistent {
            field: field.to_string(),
            message,
        };
        if s_train.cols() != x_train.cols() {
            return Err(inconsistent(
                "s_train",
                format!(
                    "{} semantic columns vs {} feature columns",
                    s_train.cols(),
                    x_train.cols()
                ),
            ));
        }
        if y_train.len() != x_train.cols() {
            return Err(inconsistent(
                "y_train",
                format!("{} labels vs {} training columns", y_train.len(), x_train.cols()),
            ));
        }
        if x_test.rows() != x_train.rows() {
            return Err(inconsistent(
                "x_test",
                format!(
                    "feature dimension {} vs training dimension {}",
                    x_test.rows(),
                    x_train.rows()
                ),
            ));
        }
        if y_test.len() != x_test.cols() {
            return Err(inconsistent(
                "y_test",
                format!("{} labels vs {} test columns", y_test.len(), x_test.cols()),
            ));
        }
        if prototypes.rows() != s_train.rows() {
            return Err(inconsistent(
                "prototypes",
                format!(
                    "semantic dimension {} vs training dimension {}",
                    prototypes.rows(),
                    s_train.rows()
                ),
            ));
        }
        if prototypes.cols() != unseen_labels.len() {
            return Err(inconsistent(
                "unseen_labels",
                format!(
                    "{} labels vs {} prototype columns",
                    unseen_labels.len(),
                    prototypes.cols()
                ),
            ));
        }
        let unseen: BTreeSet<u32> = unseen_labels.iter().copied().collect();
        if unseen.len() != unseen_labels.len() {
            return Err(inconsistent("unseen_labels", "duplicate labels".to_string()));
        }
        if let Some(&label) = y_train.iter().find(|l| unseen.contains(l)) {
            return Err(DataError::LabelLeak { label });
        }
        if let Some(&label) = y_test.iter().find(|l| !unseen.contains(l)) {
            return Err(inconsistent(
                "y_test",
                format!("label {label} is not an unseen class"),
            ));
        }
        Ok(Self {
            name,
            x_train,
            s_train,
            y_train,
            x_test,
            y_test,
            prototypes,
            unseen_labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Features of the seen split, one column per sample (`d x n_train`).
    pub fn x_train(&self) -> &Matrix {
        &self.x_train
    }

    /// Per-sample semantics of the seen split (`k x n_train`).
    pub fn s_train(&self) -> &Matrix {
        &self.s_train
    }

    pub fn y_train(&self) -> &[u32] {
        &self.y_train
    }

    /// Features of the unseen split (`d x n_test`).
    pub fn x_test(&self) -> &Matrix {
        &self.x_test
    }

    pub fn y_test(&self) -> &[u32] {
        &self.y_test
    }

    /// One semantic prototype per unseen class (`k x c_unseen`), columns
    /// aligned with [`ZslDataset::unseen_labels`].
    pub fn prototypes(&self) -> &Matrix {
        &self.prototypes
    }

    pub fn unseen_labels(&self) -> &[u32] {
        &self.unseen_labels
    }

    pub fn feature_dim(&self) -> usize {
        self.x_train.rows()
    }

    pub fn semantic_dim(&self) -> usize {
        self.s_train.rows()
    }

    pub fn n_train(&self) -> usize {
        self.x_train.cols()
    }

    pub fn n_test(&self) -> usize {
        self.x_test.cols()
    }

    pub fn unseen_class_count(&self) -> usize {
        self.unseen_labels.len()
    }

    pub fn seen_class_count(&self) -> usize {
        self.y_train.iter().collect::<BTreeSet<_>>().len()
    }

    /// Position of `label` among the unseen classes (= its prototype
    /// column), if present.
    pub fn unseen_index_of(&self, label: u32) -> Option<usize> {
        self.unseen_labels.iter().position(|&l| l == label)
    }

    /// Order-sensitive FNV-1a fingerprint over every field, used to tie
    /// reports to the exact dataset they were computed from.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.update(self.name.as_bytes());
        for (tag, m) in [
            ("x_train", &self.x_train),
            ("s_train", &self.s_train),
            ("x_test", &self.x_test),
            ("prototypes", &self.prototypes),
        ] {
            h.update(tag.as_bytes());
            h.update(&(m.rows() as u64).to_le_bytes());
            h.update(&(m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                h.update(&v.to_bits().to_le_bytes());
            }
        }
        for (tag, labels) in [
            ("y_train", &self.y_train),
            ("y_test", &self.y_test),
            ("unseen_labels", &self.unseen_labels),
        ] {
            h.update(tag.as_bytes());
            for l in labels.iter() {
                h.update(&l.to_le_bytes());
            }
        }
        h.finish()
    }
}

/// Loads and fully validates a dataset from its manifest: checksums are
/// verified, dimensions are cross-checked against the declared statistics,
/// and the label-disjointness invariants are enforced. Validation is not
/// skippable.
///
/// # Errors
///
/// Any [`DataError`] variant except the generation-specific ones.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<ZslDataset, DataError> {
    let manifest_path = manifest_path.as_ref();
    let content = std::fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let manifest = DatasetManifest::parse(&content, manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut texts: Vec<(PathBuf, String)> = Vec::with_capacity(ROLES.len());
    for (file, declared) in manifest.files.iter().zip(&manifest.checksums) {
        let path = base.join(file);
        let bytes = std::fs::read(&path).map_err(io_err(&path))?;
        let actual = checksum_hex(&bytes);
        if actual != *declared {
            return Err(DataError::ChecksumMismatch {
                path,
                expected: declared.clone(),
                actual,
            });
        }
        let text = String::from_utf8(bytes).map_err(|e| DataError::Format {
            path: path.clone(),
            line: 0,
            message: format!("not UTF-8: {e}"),
        })?;
        texts.push((path, text));
    }

    let x_train = parse_matrix(&texts[0].1, &texts[0].0)?;
    let s_train = parse_matrix(&texts[1].1, &texts[1].0)?;
    let y_train = parse_labels(&texts[2].1, &texts[2].0)?;
    let x_test = parse_matrix(&texts[3].1, &texts[3].0)?;
    let y_test = parse_labels(&texts[4].1, &texts[4].0)?;
    let prototypes = parse_matrix(&texts[5].1, &texts[5].0)?;
    let unseen_labels = parse_labels(&texts[6].1, &texts[6].0)?;

    let inconsistent = |field: &str, message: String| DataError::ManifestInconsistent {
        field: field.to_string(),
        message,
    };
    let checks: [(&str, usize, usize); 8] = [
        ("d", manifest.d, x_train.rows()),
        ("k", manifest.k, s_train.rows()),
        ("n_train", manifest.n_train, x_train.cols()),
        ("n_test", manifest.n_test, x_test.cols()),
        ("unseen_classes", manifest.unseen_classes, unseen_labels.len()),
        ("unseen_classes", manifest.unseen_classes, prototypes.cols()),
        ("n_train", manifest.n_train, y_train.len()),
        ("n_test", manifest.n_test, y_test.len()),
    ];
    for (field, declared, found) in checks {
        if declared != found {
            return Err(inconsistent(
                field,
                format!("manifest declares {declared}, files contain {found}"),
            ));
        }
    }
    let distinct_train = y_train.iter().collect::<BTreeSet<_>>().len();
    if distinct_train != manifest.seen_classes {
        return Err(inconsistent(
            "seen_classes",
            format!(
                "manifest declares {}, training labels contain {distinct_train} distinct classes",
                manifest.seen_classes
            ),
        ));
    }

    ZslDataset::new(
        manifest.name,
        x_train,
        s_train,
        y_train,
        x_test,
        y_test,
        prototypes,
        unseen_labels,
    )
}

/// Writes a dataset plus its manifest into `dir` (created if missing) and
/// returns the manifest path. Reloading reproduces the dataset exactly.
///
/// # Errors
///
/// [`DataError::Io`].
pub fn save_dataset(ds: &ZslDataset, dir: impl AsRef<Path>) -> Result<PathBuf, DataError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;

    let renderings: [(usize, String, &str); 7] = [
        (0, render_matrix(ds.x_train()), "x_train.mat"),
        (1, render_matrix(ds.s_train()), "s_train.mat"),
        (2, render_labels(ds.y_train()), "y_train.labels"),
        (3, render_matrix(ds.x_test()), "x_test.mat"),
        (4, render_labels(ds.y_test()), "y_test.labels"),
        (5, render_matrix(ds.prototypes()), "prototypes.mat"),
        (6, render_labels(ds.unseen_labels()), "unseen_labels.labels"),
    ];
    let mut files = vec![String::new(); ROLES.len()];
    let mut checksums = vec![String::new(); ROLES.len()];
    for (slot, text, file_name) in &renderings {
        let path = dir.join(file_name);
        std::fs::write(&path, text).map_err(io_err(&path))?;
        files[*slot] = (*file_name).to_string();
        checksums[*slot] = checksum_hex(text.as_bytes());
    }

    let manifest = DatasetManifest {
        name: ds.name().to_string(),
        d: ds.feature_dim(),
        k: ds.semantic_dim(),
        total_classes: ds.seen_class_count() + ds.unseen_class_count(),
        seen_classes: ds.seen_class_count(),
        unseen_classes: ds.unseen_class_count(),
        n_train: ds.n_train(),
        n_test: ds.n_test(),
        files,
        checksums,
    };
    let manifest_path = dir.join("manifest");
    std::fs::write(&manifest_path, manifest.render()).map_err(io_err(&manifest_path))?;
    Ok(manifest_path)
}

/// Parameters of the synthetic planted-model generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// Feature dimension.
    pub d: usize,
    /// Semantic dimension. `k ≤ d` is recommended; above that the planted
    /// mapping cannot have orthonormal rows and recovery degrades.
    pub k: usize,
    pub n_seen_classes: usize,
    pub n_unseen_classes: usize,
    pub samples_per_class: usize,
    /// Scale of the per-sample Gaussian perturbation around the class
    /// prototype in semantic space.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            d: 64,
            k: 16,
            n_seen_classes: 20,
            n_unseen_classes: 5,
            samples_per_class: 50,
            noise_sigma: 0.0,
            seed: 42,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<(), DataError> {
        let counts = [
            ("d", self.d),
            ("k", self.k),
            ("n_seen_classes", self.n_seen_classes),
            ("n_unseen_classes", self.n_unseen_classes),
            ("samples_per_class", self.samples_per_class),
        ];
        for (field, value) in counts {
            if value == 0 {
                return Err(DataError::InvalidParams(format!("{field} must be at least 1")));
            }
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(DataError::InvalidParams(format!(
                "noise_sigma must be a nonnegative finite value, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    fn dataset_name(&self) -> String {
        format!(
            "synth-d{}-k{}-s{}u{}-n{}-sig{}-seed{}",
            self.d,
            self.k,
            self.n_seen_classes,
            self.n_unseen_classes,
            self.samples_per_class,
            self.noise_sigma,
            self.seed
        )
    }
}

/// Generates a planted-model dataset; also returns the planted mapping
/// `W*` so tests can compare recovered models against the ground truth.
///
/// Construction: `W*` is `k x d` with orthonormalized rows; one unit-norm
/// prototype is drawn per class with pairwise cosine at most
/// [`PROTOTYPE_MAX_COSINE`]; every sample's semantic vector is its class
/// prototype plus `noise_sigma`-scaled Gaussian noise, and its feature
/// vector is `W*ᵀ·s`, so the planted semantic image of each feature is
/// exactly the prototype-plus-noise. Classes `0..n_seen` become the
/// training split, the rest the test split. The whole procedure is a pure
/// function of the parameters.
///
/// # Errors
///
/// [`DataError::InvalidParams`] and [`DataError::RejectionOverflow`].
pub fn synth_dataset(params: &SynthParams) -> Result<(ZslDataset, Matrix), DataError> {
    params.validate()?;
    let d = params.d;
    let k = params.k;
    let total_classes = params.n_seen_classes + params.n_unseen_classes;
    let spc = params.samples_per_class;
    let mut rng = SplitMix64::new(params.seed);

    let w_star = planted_mapping(&mut rng, k, d)?;
    let prototypes = separated_prototypes(&mut rng, k, total_classes)?;

    let n_train = params.n_seen_classes * spc;
    let n_test = params.n_unseen_classes * spc;
    let mut x_train = vec![0.0; d * n_train];
    let mut s_train = vec![0.0; k * n_train];
    let mut y_train = Vec::with_capacity(n_train);
    let mut x_test = vec![0.0; d * n_test];
    let mut y_test = Vec::with_capacity(n_test);

    let mut sem = vec![0.0; k];
    let mut feat = vec![0.0; d];
    for class in 0..total_classes {
        let proto = &prototypes[class * k..(class + 1) * k];
        for sample in 0..spc {
            for (s, &p) in sem.iter_mut().zip(proto) {
                *s = p + params.noise_sigma * rng.next_gaussian();
            }
            // feat = W*ᵀ · sem; accumulate row-by-row over W* so both
            // buffers are walked contiguously.
            feat.iter_mut().for_each(|v| *v = 0.0);
            for (i, &s) in sem.iter().enumerate() {
                let w_row = &w_star[i * d..(i + 1) * d];
                for (fv, &wv) in feat.iter_mut().zip(w_row) {
                    *fv += s * wv;
                }
            }
            if class < params.n_seen_classes {
                let col = class * spc + sample;
                for (row, &v) in feat.iter().enumerate() {
                    x_train[row * n_train + col] = v;
                }
                for (row, &v) in sem.iter().enumerate() {
                    s_train[row * n_train + col] = v;
                }
                y_train.push(class as u32);
            } else {
                let col = (class - params.n_seen_classes) * spc + sample;
                for (row, &v) in feat.iter().enumerate() {
                    x_test[row * n_test + col] = v;
                }
                y_test.push(class as u32);
            }
        }
    }

    let unseen_labels: Vec<u32> =
        (params.n_seen_classes as u32..total_classes as u32).collect();
    let mut proto_matrix = vec![0.0; k * params.n_unseen_classes];
    for (col, class) in (params.n_seen_classes..total_classes).enumerate() {
        for row in 0..k {
            proto_matrix[row * params.n_unseen_classes + col] = prototypes[class * k + row];
        }
    }

    let dataset = ZslDataset::new(
        params.dataset_name(),
        Matrix::from_raw(d, n_train, x_train),
        Matrix::from_raw(k, n_train, s_train),
        y_train,
        Matrix::from_raw(d, n_test, x_test),
        y_test,
        Matrix::from_raw(k, params.n_unseen_classes, proto_matrix),
        unseen_labels,
    )?;
    Ok((dataset, Matrix::from_raw(k, d, w_star)))
}

/// Draws the planted `k x d` mapping. Rows up to the feature dimension are
/// orthonormalized by modified Gram–Schmidt; any surplus rows (only when
/// `k > d`) are merely normalized, since no more orthogonal directions
/// exist.
fn planted_mapping(rng: &mut SplitMix64, k: usize, d: usize) -> Result<Vec<f64>, DataError> {
    let mut rows = vec![0.0; k * d];
    for i in 0..k {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > 100 {
                return Err(DataError::InvalidParams(
                    "could not draw a non-degenerate planted mapping".to_string(),
                ));
            }
            let mut candidate: Vec<f64> = (0..d).map(|_| rng.next_gaussian()).collect();
            if i < d {
                for j in 0..i {
                    let prev = &rows[j * d..(j + 1) * d];
                    let proj = dot(&candidate, prev);
                    for (c, &p) in candidate.iter_mut().zip(prev) {
                        *c -= proj * p;
                    }
                }
            }
            let norm = dot(&candidate, &candidate).sqrt();
            if norm > 1e-8 {
                for c in candidate.iter_mut() {
                    *c /= norm;
                }
                rows[i * d..(i + 1) * d].copy_from_slice(&candidate);
                break;
            }
        }
    }
    Ok(rows)
}

/// Rejection-samples `count` unit vectors in `R^k` with pairwise cosine at
/// most [`PROTOTYPE_MAX_COSINE`]. The attempt budget is shared across all
/// classes.
fn separated_prototypes(
    rng: &mut SplitMix64,
    k: usize,
    count: usize,
) -> Result<Vec<f64>, DataError> {
    let mut protos = vec![0.0; count * k];
    let mut attempts = 0usize;
    for c in 0..count {
        loop {
            attempts += 1;
            if attempts > PROTOTYPE_REJECTION_CAP {
                return Err(DataError::RejectionOverflow { attempts: attempts - 1 });
            }
            let mut candidate: Vec<f64> = (0..k).map(|_| rng.next_gaussian()).collect();
            let norm = dot(&candidate, &candidate).sqrt();
            if norm <= 1e-8 {
                continue;
            }
            for v in candidate.iter_mut() {
                *v /= norm;
            }
            let separated = (0..c).all(|prev| {
                dot(&candidate, &protos[prev * k..(prev + 1) * k]) <= PROTOTYPE_MAX_COSINE
            });
            if separated {
                protos[c * k..(c + 1) * k].copy_from_slice(&candidate);
                break;
            }
        }
    }
    Ok(protos)
}
