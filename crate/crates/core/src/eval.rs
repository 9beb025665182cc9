//! Zero-shot evaluation: distances, prototype ranking, and hit@k.
//!
//! A test sample is classified by ranking the unseen-class prototypes by
//! distance. The encoder direction projects test features into semantic
//! space and compares them to the prototypes there; the decoder direction
//! projects the prototypes into feature space and compares the test
//! features to them. hit@k counts a sample correct when its true class is
//! among the k nearest prototypes; at k = number of unseen classes this is
//! 1.0 by construction, an identity the test suite leans on.

use std::collections::BTreeMap;
use std::fmt;

use crate::data::ZslDataset;
use crate::matrix::{dot, Matrix};
use crate::sae::{self, SaeError, SaeModel};

/// Projection direction for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// Compare `W·X_test` to prototypes in semantic space.
    Encoder,
    /// Compare `X_test` to `Wᵀ·prototypes` in feature space.
    Decoder,
}

impl Direction {
    /// Lowercase identifier used in CSV cells and flags.
    pub fn label(self) -> &'static str {
        match self {
            Direction::Encoder => "encoder",
            Direction::Decoder => "decoder",
        }
    }

    /// Row-label prefix used in Markdown tables.
    pub fn method_label(self) -> &'static str {
        match self {
            Direction::Encoder => "SAE(W)",
            Direction::Decoder => "SAE(W^T)",
        }
    }
}

/// Distance kernel between projected samples and prototypes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// `(Σ|u_i − v_i|^p)^(1/p)`, `p ≥ 1`.
    Minkowski { p: f64 },
    /// `1 − (u·v)/(‖u‖‖v‖)`.
    Cosine,
}

impl Metric {
    fn validate(self) -> Result<(), EvalError> {
        if let Metric::Minkowski { p } = self {
            if !p.is_finite() || p < 1.0 {
                return Err(EvalError::InvalidExponent(p));
            }
        }
        Ok(())
    }

    /// Identifier used in CSV cells and report headings.
    pub fn label(self) -> String {
        match self {
            Metric::Minkowski { p } => format!("minkowski(p={p})"),
            Metric::Cosine => "cosine".to_string(),
        }
    }
}

/// Whether smaller values rank first (`Ascend`, the natural pairing for
/// distances) or larger ones (`Descend`, for similarity-style scores).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SortOrder {
    Ascend,
    Descend,
}

impl SortOrder {
    pub fn label(self) -> &'static str {
        match self {
            SortOrder::Ascend => "ascend",
            SortOrder::Descend => "descend",
        }
    }
}

/// Evaluation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub direction: Direction,
    pub metric: Metric,
    pub sort_order: SortOrder,
    /// The k values to report hit@k for; every k must lie in
    /// `[1, c_unseen]`. An empty list is permitted (the report then only
    /// carries mean rank and loss).
    pub hitk: Vec<usize>,
}

impl EvalConfig {
    /// A single-direction config with the toolkit defaults: Euclidean
    /// distance, ascending sort, and the standard clipped hit@k ladder.
    pub fn default_for(direction: Direction, unseen_classes: usize) -> Self {
        Self {
            direction,
            metric: Metric::Minkowski { p: 2.0 },
            sort_order: SortOrder::Ascend,
            hitk: default_hitk(unseen_classes),
        }
    }

    /// Checks the exponent and that every k is within `[1, unseen_classes]`.
    pub fn validate(&self, unseen_classes: usize) -> Result<(), EvalError> {
        self.metric.validate()?;
        for &k in &self.hitk {
            if k < 1 || k > unseen_classes {
                return Err(EvalError::KOutOfRange {
                    k,
                    classes: unseen_classes,
                });
            }
        }
        Ok(())
    }
}

/// The standard hit@k ladder `{1,…,7,10}` clipped to the class count.
pub fn default_hitk(unseen_classes: usize) -> Vec<usize> {
    [1, 2, 3, 4, 5, 6, 7, 10]
        .into_iter()
        .filter(|&k| k <= unseen_classes)
        .collect()
}

/// Result of one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset_name: String,
    pub dataset_fingerprint: u64,
    pub config: EvalConfig,
    /// hit@k per (direction, k); single-direction for reports produced by
    /// [`evaluate`], keyed this way so multi-direction summaries can be
    /// merged without ambiguity.
    pub per_k_accuracy: BTreeMap<(Direction, usize), f64>,
    /// Mean 1-based rank of the true class.
    pub mean_rank: f64,
    /// Fraction of samples whose top-1 prediction is wrong (= 1 − hit@1).
    pub loss: f64,
}

/// Errors from evaluation.
#[derive(Debug)]
pub enum EvalError {
    DimensionMismatch(String),
    /// Cosine distance (or feature normalization) hit an all-zero column.
    ZeroNormColumn(usize),
    /// Minkowski exponent below 1 or non-finite.
    InvalidExponent(f64),
    /// A distance matrix contains NaN or an infinity.
    NonFinite,
    /// Some requested k lies outside `[1, classes]`.
    KOutOfRange { k: usize, classes: usize },
    /// No test samples to rank.
    EmptyTestSet,
    /// Propagated projection failure.
    Model(SaeError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            EvalError::ZeroNormColumn(idx) => {
                write!(f, "column {idx} has zero norm")
            }
            EvalError::InvalidExponent(p) => {
                write!(f, "Minkowski exponent must be >= 1 and finite, got {p}")
            }
            EvalError::NonFinite => write!(f, "non-finite distance value"),
            EvalError::KOutOfRange { k, classes } => {
                write!(f, "hit@k requires 1 <= k <= {classes}, got {k}")
            }
            EvalError::EmptyTestSet => write!(f, "no test samples to evaluate"),
            EvalError::Model(e) => write!(f, "projection failed: {e}"),
        }
    }
}

impl std::error::Error for EvalError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            EvalError::Model(e) => Some(e),
            _ => None,
        }
    }
}

impl From<SaeError> for EvalError {
    fn from(e: SaeError) -> Self {
        match e {
            SaeError::ZeroNormColumn(idx) => EvalError::ZeroNormColumn(idx),
            other => EvalError::Model(other),
        }
    }
}

/// Distance between every column of `P` (`dim x a`) and every column of
/// `Q` (`dim x b`); entry `(i, j)` is the distance between column `i` of
/// `P` and column `j` of `Q`.
///
/// # Errors
///
/// [`EvalError::DimensionMismatch`] if the vector dimensions differ,
/// [`EvalError::InvalidExponent`] for a bad Minkowski `p`, and
/// [`EvalError::ZeroNormColumn`] when cosine meets a zero column.
pub fn pairwise_distance(p: &Matrix, q: &Matrix, metric: Metric) -> Result<Matrix, EvalError> {
    if p.rows() != q.rows() {
        return Err(EvalError::DimensionMismatch(format!(
            "vector dimensions differ: {} vs {}",
            p.rows(),
            q.rows()
        )));
    }
    metric.validate()?;

    // Columns become contiguous rows so the inner loops stream memory.
    let pt = p.transpose();
    let qt = q.transpose();
    let (a, b) = (pt.rows(), qt.rows());
    let mut out = vec![0.0; a * b];

    match metric {
        Metric::Minkowski { p: exp } => {
            for i in 0..a {
                let u = pt.row(i);
                let row = &mut out[i * b..(i + 1) * b];
                for (j, slot) in row.iter_mut().enumerate() {
                    let v = qt.row(j);
                    *slot = minkowski(u, v, exp);
                }
            }
        }
        Metric::Cosine => {
            let p_norms = column_norms_checked(&pt)?;
            let q_norms = column_norms_checked(&qt)?;
            for i in 0..a {
                let u = pt.row(i);
                let row = &mut out[i * b..(i + 1) * b];
                for (j, slot) in row.iter_mut().enumerate() {
                    *slot = 1.0 - dot(u, qt.row(j)) / (p_norms[i] * q_norms[j]);
                }
            }
        }
    }
    Ok(Matrix::from_raw(a, b, out))
}

fn minkowski(u: &[f64], v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        let mut sum = 0.0;
        for (x, y) in u.iter().zip(v) {
            sum += (x - y).abs();
        }
        sum
    } else if p == 2.0 {
        let mut sum = 0.0;
        for (x, y) in u.iter().zip(v) {
            let d = x - y;
            sum += d * d;
        }
        sum.sqrt()
    } else {
        // libm::pow keeps the general path bit-reproducible across
        // platforms, like the rest of the toolkit's transcendentals.
        let mut sum = 0.0;
        for (x, y) in u.iter().zip(v) {
            sum += libm::pow((x - y).abs(), p);
        }
        libm::pow(sum, 1.0 / p)
    }
}

/// Row norms of an already-transposed operand (= column norms of the
/// original), rejecting zero norms for cosine.
fn column_norms_checked(mt: &Matrix) -> Result<Vec<f64>, EvalError> {
    let mut norms = Vec::with_capacity(mt.rows());
    for i in 0..mt.rows() {
        let row = mt.row(i);
        let norm = dot(row, row).sqrt();
        if norm == 0.0 {
            return Err(EvalError::ZeroNormColumn(i));
        }
        norms.push(norm);
    }
    Ok(norms)
}

/// Ranks class indices per test row: position 0 of each output list is the
/// closest class under `Ascend` (the highest-scoring under `Descend`).
/// Ties break toward the lower class index, keeping results deterministic.
///
/// # Errors
///
/// [`EvalError::NonFinite`] if any distance is NaN or infinite.
pub fn rank_prototypes(
    distances: &Matrix,
    sort_order: SortOrder,
) -> Result<Vec<Vec<usize>>, EvalError> {
    if !distances.is_finite() {
        return Err(EvalError::NonFinite);
    }
    let c = distances.cols();
    let mut rankings = Vec::with_capacity(distances.rows());
    for i in 0..distances.rows() {
        let row = distances.row(i);
        let mut idx: Vec<usize> = (0..c).collect();
        idx.sort_unstable_by(|&x, &y| {
            let ord = row[x]
                .partial_cmp(&row[y])
                .expect("finiteness checked above");
            let ord = match sort_order {
                SortOrder::Ascend => ord,
                SortOrder::Descend => ord.reverse(),
            };
            ord.then(x.cmp(&y))
        });
        rankings.push(idx);
    }
    Ok(rankings)
}

/// Fraction of samples whose true class index appears among the first `k`
/// entries of its ranking. The count is integral, so `k` equal to the
/// class count yields exactly 1.0.
///
/// # Errors
///
/// [`EvalError::EmptyTestSet`] for zero samples,
/// [`EvalError::KOutOfRange`], and [`EvalError::DimensionMismatch`] for
/// ragged input.
pub fn hit_at_k(
    rankings: &[Vec<usize>],
    ground_truth: &[usize],
    k: usize,
) -> Result<f64, EvalError> {
    if rankings.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    if rankings.len() != ground_truth.len() {
        return Err(EvalError::DimensionMismatch(format!(
            "{} rankings vs {} ground-truth labels",
            rankings.len(),
            ground_truth.len()
        )));
    }
    let classes = rankings[0].len();
    if rankings.iter().any(|r| r.len() != classes) {
        return Err(EvalError::DimensionMismatch(
            "rankings have inconsistent lengths".to_string(),
        ));
    }
    if k < 1 || k > classes {
        return Err(EvalError::KOutOfRange { k, classes });
    }
    let mut hits = 0usize;
    for (ranking, &truth) in rankings.iter().zip(ground_truth) {
        if truth >= classes {
            return Err(EvalError::DimensionMismatch(format!(
                "ground-truth index {truth} out of range for {classes} classes"
            )));
        }
        if ranking[..k].contains(&truth) {
            hits += 1;
        }
    }
    Ok(hits as f64 / rankings.len() as f64)
}

/// Evaluates a model on a dataset's unseen split.
///
/// The encoder direction compares `encode(model, X_test)` (which applies
/// the model's recorded feature normalization) to the prototypes in
/// semantic space; the decoder direction compares the test columns as
/// given to `decode(model, prototypes)` in feature space.
///
/// # Errors
///
/// Propagated projection/distance failures plus
/// [`EvalError::KOutOfRange`] from config validation.
pub fn evaluate(
    model: &SaeModel,
    dataset: &ZslDataset,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    config.validate(dataset.unseen_class_count())?;

    let distances = match config.direction {
        Direction::Encoder => {
            let projected = sae::encode(model, dataset.x_test())?;
            pairwise_distance(&projected, dataset.prototypes(), config.metric)?
        }
        Direction::Decoder => {
            let decoded = sae::decode(model, dataset.prototypes())?;
            pairwise_distance(dataset.x_test(), &decoded, config.metric)?
        }
    };
    let rankings = rank_prototypes(&distances, config.sort_order)?;

    let truth: Vec<usize> = dataset
        .y_test()
        .iter()
        .map(|&label| {
            dataset
                .unseen_index_of(label)
                .expect("validated dataset: every test label is an unseen class")
        })
        .collect();

    let mut per_k_accuracy = BTreeMap::new();
    for &k in &config.hitk {
        per_k_accuracy.insert((config.direction, k), hit_at_k(&rankings, &truth, k)?);
    }

    let n = rankings.len();
    let mut rank_sum = 0usize;
    let mut top1_hits = 0usize;
    for (ranking, &t) in rankings.iter().zip(&truth) {
        let pos = ranking
            .iter()
            .position(|&c| c == t)
            .expect("rankings are permutations of all class indices");
        rank_sum += pos + 1;
        if pos == 0 {
            top1_hits += 1;
        }
    }

    Ok(EvalReport {
        dataset_name: dataset.name().to_string(),
        dataset_fingerprint: dataset.fingerprint(),
        config: config.clone(),
        per_k_accuracy,
        mean_rank: rank_sum as f64 / n as f64,
        loss: (n - top1_hits) as f64 / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_dataset, SynthParams};
    use crate::rng::SplitMix64;
    use crate::sae::train;

    fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.next_gaussian()).unwrap()
    }

    fn cols(vectors: &[&[f64]]) -> Matrix {
        let dim = vectors[0].len();
        Matrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]).unwrap()
    }

    #[test]
    fn identical_columns_have_zero_distance() {
        let p = cols(&[&[1.0, -2.0, 3.0]]);
        for metric in [
            Metric::Minkowski { p: 1.0 },
            Metric::Minkowski { p: 2.0 },
            Metric::Minkowski { p: 3.0 },
            Metric::Cosine,
        ] {
            let d = pairwise_distance(&p, &p, metric).unwrap();
            assert!(d.at(0, 0).abs() < 1e-15, "{metric:?} gave {}", d.at(0, 0));
        }
    }

    #[test]
    fn euclidean_three_four_five_triangle() {
        let p = cols(&[&[0.0, 0.0]]);
        let q = cols(&[&[3.0, 4.0]]);
        let d = pairwise_distance(&p, &q, Metric::Minkowski { p: 2.0 }).unwrap();
        assert!((d.at(0, 0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn minkowski_matches_scalar_loop_oracle() {
        let mut rng = SplitMix64::new(44);
        let p = random_matrix(&mut rng, 7, 5);
        let q = random_matrix(&mut rng, 7, 4);
        for exp in [1.0, 2.0, 3.0] {
            let d = pairwise_distance(&p, &q, Metric::Minkowski { p: exp }).unwrap();
            for i in 0..5 {
                for j in 0..4 {
                    let mut sum = 0.0;
                    for t in 0..7 {
                        sum += (p.at(t, i) - q.at(t, j)).abs().powf(exp);
                    }
                    let oracle = sum.powf(1.0 / exp);
                    assert!(
                        (d.at(i, j) - oracle).abs() < 1e-12,
                        "p={exp} entry ({i},{j}): {} vs {}",
                        d.at(i, j),
                        oracle
                    );
                }
            }
        }
    }

    #[test]
    fn cosine_of_reference_pairs() {
        let p = cols(&[&[1.0, 0.0]]);
        let q = cols(&[&[0.0, 2.0], &[3.0, 0.0], &[-1.0, 0.0]]);
        let d = pairwise_distance(&p, &q, Metric::Cosine).unwrap();
        assert!((d.at(0, 0) - 1.0).abs() < 1e-15, "orthogonal -> 1");
        assert!(d.at(0, 1).abs() < 1e-15, "parallel -> 0");
        assert!((d.at(0, 2) - 2.0).abs() < 1e-15, "antiparallel -> 2");
    }

    #[test]
    fn cosine_rejects_zero_columns() {
        let p = cols(&[&[1.0, 0.0]]);
        let zero = cols(&[&[0.0, 0.0]]);
        assert!(matches!(
            pairwise_distance(&p, &zero, Metric::Cosine),
            Err(EvalError::ZeroNormColumn(0))
        ));
    }

    #[test]
    fn bad_exponents_and_dims_are_rejected() {
        let p = cols(&[&[1.0, 0.0]]);
        for bad in [0.5, 0.0, -2.0, f64::NAN] {
            assert!(matches!(
                pairwise_distance(&p, &p, Metric::Minkowski { p: bad }),
                Err(EvalError::InvalidExponent(_))
            ));
        }
        let q = cols(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(
            pairwise_distance(&p, &q, Metric::Minkowski { p: 2.0 }),
            Err(EvalError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ranking_orders_and_breaks_ties_deterministically() {
        let d = Matrix::from_vec(1, 3, vec![0.2, 0.1, 0.9]).unwrap();
        assert_eq!(rank_prototypes(&d, SortOrder::Ascend).unwrap()[0], vec![1, 0, 2]);
        assert_eq!(rank_prototypes(&d, SortOrder::Descend).unwrap()[0], vec![2, 0, 1]);
        let tie = Matrix::from_vec(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(rank_prototypes(&tie, SortOrder::Ascend).unwrap()[0], vec![0, 1]);
        assert_eq!(rank_prototypes(&tie, SortOrder::Descend).unwrap()[0], vec![0, 1]);
    }

    #[test]
    fn ranking_agrees_with_selection_sort_oracle() {
        let mut rng = SplitMix64::new(3);
        let d = Matrix::from_fn(10, 6, |_, _| (rng.next_below(8)) as f64 * 0.25).unwrap();
        for order in [SortOrder::Ascend, SortOrder::Descend] {
            let got = rank_prototypes(&d, order).unwrap();
            for i in 0..10 {
                // Selection-based reference: repeatedly pick the extreme
                // remaining index, preferring lower indices on ties.
                let row = d.row(i);
                let mut remaining: Vec<usize> = (0..6).collect();
                let mut expected = Vec::new();
                while !remaining.is_empty() {
                    let mut best = 0;
                    for (slot, &cand) in remaining.iter().enumerate() {
                        let better = match order {
                            SortOrder::Ascend => row[cand] < row[remaining[best]],
                            SortOrder::Descend => row[cand] > row[remaining[best]],
                        };
                        if better {
                            best = slot;
                        }
                    }
                    expected.push(remaining.remove(best));
                }
                assert_eq!(got[i], expected, "row {i}, {order:?}");
            }
        }
    }

    #[test]
    fn ranking_is_scale_invariant() {
        let mut rng = SplitMix64::new(9);
        let d = random_matrix(&mut rng, 8, 5);
        let d_pos = Matrix::from_fn(8, 5, |i, j| d.at(i, j).abs() + 0.1).unwrap();
        let scaled = d_pos.scale(2.5);
        assert_eq!(
            rank_prototypes(&d_pos, SortOrder::Ascend).unwrap(),
            rank_prototypes(&scaled, SortOrder::Ascend).unwrap()
        );
    }

    #[test]
    fn ranking_rejects_non_finite() {
        let mut data = vec![0.1, 0.2];
        data[1] = f64::NAN;
        let d = Matrix::from_raw(1, 2, data);
        assert!(matches!(
            rank_prototypes(&d, SortOrder::Ascend),
            Err(EvalError::NonFinite)
        ));
    }

    #[test]
    fn hit_at_k_hand_enumerated_case() {
        // 5 samples over 3 classes with hand-built rankings.
        let rankings = vec![
            vec![0, 1, 2], // truth 0: hit@1
            vec![1, 0, 2], // truth 0: hit@2
            vec![2, 1, 0], // truth 0: hit@3 only
            vec![1, 2, 0], // truth 1: hit@1
            vec![2, 0, 1], // truth 1: hit@3 only
        ];
        let truth = vec![0, 0, 0, 1, 1];
        assert_eq!(hit_at_k(&rankings, &truth, 1).unwrap(), 2.0 / 5.0);
        assert_eq!(hit_at_k(&rankings, &truth, 2).unwrap(), 3.0 / 5.0);
        assert_eq!(hit_at_k(&rankings, &truth, 3).unwrap(), 1.0);
    }

    #[test]
    fn hit_at_full_k_is_exactly_one() {
        let mut rng = SplitMix64::new(12);
        let d = random_matrix(&mut rng, 17, 7);
        let rankings = rank_prototypes(&d, SortOrder::Ascend).unwrap();
        let truth: Vec<usize> = (0..17).map(|i| i % 7).collect();
        let acc = hit_at_k(&rankings, &truth, 7).unwrap();
        assert_eq!(acc, 1.0, "hit@c must be the exact identity");
    }

    #[test]
    fn hit_at_k_range_errors() {
        let rankings = vec![vec![0, 1]];
        let truth = vec![0];
        assert!(matches!(
            hit_at_k(&rankings, &truth, 0),
            Err(EvalError::KOutOfRange { k: 0, classes: 2 })
        ));
        assert!(matches!(
            hit_at_k(&rankings, &truth, 3),
            Err(EvalError::KOutOfRange { k: 3, classes: 2 })
        ));
        assert!(matches!(
            hit_at_k(&[], &[], 1),
            Err(EvalError::EmptyTestSet)
        ));
    }

    /// A 3-class dataset whose test features are exactly the class
    /// prototypes; with the identity mapping every direction and metric
    /// must classify perfectly.
    fn prototype_echo_dataset() -> ZslDataset {
        let e = [
            &[1.0, 0.0, 0.0][..],
            &[0.0, 1.0, 0.0][..],
            &[0.0, 0.0, 1.0][..],
        ];
        let protos = cols(&e);
        ZslDataset::new(
            "echo".to_string(),
            cols(&[&[1.0, 1.0, 0.0]]), // one arbitrary seen sample
            cols(&[&[1.0, 1.0, 0.0]]),
            vec![0],
            protos.clone(),
            vec![1, 2, 3],
            protos,
            vec![1, 2, 3],
        )
        .unwrap()
    }

    #[test]
    fn identity_model_on_prototype_echo_is_perfect_both_directions() {
        let dataset = prototype_echo_dataset();
        let model = SaeModel::from_parts(Matrix::identity(3), 1.0, false).unwrap();
        for direction in [Direction::Encoder, Direction::Decoder] {
            for metric in [Metric::Minkowski { p: 2.0 }, Metric::Cosine] {
                let config = EvalConfig {
                    direction,
                    metric,
                    sort_order: SortOrder::Ascend,
                    hitk: vec![1, 3],
                };
                let report = evaluate(&model, &dataset, &config).unwrap();
                assert_eq!(report.per_k_accuracy[&(direction, 1)], 1.0);
                assert_eq!(report.per_k_accuracy[&(direction, 3)], 1.0);
                assert_eq!(report.mean_rank, 1.0);
                assert_eq!(report.loss, 0.0);
            }
        }
    }

    #[test]
    fn trained_model_on_noiseless_synthetic_is_nearly_perfect() {
        let (dataset, _) = synth_dataset(&SynthParams::default()).unwrap();
        let (model, _) = train(dataset.x_train(), dataset.s_train(), 1.0, true).unwrap();
        let config = EvalConfig::default_for(Direction::Encoder, dataset.unseen_class_count());
        let report = evaluate(&model, &dataset, &config).unwrap();
        let hit1 = report.per_k_accuracy[&(Direction::Encoder, 1)];
        assert!(hit1 >= 0.95, "noiseless planted recovery degraded: {hit1}");
        let full = report.per_k_accuracy[&(Direction::Encoder, 5)];
        assert_eq!(full, 1.0);
    }

    #[test]
    fn hit_rate_is_monotone_in_k() {
        let (dataset, _) = synth_dataset(&SynthParams {
            noise_sigma: 0.6,
            ..SynthParams::default()
        })
        .unwrap();
        let (model, _) = train(dataset.x_train(), dataset.s_train(), 1.0, true).unwrap();
        for direction in [Direction::Encoder, Direction::Decoder] {
            let config = EvalConfig {
                direction,
                metric: Metric::Minkowski { p: 2.0 },
                sort_order: SortOrder::Ascend,
                hitk: (1..=5).collect(),
            };
            let report = evaluate(&model, &dataset, &config).unwrap();
            let accs: Vec<f64> = (1..=5)
                .map(|k| report.per_k_accuracy[&(direction, k)])
                .collect();
            for pair in accs.windows(2) {
                assert!(pair[0] <= pair[1], "hit@k must not decrease: {accs:?}");
            }
            assert_eq!(accs[4], 1.0);
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let (dataset, _) = synth_dataset(&SynthParams {
            noise_sigma: 0.4,
            ..SynthParams::default()
        })
        .unwrap();
        let (model, _) = train(dataset.x_train(), dataset.s_train(), 2.0, true).unwrap();
        let config = EvalConfig::default_for(Direction::Decoder, dataset.unseen_class_count());
        let a = evaluate(&model, &dataset, &config).unwrap();
        let b = evaluate(&model, &dataset, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation_rejects_out_of_range_k() {
        let config = EvalConfig {
            direction: Direction::Encoder,
            metric: Metric::Minkowski { p: 2.0 },
            sort_order: SortOrder::Ascend,
            hitk: vec![1, 6],
        };
        assert!(matches!(
            config.validate(5),
            Err(EvalError::KOutOfRange { k: 6, classes: 5 })
        ));
        assert!(config.validate(6).is_ok());
    }

    #[test]
    fn default_hitk_is_clipped() {
        assert_eq!(default_hitk(10), vec![1, 2, 3, 4, 5, 6, 7, 10]);
        assert_eq!(default_hitk(5), vec![1, 2, 3, 4, 5]);
        assert_eq!(default_hitk(1), vec![1]);
        assert_eq!(default_hitk(8), vec![1, 2, 3, 4, 5, 6, 7]);
    }
}
