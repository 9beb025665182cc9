//! Hyperparameter grid runner and report emitter.
//!
//! A sweep crosses λ values with evaluation settings (direction, metric,
//! sort order, hit@k ladder). One model is trained per λ and reused for
//! every evaluation cell under it; cells that fail are recorded with the
//! offending grid point instead of aborting the run. Reports render as a
//! Markdown accuracy table (rows per direction and k, columns per λ, best
//! cell per row in bold) or as CSV with a fixed normative header.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::data::ZslDataset;
use crate::eval::{self, default_hitk, Direction, EvalConfig, Metric, SortOrder};
use crate::sae;

/// Normative CSV header; the column set and order are a stable interface.
pub const CSV_HEADER: &str = "dataset,lambda,direction,metric,sort_order,k,accuracy,train_seconds";

/// The grid of hyperparameters and evaluation settings to cross.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub hitk_values: Vec<usize>,
    pub directions: Vec<Direction>,
    pub metrics: Vec<Metric>,
    pub sort_orders: Vec<SortOrder>,
    /// Normalize feature columns before training (passed through to
    /// [`sae::train`]).
    pub normalize: bool,
}

impl SweepGrid {
    /// The standard grid: λ ∈ {0.1, 0.2, 0.5, 1, 2, 5, 6, 10}, the
    /// clipped hit@k ladder, both directions, Euclidean distance,
    /// ascending sort, normalization on.
    pub fn default_for(unseen_classes: usize) -> Self {
        Self {
            lambdas: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 6.0, 10.0],
            hitk_values: default_hitk(unseen_classes),
            directions: vec![Direction::Encoder, Direction::Decoder],
            metrics: vec![Metric::Minkowski { p: 2.0 }],
            sort_orders: vec![SortOrder::Ascend],
            normalize: true,
        }
    }

    /// Rejects empty axes, non-positive or duplicate λ, out-of-range or
    /// duplicate k, invalid metric exponents, and duplicate
    /// direction/metric/sort entries (duplicates would silently merge
    /// report cells).
    pub fn validate(&self, unseen_classes: usize) -> Result<(), SweepError> {
        let bad = |msg: String| Err(SweepError::InvalidGrid(msg));
        if self.lambdas.is_empty()
            || self.hitk_values.is_empty()
            || self.directions.is_empty()
            || self.metrics.is_empty()
            || self.sort_orders.is_empty()
        {
            return bad("every grid axis needs at least one entry".to_string());
        }
        for &lambda in &self.lambdas {
            if !lambda.is_finite() || lambda <= 0.0 {
                return bad(format!("lambda must be positive and finite, got {lambda}"));
            }
        }
        for &k in &self.hitk_values {
            if k < 1 || k > unseen_classes {
                return bad(format!(
                    "hit@k requires 1 <= k <= {unseen_classes}, got {k}"
                ));
            }
        }
        for &metric in &self.metrics {
            if let Metric::Minkowski { p } = metric {
                if !p.is_finite() || p < 1.0 {
                    return bad(format!("Minkowski exponent must be >= 1, got {p}"));
                }
            }
        }
        if has_duplicate(&self.lambdas, |a, b| a == b) {
            return bad("duplicate lambda values".to_string());
        }
        if has_duplicate(&self.hitk_values, |a, b| a == b) {
            return bad("duplicate hit@k values".to_string());
        }
        if has_duplicate(&self.directions, |a, b| a == b) {
            return bad("duplicate directions".to_string());
        }
        if has_duplicate(&self.metrics, |a, b| a == b) {
            return bad("duplicate metrics".to_string());
        }
        if has_duplicate(&self.sort_orders, |a, b| a == b) {
            return bad("duplicate sort orders".to_string());
        }
        Ok(())
    }

    fn cell_count(&self) -> usize {
        self.lambdas.len()
            * self.directions.len()
            * self.metrics.len()
            * self.sort_orders.len()
            * self.hitk_values.len()
    }
}

fn has_duplicate<T>(items: &[T], eq: impl Fn(&T, &T) -> bool) -> bool {
    items
        .iter()
        .enumerate()
        .any(|(i, a)| items[i + 1..].iter().any(|b| eq(a, b)))
}

/// What a single grid cell produced.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    /// hit@k accuracy in `[0, 1]`.
    Accuracy(f64),
    /// Training or evaluation failed; the message names the grid point.
    Failed(String),
}

/// One grid point × k.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub lambda: f64,
    pub direction: Direction,
    pub metric: Metric,
    pub sort_order: SortOrder,
    pub k: usize,
    pub outcome: CellOutcome,
    /// Wall-clock seconds spent training this cell's model (shared by
    /// every cell of the same λ, since the model is trained once).
    pub train_seconds: f64,
}

/// Completed sweep: every cell in canonical order (λ outer, then
/// direction, metric, sort order, k) plus the best cell per
/// `(direction, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub dataset_name: String,
    pub dataset_fingerprint: u64,
    pub cells: Vec<SweepCell>,
    /// Highest-accuracy cell per (direction, k); ties resolve to the
    /// lowest λ, then the earlier grid point.
    pub best: BTreeMap<(Direction, usize), SweepCell>,
    /// Emission timestamp (Unix seconds); excluded from golden
    /// comparisons.
    pub generated_at_unix: u64,
}

impl SweepReport {
    /// The single best cell overall; ties resolve to the lowest λ, then
    /// the grid order (Encoder before Decoder in the default grid).
    pub fn best_overall(&self) -> Option<&SweepCell> {
        let mut best: Option<&SweepCell> = None;
        for cell in &self.cells {
            if let CellOutcome::Accuracy(acc) = cell.outcome {
                let better = match best {
                    Some(b) => match b.outcome {
                        CellOutcome::Accuracy(prev) => acc > prev,
                        CellOutcome::Failed(_) => true,
                    },
                    None => true,
                };
                if better {
                    best = Some(cell);
                }
            }
        }
        best
    }
}

/// Output format for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    MarkdownTable,
    Csv,
}

/// Errors from sweep configuration.
#[derive(Debug)]
pub enum SweepError {
    /// The grid fails validation for the target dataset.
    InvalidGrid(String),
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepError::InvalidGrid(msg) => write!(f, "invalid sweep grid: {msg}"),
        }
    }
}

impl std::error::Error for SweepError {}

/// Runs the grid sequentially. See [`run_grid_with_jobs`].
pub fn run_grid(dataset: &ZslDataset, grid: &SweepGrid) -> Result<SweepReport, SweepError> {
    run_grid_with_jobs(dataset, grid, 1)
}

/// Runs the grid with up to `jobs` worker threads (work is partitioned by
/// λ, training being the expensive step). One model is trained per λ and
/// reused for every direction, metric, sort order, and k under it. Cell
/// failures never abort the sweep: they become [`CellOutcome::Failed`]
/// entries naming the grid point. The assembled report is independent of
/// the worker count and schedule.
///
/// # Errors
///
/// [`SweepError::InvalidGrid`] if the grid fails validation; everything
/// downstream is captured per cell.
pub fn run_grid_with_jobs(
    dataset: &ZslDataset,
    grid: &SweepGrid,
    jobs: usize,
) -> Result<SweepReport, SweepError> {
    grid.validate(dataset.unseen_class_count())?;
    let workers = jobs.max(1).min(grid.lambdas.len());

    let slots: Vec<Mutex<Option<Vec<SweepCell>>>> =
        grid.lambdas.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= grid.lambdas.len() {
                    break;
                }
                let cells = run_lambda(dataset, grid, grid.lambdas[idx]);
                *slots[idx].lock().expect("no panics while holding the lock") = Some(cells);
            });
        }
    });

    let mut cells = Vec::with_capacity(grid.cell_count());
    for slot in slots {
        cells.extend(
            slot.into_inner()
                .expect("no panics while holding the lock")
                .expect("every lambda slot is filled before the scope ends"),
        );
    }
    debug_assert_eq!(cells.len(), grid.cell_count());
    assert_rows_monotone(&cells);

    let best = compute_best(&cells);
    Ok(SweepReport {
        dataset_name: dataset.name().to_string(),
        dataset_fingerprint: dataset.fingerprint(),
        cells,
        best,
        generated_at_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .expect("system clock after the Unix epoch")
            .as_secs(),
    })
}

/// Trains the λ model once and expands it into cells in canonical order.
fn run_lambda(dataset: &ZslDataset, grid: &SweepGrid, lambda: f64) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    let started = Instant::now();
    let trained = sae::train(dataset.x_train(), dataset.s_train(), lambda, grid.normalize);
    let train_seconds = started.elapsed().as_secs_f64();

    match trained {
        Ok((model, _diagnostics)) => {
            for &direction in &grid.directions {
                for &metric in &grid.metrics {
                    for &sort_order in &grid.sort_orders {
                        let config = EvalConfig {
                            direction,
                            metric,
                            sort_order,
                            hitk: grid.hitk_values.clone(),
                        };
                        let evaluated = eval::evaluate(&model, dataset, &config);
                        for &k in &grid.hitk_values {
                            let outcome = match &evaluated {
                                Ok(report) => {
                                    CellOutcome::Accuracy(report.per_k_accuracy[&(direction, k)])
                                }
                                Err(e) => CellOutcome::Failed(format!(
                                    "evaluation failed at lambda={lambda} {} {} {} k={k}: {e}",
                                    direction.label(),
                                    metric.label(),
                                    sort_order.label()
                                )),
                            };
                            cells.push(SweepCell {
                                lambda,
                                direction,
                                metric,
                                sort_order,
                                k,
                                outcome,
                                train_seconds,
                            });
                        }
                    }
                }
            }
        }
        Err(e) => {
            let message = format!("training failed at lambda={lambda}: {e}");
            for &direction in &grid.directions {
                for &metric in &grid.metrics {
                    for &sort_order in &grid.sort_orders {
                        for &k in &grid.hitk_values {
                            cells.push(SweepCell {
                                lambda,
                                direction,
                                metric,
                                sort_order,
                                k,
                                outcome: CellOutcome::Failed(message.clone()),
                                train_seconds,
                            });
                        }
                    }
                }
            }
        }
    }
    cells
}

/// hit@k from one evaluation is non-decreasing in k by construction; this
/// re-checks the property on the assembled report as a defense against
/// assembly bugs.
fn assert_rows_monotone(cells: &[SweepCell]) {
    let mut rows: BTreeMap<(usize, Direction, String, SortOrder), Vec<(usize, f64)>> =
        BTreeMap::new();
    for (idx, cell) in cells.iter().enumerate() {
        if let CellOutcome::Accuracy(acc) = cell.outcome {
            // λ is keyed by first occurrence index to stay hashable.
            let lambda_slot = cells[..=idx]
                .iter()
                .position(|c| c.lambda == cell.lambda)
                .expect("cell matches itself");
            rows.entry((
                lambda_slot,
                cell.direction,
                cell.metric.label(),
                cell.sort_order,
            ))
            .or_default()
            .push((cell.k, acc));
        }
    }
    for (row, mut points) in rows {
        points.sort_unstable_by_key(|&(k, _)| k);
        for pair in points.windows(2) {
            assert!(
                pair[0].1 <= pair[1].1,
                "hit@k decreased within row {row:?}: {points:?}"
            );
        }
    }
}

/// Best accuracy per (direction, k); canonical cell order makes ties
/// resolve to the lowest λ, then the earlier grid point.
fn compute_best(cells: &[SweepCell]) -> BTreeMap<(Direction, usize), SweepCell> {
    let mut best: BTreeMap<(Direction, usize), SweepCell> = BTreeMap::new();
    for cell in cells {
        let CellOutcome::Accuracy(acc) = cell.outcome else {
            continue;
        };
        match best.get(&(cell.direction, cell.k)) {
            Some(incumbent) => {
                let CellOutcome::Accuracy(prev) = incumbent.outcome else {
                    unreachable!("best map only holds accuracy cells")
                };
                if acc > prev {
                    best.insert((cell.direction, cell.k), cell.clone());
                }
            }
            None => {
                best.insert((cell.direction, cell.k), cell.clone());
            }
        }
    }
    best
}

/// Renders a report. Formatting is total: failed cells render as
/// `FAILED`, and an all-failed report still produces a complete document.
/// Output depends only on the report (and, for Markdown, its timestamp
/// line, which golden comparisons mask out).
pub fn emit_report(report: &SweepReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(report),
        ReportFormat::MarkdownTable => emit_markdown(report),
    }
}

fn emit_csv(report: &SweepReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for cell in &report.cells {
        let accuracy = match &cell.outcome {
            CellOutcome::Accuracy(acc) => format!("{acc}"),
            CellOutcome::Failed(_) => "FAILED".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.6}\n",
            report.dataset_name,
            cell.lambda,
            cell.direction.label(),
            cell.metric.label(),
            cell.sort_order.label(),
            cell.k,
            accuracy,
            cell.train_seconds,
        ));
    }
    out
}

/// First-encounter order of an axis across the cells, which reproduces
/// the originating grid order.
fn axis_values<T: PartialEq>(cells: &[SweepCell], extract: impl Fn(&SweepCell) -> T) -> Vec<T> {
    let mut values = Vec::new();
    for cell in cells {
        let value = extract(cell);
        if !values.contains(&value) {
            values.push(value);
        }
    }
    values
}

fn emit_markdown(report: &SweepReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Sweep report: {}\n\n", report.dataset_name));
    out.push_str(&format!(
        "- dataset_fingerprint: {:016x}\n",
        report.dataset_fingerprint
    ));
    out.push_str(&format!(
        "- generated_at_unix: {}\n",
        report.generated_at_unix
    ));
    out.push_str(&format!("- cells: {}\n", report.cells.len()));
    if let Some(best) = report.best_overall() {
        if let CellOutcome::Accuracy(acc) = best.outcome {
            out.push_str(&format!(
                "- best: {}-{} at lambda={} ({}, {}) -> {:.1}\n",
                best.direction.method_label(),
                best.k,
                best.lambda,
                best.metric.label(),
                best.sort_order.label(),
                acc * 100.0
            ));
        }
    }

    if report.cells.is_empty() {
        out.push_str("\n(no cells)\n");
        return out;
    }

    let lambdas = axis_values(&report.cells, |c| c.lambda);
    let directions = axis_values(&report.cells, |c| c.direction);
    let metrics = axis_values(&report.cells, |c| c.metric);
    let sort_orders = axis_values(&report.cells, |c| c.sort_order);
    let mut ks = axis_values(&report.cells, |c| c.k);
    ks.sort_unstable();

    for &metric in &metrics {
        for &sort_order in &sort_orders {
            out.push_str(&format!("\n## {}, {}\n\n", metric.label(), sort_order.label()));
            out.push_str("| method |");
            for &lambda in &lambdas {
                out.push_str(&format!(" lambda={lambda} |"));
            }
            out.push('\n');
            out.push_str("| --- |");
            for _ in &lambdas {
                out.push_str(" ---: |");
            }
            out.push('\n');
            for &k in &ks {
                for &direction in &directions {
                    out.push_str(&format!("| {}-{} |", direction.method_label(), k));
                    for &lambda in &lambdas {
                        let cell = report.cells.iter().find(|c| {
                            c.lambda == lambda
                                && c.direction == direction
                                && c.metric == metric
                                && c.sort_order == sort_order
                                && c.k == k
                        });
                        let rendered = match cell.map(|c| &c.outcome) {
                            Some(CellOutcome::Accuracy(acc)) => {
                                let text = format!("{:.1}", acc * 100.0);
                                let is_best = report
                                    .best
                                    .get(&(direction, k))
                                    .is_some_and(|b| {
                                        b.lambda == lambda
                                            && b.metric == metric
                                            && b.sort_order == sort_order
                                    });
                                if is_best {
                                    format!("**{text}**")
                                } else {
                                    text
                                }
                            }
                            Some(CellOutcome::Failed(_)) | None => "FAILED".to_string(),
                        };
                        out.push_str(&format!(" {rendered} |"));
                    }
                    out.push('\n');
                }
            }
        }
    }
    out
}
