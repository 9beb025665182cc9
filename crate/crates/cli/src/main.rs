//! `sae` — command-line front end for the zero-shot learning toolkit.
//!
//! Subcommands: `synth` (seeded synthetic dataset), `train` (closed-form
//! model fit), `eval` (hit@k on the unseen split), `sweep`
//! (hyperparameter grid with Markdown/CSV reports), and `oracle-check`
//! (Sylvester solver vs. dense oracle self-test).
//!
//! Human-readable results go to standard output; machine artifacts
//! (datasets, models, reports) are written only to paths given by flags.
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use sae_core::data::{load_dataset, save_dataset, synth_dataset, DataError, SynthParams};
use sae_core::eval::{
    evaluate, Direction, EvalConfig, EvalError, EvalReport, Metric, SortOrder,
};
use sae_core::linalg::{solve_sylvester, solve_sylvester_oracle};
use sae_core::matrix::Matrix;
use sae_core::rng::SplitMix64;
use sae_core::sae::{load_model, save_model, train_with, SaeError, TrainOptions};
use sae_core::sweep::{
    emit_report, run_grid_with_jobs, ReportFormat, SweepError, SweepGrid, CSV_HEADER,
};

#[derive(Parser)]
#[command(
    name = "sae",
    version,
    about = "Zero-shot learning with a linear semantic auto-encoder",
    propagate_version = true
)]
struct Cli {
    /// Print extra progress detail to standard error (repeatable).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a seeded synthetic planted-model dataset.
    Synth(SynthArgs),
    /// Train a model on a dataset's seen split.
    Train(TrainArgs),
    /// Evaluate a model on a dataset's unseen split.
    Eval(EvalArgs),
    /// Run a hyperparameter sweep and emit a report.
    Sweep(SweepArgs),
    /// Cross-check the Sylvester solver against the dense oracle.
    OracleCheck(OracleCheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Directory to write the dataset files and manifest into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Feature-space dimension d.
    #[arg(long, default_value_t = 64)]
    feature_dim: usize,
    /// Semantic-space dimension k.
    #[arg(long, default_value_t = 16)]
    semantic_dim: usize,
    #[arg(long, default_value_t = 20)]
    seen_classes: usize,
    #[arg(long, default_value_t = 5)]
    unseen_classes: usize,
    #[arg(long, default_value_t = 50)]
    samples_per_class: usize,
    /// Standard deviation of the per-sample semantic noise.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Path to the dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// Path to write the model file to (a `<name>.w` sibling holds W).
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Skip L2 normalization of feature columns before training.
    #[arg(long)]
    no_normalize: bool,
    /// Additionally L2-normalize semantic columns (advanced).
    #[arg(long)]
    normalize_semantics: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Path to the dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// Path to the model file.
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated hit@k values.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize])]
    hitk: Vec<usize>,
    #[arg(long, value_enum, default_value_t = DirectionArg::Encoder)]
    direction: DirectionArg,
    #[arg(long, value_enum, default_value_t = MetricArg::Minkowski)]
    metric: MetricArg,
    /// Minkowski exponent (ignored for cosine).
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, value_enum, default_value_t = SortArg::Ascend)]
    sort: SortArg,
    /// Write the results as CSV to this path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Path to the dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated λ values (default: 0.1,0.2,0.5,1,2,5,6,10).
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Comma-separated hit@k values (default: 1..7,10 clipped to the
    /// unseen-class count).
    #[arg(long, value_delimiter = ',')]
    hitk: Option<Vec<usize>>,
    /// Comma-separated directions (default: encoder,decoder).
    #[arg(long, value_delimiter = ',', value_enum)]
    directions: Option<Vec<DirectionArg>>,
    /// Comma-separated metrics (default: minkowski).
    #[arg(long, value_delimiter = ',', value_enum)]
    metrics: Option<Vec<MetricArg>>,
    /// Minkowski exponent for minkowski metric entries.
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Comma-separated sort orders (default: ascend).
    #[arg(long, value_delimiter = ',', value_enum)]
    sorts: Option<Vec<SortArg>>,
    /// Skip L2 normalization of feature columns before training.
    #[arg(long)]
    no_normalize: bool,
    /// Worker threads (default: number of logical processors).
    #[arg(long)]
    jobs: Option<usize>,
    /// Write the report to this path in the `--format` encoding.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Largest per-side dimension of the random instances.
    #[arg(long, default_value_t = 6)]
    max_dim: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Encoder,
    Decoder,
    Both,
}

impl DirectionArg {
    fn expand(self) -> Vec<Direction> {
        match self {
            DirectionArg::Encoder => vec![Direction::Encoder],
            DirectionArg::Decoder => vec![Direction::Decoder],
            DirectionArg::Both => vec![Direction::Encoder, Direction::Decoder],
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Minkowski,
    Cosine,
}

impl MetricArg {
    fn to_metric(self, p: f64) -> Metric {
        match self {
            MetricArg::Minkowski => Metric::Minkowski { p },
            MetricArg::Cosine => Metric::Cosine,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SortArg {
    Ascend,
    Descend,
}

impl SortArg {
    fn to_order(self) -> SortOrder {
        match self {
            SortArg::Ascend => SortOrder::Ascend,
            SortArg::Descend => SortOrder::Descend,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
}

impl FormatArg {
    fn to_format(self) -> ReportFormat {
        match self {
            FormatArg::Markdown => ReportFormat::MarkdownTable,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

/// A diagnosed failure carrying its process exit code.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidParams(_) => CliError::usage(e.to_string()),
            DataError::RejectionOverflow { .. } => CliError::numeric(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<SaeError> for CliError {
    fn from(e: SaeError) -> Self {
        match e {
            SaeError::NonPositiveLambda(_) => CliError::usage(e.to_string()),
            SaeError::DimensionMismatch(_) | SaeError::ZeroNormColumn(_) => {
                CliError::data(e.to_string())
            }
            SaeError::DegenerateData(_)
            | SaeError::ExcessiveResidual { .. }
            | SaeError::Numeric(_) => CliError::numeric(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidExponent(_) | EvalError::KOutOfRange { .. } => {
                CliError::usage(e.to_string())
            }
            EvalError::Model(inner) => inner.into(),
            EvalError::DimensionMismatch(_)
            | EvalError::ZeroNormColumn(_)
            | EvalError::NonFinite
            | EvalError::EmptyTestSet => CliError::data(e.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::InvalidGrid(_) => CliError::usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are not errors; real parse problems
            // are usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let verbose = cli.verbose;
    let result = match cli.command {
        Cmd::Synth(args) => cmd_synth(args, verbose),
        Cmd::Train(args) => cmd_train(args, verbose),
        Cmd::Eval(args) => cmd_eval(args, verbose),
        Cmd::Sweep(args) => cmd_sweep(args, verbose),
        Cmd::OracleCheck(args) => cmd_oracle_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn cmd_synth(args: SynthArgs, verbose: u8) -> Result<(), CliError> {
    if args.semantic_dim > args.feature_dim {
        eprintln!(
            "warning: --semantic-dim {} exceeds --feature-dim {}; the planted mapping \
             cannot keep orthonormal rows and recovery will degrade",
            args.semantic_dim, args.feature_dim
        );
    }
    let params = SynthParams {
        d: args.feature_dim,
        k: args.semantic_dim,
        n_seen_classes: args.seen_classes,
        n_unseen_classes: args.unseen_classes,
        samples_per_class: args.samples_per_class,
        noise_sigma: args.noise_sigma,
        seed: args.seed,
    };
    let started = Instant::now();
    let (dataset, _planted) = synth_dataset(&params)?;
    if verbose > 0 {
        eprintln!(
            "generated {} in {:.3}s (fingerprint {:016x})",
            dataset.name(),
            started.elapsed().as_secs_f64(),
            dataset.fingerprint()
        );
    }
    let manifest = save_dataset(&dataset, &args.out)?;
    println!(
        "wrote {} ({}: d={}, k={}, classes={}+{}, train={}, test={})",
        manifest.display(),
        dataset.name(),
        dataset.feature_dim(),
        dataset.semantic_dim(),
        dataset.seen_class_count(),
        dataset.unseen_class_count(),
        dataset.n_train(),
        dataset.n_test()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs, verbose: u8) -> Result<(), CliError> {
    let dataset = load_dataset(&args.data)?;
    if verbose > 0 {
        eprintln!(
            "loaded {} (d={}, k={}, train={})",
            dataset.name(),
            dataset.feature_dim(),
            dataset.semantic_dim(),
            dataset.n_train()
        );
    }
    let options = TrainOptions {
        normalize_features: !args.no_normalize,
        normalize_semantics: args.normalize_semantics,
    };
    let started = Instant::now();
    let (model, diagnostics) = train_with(
        dataset.x_train(),
        dataset.s_train(),
        args.lambda,
        options,
    )?;
    let seconds = started.elapsed().as_secs_f64();
    save_model(&model, &args.model)?;
    println!(
        "trained on {}: lambda={}, sylvester residual={:.3e}, \
         reconstruction error={:.6e}, {:.3}s",
        dataset.name(),
        diagnostics.lambda,
        diagnostics.sylvester_residual,
        diagnostics.reconstruction_error,
        seconds
    );
    println!("wrote {}", args.model.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs, verbose: u8) -> Result<(), CliError> {
    let dataset = load_dataset(&args.data)?;
    let model = load_model(&args.model)?;
    if verbose > 0 {
        eprintln!(
            "loaded {} (test={}) and model (k={}, d={}, lambda={})",
            dataset.name(),
            dataset.n_test(),
            model.semantic_dim(),
            model.feature_dim(),
            model.lambda()
        );
    }
    let metric = args.metric.to_metric(args.p);
    let sort_order = args.sort.to_order();
    if sort_order == SortOrder::Descend {
        eprintln!(
            "warning: --sort descend ranks the farthest prototypes first; \
             distance metrics normally pair with ascending order"
        );
    }

    let mut reports = Vec::new();
    for direction in args.direction.expand() {
        let config = EvalConfig {
            direction,
            metric,
            sort_order,
            hitk: args.hitk.clone(),
        };
        let report = evaluate(&model, &dataset, &config)?;
        print_eval_report(&report, direction);
        reports.push(report);
    }

    if let Some(out) = &args.out {
        let csv = eval_reports_csv(&reports, model.lambda());
        std::fs::write(out, csv).map_err(|e| {
            CliError::data(format!("cannot write {}: {e}", out.display()))
        })?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn print_eval_report(report: &EvalReport, direction: Direction) {
    println!("direction = {}", direction.label());
    let mut ks: Vec<usize> = report
        .per_k_accuracy
        .keys()
        .map(|&(_, k)| k)
        .collect();
    ks.sort_unstable();
    ks.dedup();
    for k in ks {
        println!(
            "hit@{k} = {:.3}",
            report.per_k_accuracy[&(direction, k)]
        );
    }
    println!("mean rank = {:.3}", report.mean_rank);
    println!("loss = {:.3}", report.loss);
}

/// Renders evaluation results under the sweep module's normative CSV
/// header; `train_seconds` is zero because evaluation does not train.
fn eval_reports_csv(reports: &[EvalReport], lambda: f64) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for report in reports {
        for (&(direction, k), &accuracy) in &report.per_k_accuracy {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6}\n",
                report.dataset_name,
                lambda,
                direction.label(),
                report.config.metric.label(),
                report.config.sort_order.label(),
                k,
                accuracy,
                0.0
            ));
        }
    }
    out
}

fn cmd_sweep(args: SweepArgs, verbose: u8) -> Result<(), CliError> {
    let dataset = load_dataset(&args.data)?;
    let mut grid = SweepGrid::default_for(dataset.unseen_class_count());
    if let Some(lambdas) = args.lambdas {
        grid.lambdas = lambdas;
    }
    if let Some(hitk) = args.hitk {
        grid.hitk_values = hitk;
    }
    if let Some(directions) = args.directions {
        let mut expanded: Vec<Direction> = Vec::new();
        for d in directions.into_iter().flat_map(DirectionArg::expand) {
            if !expanded.contains(&d) {
                expanded.push(d);
            }
        }
        grid.directions = expanded;
    }
    if let Some(metrics) = args.metrics {
        grid.metrics = metrics.into_iter().map(|m| m.to_metric(args.p)).collect();
    }
    if let Some(sorts) = args.sorts {
        grid.sort_orders = sorts.into_iter().map(SortArg::to_order).collect();
    }
    grid.normalize = !args.no_normalize;
    if grid.sort_orders.contains(&SortOrder::Descend) {
        eprintln!(
            "warning: descending sort ranks the farthest prototypes first; \
             distance metrics normally pair with ascending order"
        );
    }

    let jobs = args.jobs.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    if verbose > 0 {
        eprintln!(
            "sweeping {} cells over {} lambda value(s) with {jobs} job(s)",
            grid.lambdas.len()
                * grid.directions.len()
                * grid.metrics.len()
                * grid.sort_orders.len()
                * grid.hitk_values.len(),
            grid.lambdas.len()
        );
    }
    let started = Instant::now();
    let report = run_grid_with_jobs(&dataset, &grid, jobs)?;
    if verbose > 0 {
        eprintln!("sweep finished in {:.3}s", started.elapsed().as_secs_f64());
    }

    print!("{}", emit_report(&report, ReportFormat::MarkdownTable));
    if let Some(out) = &args.out {
        let rendered = emit_report(&report, args.format.to_format());
        std::fs::write(out, rendered).map_err(|e| {
            CliError::data(format!("cannot write {}: {e}", out.display()))
        })?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_oracle_check(args: OracleCheckArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    // The dense oracle is capped at 400 unknowns (20×20).
    if args.max_dim == 0 || args.max_dim > 20 {
        return Err(CliError::usage(
            "--max-dim must be between 1 and 20 (the dense oracle caps at 400 unknowns)",
        ));
    }
    let mut rng = SplitMix64::new(args.seed);
    let mut agreements = 0usize;
    let mut worst = 0.0f64;
    for trial in 0..args.trials {
        let k = 1 + rng.next_below(args.max_dim as u64) as usize;
        let d = 1 + rng.next_below(args.max_dim as u64) as usize;
        let a = random_spd(&mut rng, k);
        let b = random_spd(&mut rng, d);
        let c = random_gaussian(&mut rng, k, d);
        let fast = solve_sylvester(&a, &b, &c)
            .map_err(|e| CliError::numeric(format!("solver failed at trial {trial}: {e}")))?;
        let oracle = solve_sylvester_oracle(&a, &b, &c)
            .map_err(|e| CliError::numeric(format!("oracle failed at trial {trial}: {e}")))?;
        let diff = fast
            .as_slice()
            .iter()
            .zip(oracle.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff);
        if diff <= 1e-8 {
            agreements += 1;
        }
    }
    println!(
        "oracle agreement: {agreements}/{} trials within 1e-8 (worst deviation {worst:.2e})",
        args.trials
    );
    if agreements != args.trials {
        return Err(CliError::numeric(format!(
            "{} of {} trials disagreed with the dense oracle",
            args.trials - agreements,
            args.trials
        )));
    }
    Ok(())
}

fn random_gaussian(rng: &mut SplitMix64, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.next_gaussian())
        .expect("gaussian draws are finite")
}

/// Gram matrix plus a diagonal shift: strictly positive definite.
fn random_spd(rng: &mut SplitMix64, n: usize) -> Matrix {
    let g = random_gaussian(rng, n, n).gram();
    Matrix::from_fn(n, n, |i, j| g.at(i, j) + if i == j { 0.1 } else { 0.0 })
        .expect("finite by construction")
}
