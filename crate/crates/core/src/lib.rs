//! Zero-shot learning with a linear semantic auto-encoder.
//!
//! The toolkit trains a mapping `W` between a visual feature space and a
//! semantic (attribute or word-vector) space by minimizing
//! `‖X − WᵀS‖² + λ‖WX − S‖²`, whose normal equations form a Sylvester
//! equation solved in closed form. Unseen classes are classified by
//! projecting test features onto semantic prototypes (encoder direction)
//! or prototypes into feature space (decoder direction) and ranking by
//! distance; accuracy is reported as hit@k.
//!
//! Modules, bottom-up:
//!
//! - [`matrix`] — dense row-major `f64` matrices with the few kernels the
//!   toolkit needs.
//! - [`rng`] — deterministic splitmix64 / Box–Muller stream for synthetic
//!   data.
//! - [`linalg`] — symmetric eigendecomposition, the Sylvester solver, and
//!   a brute-force verification oracle.
//! - [`data`] — dataset model, on-disk formats, and the planted-model
//!   synthetic generator.
//! - [`sae`] — model training, encoder/decoder projections, model file
//!   round-trip.
//! - [`eval`] — distances, prototype ranking, hit@k reports.
//! - [`sweep`] — hyperparameter grid runner and table/CSV report emitter.

pub mod data;
pub mod eval;
pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod sae;
pub mod sweep;

pub use data::{
    fnv1a64, load_dataset, load_matrix, save_dataset, save_matrix, synth_dataset, DataError,
    DatasetManifest, SynthParams, ZslDataset,
};
pub use eval::{
    default_hitk, evaluate, hit_at_k, pairwise_distance, rank_prototypes, Direction, EvalConfig,
    EvalError, EvalReport, Metric, SortOrder,
};
pub use linalg::{
    solve_sylvester, solve_sylvester_oracle, sym_eig, sylvester_residual, LinalgError, SymEig,
};
pub use matrix::{Matrix, MatrixError};
pub use rng::SplitMix64;
pub use sae::{
    build_normal_matrices, decode, encode, load_model, reconstruction_error, save_model, train,
    train_with, SaeError, SaeModel, TrainDiagnostics, TrainOptions,
};
pub use sweep::{
    emit_report, run_grid, run_grid_with_jobs, CellOutcome, ReportFormat, SweepCell, SweepError,
    SweepGrid, SweepReport, CSV_HEADER,
};
