//! Experiment runner for cross-domain crowd counting.
//!
//! `generate` writes four procedural splits (source/target × train/test),
//! `train` runs one variant of the ablation lattice per seed, `eval` scores a
//! checkpoint and `report` collects run records into a CSV table and
//! density-map images. Target-train ground truth stays on disk for auditing
//! but no training path reads it.

mod cli;
mod commands;
mod config;
mod data;
mod error;
mod record;
mod train;

pub use cli::{run, Cli, Command};
pub use commands::{
    cmd_eval, cmd_generate, cmd_report, cmd_train, evaluate_split, load_roi, quantize_density, run_dir, save_outcome,
    ReportSummary, CSV_HEADER,
};
pub use config::{canonical_json, DatasetConfig, ExperimentConfig, Overrides, Variant};
pub use data::{
    generate_all, generate_split, load_labeled, open_split, split_dir, TrainingData, SOURCE_TEST, SOURCE_TRAIN, SPLITS,
    TARGET_TEST, TARGET_TRAIN,
};
pub use error::{CliError, Result};
pub use record::{find_records, Artifacts, RunRecord, RECORD_FILE};
pub use train::{train_plans, Plan, PlanKind, PlanOutcome, StageArtifact};
