//! Two-stage self-supervised adaptation from a labeled source domain to an
//! unlabeled target domain.
//!
//! Stage 1 trains the density branch on source images while an orientation
//! head learns to tell whether target images were flipped upside-down.
//! Stage 2 builds pseudo labels on the target split from the mask ensemble,
//! discards the most uncertain `alpha` percent of pixels, and fine-tunes on
//! the rest; the labels are rebuilt after each of the `K` rounds.
//!
//! Training only ever receives target *images*; there is no parameter
//! through which target ground truth could reach it.

mod config;
mod error;
mod losses;
mod pseudo;
mod trainer;

pub use config::{AuxTask, TrainConfig};
pub use error::{Result, TrainError};
pub use losses::{loss_stage1, loss_stage2, LossEval, LossParts, OrientationSample, SourceSample};
pub use pseudo::{
    build_pseudo_labels, pseudo_keep_count, select_confident, PseudoLabel, PseudoLabelSet,
    PseudoLabelSummary,
};
pub use trainer::{
    init_model, orientation_accuracy, run_stage2, train_source_only, train_two_stage, Checkpoint,
    LabeledSet, Stage1Trainer, Stage2Trainer, StageReport, TwoStageOutcome,
};
