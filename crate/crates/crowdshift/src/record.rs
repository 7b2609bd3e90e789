use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use evalkit::MetricsReport;
use selftrain::{PseudoLabelSummary, StageReport, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::Variant;
use crate::error::{CliError, Result};

pub const RECORD_FILE: &str = "record.json";

/// Files written for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifacts {
    pub run_dir: PathBuf,
    /// One checkpoint per stage, in training order.
    pub checkpoints: Vec<PathBuf>,
    pub stage_reports: Vec<PathBuf>,
    pub final_checkpoint: PathBuf,
}

/// Everything known about one (variant, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub config_hash: String,
    pub variant: Variant,
    pub seed: u64,
    pub train: TrainConfig,
    pub data_dir: PathBuf,
    /// Keyed by split name (`source-test`, `target-test`).
    pub metrics: BTreeMap<String, MetricsReport>,
    pub stages: Vec<StageReport>,
    pub label_builds: Vec<PseudoLabelSummary>,
    pub artifacts: Artifacts,
    /// Target-train density reads in this process when training finished.
    pub target_label_reads: usize,
}

impl RunRecord {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display(), e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
}

/// `record.json` files under `root`, at any depth, in sorted path order.
pub fn find_records(root: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| CliError::io(dir.display(), e))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(dir.display(), e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == RECORD_FILE) {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}
