//! Experiment configuration: JSON file, command-line overrides, variants.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use scenegen::DomainParams;
use selftrain::{AuxTask, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, CliError, Result};

/// The ablation lattice. Each variant fixes which loss terms and which
/// auxiliary transform are active; everything else comes from [`TrainConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Supervised training on the source split only.
    #[serde(rename = "BASELINE")]
    Baseline,
    /// Stage 1 only: source supervision plus the flip classifier.
    #[serde(rename = "OURS-IMG")]
    OursImg,
    /// Stage 2 on top of source-only pretraining.
    #[serde(rename = "OURS-PIX")]
    OursPix,
    #[serde(rename = "OURS")]
    Ours,
    /// Like OURS with the auxiliary term kept in stage 2.
    #[serde(rename = "OURS-DUP")]
    OursDup,
    #[serde(rename = "OURS-MIRROR")]
    OursMirror,
    #[serde(rename = "OURS-90")]
    Ours90,
    #[serde(rename = "OURS-270")]
    Ours270,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Self::Baseline,
        Self::OursImg,
        Self::OursPix,
        Self::Ours,
        Self::OursDup,
        Self::OursMirror,
        Self::Ours90,
        Self::Ours270,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "BASELINE",
            Self::OursImg => "OURS-IMG",
            Self::OursPix => "OURS-PIX",
            Self::Ours => "OURS",
            Self::OursDup => "OURS-DUP",
            Self::OursMirror => "OURS-MIRROR",
            Self::Ours90 => "OURS-90",
            Self::Ours270 => "OURS-270",
        }
    }

    /// Whether training reads target-train images.
    pub fn uses_target(self) -> bool {
        self != Self::Baseline
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|v| v.name()).collect();
                CliError::Invalid(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Size and appearance of the four generated splits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub height: usize,
    pub width: usize,
    /// Expected number of people per scene.
    pub mean_count: f64,
    /// Gaussian kernel width of the ground-truth density maps.
    pub sigma: f64,
    /// Generation seed; independent of the training seeds.
    pub seed: u64,
    pub source_train: usize,
    pub source_test: usize,
    pub target_train: usize,
    pub target_test: usize,
    pub source: DomainParams,
    pub target: DomainParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            mean_count: 40.0,
            sigma: 1.5,
            seed: 0,
            source_train: 200,
            source_test: 100,
            target_train: 50,
            target_test: 100,
            source: DomainParams::source(),
            target: DomainParams::target(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("source_train", self.source_train),
            ("source_test", self.source_test),
            ("target_train", self.target_train),
            ("target_test", self.target_test),
        ] {
            if n == 0 {
                return invalid(format!("split size {name} must be positive"));
            }
        }
        if !(self.mean_count >= 0.0 && self.mean_count.is_finite()) {
            return invalid(format!("mean_count must be >= 0, got {}", self.mean_count));
        }
        self.source.validate()?;
        self.target.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    /// Training hyperparameters. `train.seed` is replaced by each entry of
    /// `seeds`; `train.aux_task` and `train.aux_in_stage2` by the variant.
    pub train: TrainConfig,
    pub variant: Variant,
    pub seeds: Vec<u64>,
    /// Root of the generated splits.
    pub data_dir: PathBuf,
    /// Root of the run directories.
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            variant: Variant::Ours,
            seeds: (1..=5).collect(),
            data_dir: PathBuf::from("data"),
            out: PathBuf::from("runs"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub variant: Option<Variant>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        Self::from_json(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }

    /// Flags over file over defaults.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> Result<Self> {
        let mut c = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = flags.variant {
            c.variant = v;
        }
        if let Some(s) = flags.seed {
            c.seeds = vec![s];
        }
        if let Some(o) = &flags.out {
            c.out = o.clone();
        }
        if let Some(d) = &flags.dataset {
            c.data_dir = d.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return invalid("need at least one seed");
        }
        Ok(())
    }

    /// Training configuration of `variant` for one seed.
    pub fn train_config(&self, variant: Variant, seed: u64) -> TrainConfig {
        let mut t = TrainConfig {
            seed,
            aux_in_stage2: false,
            ..self.train.clone()
        };
        t.aux_task = match variant {
            Variant::Baseline | Variant::OursPix => AuxTask::None,
            Variant::OursImg | Variant::Ours | Variant::OursDup => AuxTask::FlipVertical,
            Variant::OursMirror => AuxTask::Mirror,
            Variant::Ours90 => AuxTask::Rot90,
            Variant::Ours270 => AuxTask::Rot270,
        };
        if variant == Variant::OursDup {
            t.aux_in_stage2 = true;
        }
        t
    }

    /// SHA-256 of the canonical JSON of everything that determines the
    /// results of one (variant, seed) run. Keys are sorted, so the hash does
    /// not depend on field order in the file; output paths are excluded.
    pub fn run_hash(&self, variant: Variant, seed: u64) -> String {
        let v = serde_json::json!({
            "dataset": self.dataset,
            "train": self.train_config(variant, seed),
            "variant": variant,
        });
        hex::encode(Sha256::digest(canonical_json(&v).as_bytes()))
    }
}

/// Compact JSON with object keys in sorted order at every level.
pub fn canonical_json(v: &serde_json::Value) -> String {
    use serde_json::Value;
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::String(k.clone()), canonical_json(&m[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}
