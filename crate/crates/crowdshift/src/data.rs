//! The four experiment splits and leakage-safe loading.

use std::path::{Path, PathBuf};

use numcore::Tensor;
use scenegen::{derive_seed, generate_scene, save_dataset, Dataset, DatasetDir, DensityMap, Domain, Manifest};

use crate::config::DatasetConfig;
use crate::error::{CliError, Result};

pub const SOURCE_TRAIN: &str = "source-train";
pub const SOURCE_TEST: &str = "source-test";
pub const TARGET_TRAIN: &str = "target-train";
pub const TARGET_TEST: &str = "target-test";
pub const SPLITS: [&str; 4] = [SOURCE_TRAIN, SOURCE_TEST, TARGET_TRAIN, TARGET_TEST];

/// Generates one split in memory. Each split draws from its own seed stream.
pub fn generate_split(config: &DatasetConfig, split: &str) -> Result<Dataset> {
    config.validate()?;
    let (stream, n, domain, params) = match split {
        SOURCE_TRAIN => (1, config.source_train, Domain::Source, &config.source),
        SOURCE_TEST => (2, config.source_test, Domain::Source, &config.source),
        TARGET_TRAIN => (3, config.target_train, Domain::Target, &config.target),
        TARGET_TEST => (4, config.target_test, Domain::Target, &config.target),
        other => return Err(CliError::Invalid(format!("unknown split {other:?}"))),
    };
    let (scenes, densities) = (0..n)
        .map(|i| {
            generate_scene(
                config.height,
                config.width,
                config.mean_count,
                params,
                domain,
                config.sigma,
                derive_seed(config.seed, stream, i as u64),
            )
        })
        .collect::<scenegen::Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(Dataset {
        height: config.height,
        width: config.width,
        split: split.to_string(),
        labels_withheld: split == TARGET_TRAIN,
        sigma: config.sigma,
        scenes,
        densities,
    })
}

/// Writes all four splits under `root` and returns their manifests.
pub fn generate_all(config: &DatasetConfig, root: &Path) -> Result<Vec<Manifest>> {
    std::fs::create_dir_all(root).map_err(|e| CliError::io(root.display(), e))?;
    SPLITS
        .iter()
        .map(|s| Ok(save_dataset(&generate_split(config, s)?, &root.join(s))?))
        .collect()
}

pub fn split_dir(root: &Path, split: &str) -> PathBuf {
    root.join(split)
}

pub fn open_split(root: &Path, split: &str) -> Result<DatasetDir> {
    let dir = split_dir(root, split);
    DatasetDir::open(&dir).map_err(|e| CliError::Io(format!("split {split} under {}: {e}", root.display())))
}

/// Images and ground truth of a labeled split.
pub fn load_labeled(root: &Path, split: &str) -> Result<(Vec<Tensor>, Vec<DensityMap>)> {
    let d = open_split(root, split)?;
    if d.manifest().labels_withheld {
        return Err(CliError::Invariant(format!("split {split} is unlabeled; its ground truth is off limits")));
    }
    Ok((d.load_images()?, d.load_densities()?))
}

/// What training is allowed to see: labeled source images and target images
/// without their density maps.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub source_images: Vec<Tensor>,
    pub source_densities: Vec<DensityMap>,
    pub target_images: Vec<Tensor>,
}

impl TrainingData {
    /// Loads the training splits under `root`. Target-train images are only
    /// read when `with_target` is set; its density files never are.
    pub fn load(root: &Path, with_target: bool) -> Result<Self> {
        let (source_images, source_densities) = load_labeled(root, SOURCE_TRAIN)?;
        let target_images = if with_target {
            let d = open_split(root, TARGET_TRAIN)?;
            if !d.manifest().labels_withheld {
                return Err(CliError::Invariant(format!(
                    "split {TARGET_TRAIN} must be flagged labels_withheld"
                )));
            }
            d.load_images()?
        } else {
            Vec::new()
        };
        Ok(Self {
            source_images,
            source_densities,
            target_images,
        })
    }

    pub fn source(&self) -> Result<selftrain::LabeledSet<'_>> {
        Ok(selftrain::LabeledSet::new(&self.source_images, &self.source_densities)?)
    }
}
