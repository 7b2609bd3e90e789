//! JSON checkpoints: network config, mask set and every parameter tensor.
//! Floats are written in shortest round-trip form, so reloading is exact.

use std::fs;
use std::path::Path;

use numcore::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};
use crate::masks::MaskSet;
use crate::model::Model;
use crate::network::{ModelParams, NetworkConfig, PARAM_NAMES};

pub const CHECKPOINT_FORMAT: &str = "crowdshift-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: NetworkConfig,
    masks: MaskSet,
    params: Vec<NamedTensor>,
}

pub fn to_json(model: &Model) -> String {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        masks: model.masks.clone(),
        params: model
            .params
            .tensors()
            .iter()
            .zip(PARAM_NAMES)
            .map(|(t, name)| NamedTensor {
                name: name.into(),
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("checkpoint is always serializable")
}

pub fn from_json(json: &str, origin: &Path) -> Result<Model> {
    let err = |reason: String| NetError::Checkpoint {
        path: origin.to_path_buf(),
        reason,
    };
    let file: CheckpointFile = serde_json::from_str(json).map_err(|e| err(e.to_string()))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(err(format!("unknown format {:?}", file.format)));
    }
    if file.version != CHECKPOINT_VERSION {
        return Err(err(format!(
            "version {} is not supported (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    if file.params.len() != PARAM_NAMES.len()
        || file.params.iter().zip(PARAM_NAMES).any(|(p, n)| p.name != n)
    {
        return Err(err("parameter names do not match the network layout".into()));
    }
    let tensors = file
        .params
        .into_iter()
        .map(|p| Tensor::new(p.shape, p.data))
        .collect::<numcore::Result<Vec<_>>>()
        .map_err(|e| err(e.to_string()))?;
    let params = ModelParams::from_tensors(&file.config, tensors).map_err(|e| err(e.to_string()))?;
    Model::new(file.config, file.masks, params).map_err(|e| err(e.to_string()))
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| NetError::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    }
    fs::write(path, to_json(model)).map_err(|e| NetError::Checkpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let json = fs::read_to_string(path).map_err(|e| NetError::Checkpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    from_json(&json, path)
}
