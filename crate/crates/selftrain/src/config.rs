use numcore::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Transform whose presence the auxiliary head learns to detect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxTask {
    FlipVertical,
    Mirror,
    Rot90,
    Rot270,
    /// No auxiliary term; target images are not touched in stage 1.
    None,
}

impl AuxTask {
    pub fn apply(self, image: &Tensor) -> Result<Tensor> {
        Ok(match self {
            Self::FlipVertical => scenegen::flip_image(image)?,
            Self::Mirror => scenegen::mirror_image(image)?,
            Self::Rot90 => scenegen::rotate_image(image, 1)?,
            Self::Rot270 => scenegen::rotate_image(image, 3)?,
            Self::None => image.clone(),
        })
    }

    pub fn is_active(self) -> bool {
        self != Self::None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Weight of the orientation loss in stage 1.
    pub lambda1: f64,
    /// Weight of the pseudo-label loss in stage 2. The desk-scale default is
    /// larger than the usual 1: pseudo-label residuals against the model's own
    /// predictions are about ten times smaller than the supervised ones, and
    /// at 1 the term barely holds the target predictions in place.
    pub lambda2: f64,
    /// Percentage of the most uncertain target pixels discarded per refresh.
    pub alpha: f64,
    /// Number of recursive stage-2 rounds (`K`).
    pub rounds: usize,
    pub num_masks: usize,
    pub keep_fraction: f64,
    /// The network predicts this multiple of the density.
    pub output_scale: f64,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub lr: f64,
    pub seed: u64,
    pub aux_task: AuxTask,
    /// Keep the orientation term during stage 2 as well.
    pub aux_in_stage2: bool,
    /// Worker cap for pseudo-label builds; does not affect results.
    #[serde(skip)]
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda1: 1e-4,
            lambda2: 10.0,
            alpha: 10.0,
            rounds: 2,
            num_masks: 3,
            keep_fraction: 0.8,
            output_scale: 100.0,
            stage1_iters: 3000,
            stage2_iters: 1500,
            lr: 1e-3,
            seed: 1,
            aux_task: AuxTask::FlipVertical,
            aux_in_stage2: false,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..100.0).contains(&self.alpha) {
            return invalid(format!("alpha must be in [0, 100), got {}", self.alpha));
        }
        if self.rounds < 1 {
            return invalid("need at least one stage-2 round");
        }
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return invalid(format!("lambda1 must be >= 0, got {}", self.lambda1));
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return invalid(format!("lambda2 must be >= 0, got {}", self.lambda2));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return invalid(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.num_masks < 2 {
            return invalid("need at least 2 masks");
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return invalid(format!("keep fraction must be in (0, 1], got {}", self.keep_fraction));
        }
        self.network().validate()?;
        Ok(())
    }

    /// Default network with this config's mask settings.
    pub fn network(&self) -> netmodel::NetworkConfig {
        netmodel::NetworkConfig {
            num_masks: self.num_masks,
            keep_fraction: self.keep_fraction,
            output_scale: self.output_scale,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        TrainConfig::default().network().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = [
            TrainConfig { alpha: 100.0, ..Default::default() },
            TrainConfig { alpha: -1.0, ..Default::default() },
            TrainConfig { rounds: 0, ..Default::default() },
            TrainConfig { lambda1: -1e-3, ..Default::default() },
            TrainConfig { lambda2: f64::NAN, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn aux_task_names() {
        let s = serde_json::to_string(&AuxTask::FlipVertical).unwrap();
        assert_eq!(s, "\"flip_vertical\"");
        let t: AuxTask = serde_json::from_str("\"rot270\"").unwrap();
        assert_eq!(t, AuxTask::Rot270);
    }
}
