use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

const MAX_ATTEMPTS: usize = 1000;

/// Number of channels each mask keeps: `floor(p * channels)`.
pub fn keep_count(channels: usize, keep_fraction: f64) -> usize {
    // Guard against p * C landing a hair below an integer, as in 2/3 * 6.
    ((keep_fraction * channels as f64) + 1e-9).floor() as usize
}

/// Pre-generated binary channel masks, each keeping exactly `keep` channels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSet {
    masks: Vec<Vec<bool>>,
    keep: usize,
}

impl MaskSet {
    /// Wraps explicit masks after checking they all keep the same number of
    /// channels. Distinctness and coverage are not required here, which lets
    /// tests force degenerate sets.
    pub fn from_masks(masks: Vec<Vec<bool>>) -> Result<Self> {
        let first = masks
            .first()
            .ok_or_else(|| NetError::InvalidArgument("empty mask set".into()))?;
        let (len, keep) = (first.len(), first.iter().filter(|&&b| b).count());
        if masks
            .iter()
            .any(|m| m.len() != len || m.iter().filter(|&&b| b).count() != keep)
        {
            return Err(NetError::InvalidArgument(
                "masks must share length and keep count".into(),
            ));
        }
        Ok(Self { masks, keep })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.masks[0].len()
    }

    pub fn keep(&self) -> usize {
        self.keep
    }

    pub fn mask(&self, index: usize) -> Option<&[bool]> {
        self.masks.get(index).map(Vec::as_slice)
    }

    pub fn masks(&self) -> &[Vec<bool>] {
        &self.masks
    }

    /// Mask `index` as 0/1 channel multipliers.
    pub fn multipliers(&self, index: usize) -> Result<Vec<f64>> {
        let m = self.mask(index).ok_or_else(|| {
            NetError::InvalidArgument(format!("mask index {index} out of range 0..{}", self.len()))
        })?;
        Ok(m.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    pub fn covers_all_channels(&self) -> bool {
        (0..self.channels()).all(|c| self.masks.iter().any(|m| m[c]))
    }

    pub fn all_distinct(&self) -> bool {
        self.masks
            .iter()
            .enumerate()
            .all(|(i, a)| self.masks[i + 1..].iter().all(|b| a != b))
    }
}

/// Samples `count` distinct `k`-subsets of `channels` whose union covers
/// every channel.
///
/// A shuffled channel order is dealt round-robin over the masks, which covers
/// everything since `count * k >= channels`; each mask is then topped up with
/// random extra channels. Only duplicate masks cause a retry.
pub fn generate_masks(channels: usize, count: usize, keep_fraction: f64, seed: u64) -> Result<MaskSet> {
    if count < 2 {
        return Err(NetError::InvalidArgument(format!("need at least 2 masks, got {count}")));
    }
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(NetError::InvalidArgument(format!(
            "keep fraction must be in (0, 1], got {keep_fraction}"
        )));
    }
    let k = keep_count(channels, keep_fraction);
    if k == 0 {
        return Err(NetError::InvalidArgument(format!(
            "keep fraction {keep_fraction} keeps no channel out of {channels}"
        )));
    }
    if count * k < channels {
        return Err(NetError::InvalidArgument(format!(
            "{count} masks of {k} channels cannot cover {channels} channels"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let mut order: Vec<usize> = (0..channels).collect();
        order.shuffle(&mut rng);
        let mut masks = vec![vec![false; channels]; count];
        for (i, &c) in order.iter().enumerate() {
            masks[i % count][c] = true;
        }
        for m in &mut masks {
            let mut rest: Vec<usize> = (0..channels).filter(|&c| !m[c]).collect();
            let have = channels - rest.len();
            rest.shuffle(&mut rng);
            for &c in &rest[..k - have] {
                m[c] = true;
            }
        }
        let set = MaskSet { masks, keep: k };
        if set.all_distinct() && set.covers_all_channels() {
            return Ok(set);
        }
    }
    Err(NetError::Generation(format!(
        "no {count} distinct covering masks of {k}/{channels} channels after {MAX_ATTEMPTS} attempts"
    )))
}
