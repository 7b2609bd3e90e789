//! Uncertainty-filtered pseudo labels on the unlabeled target split.

use netmodel::Model;
use numcore::{par_map, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Ensemble output for one target image together with its keep mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabel {
    pub mean: Tensor,
    pub uncertainty: Tensor,
    /// 1 where the pixel is used as a label, 0 where it is discarded.
    pub keep: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabelSet {
    pub labels: Vec<PseudoLabel>,
    /// Largest kept uncertainty; `None` when nothing is kept.
    pub threshold: Option<f64>,
    pub alpha: f64,
    /// Index of the parameters that produced these labels: 0 for the stage-1
    /// model, `k` for the model after stage-2 round `k`.
    pub refresh: usize,
    pub kept: usize,
    pub total: usize,
}

/// What a report needs to know about one refresh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelSummary {
    pub refresh: usize,
    pub alpha: f64,
    pub threshold: Option<f64>,
    pub kept: usize,
    pub total: usize,
}

impl PseudoLabelSet {
    pub fn summary(&self) -> PseudoLabelSummary {
        PseudoLabelSummary {
            refresh: self.refresh,
            alpha: self.alpha,
            threshold: self.threshold,
            kept: self.kept,
            total: self.total,
        }
    }
}

/// `floor((1 - alpha/100) * total)`, computed as `(100 - alpha) * total / 100`
/// with a guard against representation error in `alpha`.
pub fn pseudo_keep_count(total: usize, alpha: f64) -> usize {
    (((100.0 - alpha) * total as f64) / 100.0 + 1e-9).floor() as usize
}

/// Keep masks for the globally lowest-uncertainty pixels.
///
/// Pixels are ranked by `(uncertainty, image index, pixel index)` and exactly
/// [`pseudo_keep_count`] of them are kept. Returns the masks and the largest
/// kept uncertainty.
pub fn select_confident(uncertainties: &[Tensor], alpha: f64) -> Result<(Vec<Tensor>, Option<f64>)> {
    if !(0.0..100.0).contains(&alpha) {
        return invalid(format!("alpha must be in [0, 100), got {alpha}"));
    }
    let mut order: Vec<(f64, usize, usize)> = uncertainties
        .iter()
        .enumerate()
        .flat_map(|(i, u)| u.data().iter().enumerate().map(move |(j, &v)| (v, i, j)))
        .collect();
    if order.iter().any(|(v, ..)| !v.is_finite()) {
        return invalid("non-finite uncertainty");
    }
    let keep = pseudo_keep_count(order.len(), alpha);
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut masks: Vec<Tensor> = uncertainties
        .iter()
        .map(|u| Tensor::zeros(u.shape()))
        .collect();
    for &(_, i, j) in &order[..keep] {
        masks[i].data_mut()[j] = 1.0;
    }
    let threshold = keep.checked_sub(1).map(|last| order[last].0);
    Ok((masks, threshold))
}

/// Runs the mask ensemble of `model` over every target image and keeps the
/// `(100 - alpha)%` most certain pixels of the whole split.
pub fn build_pseudo_labels(
    model: &Model,
    target: &[Tensor],
    alpha: f64,
    refresh: usize,
    threads: usize,
) -> Result<PseudoLabelSet> {
    if target.is_empty() {
        return invalid("cannot build pseudo labels for an empty target set");
    }
    let preds = par_map(target, threads, |_, img| model.ensemble_predict(img))
        .into_iter()
        .collect::<netmodel::Result<Vec<_>>>()?;
    let us: Vec<Tensor> = preds.iter().map(|p| p.uncertainty.clone()).collect();
    let (masks, threshold) = select_confident(&us, alpha)?;
    let total = us.iter().map(Tensor::len).sum();
    let kept = masks.iter().map(Tensor::sum).sum::<f64>() as usize;
    let labels = preds
        .into_iter()
        .zip(masks)
        .map(|(p, keep)| PseudoLabel {
            mean: p.mean,
            uncertainty: p.uncertainty,
            keep,
        })
        .collect();
    Ok(PseudoLabelSet {
        labels,
        threshold,
        alpha,
        refresh,
        kept,
        total,
    })
}
