use netmodel::{MaskSet, Model};
use numcore::{par_map, Tensor};
use scenegen::DensityMap;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EvalError, Result};
use crate::metrics::{count_from_density, mae, pearson_r, rmse};

/// Counting accuracy of one model on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    /// Pixel-wise uncertainty/error correlation; `None` when undefined or not
    /// computed.
    pub pearson_r: Option<f64>,
    pub n: usize,
    /// `(true count, estimated count)` per image, in split order.
    pub pairs: Vec<(f64, f64)>,
}

impl MetricsReport {
    pub fn from_pairs(pairs: Vec<(f64, f64)>, pearson_r: Option<f64>) -> Result<Self> {
        Ok(Self {
            mae: mae(&pairs)?,
            rmse: rmse(&pairs)?,
            pearson_r,
            n: pairs.len(),
            pairs,
        })
    }
}

fn check_split(images: &[Tensor], truth: &[DensityMap]) -> Result<()> {
    if images.is_empty() {
        return invalid("evaluation split is empty");
    }
    if images.len() != truth.len() {
        return invalid(format!(
            "{} images but {} ground-truth maps",
            images.len(),
            truth.len()
        ));
    }
    Ok(())
}

/// Pearson correlation between per-pixel `|mean - truth|` and per-pixel
/// ensemble uncertainty, pooled over every pixel of every image.
pub fn uncertainty_error_correlation(
    model: &Model,
    masks: &MaskSet,
    images: &[Tensor],
    truth: &[DensityMap],
    threads: usize,
) -> Result<f64> {
    check_split(images, truth)?;
    let preds = par_map(images, threads, |_, img| model.ensemble_predict_with(img, masks));
    let mut errors = Vec::new();
    let mut uncert = Vec::new();
    for (pred, gt) in preds.into_iter().zip(truth) {
        let pred = pred?;
        if pred.mean.shape() != gt.values().shape() {
            return invalid("prediction and ground truth sizes differ");
        }
        errors.extend(pred.mean.data().iter().zip(gt.values().data()).map(|(p, t)| (p - t).abs()));
        uncert.extend_from_slice(pred.uncertainty.data());
    }
    pearson_r(&errors, &uncert)
}

/// Single-pass counts and errors; the correlation is filled in when
/// `with_correlation` is set and defined.
pub fn evaluate(
    model: &Model,
    images: &[Tensor],
    truth: &[DensityMap],
    roi: Option<&Tensor>,
    with_correlation: bool,
    threads: usize,
) -> Result<MetricsReport> {
    check_split(images, truth)?;
    let est = par_map(images, threads, |_, img| -> Result<f64> {
        count_from_density(&model.predict_single(img)?, roi)
    });
    let pairs = est
        .into_iter()
        .zip(truth)
        .map(|(e, gt)| Ok((count_from_density(gt, roi)?, e?)))
        .collect::<Result<Vec<_>>>()?;
    let r = if with_correlation {
        match uncertainty_error_correlation(model, &model.masks, images, truth, threads) {
            Ok(r) => Some(r),
            Err(EvalError::UndefinedCorrelation(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    MetricsReport::from_pairs(pairs, r)
}

/// Metrics of a fixed set of predicted maps, e.g. ground truth fed back as
/// its own prediction.
pub fn evaluate_maps(predicted: &[DensityMap], truth: &[DensityMap], roi: Option<&Tensor>) -> Result<MetricsReport> {
    if predicted.len() != truth.len() || predicted.is_empty() {
        return invalid("need equally many, nonempty predicted and true maps");
    }
    let pairs = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| Ok((count_from_density(t, roi)?, count_from_density(p, roi)?)))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_pairs(pairs, None)
}
