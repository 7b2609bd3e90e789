//! Stage losses with their gradients.
//!
//! Both losses build a fresh graph over trainable copies of the parameters,
//! so gradients come back in [`netmodel::PARAM_NAMES`] order. Parameters a
//! loss does not touch (the orientation head in stage 2) get zero gradients.
//!
//! Density residuals are measured in the network's output units, i.e.
//! multiplied by the configured output scale before squaring, the way crowd
//! counting code conventionally trains on scaled density maps.

use netmodel::{BoundParams, MaskSet, ModelParams};
use numcore::{Graph, NodeId, Tensor};
use scenegen::DensityMap;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, TrainError};
use crate::pseudo::PseudoLabelSet;

/// One labeled source image.
#[derive(Clone, Copy, Debug)]
pub struct SourceSample<'a> {
    pub image: &'a Tensor,
    pub density: &'a DensityMap,
}

/// A target image as fed to the orientation head, plus its label.
#[derive(Clone, Copy, Debug)]
pub struct OrientationSample<'a> {
    pub image: &'a Tensor,
    pub transformed: bool,
}

/// Scalar values of the loss terms (unweighted, except `total`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub supervised: f64,
    pub aux: f64,
    pub pseudo: f64,
}

#[derive(Clone, Debug)]
pub struct LossEval {
    pub parts: LossParts,
    pub grads: Vec<Tensor>,
    /// Whether the orientation head's argmax matched the label.
    pub aux_correct: Option<bool>,
}

fn image_hw(image: &Tensor) -> Result<(usize, usize)> {
    match *image.shape() {
        [_, h, w] => Ok((h, w)),
        _ => invalid(format!("expected a [C,H,W] image, got {:?}", image.shape())),
    }
}

/// `sum_pixels (s * (D(E(x)) - y))^2` under one mask, `s` the output scale.
fn supervised_term(g: &mut Graph, p: &BoundParams, source: SourceSample, mask: &[f64]) -> Result<NodeId> {
    let hw = image_hw(source.image)?;
    if (source.density.height(), source.density.width()) != hw {
        return invalid("source density and image sizes differ");
    }
    let x = g.constant(source.image.clone())?;
    let y = g.constant(source.density.values().clone())?;
    let f = p.encode(g, x)?;
    let pred = p.decode(g, f, mask, hw)?;
    let r = g.sub(pred, y)?;
    let r = g.scale(r, p.output_scale())?;
    let sq = g.square(r)?;
    Ok(g.sum_all(sq)?)
}

/// Two-class cross-entropy of the orientation head; class 1 = transformed.
fn aux_term(g: &mut Graph, p: &BoundParams, sample: OrientationSample) -> Result<(NodeId, bool)> {
    let x = g.constant(sample.image.clone())?;
    let f = p.encode(g, x)?;
    let logits = p.aux_logits(g, f)?;
    let ls = g.log_softmax(logits)?;
    let label = usize::from(sample.transformed);
    let l = g.value(logits).data();
    let correct = (l[1] > l[0]) == sample.transformed && l[0] != l[1];
    let mut onehot = [0.0; 2];
    onehot[label] = 1.0;
    let sel = g.constant(Tensor::from_vec(onehot.to_vec()))?;
    let picked = g.mul(ls, sel)?;
    let s = g.sum_all(picked)?;
    Ok((g.scale(s, -1.0)?, correct))
}

fn finish(g: &Graph, loss: NodeId, parts: LossParts, aux_correct: Option<bool>) -> Result<LossEval> {
    let grads = g.backward(loss)?.into_params();
    Ok(LossEval {
        parts,
        grads,
        aux_correct,
    })
}

/// `L_st1 = L_s + lambda1 * L_a`.
///
/// `target` is the (possibly transformed) target image for the orientation
/// head; with `None` the auxiliary term is absent and `total == L_s`.
pub fn loss_stage1(
    params: &ModelParams,
    masks: &MaskSet,
    mask_index: usize,
    source: SourceSample,
    target: Option<OrientationSample>,
    lambda1: f64,
) -> Result<LossEval> {
    let mut g = Graph::new();
    let p = BoundParams::trainable(&mut g, params)?;
    let ls = supervised_term(&mut g, &p, source, &masks.multipliers(mask_index)?)?;
    let mut parts = LossParts {
        supervised: g.value(ls).data()[0],
        ..Default::default()
    };
    let mut loss = ls;
    let mut correct = None;
    if let Some(t) = target {
        let (la, ok) = aux_term(&mut g, &p, t)?;
        parts.aux = g.value(la).data()[0];
        let weighted = g.scale(la, lambda1)?;
        loss = g.add(ls, weighted)?;
        correct = Some(ok);
    }
    parts.total = g.value(loss).data()[0];
    finish(&g, loss, parts, correct)
}

/// Pseudo-label fine-tuning loss for round `round` (1-based).
///
/// `L_s + lambda2 * sum_pixels (keep * (y_bar - F_m(x_t)))^2`, optionally plus
/// `lambda1 * L_a` when the orientation term is kept in stage 2. Labels must
/// come from the previous round's parameters.
#[allow(clippy::too_many_arguments)]
pub fn loss_stage2(
    params: &ModelParams,
    round: usize,
    masks: &MaskSet,
    mask_index: usize,
    source: SourceSample,
    target_image: &Tensor,
    target_index: usize,
    labels: &PseudoLabelSet,
    lambda2: f64,
    aux: Option<(OrientationSample, f64)>,
) -> Result<LossEval> {
    if labels.refresh + 1 != round {
        return Err(TrainError::InvariantViolation(format!(
            "round {round} needs pseudo labels from refresh {}, got refresh {}",
            round.wrapping_sub(1),
            labels.refresh
        )));
    }
    let label = labels.labels.get(target_index).ok_or_else(|| {
        TrainError::InvalidArgument(format!(
            "no pseudo label for target image {target_index} ({} labels)",
            labels.labels.len()
        ))
    })?;
    let hw = image_hw(target_image)?;
    if label.mean.shape() != [1, hw.0, hw.1] {
        return invalid("pseudo label and target image sizes differ");
    }
    let mask = masks.multipliers(mask_index)?;
    let mut g = Graph::new();
    let p = BoundParams::trainable(&mut g, params)?;
    let ls = supervised_term(&mut g, &p, source, &mask)?;

    let xt = g.constant(target_image.clone())?;
    let f = p.encode(&mut g, xt)?;
    let pred = p.decode(&mut g, f, &mask, hw)?;
    let ybar = g.constant(label.mean.clone())?;
    let keep = g.constant(label.keep.clone())?;
    let r = g.sub(ybar, pred)?;
    let r = g.mul(keep, r)?;
    let r = g.scale(r, p.output_scale())?;
    let sq = g.square(r)?;
    let lp = g.sum_all(sq)?;
    let weighted = g.scale(lp, lambda2)?;
    let mut loss = g.add(ls, weighted)?;

    let mut parts = LossParts {
        supervised: g.value(ls).data()[0],
        pseudo: g.value(lp).data()[0],
        ..Default::default()
    };
    let mut correct = None;
    if let Some((sample, lambda1)) = aux {
        let (la, ok) = aux_term(&mut g, &p, sample)?;
        parts.aux = g.value(la).data()[0];
        let w = g.scale(la, lambda1)?;
        loss = g.add(loss, w)?;
        correct = Some(ok);
    }
    parts.total = g.value(loss).data()[0];
    finish(&g, loss, parts, correct)
}
