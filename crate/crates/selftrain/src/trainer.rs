//! Resumable stage runners and the full two-stage schedule.
//!
//! Every random choice comes from its own stream derived from the config
//! seed: source order, target order, mask choice and the orientation coin.
//! Turning the auxiliary task off therefore leaves the source/mask sequence,
//! and with it the density-branch trajectory, unchanged.

use std::time::Instant;

use netmodel::Model;
use numcore::{AdamConfig, AdamState, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenegen::{derive_seed, DensityMap};
use serde::{Deserialize, Serialize};

use crate::config::{AuxTask, TrainConfig};
use crate::error::{invalid, Result};
use crate::losses::{loss_stage1, loss_stage2, LossEval, LossParts, OrientationSample, SourceSample};
use crate::pseudo::{build_pseudo_labels, PseudoLabelSet, PseudoLabelSummary};

const STREAM_INIT: u64 = 0;
const STREAM_SOURCE: u64 = 10;
const STREAM_TARGET: u64 = 11;
const STREAM_MASK: u64 = 12;
const STREAM_COIN: u64 = 13;

/// Labeled source images.
#[derive(Clone, Copy, Debug)]
pub struct LabeledSet<'a> {
    pub images: &'a [Tensor],
    pub densities: &'a [DensityMap],
}

impl<'a> LabeledSet<'a> {
    pub fn new(images: &'a [Tensor], densities: &'a [DensityMap]) -> Result<Self> {
        if images.len() != densities.len() {
            return invalid(format!(
                "{} images but {} density maps",
                images.len(),
                densities.len()
            ));
        }
        Ok(Self { images, densities })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    fn sample(&self, i: usize) -> SourceSample<'a> {
        SourceSample {
            image: &self.images[i],
            density: &self.densities[i],
        }
    }
}

/// Visits all indices in a fresh random order each epoch.
#[derive(Clone, Debug)]
struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    fn new(seed: u64) -> Self {
        Self {
            order: Vec::new(),
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn next(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return invalid("cannot sample from an empty dataset");
        }
        if self.order.len() != n || self.pos == n {
            self.order = (0..n).collect();
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        Ok(self.order[self.pos - 1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    /// `"stage1"`, `"source_only"` or `"round<k>"`.
    pub stage: String,
    pub iterations: usize,
    pub loss_total: Vec<f64>,
    pub loss_supervised: Vec<f64>,
    /// Unweighted orientation cross-entropy; 0 where the term is inactive.
    pub loss_aux: Vec<f64>,
    /// Unweighted pseudo-label term; 0 outside stage 2.
    pub loss_pseudo: Vec<f64>,
    /// Running training accuracy of the orientation head, if it was trained.
    pub aux_accuracy: Option<f64>,
    pub wall_time_secs: f64,
    /// Parameter checksum after the last iteration, hex encoded.
    pub checksum: String,
    /// Pseudo labels this round trained on.
    pub pseudo_labels: Option<PseudoLabelSummary>,
}

#[derive(Clone, Debug)]
struct Curves {
    total: Vec<f64>,
    supervised: Vec<f64>,
    aux: Vec<f64>,
    pseudo: Vec<f64>,
    aux_hits: usize,
    aux_seen: usize,
    elapsed: f64,
}

impl Curves {
    fn new() -> Self {
        Self {
            total: Vec::new(),
            supervised: Vec::new(),
            aux: Vec::new(),
            pseudo: Vec::new(),
            aux_hits: 0,
            aux_seen: 0,
            elapsed: 0.0,
        }
    }

    fn push(&mut self, eval: &LossEval) {
        let p = eval.parts;
        self.total.push(p.total);
        self.supervised.push(p.supervised);
        self.aux.push(p.aux);
        self.pseudo.push(p.pseudo);
        if let Some(ok) = eval.aux_correct {
            self.aux_seen += 1;
            self.aux_hits += usize::from(ok);
        }
    }

    fn report(&self, stage: String, model: &Model, labels: Option<PseudoLabelSummary>) -> StageReport {
        StageReport {
            stage,
            iterations: self.total.len(),
            loss_total: self.total.clone(),
            loss_supervised: self.supervised.clone(),
            loss_aux: self.aux.clone(),
            loss_pseudo: self.pseudo.clone(),
            aux_accuracy: (self.aux_seen > 0).then(|| self.aux_hits as f64 / self.aux_seen as f64),
            wall_time_secs: self.elapsed,
            checksum: format!("{:016x}", model.params.checksum()),
            pseudo_labels: labels,
        }
    }
}

/// Optimizer, samplers and random streams of one stage.
#[derive(Clone, Debug)]
struct Streams {
    adam: AdamState,
    source: EpochSampler,
    target: EpochSampler,
    mask: ChaCha8Rng,
    coin: ChaCha8Rng,
}

impl Streams {
    fn new(model: &Model, config: &TrainConfig, stage: u64) -> Self {
        let s = |stream| derive_seed(config.seed, stream, stage);
        Self {
            adam: AdamState::new(AdamConfig::with_lr(config.lr), model.params.tensors()),
            source: EpochSampler::new(s(STREAM_SOURCE)),
            target: EpochSampler::new(s(STREAM_TARGET)),
            mask: ChaCha8Rng::seed_from_u64(s(STREAM_MASK)),
            coin: ChaCha8Rng::seed_from_u64(s(STREAM_COIN)),
        }
    }

    /// Draws a target image and the coin `beta`; transforms when `beta >= 0.5`.
    fn orientation_sample(&mut self, target: &[Tensor], task: AuxTask) -> Result<(usize, Tensor, bool)> {
        let t = self.target.next(target.len())?;
        let beta: f64 = self.coin.random();
        let transformed = beta >= 0.5;
        let image = if transformed {
            task.apply(&target[t])?
        } else {
            target[t].clone()
        };
        Ok((t, image, transformed))
    }

    fn update(&mut self, model: &mut Model, grads: &[Tensor]) -> Result<()> {
        self.adam.step(model.params.tensors_mut(), grads)?;
        Ok(())
    }
}

/// Fresh model for a config: weights and masks from the config seed.
pub fn init_model(config: &TrainConfig) -> Result<Model> {
    Ok(Model::init(config.network(), derive_seed(config.seed, STREAM_INIT, 0))?)
}

/// Stage 1: supervised density loss on source plus the orientation loss on
/// target. With `AuxTask::None` this is plain source-only training and the
/// target images are never touched.
#[derive(Clone, Debug)]
pub struct Stage1Trainer {
    model: Model,
    config: TrainConfig,
    streams: Streams,
    curves: Curves,
}

impl Stage1Trainer {
    pub fn new(model: Model, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let streams = Streams::new(&model, config, 0);
        Ok(Self {
            model,
            config: config.clone(),
            streams,
            curves: Curves::new(),
        })
    }

    /// One Adam update on one source image and (if the auxiliary task is
    /// active) one target image.
    pub fn step(&mut self, source: LabeledSet, target: &[Tensor]) -> Result<LossParts> {
        let started = Instant::now();
        let s = self.streams.source.next(source.len())?;
        let m = self.streams.mask.random_range(0..self.model.masks.len());
        let task = self.config.aux_task;
        let aux = if task.is_active() {
            Some(self.streams.orientation_sample(target, task)?)
        } else {
            None
        };
        let sample = aux.as_ref().map(|(_, image, transformed)| OrientationSample {
            image,
            transformed: *transformed,
        });
        let eval = loss_stage1(
            &self.model.params,
            &self.model.masks,
            m,
            source.sample(s),
            sample,
            self.config.lambda1,
        )?;
        self.streams.update(&mut self.model, &eval.grads)?;
        self.curves.push(&eval);
        self.curves.elapsed += started.elapsed().as_secs_f64();
        Ok(eval.parts)
    }

    pub fn run(&mut self, source: LabeledSet, target: &[Tensor], iterations: usize) -> Result<()> {
        for _ in 0..iterations {
            self.step(source, target)?;
        }
        Ok(())
    }

    pub fn iterations(&self) -> usize {
        self.curves.total.len()
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn report(&self) -> StageReport {
        let name = if self.config.aux_task.is_active() { "stage1" } else { "source_only" };
        self.curves.report(name.into(), &self.model, None)
    }

    pub fn finish(self) -> (Model, StageReport) {
        let report = self.report();
        (self.model, report)
    }
}

/// One recursive stage-2 round on a fixed set of pseudo labels.
#[derive(Clone, Debug)]
pub struct Stage2Trainer {
    model: Model,
    config: TrainConfig,
    round: usize,
    labels: PseudoLabelSet,
    streams: Streams,
    curves: Curves,
}

impl Stage2Trainer {
    /// Starts round `round` (1-based) with fresh Adam moments.
    pub fn new(model: Model, config: &TrainConfig, round: usize, labels: PseudoLabelSet) -> Result<Self> {
        config.validate()?;
        if round == 0 {
            return invalid("stage-2 rounds are numbered from 1");
        }
        let streams = Streams::new(&model, config, round as u64);
        Ok(Self {
            model,
            config: config.clone(),
            round,
            labels,
            streams,
            curves: Curves::new(),
        })
    }

    pub fn step(&mut self, source: LabeledSet, target: &[Tensor]) -> Result<LossParts> {
        let started = Instant::now();
        if target.len() != self.labels.labels.len() {
            return invalid(format!(
                "{} target images but {} pseudo labels",
                target.len(),
                self.labels.labels.len()
            ));
        }
        let s = self.streams.source.next(source.len())?;
        let m = self.streams.mask.random_range(0..self.model.masks.len());
        let t = self.streams.target.next(target.len())?;
        let task = self.config.aux_task;
        let aux = if self.config.aux_in_stage2 && task.is_active() {
            Some(self.streams.orientation_sample(target, task)?)
        } else {
            None
        };
        let eval = loss_stage2(
            &self.model.params,
            self.round,
            &self.model.masks,
            m,
            source.sample(s),
            &target[t],
            t,
            &self.labels,
            self.config.lambda2,
            aux.as_ref().map(|(_, image, transformed)| {
                (
                    OrientationSample {
                        image,
                        transformed: *transformed,
                    },
                    self.config.lambda1,
                )
            }),
        )?;
        self.streams.update(&mut self.model, &eval.grads)?;
        self.curves.push(&eval);
        self.curves.elapsed += started.elapsed().as_secs_f64();
        Ok(eval.parts)
    }

    pub fn run(&mut self, source: LabeledSet, target: &[Tensor], iterations: usize) -> Result<()> {
        for _ in 0..iterations {
            self.step(source, target)?;
        }
        Ok(())
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn report(&self) -> StageReport {
        self.curves
            .report(format!("round{}", self.round), &self.model, Some(self.labels.summary()))
    }

    pub fn finish(self) -> (Model, StageReport) {
        let report = self.report();
        (self.model, report)
    }
}

/// Emitted after stage 1 and after every stage-2 round.
#[derive(Debug)]
pub struct Checkpoint<'a> {
    pub stage: &'a str,
    pub model: &'a Model,
    pub report: &'a StageReport,
}

#[derive(Clone, Debug)]
pub struct TwoStageOutcome {
    pub model: Model,
    pub stage1: StageReport,
    pub rounds: Vec<StageReport>,
    /// Summaries of the pseudo-label builds, one per round.
    pub label_builds: Vec<PseudoLabelSummary>,
}

/// K recursive pseudo-label rounds starting from `model` (the stage-1 output).
pub fn run_stage2(
    model: Model,
    source: LabeledSet,
    target: &[Tensor],
    config: &TrainConfig,
    on_checkpoint: &mut dyn FnMut(Checkpoint) -> Result<()>,
) -> Result<(Model, Vec<StageReport>, Vec<PseudoLabelSummary>)> {
    config.validate()?;
    if target.is_empty() {
        return invalid("stage 2 needs target images");
    }
    let mut model = model;
    let mut builds = Vec::with_capacity(config.rounds);
    let mut reports = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        // Labels for round k come from the parameters after round k-1.
        let labels = build_pseudo_labels(&model, target, config.alpha, round - 1, config.threads)?;
        builds.push(labels.summary());
        let mut trainer = Stage2Trainer::new(model, config, round, labels)?;
        trainer.run(source, target, config.stage2_iters)?;
        let (next, report) = trainer.finish();
        model = next;
        on_checkpoint(Checkpoint {
            stage: &report.stage,
            model: &model,
            report: &report,
        })?;
        reports.push(report);
    }
    Ok((model, reports, builds))
}

/// Stage 1 followed by `config.rounds` stage-2 rounds.
pub fn train_two_stage(
    source: LabeledSet,
    target: &[Tensor],
    config: &TrainConfig,
    on_checkpoint: &mut dyn FnMut(Checkpoint) -> Result<()>,
) -> Result<TwoStageOutcome> {
    config.validate()?;
    if source.is_empty() || target.is_empty() {
        return invalid("two-stage training needs nonempty source and target sets");
    }
    let mut s1 = Stage1Trainer::new(init_model(config)?, config)?;
    s1.run(source, target, config.stage1_iters)?;
    let (model, stage1) = s1.finish();
    on_checkpoint(Checkpoint {
        stage: "stage1",
        model: &model,
        report: &stage1,
    })?;
    let (model, rounds, label_builds) = run_stage2(model, source, target, config, on_checkpoint)?;
    Ok(TwoStageOutcome {
        model,
        stage1,
        rounds,
        label_builds,
    })
}

/// Supervised training on the source split only; target data is not an input.
pub fn train_source_only(source: LabeledSet, config: &TrainConfig, iterations: usize) -> Result<(Model, StageReport)> {
    let config = TrainConfig {
        aux_task: AuxTask::None,
        ..config.clone()
    };
    let mut t = Stage1Trainer::new(init_model(&config)?, &config)?;
    t.run(source, &[], iterations)?;
    Ok(t.finish())
}

/// Held-out accuracy of the orientation head: every image is shown once
/// upright and once transformed.
pub fn orientation_accuracy(model: &Model, images: &[Tensor], task: AuxTask) -> Result<f64> {
    if images.is_empty() || !task.is_active() {
        return invalid("orientation accuracy needs images and an active task");
    }
    let mut hits = 0usize;
    for img in images {
        let [up, _] = model.forward_aux(img)?;
        hits += usize::from(up > 0.5);
        let [_, tr] = model.forward_aux(&task.apply(img)?)?;
        hits += usize::from(tr > 0.5);
    }
    Ok(hits as f64 / (2 * images.len()) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_sampler_visits_everything_once_per_epoch() {
        let mut s = EpochSampler::new(4);
        for _ in 0..3 {
            let mut seen: Vec<usize> = (0..7).map(|_| s.next(7).unwrap()).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..7).collect::<Vec<_>>());
        }
        assert!(s.next(0).is_err());
    }

    #[test]
    fn coin_is_fair() {
        let mut cfg = TrainConfig::default();
        let mut flips = 0;
        let target = [Tensor::zeros(&[1, 2, 2])];
        for seed in [7u64] {
            cfg.seed = seed;
            let model = Model::init(netmodel::NetworkConfig::tiny(), 0).unwrap();
            let mut st = Streams::new(&model, &cfg, 0);
            for _ in 0..10_000 {
                flips += usize::from(st.orientation_sample(&target, AuxTask::FlipVertical).unwrap().2);
            }
        }
        let frac = flips as f64 / 10_000.0;
        assert!((0.48..=0.52).contains(&frac), "{frac}");
    }
}
