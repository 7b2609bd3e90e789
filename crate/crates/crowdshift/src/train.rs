//! Variant dispatch with stage-1 sharing.
//!
//! Several variants start with the same stage 1: OURS-IMG, OURS and OURS-DUP
//! share the flip pretraining, and OURS-PIX's source-only pretraining is a
//! prefix of the BASELINE run. Training is a pure function of the config, so
//! computing a shared stage once gives bit-identical results to running every
//! variant on its own.

use std::collections::BTreeMap;

use netmodel::Model;
use selftrain::{init_model, run_stage2, AuxTask, Checkpoint, PseudoLabelSummary, Stage1Trainer, StageReport, TrainConfig};

use crate::config::{canonical_json, ExperimentConfig, Variant};
use crate::data::TrainingData;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanKind {
    /// Source supervision only, for `stage1_iters + rounds * stage2_iters`
    /// steps so that BASELINE sees as many updates as the two-stage runs.
    SourceOnly,
    /// Stage 1 and nothing else.
    Stage1Only,
    /// Stage 1 followed by the pseudo-label rounds.
    TwoStage,
}

/// One training job: a named configuration and what to run.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub label: String,
    pub variant: Variant,
    pub config: TrainConfig,
    pub kind: PlanKind,
}

impl Plan {
    pub fn new(exp: &ExperimentConfig, variant: Variant, seed: u64) -> Self {
        let kind = match variant {
            Variant::Baseline => PlanKind::SourceOnly,
            Variant::OursImg => PlanKind::Stage1Only,
            _ => PlanKind::TwoStage,
        };
        Self {
            label: variant.name().to_string(),
            variant,
            config: exp.train_config(variant, seed),
            kind,
        }
    }

    /// Number of stage-1 steps (source-only steps for BASELINE).
    pub fn stage1_steps(&self) -> usize {
        match self.kind {
            PlanKind::SourceOnly => self.config.stage1_iters + self.config.rounds * self.config.stage2_iters,
            _ => self.config.stage1_iters,
        }
    }

    /// Identifies the stage-1 trajectory: the config with every field that
    /// stage 1 does not read reset.
    fn stage1_key(&self) -> String {
        let d = TrainConfig::default();
        let mut c = TrainConfig {
            alpha: d.alpha,
            lambda2: d.lambda2,
            rounds: d.rounds,
            stage1_iters: 0,
            stage2_iters: 0,
            aux_in_stage2: false,
            ..self.config.clone()
        };
        if c.aux_task == AuxTask::None {
            c.lambda1 = 0.0;
        }
        canonical_json(&serde_json::to_value(&c).expect("config serializes"))
    }
}

/// A model after one stage together with that stage's report.
#[derive(Clone, Debug)]
pub struct StageArtifact {
    pub report: StageReport,
    pub model: Model,
}

#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub plan: Plan,
    /// Stage 1 (or the source-only run), then one entry per round.
    pub stages: Vec<StageArtifact>,
    pub label_builds: Vec<PseudoLabelSummary>,
}

impl PlanOutcome {
    pub fn model(&self) -> &Model {
        &self.stages.last().expect("every plan has a stage").model
    }

    pub fn reports(&self) -> Vec<StageReport> {
        self.stages.iter().map(|s| s.report.clone()).collect()
    }
}

/// Runs `plans`, computing every distinct stage-1 trajectory once and
/// snapshotting it at each requested length.
pub fn train_plans(data: &TrainingData, plans: &[Plan]) -> Result<Vec<PlanOutcome>> {
    if plans.is_empty() {
        return invalid("no training plans");
    }
    let source = data.source()?;
    let needs_target = plans.iter().any(|p| p.kind == PlanKind::TwoStage || p.config.aux_task.is_active());
    if needs_target && data.target_images.is_empty() {
        return invalid("these variants need target-train images");
    }

    let mut lengths: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for p in plans {
        p.config.validate()?;
        lengths.entry(p.stage1_key()).or_default().push(p.stage1_steps());
    }
    let mut snapshots: BTreeMap<(String, usize), StageArtifact> = BTreeMap::new();
    for (key, mut steps) in lengths {
        steps.sort_unstable();
        steps.dedup();
        let first = plans.iter().find(|p| p.stage1_key() == key).expect("key came from a plan");
        let mut trainer = Stage1Trainer::new(init_model(&first.config)?, &first.config)?;
        for n in steps {
            trainer.run(source, &data.target_images, n - trainer.iterations())?;
            log::info!("{}: {} after {n} steps", first.label, trainer.report().stage);
            snapshots.insert(
                (key.clone(), n),
                StageArtifact {
                    report: trainer.report(),
                    model: trainer.model().clone(),
                },
            );
        }
    }

    plans
        .iter()
        .map(|p| {
            let start = snapshots[&(p.stage1_key(), p.stage1_steps())].clone();
            let mut stages = vec![start];
            let mut label_builds = Vec::new();
            if p.kind == PlanKind::TwoStage {
                let mut rounds = Vec::new();
                let mut keep = |c: Checkpoint| {
                    log::info!("{}: {} done", p.label, c.stage);
                    rounds.push(StageArtifact {
                        report: c.report.clone(),
                        model: c.model.clone(),
                    });
                    Ok(())
                };
                let (_, _, builds) =
                    run_stage2(stages[0].model.clone(), source, &data.target_images, &p.config, &mut keep)?;
                stages.extend(rounds);
                label_builds = builds;
            }
            Ok(PlanOutcome {
                plan: p.clone(),
                stages,
                label_builds,
            })
        })
        .collect()
}
