use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use evalkit::{evaluate, MetricsReport};
use netmodel::{load_checkpoint, save_checkpoint, Model};
use numcore::Tensor;
use scenegen::{decode_pgm16, density_reads, encode_pgm16, Manifest};
use serde::Serialize;

use crate::config::{ExperimentConfig, Variant};
use crate::data::{self, TrainingData, SOURCE_TEST, TARGET_TEST, TARGET_TRAIN};
use crate::error::{invalid, CliError, Result};
use crate::record::{write_json, Artifacts, RunRecord, RECORD_FILE};
use crate::train::{train_plans, Plan, PlanOutcome};

/// Writes the four splits to `root`.
pub fn cmd_generate(config: &ExperimentConfig, root: &Path) -> Result<Vec<Manifest>> {
    let manifests = data::generate_all(&config.dataset, root)?;
    for m in &manifests {
        log::info!("{}: {} scenes", m.split, m.entries.len());
    }
    Ok(manifests)
}

pub fn run_dir(out: &Path, variant: Variant, seed: u64) -> PathBuf {
    out.join(variant.name()).join(format!("seed{seed}"))
}

/// Metrics of `model` on a labeled split under `root`.
pub fn evaluate_split(model: &Model, root: &Path, split: &str, threads: usize) -> Result<MetricsReport> {
    let (images, truth) = data::load_labeled(root, split)?;
    Ok(evaluate(model, &images, &truth, None, true, threads)?)
}

/// Writes checkpoints, stage reports and the run record for one outcome.
pub fn save_outcome(config: &ExperimentConfig, outcome: &PlanOutcome, threads: usize) -> Result<RunRecord> {
    let plan = &outcome.plan;
    let seed = plan.config.seed;
    let dir = run_dir(&config.out, plan.variant, seed);
    let mut checkpoints = Vec::new();
    let mut stage_reports = Vec::new();
    for s in &outcome.stages {
        let ckpt = dir.join(format!("{}.ckpt.json", s.report.stage));
        save_checkpoint(&s.model, &ckpt)?;
        let rep = dir.join(format!("{}.report.json", s.report.stage));
        write_json(&rep, &s.report)?;
        checkpoints.push(ckpt);
        stage_reports.push(rep);
    }
    let final_checkpoint = dir.join("final.ckpt.json");
    save_checkpoint(outcome.model(), &final_checkpoint)?;

    let target_label_reads = density_reads(&data::split_dir(&config.data_dir, TARGET_TRAIN));
    let mut metrics = BTreeMap::new();
    for split in [SOURCE_TEST, TARGET_TEST] {
        metrics.insert(split.to_string(), evaluate_split(outcome.model(), &config.data_dir, split, threads)?);
    }
    let record = RunRecord {
        config_hash: config.run_hash(plan.variant, seed),
        variant: plan.variant,
        seed,
        train: plan.config.clone(),
        data_dir: config.data_dir.clone(),
        metrics,
        stages: outcome.reports(),
        label_builds: outcome.label_builds.clone(),
        artifacts: Artifacts {
            run_dir: dir.clone(),
            checkpoints,
            stage_reports,
            final_checkpoint,
        },
        target_label_reads,
    };
    record.save(&dir.join(RECORD_FILE))?;
    Ok(record)
}

/// Trains `config.variant` for every seed and writes one run directory each.
pub fn cmd_train(config: &ExperimentConfig, threads: usize) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let data = TrainingData::load(&config.data_dir, config.variant.uses_target())?;
    let mut records = Vec::new();
    for &seed in &config.seeds {
        let mut plan = Plan::new(config, config.variant, seed);
        plan.config.threads = threads;
        let outcome = train_plans(&data, std::slice::from_ref(&plan))?.remove(0);
        let record = save_outcome(config, &outcome, threads)?;
        if record.target_label_reads != 0 {
            return Err(CliError::Invariant(format!(
                "training read {} target-train density files",
                record.target_label_reads
            )));
        }
        log::info!(
            "{} seed {seed}: target-test MAE {:.3}",
            config.variant,
            record.metrics[TARGET_TEST].mae
        );
        records.push(record);
    }
    Ok(records)
}

/// Reads a binary region-of-interest mask: any nonzero sample is inside.
pub fn load_roi(path: &Path, height: usize, width: usize) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path.display(), e))?;
    let samples = decode_pgm16(&bytes, path, height, width)?;
    Ok(Tensor::new(
        vec![1, height, width],
        samples.iter().map(|&s| if s > 0 { 1.0 } else { 0.0 }).collect(),
    )?)
}

/// Single-pass evaluation of a checkpoint on one labeled split directory.
pub fn cmd_eval(checkpoint: &Path, split_dir: &Path, roi: Option<&Path>, threads: usize) -> Result<MetricsReport> {
    let model = load_checkpoint(checkpoint)?;
    let d = scenegen::DatasetDir::open(split_dir)?;
    if d.manifest().labels_withheld {
        return Err(CliError::Invariant(format!(
            "{} is an unlabeled split and cannot be evaluated",
            split_dir.display()
        )));
    }
    let (h, w) = (d.manifest().height, d.manifest().width);
    let roi = roi.map(|p| load_roi(p, h, w)).transpose()?;
    let images = d.load_images()?;
    let truth = d.load_densities()?;
    Ok(evaluate(&model, &images, &truth, roi.as_ref(), roi.is_none(), threads)?)
}

#[derive(Debug, Serialize)]
struct MapSidecar {
    image: String,
    predicted_count: f64,
    true_count: f64,
    /// Density = sample * scale.
    scale: f64,
    max_density: f64,
}

/// Output of [`cmd_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub csv: PathBuf,
    pub rows: usize,
    pub maps: Vec<PathBuf>,
}

pub const CSV_HEADER: [&str; 10] = [
    "variant",
    "seed",
    "config_hash",
    "target_mae",
    "target_rmse",
    "target_r_au",
    "source_mae",
    "source_rmse",
    "source_r_au",
    "n_target",
];

fn opt(v: Option<f64>) -> String {
    v.map(|r| r.to_string()).unwrap_or_default()
}

/// Summary CSV with one row per record, plus predicted target-test density
/// maps as 16-bit graymaps with a JSON sidecar carrying the counts.
pub fn cmd_report(records: &[RunRecord], out: &Path, with_maps: bool) -> Result<ReportSummary> {
    if records.is_empty() {
        return invalid("report needs at least one run record");
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out.display(), e))?;
    let csv_path = out.join("summary.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CliError::io(csv_path.display(), e))?;
    let csv_err = |e: csv::Error| CliError::io("summary.csv", e);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.variant, r.seed));
    for r in &sorted {
        let (t, s) = match (r.metrics.get(TARGET_TEST), r.metrics.get(SOURCE_TEST)) {
            (Some(t), Some(s)) => (t, s),
            _ => return invalid(format!("record {} seed {} lacks test metrics", r.variant, r.seed)),
        };
        w.write_record([
            r.variant.name().to_string(),
            r.seed.to_string(),
            r.config_hash.clone(),
            t.mae.to_string(),
            t.rmse.to_string(),
            opt(t.pearson_r),
            s.mae.to_string(),
            s.rmse.to_string(),
            opt(s.pearson_r),
            t.n.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::io(csv_path.display(), e))?;

    let mut maps = Vec::new();
    if with_maps {
        for r in &sorted {
            let model = load_checkpoint(&r.artifacts.final_checkpoint)?;
            let (images, truth) = data::load_labeled(&r.data_dir, TARGET_TEST)?;
            let dir = out.join("maps").join(r.variant.name()).join(format!("seed{}", r.seed));
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(dir.display(), e))?;
            for (i, (img, gt)) in images.iter().zip(&truth).enumerate() {
                let pred = model.predict_single(img)?;
                let name = format!("pred_{i:05}.pgm");
                let path = dir.join(&name);
                let (h, w) = (pred.height(), pred.width());
                let (samples, scale, max) = quantize_density(pred.values());
                std::fs::write(&path, encode_pgm16(&samples, h, w)).map_err(|e| CliError::io(path.display(), e))?;
                write_json(
                    &dir.join(format!("pred_{i:05}.json")),
                    &MapSidecar {
                        image: name,
                        predicted_count: pred.count(),
                        true_count: gt.count(),
                        scale,
                        max_density: max,
                    },
                )?;
                maps.push(path);
            }
        }
    }
    Ok(ReportSummary {
        csv: csv_path,
        rows: sorted.len(),
        maps,
    })
}

/// Maps a nonnegative density to 16-bit samples; returns `(samples, scale, max)`.
pub fn quantize_density(values: &Tensor) -> (Vec<u16>, f64, f64) {
    let max = values.data().iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { max / 65535.0 } else { 0.0 };
    let samples = values
        .data()
        .iter()
        .map(|&v| if scale > 0.0 { (v.max(0.0) / scale).round().min(65535.0) as u16 } else { 0 })
        .collect();
    (samples, scale, max)
}
