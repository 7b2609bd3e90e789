use std::path::{Path, PathBuf};
use std::process::Command;

use crowdshift::*;
use scenegen::{density_reads, image_reads};
use tempfile::TempDir;

fn tiny_config(data: &Path, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dataset = DatasetConfig {
        height: 16,
        width: 16,
        mean_count: 6.0,
        source_train: 6,
        source_test: 4,
        target_train: 4,
        target_test: 4,
        ..Default::default()
    };
    c.train.stage1_iters = 8;
    c.train.stage2_iters = 4;
    c.train.lambda1 = 0.5;
    c.seeds = vec![1];
    c.data_dir = data.to_path_buf();
    c.out = out.to_path_buf();
    c
}

struct Setup {
    _tmp: TempDir,
    config: ExperimentConfig,
    config_path: PathBuf,
}

fn setup() -> Setup {
    let tmp = TempDir::new().unwrap();
    let config = tiny_config(&tmp.path().join("data"), &tmp.path().join("runs"));
    cmd_generate(&config, &config.data_dir).unwrap();
    let config_path = tmp.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    Setup {
        _tmp: tmp,
        config,
        config_path,
    }
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_crowdshift"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn default_splits_have_the_documented_sizes() {
    let tmp = TempDir::new().unwrap();
    let c = ExperimentConfig::default();
    let sizes: Vec<(String, usize, bool)> = SPLITS
        .iter()
        .map(|s| {
            let d = generate_split(&c.dataset, s).unwrap();
            (d.split.clone(), d.len(), d.labels_withheld)
        })
        .collect();
    assert_eq!(
        sizes,
        [
            ("source-train".into(), 200, false),
            ("source-test".into(), 100, false),
            ("target-train".into(), 50, true),
            ("target-test".into(), 100, false),
        ]
    );
    drop(tmp);
}

#[test]
fn regeneration_is_checksum_identical() {
    let tmp = TempDir::new().unwrap();
    let c = tiny_config(&tmp.path().join("a"), &tmp.path().join("runs"));
    let a = cmd_generate(&c, &tmp.path().join("a")).unwrap();
    let b = cmd_generate(&c, &tmp.path().join("b")).unwrap();
    assert_eq!(a, b);
    let mut other = c.clone();
    other.dataset.seed = 9;
    assert_ne!(cmd_generate(&other, &tmp.path().join("c")).unwrap(), a);
}

#[test]
fn exit_codes() {
    let s = setup();
    let tmp = s.config_path.parent().unwrap();
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code().unwrap();

    // Invalid arguments.
    assert_eq!(code(&["train", "--variant", "OURS-45"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    let bad = tmp.join("bad.json");
    std::fs::write(&bad, r#"{"dataset":{"target_train":0}}"#).unwrap();
    assert_eq!(code(&["generate", "--config", bad.to_str().unwrap(), "--out", tmp.join("z").to_str().unwrap()]), 2);
    std::fs::write(&bad, r#"{"unknown_key":1}"#).unwrap();
    assert_eq!(code(&["generate", "--config", bad.to_str().unwrap()]), 2);

    // I/O: missing dataset, named by split.
    let out = bin()
        .args(["train", "--config", s.config_path.to_str().unwrap(), "--dataset", tmp.join("nowhere").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("source-train"));

    // Invariant: unlabeled split cannot be evaluated.
    let model = netmodel::Model::init(s.config.train.network(), 1).unwrap();
    let ckpt = tmp.join("m.ckpt.json");
    netmodel::save_checkpoint(&model, &ckpt).unwrap();
    let target_train = split_dir(&s.config.data_dir, TARGET_TRAIN);
    assert_eq!(
        code(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--dataset", target_train.to_str().unwrap()]),
        4
    );

    // Version-mismatched checkpoint is a load error.
    let text = std::fs::read_to_string(&ckpt).unwrap().replace("\"version\":1", "\"version\":7");
    let old = tmp.join("old.ckpt.json");
    std::fs::write(&old, text).unwrap();
    let data = s.config.data_dir.to_str().unwrap();
    assert_eq!(code(&["eval", "--checkpoint", old.to_str().unwrap(), "--dataset", data]), 3);
    assert_eq!(code(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--dataset", data]), 0);
}

#[test]
fn cli_round_trip_generate_train_eval_report() {
    let s = setup();
    let tmp = s.config_path.parent().unwrap();
    let cfg = s.config_path.to_str().unwrap();
    let data2 = tmp.join("data2");
    let ok = |args: &[&str]| {
        let o = bin().args(args).output().unwrap();
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let listing = ok(&["generate", "--config", cfg, "--out", data2.to_str().unwrap(), "--seed", "0"]);
    assert!(listing.contains("target-train\t4"));
    let runs = tmp.join("runs2");
    for v in ["BASELINE", "OURS"] {
        ok(&["train", "--config", cfg, "--variant", v, "--seed", "3", "--out", runs.to_str().unwrap(), "--dataset", data2.to_str().unwrap()]);
    }
    let rec = RunRecord::load(&runs.join("OURS/seed3").join(RECORD_FILE)).unwrap();
    assert_eq!(rec.seed, 3);
    assert_eq!(rec.stages.len(), 3);
    assert_eq!(rec.target_label_reads, 0);
    for p in rec.artifacts.checkpoints.iter().chain(&rec.artifacts.stage_reports) {
        assert!(p.is_file(), "{}", p.display());
    }
    let json = ok(&["eval", "--checkpoint", rec.artifacts.final_checkpoint.to_str().unwrap(), "--dataset", data2.to_str().unwrap()]);
    let m: evalkit::MetricsReport = serde_json::from_str(&json).unwrap();
    assert_eq!(m, rec.metrics[TARGET_TEST]);
    let summary = ok(&["report", "--out", runs.to_str().unwrap()]);
    assert!(summary.contains("2 rows"), "{summary}");
    let csv = std::fs::read_to_string(runs.join("report/summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn every_variant_is_deterministic_and_never_reads_target_labels() {
    let s = setup();
    let target_train = split_dir(&s.config.data_dir, TARGET_TRAIN);
    let mut records = Vec::new();
    for v in Variant::ALL {
        let mut c = s.config.clone();
        c.variant = v;
        let images_before = image_reads(&target_train);
        let a = cmd_train(&c, 1).unwrap().remove(0);
        if v == Variant::Baseline {
            assert_eq!(image_reads(&target_train), images_before, "BASELINE opened target-train images");
        }
        c.out = c.out.join("again");
        let b = cmd_train(&c, 2).unwrap().remove(0);
        assert_eq!(a.metrics, b.metrics, "{v}");
        assert_eq!(a.config_hash, b.config_hash);
        assert_eq!(a.stages.last().unwrap().checksum, b.stages.last().unwrap().checksum);
        records.push(a);
    }
    assert_eq!(density_reads(&target_train), 0);
    assert!(records.iter().all(|r| r.target_label_reads == 0));

    let stages = |v: Variant| records.iter().find(|r| r.variant == v).unwrap().stages.len();
    assert_eq!(stages(Variant::Baseline), 1);
    assert_eq!(stages(Variant::OursImg), 1);
    assert_eq!(stages(Variant::Ours), 3);
    assert_eq!(records[0].stages[0].iterations, 8 + 2 * 4);

    let report = cmd_report(&records, &s.config.out.join("report"), true).unwrap();
    assert_eq!(report.rows, Variant::ALL.len() * s.config.seeds.len());
    assert_eq!(report.maps.len(), report.rows * 4);
    let csv = std::fs::read_to_string(&report.csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
    let base: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(base[0], "BASELINE");
    assert!(base[3].parse::<f64>().unwrap() >= 0.0);
    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report.maps[0].with_extension("json")).unwrap()).unwrap();
    assert!(side["predicted_count"].as_f64().unwrap() >= 0.0);
    assert!(side["true_count"].as_f64().is_some());
}

#[test]
fn shared_stage1_matches_standalone_training() {
    let s = setup();
    let data = TrainingData::load(&s.config.data_dir, true).unwrap();
    let plans: Vec<Plan> = [Variant::Baseline, Variant::OursPix, Variant::OursImg, Variant::Ours, Variant::OursDup]
        .into_iter()
        .map(|v| Plan::new(&s.config, v, 2))
        .collect();
    let joint = train_plans(&data, &plans).unwrap();
    for (p, j) in plans.iter().zip(&joint) {
        let alone = train_plans(&data, std::slice::from_ref(p)).unwrap().remove(0);
        assert_eq!(alone.model(), j.model(), "{}", p.label);
        assert_eq!(alone.reports().len(), j.reports().len());
    }
    // OURS-IMG is exactly the first stage of OURS.
    assert_eq!(joint[2].model(), &joint[3].stages[0].model);
}

#[test]
fn ours_without_auxiliary_task_is_ours_pix() {
    let s = setup();
    let data = TrainingData::load(&s.config.data_dir, true).unwrap();
    let mut ours = Plan::new(&s.config, Variant::Ours, 5);
    ours.config.aux_task = selftrain::AuxTask::None;
    let pix = Plan::new(&s.config, Variant::OursPix, 5);
    let out = train_plans(&data, &[ours, pix]).unwrap();
    assert_eq!(out[0].model(), out[1].model());
}

#[test]
fn ground_truth_as_prediction_scores_zero() {
    let s = setup();
    let (_, truth) = load_labeled(&s.config.data_dir, TARGET_TEST).unwrap();
    let r = evalkit::evaluate_maps(&truth, &truth, None).unwrap();
    assert_eq!((r.mae, r.rmse, r.n), (0.0, 0.0, 4));
}

#[test]
fn roi_restricts_counts() {
    let s = setup();
    let tmp = s.config_path.parent().unwrap();
    let model = netmodel::Model::init(s.config.train.network(), 1).unwrap();
    let ckpt = tmp.join("m.ckpt.json");
    netmodel::save_checkpoint(&model, &ckpt).unwrap();
    let roi = tmp.join("roi.pgm");
    std::fs::write(&roi, scenegen::encode_pgm16(&[0u16; 256], 16, 16)).unwrap();
    let split = split_dir(&s.config.data_dir, TARGET_TEST);
    let r = cmd_eval(&ckpt, &split, Some(&roi), 1).unwrap();
    assert!(r.pairs.iter().all(|&(t, e)| t == 0.0 && e == 0.0));
    assert_eq!(r.pearson_r, None);
    let mask = load_roi(&roi, 16, 16).unwrap();
    assert_eq!(mask.sum(), 0.0);
}

#[test]
fn quantized_maps_are_nonnegative_and_faithful() {
    let t = numcore::Tensor::new(vec![1, 1, 4], vec![0.0, 0.5, 2.0, -1e-18]).unwrap();
    let (q, scale, max) = quantize_density(&t);
    assert_eq!(max, 2.0);
    assert_eq!(q, [0, 16384, 65535, 0]);
    assert!((q[1] as f64 * scale - 0.5).abs() < scale);
}
