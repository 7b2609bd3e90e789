use netmodel::{DECODER, ENCODER};
use numcore::Tensor;
use proptest::prelude::*;
use scenegen::{derive_seed, generate_scene, DensityMap, Domain, DomainParams};
use selftrain::*;

struct Data {
    sx: Vec<Tensor>,
    sy: Vec<DensityMap>,
    tx: Vec<Tensor>,
}

fn data() -> Data {
    let gen = |n: usize, p: DomainParams, d: Domain, stream: u64| -> (Vec<Tensor>, Vec<DensityMap>) {
        (0..n)
            .map(|i| {
                let (s, den) = generate_scene(16, 16, 6.0, &p, d, 1.5, derive_seed(3, stream, i as u64)).unwrap();
                (s.image, den)
            })
            .unzip()
    };
    let (sx, sy) = gen(6, DomainParams::source(), Domain::Source, 0);
    let (tx, _) = gen(4, DomainParams::target(), Domain::Target, 1);
    Data { sx, sy, tx }
}

fn small(seed: u64) -> TrainConfig {
    TrainConfig {
        lambda1: 0.5,
        stage1_iters: 12,
        stage2_iters: 6,
        rounds: 2,
        seed,
        ..Default::default()
    }
}

fn no_checkpoints() -> impl FnMut(Checkpoint) -> Result<()> {
    |_| Ok(())
}

#[test]
fn zero_lambda1_matches_no_auxiliary_term() {
    let d = data();
    let src = LabeledSet::new(&d.sx, &d.sy).unwrap();
    let zero = TrainConfig { lambda1: 0.0, ..small(4) };
    let none = TrainConfig { aux_task: AuxTask::None, ..small(4) };
    let mut a = Stage1Trainer::new(init_model(&zero).unwrap(), &zero).unwrap();
    let mut b = Stage1Trainer::new(init_model(&none).unwrap(), &none).unwrap();
    a.run(src, &d.tx, 20).unwrap();
    b.run(src, &d.tx, 20).unwrap();
    let (pa, pb) = (a.model().params.tensors(), b.model().params.tensors());
    for i in ENCODER.chain(DECODER) {
        assert_eq!(pa[i], pb[i], "tensor {i}");
    }
    // The head is reached by a zero-weighted gradient only, so it never moves.
    assert_eq!(a.model().params, b.model().params);
    assert!(a.report().aux_accuracy.is_some());
    assert_eq!(b.report().aux_accuracy, None);
}

#[test]
fn equal_seeds_give_bit_identical_training() {
    let d = data();
    let src = LabeledSet::new(&d.sx, &d.sy).unwrap();
    let run = |seed| train_two_stage(src, &d.tx, &small(seed), &mut no_checkpoints()).unwrap();
    let (a, b, c) = (run(9), run(9), run(10));
    assert_eq!(a.model, b.model);
    assert_eq!(a.stage1.loss_total, b.stage1.loss_total);
    assert_eq!(a.rounds[1].checksum, b.rounds[1].checksum);
    assert_ne!(a.model.params, c.model.params);
}

#[test]
fn schedule_lengths_and_checkpoints() {
    let d = data();
    let src = LabeledSet::new(&d.sx, &d.sy).unwrap();
    let mut seen = Vec::new();
    let out = train_two_stage(src, &d.tx, &small(2), &mut |c: Checkpoint| {
        seen.push((c.stage.to_string(), c.report.iterations, c.model.params.checksum()));
        Ok(())
    })
    .unwrap();
    let stages: Vec<&str> = seen.iter().map(|s| s.0.as_str()).collect();
    assert_eq!(stages, ["stage1", "round1", "round2"]);
    assert_eq!(seen[0].1, 12);
    assert_eq!(out.stage1.loss_total.len(), 12);
    assert_eq!(out.stage1.loss_aux.len(), 12);
    for r in &out.rounds {
        assert_eq!(r.loss_total.len(), 6);
        assert_eq!(r.loss_pseudo.len(), 6);
    }
    assert_eq!(seen[2].2, out.model.params.checksum());
    // Labels of round k were built from the parameters after round k-1.
    let refreshes: Vec<usize> = out.label_builds.iter().map(|b| b.refresh).collect();
    assert_eq!(refreshes, [0, 1]);
    for (r, b) in out.rounds.iter().zip(&out.label_builds) {
        assert_eq!(r.pseudo_labels.as_ref(), Some(b));
        assert_eq!(b.kept, pseudo_keep_count(b.total, 10.0));
    }
}

#[test]
fn single_round_builds_labels_once() {
    let d = data();
    let src = LabeledSet::new(&d.sx, &d.sy).unwrap();
    let out = train_two_stage(src, &d.tx, &TrainConfig { rounds: 1, ..small(1) }, &mut no_checkpoints()).unwrap();
    assert_eq!(out.rounds.len(), 1);
    assert_eq!(out.label_builds.len(), 1);
}

#[test]
fn skipping_stage1_starts_stage2_from_initialization() {
    let d = data();
    let src = LabeledSet::new(&d.sx, &d.sy).unwrap();
    let cfg = TrainConfig { stage1_iters: 0, ..small(6) };
    let mut first = None;
    train_two_stage(src, &d.tx, &cfg, &mut |c: Checkpoint| {
        first.get_or_insert(c.model.params.checksum());
        Ok(())
    })
    .unwrap();
    assert_eq!(first, Some(init_model(&cfg).unwrap().params.checksum()));
}

#[test]
fn labels_from_the_wrong_refresh_are_rejected() {
    let d = data();
    let src = LabeledSet::new(&d.sx, &d.sy).unwrap();
    let cfg = small(3);
    let model = init_model(&cfg).unwrap();
    let labels = build_pseudo_labels(&model, &d.tx, 10.0, 0, 1).unwrap();
    let mut ok = Stage2Trainer::new(model.clone(), &cfg, 1, labels.clone()).unwrap();
    ok.step(src, &d.tx).unwrap();
    let mut stale = Stage2Trainer::new(model, &cfg, 2, labels).unwrap();
    assert!(matches!(stale.step(src, &d.tx), Err(TrainError::InvariantViolation(_))));
}

#[test]
fn empty_inputs_are_rejected() {
    let d = data();
    let src = LabeledSet::new(&d.sx, &d.sy).unwrap();
    let empty = LabeledSet::new(&[], &[]).unwrap();
    let cfg = small(1);
    let mut t = Stage1Trainer::new(init_model(&cfg).unwrap(), &cfg).unwrap();
    assert!(matches!(t.step(empty, &d.tx), Err(TrainError::InvalidArgument(_))));
    assert!(matches!(t.step(src, &[]), Err(TrainError::InvalidArgument(_))));
    assert!(build_pseudo_labels(&init_model(&cfg).unwrap(), &[], 10.0, 0, 1).is_err());
    assert!(LabeledSet::new(&d.sx, &d.sy[..2]).is_err());
}

#[test]
fn pseudo_label_build_is_thread_count_independent() {
    let d = data();
    let model = init_model(&small(8)).unwrap();
    let a = build_pseudo_labels(&model, &d.tx, 10.0, 0, 1).unwrap();
    let b = build_pseudo_labels(&model, &d.tx, 10.0, 0, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.kept, pseudo_keep_count(4 * 256, 10.0));
    for l in &a.labels {
        for (k, u) in l.keep.data().iter().zip(l.uncertainty.data()) {
            if *k == 1.0 {
                assert!(*u <= a.threshold.unwrap());
            }
        }
    }
}

fn uncertainty_maps() -> impl Strategy<Value = Vec<Tensor>> {
    prop::collection::vec(prop::collection::vec(prop_oneof![0.0f64..1.0, Just(0.5)], 1..30), 1..5)
        .prop_map(|maps| maps.into_iter().map(|v| Tensor::new(vec![1, 1, v.len()], v).unwrap()).collect())
}

proptest! {
    #[test]
    fn keep_count_is_exact(us in uncertainty_maps(), alpha in 0.0f64..99.9) {
        let (masks, threshold) = select_confident(&us, alpha).unwrap();
        let total: usize = us.iter().map(Tensor::len).sum();
        let kept: f64 = masks.iter().map(Tensor::sum).sum();
        prop_assert_eq!(kept as usize, pseudo_keep_count(total, alpha));
        for (m, u) in masks.iter().zip(&us) {
            for (k, v) in m.data().iter().zip(u.data()) {
                prop_assert!(*k == 0.0 || *k == 1.0);
                if *k == 1.0 {
                    prop_assert!(*v <= threshold.unwrap());
                }
            }
        }
    }

    #[test]
    fn raising_alpha_never_adds_pixels(us in uncertainty_maps(), a in 0.0f64..99.0, extra in 0.0f64..50.0) {
        let b = (a + extra).min(99.5);
        let (low, _) = select_confident(&us, a).unwrap();
        let (high, _) = select_confident(&us, b).unwrap();
        for (l, h) in low.iter().zip(&high) {
            for (x, y) in l.data().iter().zip(h.data()) {
                prop_assert!(*y <= *x);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn losses_are_nonnegative(seed in 0u64..500, scale in 0.1f64..3.0) {
        let d = data();
        let mut m = init_model(&small(seed)).unwrap();
        for t in m.params.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        let src = SourceSample { image: &d.sx[0], density: &d.sy[0] };
        let tgt = OrientationSample { image: &d.tx[0], transformed: seed % 2 == 1 };
        let e1 = loss_stage1(&m.params, &m.masks, 0, src, Some(tgt), 0.3).unwrap();
        prop_assert!(e1.parts.total >= 0.0 && e1.parts.supervised >= 0.0 && e1.parts.aux >= 0.0);
        let labels = build_pseudo_labels(&m, &d.tx, 10.0, 0, 1).unwrap();
        let e2 = loss_stage2(&m.params, 1, &m.masks, 1, src, &d.tx[1], 1, &labels, 1.0, Some((tgt, 0.3))).unwrap();
        prop_assert!(e2.parts.total >= 0.0 && e2.parts.pseudo >= 0.0);
    }
}
