use proptest::prelude::*;
use scenegen::{
    derive_seed, flip_vertical, generate_scene, mirror_horizontal, rotate, sample_scene_points,
    Domain, DomainParams,
};

fn params(domain: Domain) -> DomainParams {
    match domain {
        Domain::Source => DomainParams::source(),
        Domain::Target => DomainParams::target(),
    }
}

#[test]
fn density_integrates_to_point_count_on_1000_scenes() {
    for i in 0..1000u64 {
        let domain = if i % 2 == 0 { Domain::Source } else { Domain::Target };
        let (h, w) = (16 + 8 * (i % 7) as usize, 16 + 8 * (i % 5) as usize);
        let mean = 1.0 + (i % 60) as f64;
        let (scene, den) = generate_scene(h, w, mean, &params(domain), domain, 1.5, derive_seed(77, 0, i)).unwrap();
        let n = scene.count() as f64;
        let err = (den.count() - n).abs();
        assert!(err <= 1e-8 * n.max(1.0), "scene {i}: {} vs {n}", den.count());
        assert!(den.values().data().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn same_seed_same_scene() {
    for seed in [0u64, 1, 0xdead_beef] {
        let a = generate_scene(64, 64, 40.0, &DomainParams::target(), Domain::Target, 1.5, seed).unwrap();
        let b = generate_scene(64, 64, 40.0, &DomainParams::target(), Domain::Target, 1.5, seed).unwrap();
        assert_eq!(a, b);
        let bits = |t: &numcore::Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.0.image), bits(&b.0.image));
    }
}

/// Expected share of points in rows `[a, b)` out of `[0, h)` for a row
/// density proportional to `1 + g (1 - x)`, `x` the normalized row.
fn band_share(a: f64, b: f64, h: f64, g: f64) -> f64 {
    let cdf = |x: f64| ((1.0 + g) * x - g * x * x / 2.0) / (1.0 + g / 2.0);
    cdf(b / h) - cdf(a / h)
}

#[test]
fn rows_get_sparser_towards_the_bottom() {
    let (h, bands) = (64usize, 8usize);
    let p = DomainParams::source();
    let mut counts = vec![0f64; bands];
    let mut total = 0f64;
    for i in 0..1000u64 {
        let pts = sample_scene_points(h, h, 40.0, &p, derive_seed(5, 9, i)).unwrap();
        for pt in pts.iter() {
            let band = ((pt.row / (h - 1) as f64) * bands as f64).floor() as usize;
            counts[band.min(bands - 1)] += 1.0;
            total += 1.0;
        }
    }
    for b in 1..bands {
        assert!(counts[b] <= counts[b - 1], "band {b}: {counts:?}");
    }
    // Each band also sits within 5 sigma of its analytic share.
    let width = h as f64 / bands as f64;
    for (b, &c) in counts.iter().enumerate() {
        let share = band_share(b as f64 * width, (b + 1) as f64 * width, h as f64, p.density_gradient);
        let sd = (total * share * (1.0 - share)).sqrt();
        assert!((c - total * share).abs() < 5.0 * sd + 0.02 * total * share, "band {b}: {c} vs {}", total * share);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transforms_are_count_preserving_bijections(seed in any::<u64>(), mean in 1.0f64..60.0, target in any::<bool>()) {
        let domain = if target { Domain::Target } else { Domain::Source };
        let (s, _) = generate_scene(32, 32, mean, &params(domain), domain, 1.5, seed).unwrap();
        let f = flip_vertical(&s).unwrap();
        prop_assert_eq!(f.count(), s.count());
        prop_assert_eq!(&flip_vertical(&f).unwrap(), &s);
        let m = mirror_horizontal(&s).unwrap();
        prop_assert_eq!(m.count(), s.count());
        prop_assert_eq!(&mirror_horizontal(&m).unwrap(), &s);
        let mut r = s.clone();
        for _ in 0..4 {
            r = rotate(&r, 1).unwrap();
            prop_assert_eq!(r.count(), s.count());
        }
        prop_assert_eq!(&r, &s);
        prop_assert_eq!(&rotate(&rotate(&s, 1).unwrap(), 3).unwrap(), &s);
    }
}
