//! Metric implementations against independent brute-force evaluations.

use evalkit::{count_from_density, mae, pearson_r, rmse};
use numcore::Tensor;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenegen::DensityMap;

fn brute_mae(z: &[f64], e: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..z.len() {
        s += if z[i] > e[i] { z[i] - e[i] } else { e[i] - z[i] };
    }
    s / z.len() as f64
}

fn brute_rmse(z: &[f64], e: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..z.len() {
        s += (z[i] - e[i]) * (z[i] - e[i]);
    }
    (s / z.len() as f64).sqrt()
}

/// Raw-moment form: (n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2)(n Syy - Sy^2)).
fn brute_pearson(a: &[f64], u: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        sx += a[i];
        sy += u[i];
        sxx += a[i] * a[i];
        syy += u[i] * u[i];
        sxy += a[i] * u[i];
    }
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

#[test]
fn metrics_match_brute_force_on_100_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.random_range(2..60);
        let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
        let pairs: Vec<(f64, f64)> = z.iter().copied().zip(e.iter().copied()).collect();
        assert!((mae(&pairs).unwrap() - brute_mae(&z, &e)).abs() < 1e-10);
        assert!((rmse(&pairs).unwrap() - brute_rmse(&z, &e)).abs() < 1e-10);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = a.iter().map(|x| 0.3 * x + rng.random_range(-1.0..1.0)).collect();
        assert!((pearson_r(&a, &u).unwrap() - brute_pearson(&a, &u)).abs() < 1e-10);
    }
}

#[test]
fn permutation_null_is_uncorrelated() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let mut u: Vec<f64> = a.iter().map(|x| x * x + 0.1 * rng.random::<f64>()).collect();
    assert!(pearson_r(&a, &u).unwrap() > 0.9);
    u.shuffle(&mut rng);
    let r = pearson_r(&a, &u).unwrap();
    assert!(r.abs() < 0.05, "{r}");
}

fn pair_list() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..500.0, 0.0f64..500.0), 1..40)
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 3..40)
        .prop_filter("non-constant", |v| v.iter().any(|&x| x != v[0]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn mae_never_exceeds_rmse(pairs in pair_list()) {
        prop_assert!(mae(&pairs).unwrap() <= rmse(&pairs).unwrap() * (1.0 + 1e-12) + 1e-12);
    }
}

proptest! {
    #[test]
    fn pearson_affine_invariant(a in sample(), u in sample(), s in 0.01f64..50.0, t in -50.0f64..50.0) {
        let n = a.len().min(u.len());
        let (a, u) = (&a[..n], &u[..n]);
        prop_assume!(a.iter().any(|&x| x != a[0]) && u.iter().any(|&x| x != u[0]));
        let r = pearson_r(a, u).unwrap();
        let a2: Vec<f64> = a.iter().map(|x| s * x + t).collect();
        let u2: Vec<f64> = u.iter().map(|x| s * x - t).collect();
        prop_assert!((pearson_r(&a2, u).unwrap() - r).abs() < 1e-9);
        prop_assert!((pearson_r(a, &u2).unwrap() - r).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&r));
    }

    #[test]
    fn pearson_self_is_one(a in sample()) {
        prop_assert!((pearson_r(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roi_counts_add_up(vals in prop::collection::vec(0.0f64..1.0, 36), split in prop::collection::vec(any::<bool>(), 36)) {
        let map = DensityMap::new(Tensor::new(vec![1, 6, 6], vals).unwrap()).unwrap();
        let roi = Tensor::new(vec![1, 6, 6], split.iter().map(|&b| f64::from(u8::from(b))).collect()).unwrap();
        let rest = roi.map(|r| 1.0 - r);
        let total = count_from_density(&map, None).unwrap();
        let parts = count_from_density(&map, Some(&roi)).unwrap() + count_from_density(&map, Some(&rest)).unwrap();
        prop_assert!((total - parts).abs() < 1e-12);
    }
}
