use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Result};
use crate::params::DomainParams;
use crate::types::{Point, ScenePoints};

/// Coordinates are snapped to multiples of 2^-16 px so that reflections like
/// `H - 1 - row` are exact in binary floating point.
const COORD_QUANTUM: f64 = 65536.0;

fn quantize(v: f64) -> f64 {
    (v * COORD_QUANTUM).round() / COORD_QUANTUM
}

/// Inverse CDF of the normalized row position for density `1 + g (1 - x)` on `[0, 1]`.
fn inverse_row_cdf(u: f64, g: f64) -> f64 {
    if g == 0.0 {
        return u;
    }
    let a = 1.0 + g;
    let disc = a * a - 2.0 * g * u * (1.0 + 0.5 * g);
    ((a - disc.max(0.0).sqrt()) / g).clamp(0.0, 1.0)
}

/// Poisson number of heads, rows biased towards the top of the frame and
/// columns uniform. Coordinates lie on the pixel-centre span `[0, H-1] x [0, W-1]`.
pub fn sample_scene_points(
    height: usize,
    width: usize,
    mean_count: f64,
    params: &DomainParams,
    seed: u64,
) -> Result<ScenePoints> {
    if !(mean_count > 0.0) || !mean_count.is_finite() {
        return invalid(format!("mean_count must be positive, got {mean_count}"));
    }
    if height == 0 || width == 0 {
        return invalid("image must be nonempty");
    }
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(mean_count)
        .map_err(|e| crate::error::SceneError::InvalidArgument(e.to_string()))?;
    let n = poisson.sample(&mut rng) as usize;
    let row_span = (height - 1) as f64;
    let col_span = (width - 1) as f64;
    let points = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let x = inverse_row_cdf(u, params.density_gradient);
            let c: f64 = rng.random();
            Point {
                row: quantize(x * row_span).min(row_span),
                col: quantize(c * col_span).min(col_span),
            }
        })
        .collect();
    Ok(ScenePoints(points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(g: f64) -> DomainParams {
        DomainParams {
            density_gradient: g,
            ..DomainParams::source()
        }
    }

    #[test]
    fn inverse_cdf_hits_endpoints() {
        for g in [0.0, 0.5, 3.0, 10.0] {
            assert_eq!(inverse_row_cdf(0.0, g), 0.0);
            assert!((inverse_row_cdf(1.0, g) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_mean_gives_empty_scenes() {
        let empty = (0..200)
            .filter(|&s| sample_scene_points(64, 64, 0.001, &params(3.0), s).unwrap().is_empty())
            .count();
        assert!(empty >= 198, "{empty}");
    }

    #[test]
    fn nonpositive_mean_is_rejected() {
        assert!(sample_scene_points(64, 64, 0.0, &params(3.0), 1).is_err());
        assert!(sample_scene_points(64, 64, -2.0, &params(3.0), 1).is_err());
    }

    fn rows(g: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let mut seed = 0;
        while out.len() < n {
            let pts = sample_scene_points(64, 64, 50.0, &params(g), seed).unwrap();
            out.extend(pts.iter().map(|p| p.row));
            seed += 1;
        }
        out.truncate(n);
        out
    }

    #[test]
    fn flat_gradient_is_uniform_by_ks() {
        let mut r = rows(0.0, 10_000);
        r.sort_by(f64::total_cmp);
        let n = r.len() as f64;
        let d = r
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let cdf = v / 63.0;
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        // Asymptotic Kolmogorov critical value for p = 0.01.
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn steep_gradient_pulls_rows_up() {
        let r = rows(3.0, 10_000);
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        assert!(mean < 32.0, "mean row {mean}");
    }

    #[test]
    fn points_stay_in_bounds_and_are_deterministic() {
        let a = sample_scene_points(17, 9, 30.0, &params(2.0), 42).unwrap();
        let b = sample_scene_points(17, 9, 30.0, &params(2.0), 42).unwrap();
        assert_eq!(a, b);
        a.check_bounds(17, 9).unwrap();
    }
}
