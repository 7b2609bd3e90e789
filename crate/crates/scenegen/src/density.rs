use numcore::Tensor;

use crate::error::{invalid, Result};
use crate::types::{DensityMap, ScenePoints};

pub const DEFAULT_SIGMA: f64 = 1.5;

/// Gaussian splatting with a `3 sigma` cutoff; each point's kernel is
/// renormalized over its in-image support so it contributes exactly one person.
pub fn make_density_map(
    points: &ScenePoints,
    height: usize,
    width: usize,
    sigma: f64,
) -> Result<DensityMap> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    points.check_bounds(height, width)?;
    let radius = 3.0 * sigma;
    let reach = radius.ceil() as isize;
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let mut values = vec![0.0; height * width];
    let mut weights = Vec::new();
    for p in points.iter() {
        let (ci, cj) = (p.row.round() as isize, p.col.round() as isize);
        weights.clear();
        for i in (ci - reach).max(0)..=(ci + reach).min(height as isize - 1) {
            for j in (cj - reach).max(0)..=(cj + reach).min(width as isize - 1) {
                let (di, dj) = (i as f64 - p.row, j as f64 - p.col);
                let d2 = di * di + dj * dj;
                // The nearest pixel always carries weight, even for tiny sigma.
                if d2 <= radius * radius || (i == ci && j == cj) {
                    weights.push((i as usize * width + j as usize, (-d2 * inv_two_var).exp()));
                }
            }
        }
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if total > 0.0 {
            for &(idx, w) in &weights {
                values[idx] += w / total;
            }
        } else {
            // Underflow for absurdly small sigma: put the unit mass on the nearest pixel.
            values[ci as usize * width + cj as usize] += 1.0;
        }
    }
    DensityMap::new(Tensor::new(vec![1, height, width], values)?)
}
