use numcore::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::params::DomainParams;
use crate::types::{Domain, Orientation, Scene, ScenePoints};

/// Blob radius at a given row: people near the bottom are closer to the camera.
pub(crate) fn blob_radius(params: &DomainParams, row: f64, height: usize) -> f64 {
    params.radius_top + (params.radius_bottom - params.radius_top) * row / height as f64
}

/// Renders points as radially decaying blobs over a noisy background, then
/// clamps to `[0,1]` and applies the domain's gamma curve.
///
/// The returned scene is tagged [`Domain::Source`]; callers that render the
/// target domain overwrite the tag.
pub fn render_scene(
    points: &ScenePoints,
    height: usize,
    width: usize,
    params: &DomainParams,
    seed: u64,
) -> Result<Scene> {
    params.validate()?;
    points.check_bounds(height, width)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = vec![params.background_level; height * width];
    if params.noise_std > 0.0 {
        let noise = Normal::new(0.0, params.noise_std)
            .map_err(|e| crate::error::SceneError::InvalidArgument(e.to_string()))?;
        for v in img.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    for p in points.iter() {
        let width_px = params.blob_softness * blob_radius(params, p.row, height);
        let inv_two_var = 1.0 / (2.0 * width_px * width_px);
        let reach = (3.0 * width_px).ceil() as isize;
        let (ci, cj) = (p.row.round() as isize, p.col.round() as isize);
        for i in (ci - reach).max(0)..=(ci + reach).min(height as isize - 1) {
            for j in (cj - reach).max(0)..=(cj + reach).min(width as isize - 1) {
                let (di, dj) = (i as f64 - p.row, j as f64 - p.col);
                img[i as usize * width + j as usize] +=
                    params.blob_amplitude * (-(di * di + dj * dj) * inv_two_var).exp();
            }
        }
    }
    for v in img.iter_mut() {
        *v = v.clamp(0.0, 1.0).powf(params.gamma);
    }
    Ok(Scene {
        image: Tensor::new(vec![1, height, width], img)?,
        points: points.clone(),
        domain: Domain::Source,
        orientation: Orientation::Upright,
    })
}
