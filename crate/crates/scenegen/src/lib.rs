//! Procedural crowd scenes for cross-domain counting experiments.
//!
//! Two photometric domains share the same crowd statistics: people are
//! sampled with a top-heavy row density and rendered as blobs whose radius
//! grows towards the bottom of the frame, the way a camera looking down at a
//! crowd would see them. Ground truth density maps integrate exactly to the
//! number of people.

mod dataset;
mod density;
mod error;
mod params;
mod render;
mod sample;
mod transform;
mod types;

pub use dataset::{
    decode_pgm16, density_reads, encode_pgm16, image_reads, load_dataset, save_dataset, Dataset, DatasetDir, Manifest, ManifestEntry,
    MANIFEST_VERSION,
};
pub use density::{make_density_map, DEFAULT_SIGMA};
pub use error::{Result, SceneError};
pub use params::DomainParams;
pub use render::render_scene;
pub use sample::sample_scene_points;
pub use transform::{
    flip_image, flip_vertical, mirror_horizontal, mirror_image, rotate, rotate_image,
};
pub use types::{DensityMap, Domain, Orientation, Point, Scene, ScenePoints};

/// Mixes a base seed with stream and index tags (splitmix64 finalizer), so
/// that every scene of every split gets an independent, reproducible seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples, renders and labels one scene.
pub fn generate_scene(
    height: usize,
    width: usize,
    mean_count: f64,
    params: &DomainParams,
    domain: Domain,
    sigma: f64,
    seed: u64,
) -> Result<(Scene, DensityMap)> {
    let points = sample_scene_points(height, width, mean_count, params, seed)?;
    let density = make_density_map(&points, height, width, sigma)?;
    let mut scene = render_scene(&points, height, width, params, derive_seed(seed, 1, 0))?;
    scene.domain = domain;
    Ok((scene, density))
}
