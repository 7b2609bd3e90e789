use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Photometric and geometric knobs of one domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainParams {
    /// Peak brightness added by one person.
    pub blob_amplitude: f64,
    /// Gaussian width of a blob as a fraction of its radius.
    pub blob_softness: f64,
    pub background_level: f64,
    pub noise_std: f64,
    /// Exponent applied to the clamped image.
    pub gamma: f64,
    /// Row density is proportional to `1 + g * (1 - row / H)`.
    pub density_gradient: f64,
    pub radius_top: f64,
    pub radius_bottom: f64,
}

impl DomainParams {
    /// Bright, clean, high-contrast "synthetic" rendering.
    pub fn source() -> Self {
        Self {
            blob_amplitude: 0.6,
            blob_softness: 0.5,
            background_level: 0.1,
            noise_std: 0.02,
            gamma: 1.0,
            density_gradient: 3.0,
            radius_top: 1.5,
            radius_bottom: 4.0,
        }
    }

    /// Same crowd statistics as [`DomainParams::source`], but with a brighter
    /// noisy background, weaker softer blobs and a different contrast curve.
    pub fn target() -> Self {
        Self {
            blob_amplitude: 0.35,
            blob_softness: 0.7,
            background_level: 0.3,
            noise_std: 0.06,
            gamma: 1.6,
            ..Self::source()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.blob_amplitude,
            self.blob_softness,
            self.background_level,
            self.noise_std,
            self.gamma,
            self.density_gradient,
            self.radius_top,
            self.radius_bottom,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return invalid("domain params must be finite");
        }
        if self.noise_std < 0.0 {
            return invalid("noise stddev must be >= 0");
        }
        if self.density_gradient < 0.0 {
            return invalid("density gradient must be >= 0");
        }
        if !(self.radius_top > 0.0 && self.radius_top < self.radius_bottom) {
            return invalid("need 0 < radius_top < radius_bottom");
        }
        if self.blob_softness <= 0.0 || self.gamma <= 0.0 {
            return invalid("blob softness and gamma must be positive");
        }
        Ok(())
    }
}
