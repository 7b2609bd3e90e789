use numcore::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Upright,
    Flipped,
}

impl Orientation {
    pub fn toggled(self) -> Self {
        match self {
            Orientation::Upright => Orientation::Flipped,
            Orientation::Flipped => Orientation::Upright,
        }
    }
}

/// Head position in pixel units. Pixel `(i, j)` is centred on `(i, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub row: f64,
    pub col: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenePoints(pub Vec<Point>);

impl ScenePoints {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point> {
        self.0.iter()
    }

    pub fn check_bounds(&self, height: usize, width: usize) -> Result<()> {
        for p in &self.0 {
            let inside = p.row >= 0.0
                && p.col >= 0.0
                && p.row < height as f64
                && p.col < width as f64;
            if !inside {
                return invalid(format!(
                    "point ({}, {}) outside {height}x{width} image",
                    p.row, p.col
                ));
            }
        }
        Ok(())
    }
}

/// Grayscale image `[1,H,W]` in `[0,1]` plus its annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub image: Tensor,
    pub points: ScenePoints,
    pub domain: Domain,
    pub orientation: Orientation,
}

impl Scene {
    pub fn height(&self) -> usize {
        self.image.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.image.shape()[2]
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// Nonnegative people density `[1,H,W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    values: Tensor,
}

impl DensityMap {
    pub fn new(values: Tensor) -> Result<Self> {
        if values.rank() != 3 || values.shape()[0] != 1 {
            return invalid(format!("density map must be [1,H,W], got {:?}", values.shape()));
        }
        if values.data().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return invalid("density map values must be finite and nonnegative");
        }
        Ok(Self { values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            values: Tensor::zeros(&[1, height, width]),
        }
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_values(self) -> Tensor {
        self.values
    }

    pub fn count(&self) -> f64 {
        self.values.sum()
    }

    pub fn height(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.values.shape()[2]
    }
}
