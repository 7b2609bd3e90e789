use numcore::{Graph, NodeId, Reduction, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

/// Layer widths of the compact density network.
///
/// Encoder: `conv3x3(in->enc1)`, `conv3x3/2(enc1->enc2)`, `conv3x3(enc2->enc3)`.
/// Density decoder: `conv3x3(enc3->masked)` with the Masksembles layer on its
/// output, nearest upsample x2, `conv3x3(masked->dec2)`, `conv1x1(dec2->1)`.
/// Every convolution is followed by ReLU, including the last one, which keeps
/// densities nonnegative. The orientation head averages encoder features over
/// an `aux_grid x aux_grid` grid of cells and applies a 2-way linear layer;
/// `aux_grid = 1` is plain global average pooling.
///
/// The last layer predicts `output_scale` times the density; the decoder
/// divides it back out. Large scales keep the per-pixel outputs near one,
/// so an optimizer step on the output bias does not move the whole-image
/// count by several people at once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub in_channels: usize,
    pub enc1: usize,
    pub enc2: usize,
    pub enc3: usize,
    /// Width of the masked decoder layer (`C_m`).
    pub masked: usize,
    pub dec2: usize,
    pub kernel: usize,
    pub num_masks: usize,
    pub keep_fraction: f64,
    pub aux_grid: usize,
    #[serde(default = "default_output_scale")]
    pub output_scale: f64,
}

fn default_output_scale() -> f64 {
    100.0
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            in_channels: 1,
            enc1: 16,
            enc2: 32,
            enc3: 32,
            masked: 32,
            dec2: 16,
            kernel: 3,
            num_masks: 3,
            keep_fraction: 0.8,
            aux_grid: 2,
            output_scale: default_output_scale(),
        }
    }
}

/// Names of the parameter tensors in storage order.
pub const PARAM_NAMES: [&str; 14] = [
    "enc1.weight",
    "enc1.bias",
    "enc2.weight",
    "enc2.bias",
    "enc3.weight",
    "enc3.bias",
    "dec1.weight",
    "dec1.bias",
    "dec2.weight",
    "dec2.bias",
    "dec3.weight",
    "dec3.bias",
    "aux.weight",
    "aux.bias",
];

/// Index range of each sub-network inside [`ModelParams::tensors`].
pub const ENCODER: std::ops::Range<usize> = 0..6;
pub const DECODER: std::ops::Range<usize> = 6..12;
pub const AUX_HEAD: std::ops::Range<usize> = 12..14;

impl NetworkConfig {
    /// A few hundred parameters; used for finite-difference checks.
    pub fn tiny() -> Self {
        Self {
            in_channels: 1,
            enc1: 2,
            enc2: 3,
            enc3: 3,
            masked: 4,
            dec2: 2,
            kernel: 3,
            num_masks: 3,
            keep_fraction: 0.5,
            aux_grid: 2,
            output_scale: default_output_scale(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [self.in_channels, self.enc1, self.enc2, self.enc3, self.masked, self.dec2];
        if widths.contains(&0) {
            return Err(NetError::InvalidArgument("layer widths must be positive".into()));
        }
        if self.kernel % 2 == 0 {
            return Err(NetError::InvalidArgument("kernel size must be odd".into()));
        }
        if !(self.output_scale > 0.0 && self.output_scale.is_finite()) {
            return Err(NetError::InvalidArgument("output scale must be positive".into()));
        }
        if self.aux_grid == 0 {
            return Err(NetError::InvalidArgument("aux grid must be at least 1x1".into()));
        }
        if self.num_masks < 2 {
            return Err(NetError::InvalidArgument("need at least 2 masks".into()));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0)
            || crate::masks::keep_count(self.masked, self.keep_fraction) < 1
        {
            return Err(NetError::InvalidArgument(format!(
                "keep fraction {} keeps no channel of {}",
                self.keep_fraction, self.masked
            )));
        }
        Ok(())
    }

    /// Shapes of the parameter tensors in storage order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let k = self.kernel;
        let conv = |o: usize, i: usize, k: usize| [vec![o, i, k, k], vec![o]];
        [
            conv(self.enc1, self.in_channels, k),
            conv(self.enc2, self.enc1, k),
            conv(self.enc3, self.enc2, k),
            conv(self.masked, self.enc3, k),
            conv(self.dec2, self.masked, k),
            conv(1, self.dec2, 1),
            [vec![2, self.enc3 * self.aux_grid * self.aux_grid], vec![2]],
        ]
        .into_iter()
        .flatten()
        .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|s| s.iter().product::<usize>())
            .sum()
    }
}

/// All learnable tensors, in [`PARAM_NAMES`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    tensors: Vec<Tensor>,
    output_scale: f64,
}

impl ModelParams {
    /// Weights uniform in `[-b, b]` with `b = sqrt(1 / fan_in)`; biases zero.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = config
            .param_shapes()
            .into_iter()
            .map(|shape| {
                if shape.len() == 1 {
                    return Tensor::zeros(&shape);
                }
                let fan_in: usize = shape[1..].iter().product();
                let b = (1.0 / fan_in as f64).sqrt();
                let n = shape.iter().product();
                let data = (0..n).map(|_| rng.random_range(-b..=b)).collect();
                Tensor::new(shape, data).expect("shape from config")
            })
            .collect();
        Ok(Self {
            tensors,
            output_scale: config.output_scale,
        })
    }

    pub fn from_tensors(config: &NetworkConfig, tensors: Vec<Tensor>) -> Result<Self> {
        let shapes = config.param_shapes();
        if tensors.len() != shapes.len()
            || tensors.iter().zip(&shapes).any(|(t, s)| t.shape() != s.as_slice())
        {
            return Err(NetError::InvalidArgument(
                "parameter tensors do not match the network config".into(),
            ));
        }
        if tensors.iter().any(|t| !t.is_finite()) {
            return Err(NetError::InvalidArgument("non-finite parameter".into()));
        }
        config.validate()?;
        Ok(Self {
            tensors,
            output_scale: config.output_scale,
        })
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn into_tensors(self) -> Vec<Tensor> {
        self.tensors
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    /// Pooling grid side, recovered from the head's input width.
    fn aux_grid(&self) -> usize {
        let cells = self.tensors[12].shape()[1] / self.tensors[5].len();
        (cells as f64).sqrt().round() as usize
    }

    /// Order-sensitive FNV-1a hash over the raw bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tensors {
            for v in t.data() {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }
}

/// Parameter handles of one graph, in [`PARAM_NAMES`] order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    ids: Vec<NodeId>,
    aux_grid: usize,
    output_scale: f64,
}

impl BoundParams {
    /// Registers every tensor as trainable.
    pub fn trainable(graph: &mut Graph, params: &ModelParams) -> Result<Self> {
        let ids = params
            .tensors
            .iter()
            .map(|t| graph.param(t.clone()))
            .collect::<numcore::Result<_>>()?;
        Ok(Self {
            ids,
            aux_grid: params.aux_grid(),
            output_scale: params.output_scale,
        })
    }

    /// Registers every tensor as a constant, for inference.
    pub fn frozen(graph: &mut Graph, params: &ModelParams) -> Result<Self> {
        let ids = params
            .tensors
            .iter()
            .map(|t| graph.constant(t.clone()))
            .collect::<numcore::Result<_>>()?;
        Ok(Self {
            ids,
            aux_grid: params.aux_grid(),
            output_scale: params.output_scale,
        })
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    /// Factor between the last layer's output and the density.
    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    fn conv_relu(&self, g: &mut Graph, x: NodeId, layer: usize, stride: usize) -> Result<NodeId> {
        let y = g.conv2d(x, self.ids[2 * layer], self.ids[2 * layer + 1], stride)?;
        Ok(g.relu(y)?)
    }

    /// Encoder features `f = E(x)` for an image `[C,H,W]`.
    pub fn encode(&self, g: &mut Graph, image: NodeId) -> Result<NodeId> {
        let h = self.conv_relu(g, image, 0, 1)?;
        let h = self.conv_relu(g, h, 1, 2)?;
        self.conv_relu(g, h, 2, 1)
    }

    /// Density decoder with channel multipliers applied after its first convolution.
    /// `out_hw` is the input resolution; the upsampled map is cropped to it.
    pub fn decode(&self, g: &mut Graph, features: NodeId, mask: &[f64], out_hw: (usize, usize)) -> Result<NodeId> {
        let h = g.conv2d(features, self.ids[6], self.ids[7], 1)?;
        let h = g.mask_channels(h, mask)?;
        let h = g.relu(h)?;
        let h = g.upsample_nearest(h, 2)?;
        let up = g.shape(h);
        if (up[1], up[2]) != out_hw {
            return Err(NetError::InvalidArgument(format!(
                "decoder resolution {:?} does not match input {:?}; use even image sizes",
                (up[1], up[2]),
                out_hw
            )));
        }
        let h = self.conv_relu(g, h, 4, 1)?;
        let h = self.conv_relu(g, h, 5, 1)?;
        Ok(g.scale(h, 1.0 / self.output_scale)?)
    }

    /// Orientation logits `[upright, transformed]`.
    pub fn aux_logits(&self, g: &mut Graph, features: NodeId) -> Result<NodeId> {
        let pooled = if self.aux_grid == 1 {
            g.reduce(features, Reduction::Mean, &[1, 2])?
        } else {
            g.grid_mean(features, self.aux_grid, self.aux_grid)?
        };
        Ok(g.linear(self.ids[12], pooled, self.ids[13])?)
    }
}
