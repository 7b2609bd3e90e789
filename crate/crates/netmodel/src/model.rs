use numcore::{Graph, Tensor};
use scenegen::DensityMap;

use crate::error::{NetError, Result};
use crate::masks::{generate_masks, MaskSet};
use crate::network::{BoundParams, ModelParams, NetworkConfig};

/// Per-mask density maps with their pixel-wise mean and spread.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticPrediction {
    pub per_mask: Vec<Tensor>,
    /// `mean = (1/M) sum_m F_m(x)`
    pub mean: Tensor,
    /// `u = sqrt(sum_m (F_m(x) - mean)^2)`, no `1/M` inside the root.
    pub uncertainty: Tensor,
}

impl StochasticPrediction {
    /// Combines per-mask maps in mask-index order.
    pub fn from_maps(per_mask: Vec<Tensor>) -> Result<Self> {
        let first = per_mask
            .first()
            .ok_or_else(|| NetError::InvalidArgument("no per-mask maps".into()))?;
        if per_mask.len() < 2 {
            return Err(NetError::InvalidArgument(
                "uncertainty needs at least two masks".into(),
            ));
        }
        if per_mask.iter().any(|m| m.shape() != first.shape()) {
            return Err(NetError::InvalidArgument("per-mask shapes differ".into()));
        }
        let n = first.len();
        let inv_m = 1.0 / per_mask.len() as f64;
        // Accumulate offsets from the first map so that identical maps give
        // exactly that map back (and hence exactly zero spread).
        let base = first.data();
        let mut offset = vec![0.0; n];
        for m in &per_mask[1..] {
            for ((o, v), b) in offset.iter_mut().zip(m.data()).zip(base) {
                *o += v - b;
            }
        }
        let mean: Vec<f64> = base.iter().zip(&offset).map(|(b, o)| b + o * inv_m).collect();
        let mut var = vec![0.0; n];
        for m in &per_mask {
            for ((s, v), mu) in var.iter_mut().zip(m.data()).zip(&mean) {
                let d = v - mu;
                *s += d * d;
            }
        }
        let shape = first.shape().to_vec();
        Ok(Self {
            mean: Tensor::new(shape.clone(), mean)?,
            uncertainty: Tensor::new(shape, var.into_iter().map(f64::sqrt).collect())?,
            per_mask,
        })
    }
}

/// A trained (or freshly initialized) network together with its masks.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: NetworkConfig,
    pub masks: MaskSet,
    pub params: ModelParams,
}

impl Model {
    /// Fresh weights and masks; both derive from `seed`.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(&config, seed)?;
        let masks = generate_masks(
            config.masked,
            config.num_masks,
            config.keep_fraction,
            seed ^ 0x6d61_736b,
        )?;
        Ok(Self {
            config,
            masks,
            params,
        })
    }

    pub fn new(config: NetworkConfig, masks: MaskSet, params: ModelParams) -> Result<Self> {
        config.validate()?;
        if masks.channels() != config.masked {
            return Err(NetError::InvalidArgument(format!(
                "masks cover {} channels, masked layer has {}",
                masks.channels(),
                config.masked
            )));
        }
        let params = ModelParams::from_tensors(&config, params.into_tensors())?;
        Ok(Self {
            config,
            masks,
            params,
        })
    }

    fn check_image(&self, image: &Tensor) -> Result<(usize, usize)> {
        match *image.shape() {
            [c, h, w] if c == self.config.in_channels => Ok((h, w)),
            _ => Err(NetError::InvalidArgument(format!(
                "expected image [{},H,W], got {:?}",
                self.config.in_channels,
                image.shape()
            ))),
        }
    }

    /// Density map of the sub-network selected by `mask_index`.
    pub fn forward_density(&self, image: &Tensor, mask_index: usize) -> Result<DensityMap> {
        let hw = self.check_image(image)?;
        let mask = self.masks.multipliers(mask_index)?;
        let mut g = Graph::new();
        let p = BoundParams::frozen(&mut g, &self.params)?;
        let x = g.constant(image.clone())?;
        let f = p.encode(&mut g, x)?;
        let y = p.decode(&mut g, f, &mask, hw)?;
        Ok(DensityMap::new(g.value(y).clone())?)
    }

    /// `[p_upright, p_transformed]` from a softmax over the head's logits.
    pub fn forward_aux(&self, image: &Tensor) -> Result<[f64; 2]> {
        self.check_image(image)?;
        let mut g = Graph::new();
        let p = BoundParams::frozen(&mut g, &self.params)?;
        let x = g.constant(image.clone())?;
        let f = p.encode(&mut g, x)?;
        let logits = p.aux_logits(&mut g, f)?;
        let ls = g.log_softmax(logits)?;
        let v = g.value(ls).data();
        Ok([v[0].exp(), v[1].exp()])
    }

    /// One pass per mask; the encoder runs once and is shared.
    pub fn ensemble_predict(&self, image: &Tensor) -> Result<StochasticPrediction> {
        self.ensemble_predict_with(image, &self.masks)
    }

    /// Like [`Model::ensemble_predict`] but with an explicit mask set.
    pub fn ensemble_predict_with(&self, image: &Tensor, masks: &MaskSet) -> Result<StochasticPrediction> {
        let hw = self.check_image(image)?;
        if masks.len() < 2 {
            return Err(NetError::InvalidArgument("ensemble needs at least two masks".into()));
        }
        let mut g = Graph::new();
        let p = BoundParams::frozen(&mut g, &self.params)?;
        let x = g.constant(image.clone())?;
        let f = p.encode(&mut g, x)?;
        let per_mask = (0..masks.len())
            .map(|i| {
                let y = p.decode(&mut g, f, &masks.multipliers(i)?, hw)?;
                Ok(g.value(y).clone())
            })
            .collect::<Result<Vec<_>>>()?;
        StochasticPrediction::from_maps(per_mask)
    }

    /// Single-pass inference with mask 0.
    pub fn predict_single(&self, image: &Tensor) -> Result<DensityMap> {
        self.forward_density(image, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, h: usize, w: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(vec![1, h, w], (0..h * w).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn zero_image_zero_bias_gives_zero_density() {
        let m = Model::init(NetworkConfig::default(), 3).unwrap();
        let d = m.forward_density(&Tensor::zeros(&[1, 16, 16]), 1).unwrap();
        assert!(d.values().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn different_masks_give_different_maps() {
        let mut m = Model::init(NetworkConfig::default(), 4).unwrap();
        // Positive biases keep some units alive so mask differences show up.
        for t in m.params.tensors_mut().iter_mut().filter(|t| t.rank() == 1) {
            t.data_mut().iter_mut().for_each(|v| *v = 0.05);
        }
        let img = random_image(1, 16, 16);
        let a = m.forward_density(&img, 0).unwrap();
        let b = m.forward_density(&img, 1).unwrap();
        assert!(a.values().max_abs_diff(b.values()).unwrap() > 0.0);
        assert!(a.values().data().iter().all(|&v| v >= 0.0));
        assert_eq!(a.values().shape(), &[1, 16, 16]);
    }

    #[test]
    fn invalid_mask_index() {
        let m = Model::init(NetworkConfig::tiny(), 0).unwrap();
        assert!(matches!(
            m.forward_density(&random_image(0, 8, 8), 3),
            Err(NetError::InvalidArgument(_))
        ));
    }

    #[test]
    fn aux_probabilities_form_a_distribution() {
        let m = Model::init(NetworkConfig::default(), 9).unwrap();
        for s in 0..5 {
            let [a, b] = m.forward_aux(&random_image(s, 12, 12)).unwrap();
            assert!((a + b - 1.0).abs() < 1e-12);
            assert!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0);
        }
    }

    #[test]
    fn identical_masks_give_zero_uncertainty() {
        let mut m = Model::init(NetworkConfig::default(), 2).unwrap();
        for t in m.params.tensors_mut().iter_mut().filter(|t| t.rank() == 1) {
            t.data_mut().iter_mut().for_each(|v| *v = 0.05);
        }
        let same = MaskSet::from_masks(vec![m.masks.mask(0).unwrap().to_vec(); 3]).unwrap();
        let pred = m.ensemble_predict_with(&random_image(5, 16, 16), &same).unwrap();
        assert!(pred.uncertainty.data().iter().all(|&u| u == 0.0));
        assert!(pred.mean.sum() > 0.0);
    }

    #[test]
    fn two_mask_closed_form() {
        let a = Tensor::new(vec![1, 1, 3], vec![0.0, 1.0, 5.0]).unwrap();
        let b = Tensor::new(vec![1, 1, 3], vec![2.0, 1.0, 0.5]).unwrap();
        let p = StochasticPrediction::from_maps(vec![a.clone(), b.clone()]).unwrap();
        for i in 0..3 {
            let (x, y) = (a.data()[i], b.data()[i]);
            assert!((p.mean.data()[i] - (x + y) / 2.0).abs() < 1e-12);
            assert!((p.uncertainty.data()[i] - (x - y).abs() / 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_mean_integrates_to_average_count() {
        let mut m = Model::init(NetworkConfig::default(), 6).unwrap();
        for t in m.params.tensors_mut().iter_mut().filter(|t| t.rank() == 1) {
            t.data_mut().iter_mut().for_each(|v| *v = 0.05);
        }
        let img = random_image(2, 16, 16);
        let p = m.ensemble_predict(&img).unwrap();
        let avg = p.per_mask.iter().map(|t| t.sum()).sum::<f64>() / p.per_mask.len() as f64;
        assert!((p.mean.sum() - avg).abs() < 1e-12);
        // The shared-encoder path matches separate passes bit for bit.
        for (i, map) in p.per_mask.iter().enumerate() {
            assert_eq!(map, m.forward_density(&img, i).unwrap().values());
        }
    }

    #[test]
    fn single_pass_is_mask_zero_and_deterministic() {
        let m = Model::init(NetworkConfig::default(), 8).unwrap();
        let img = random_image(3, 16, 16);
        let a = m.predict_single(&img).unwrap();
        assert_eq!(a, m.forward_density(&img, 0).unwrap());
        assert_eq!(a, m.predict_single(&img).unwrap());
        assert!(a.count() >= 0.0);
    }
}
