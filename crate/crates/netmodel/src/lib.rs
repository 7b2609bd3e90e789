//! Compact density network with a Masksembles layer and an orientation head.
//!
//! [`Model`] bundles the [`NetworkConfig`], the pre-generated [`MaskSet`] and
//! the [`ModelParams`]. Inference helpers build a frozen graph per call;
//! training code binds the parameters as trainable leaves through
//! [`BoundParams`] and composes the losses itself.

mod checkpoint;
mod error;
mod masks;
mod model;
mod network;

pub use checkpoint::{
    from_json, load_checkpoint, save_checkpoint, to_json, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
pub use error::{NetError, Result};
pub use masks::{generate_masks, keep_count, MaskSet};
pub use model::{Model, StochasticPrediction};
pub use network::{
    BoundParams, ModelParams, NetworkConfig, AUX_HEAD, DECODER, ENCODER, PARAM_NAMES,
};
