//! Minimal dense-tensor substrate for the crowd-counting pipeline.
//!
//! Everything is `f64` and row-major. A [`Graph`] records operations as they
//! are evaluated (a Wengert tape) and [`Graph::backward`] replays it in
//! reverse to produce parameter gradients. [`AdamState`] applies the
//! bias-corrected Adam update to a flat list of parameter tensors.

mod adam;
mod error;
mod graph;
mod kernels;
mod parallel;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use error::{NumError, Result};
pub use graph::{Elementwise, Gradients, Graph, NodeId, Reduction};
pub use parallel::{par_map, thread_budget};
pub use tensor::Tensor;
