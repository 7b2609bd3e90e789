//! Counting metrics for density-map regressors.
//!
//! Counts are integrals of density maps (optionally over a region of
//! interest); MAE and RMSE compare per-image counts, and the Pearson
//! correlation between per-pixel error and ensemble uncertainty measures how
//! useful the uncertainty is for filtering pseudo labels.

mod error;
mod metrics;
mod report;

pub use error::{EvalError, Result};
pub use metrics::{count_from_density, mae, pearson_r, rmse};
pub use report::{evaluate, evaluate_maps, uncertainty_error_correlation, MetricsReport};
