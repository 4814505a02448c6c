//! Shared domain types: current profiles, datasets, simulation traces, and
//! the RMSE/RER evaluation metrics.

mod dataset;
mod metrics;
mod profile;
mod trace;

pub use dataset::{Dataset, DatasetMeta, DatasetRow};
pub use metrics::{rer, rmse};
pub use profile::{CRate, CurrentProfile};
pub use trace::{Cutoff, SimTrace, TraceRecord};
