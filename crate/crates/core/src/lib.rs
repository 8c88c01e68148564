//! Offshore wind speed and power forecasting toolkit.
//!
//! The pipeline runs from raw buoy observations to evaluated forecasts:
//!
//! * [`ingest`] parses NDBC standard-meteorological files and repairs the
//!   series onto a gap-free 10-minute grid.
//! * [`features`] computes Pearson correlations, random-forest impurity
//!   importances and the resulting feature selection.
//! * [`windowing`] splits a series chronologically (8:1:1) and turns each
//!   segment into sliding-window samples with train-fitted z-scoring.
//! * [`models`] holds the trainable predictors: a ridge baseline, a fully
//!   connected network and a single-layer GRU.
//! * [`physics`] extrapolates anemometer speed to hub height and converts
//!   hub speed to turbine power.
//! * [`metrics`] computes MAE, RMSE, MAPE, SMAPE and R².
//! * [`experiments`] orchestrates the window sweep, the nine feature
//!   combination cases and the speed-vs-power improvement statistic.
//! * [`report`] renders tables, CSV/JSON documents and radar-chart SVGs.

pub mod error;
pub mod experiments;
pub mod features;
pub mod fixture;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod physics;
pub mod report;
pub mod table;
pub mod windowing;

mod rng;
pub use rng::derive_seed;

pub use error::{Error, ErrorKind, Result};
pub use table::FeatureTable;
