//! Cross-powertrain emission comparison toolkit.
//!
//! The crate harmonizes EV and ICEV driving telemetry into a unified
//! per-timestep schema, computes instantaneous CO2-equivalent emission
//! rates (g/s) for both powertrains, trains LSTM sequence regressors for
//! per-domain feature and emission mappings, validates the feature-for-
//! measurement substitution (proxy validation), and composes the
//! EV-embedded counterfactual emission stream for an observed ICEV trip.
//!
//! Modules map onto the processing stages:
//!
//! - [`schema`]: the unified trip/sample data model and its text format.
//! - [`ingest`]: per-vehicle adapters, integrity filters, unit conversions.
//! - [`emissions`]: electric-based and fuel-based instantaneous rates.
//! - [`dataset`]: min-max scaling, sliding windows, trip-level splits.
//! - [`nn`]: LSTM + fully connected sequence kernel with exact BPTT
//!   gradients, Adam, and a cosine warm-up schedule.
//! - [`pipeline`]: domain training, proxy validation, counterfactual
//!   composition, checkpoints.
//! - [`report`]: aggregate statistics, tables, plot-ready series.

pub mod dataset;
pub mod emissions;
pub mod ingest;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod schema;

pub use schema::{ActuationVector, ContextVector, Domain, HarmonizedSample, Trip};
