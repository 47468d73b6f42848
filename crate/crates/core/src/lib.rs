//! Coherent forecasting for hierarchical time series.
//!
//! The crate covers the full workflow around an aggregation hierarchy:
//!
//! * [`hierarchy`]: node trees, the summing matrix, panels of observations.
//! * [`forecasters`]: base models (naive, ARX, ETS, NAR/NARX, combinations)
//!   and expanding-window model selection.
//! * [`reconcile`]: bottom-up, top-down proportions (AHP, PHA, FP),
//!   middle-out and MinT with a shrinkage covariance.
//! * [`neuralnet`]: a small dense/1-D convolutional network engine trained
//!   with a coherence-penalized squared loss.
//! * [`nnd`]: neural network disaggregation of an aggregate forecast into
//!   its children, with the standard and iterative top-down strategies.
//! * [`evaluate`]: MASE/SMAPE, cross-validation, Friedman and Nemenyi tests.
//! * [`synthetic`]: deterministic generator of hierarchical datasets.
//! * [`pipeline`] and [`config`]: the end-to-end runs behind the CLI.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod fetch;
pub mod forecast_set;
pub mod forecasters;
pub mod hierarchy;
pub mod io;
pub mod neuralnet;
pub mod nnd;
pub mod pipeline;
pub mod plot;
pub mod reconcile;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use hierarchy::{Hierarchy, NodeSpec, SeriesPanel, SummingMatrix};
