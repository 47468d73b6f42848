//! Neural network disaggregation: a network maps a window of an aggregate
//! series plus the explanatory variables of its targets to the target
//! series, and is applied to aggregate forecasts to obtain forecasts below.

mod bundle;
mod model;
mod strategy;
mod windows;

pub use bundle::{load_bundle, save_bundle};
pub use model::{raw_coherence_gap, train_nnd, ArchitectureConfig, DisaggregationModel, NndConfig};
pub use strategy::{fit_nnd, NndForecast, NndModels, NndStrategy};
pub use windows::{assemble_features, feature_width, make_windows, WindowConfig};

#[cfg(test)]
mod tests;
