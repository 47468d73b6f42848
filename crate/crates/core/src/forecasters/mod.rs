//! Base forecasting models, combinations and model selection.

pub mod arx;
pub mod combine;
pub mod ets;
pub mod naive;
pub mod nar;
mod select;

pub use arx::{fit_arx, fit_arx_auto, ArxModel};
pub use combine::{cls_objective, cls_weights, combine_mean, combine_weighted, project_simplex};
pub use ets::{fit_ets, fit_ets_auto, EtsModel, EtsVariant};
pub use naive::{naive_forecast, seasonal_naive_fitted, seasonal_naive_forecast};
pub use nar::{fit_nar, NarConfig, NarModel};
pub use select::{fit_base, select_model, FittedModel, ModelKind, SelectConfig, Selection, COMBINATION_MEMBERS};
