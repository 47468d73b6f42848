//! Accuracy metrics, expanding-window cross-validation, per-level reports
//! and rank-based significance tests.

mod cv;
mod metrics;
mod ranks;
mod report;

pub use cv::{expanding_window_cv, CvConfig, CvOutcome, Fold};
pub(crate) use cv::summarize as summarize_folds;
pub use metrics::{mase, smape, Metric, MetricKind};
pub use ranks::{
    average_ranks, chi_square_sf, friedman_test, mean_ranks, nemenyi_test, q_alpha,
    regularized_gamma_q, FriedmanResult, NemenyiResult,
};
pub use report::{evaluate_sets, level_averages, EvalReport, LevelAverage, RankTest, SeriesScores};
