use std::ops::Range;

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Metric;
use crate::error::{Error, Result};

/// Expanding-window cross-validation settings, in observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    /// Training length of the first fold.
    pub starting_window: usize,
    /// Largest training length of any fold.
    pub ending_window: usize,
    /// Forecast horizon scored in each fold.
    pub horizon: usize,
    /// Observations added to the training window between folds.
    pub expanding_steps: usize,
}

/// One train/test split: train on `0..train_len`, score on `test`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train_len: usize,
    pub test: Range<usize>,
}

impl CvConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.horizon == 0 || self.expanding_steps == 0 || self.starting_window == 0 {
            return Err(Error::Config(
                "cross-validation horizon, steps and starting window must be positive".into(),
            ));
        }
        if self.starting_window > self.ending_window {
            return Err(Error::Config(format!(
                "starting window {} exceeds ending window {}",
                self.starting_window, self.ending_window
            )));
        }
        if self.ending_window + self.horizon > n {
            return Err(Error::Config(format!(
                "ending window {} plus horizon {} exceeds series length {n}",
                self.ending_window, self.horizon
            )));
        }
        Ok(())
    }

    /// Folds at training lengths `start, start + steps, ...` up to the
    /// ending window. A fold is kept only if a full horizon of test data
    /// follows it.
    pub fn folds(&self, n: usize) -> Result<Vec<Fold>> {
        self.validate(n)?;
        Ok((self.starting_window..=self.ending_window)
            .step_by(self.expanding_steps)
            .filter(|&len| len + self.horizon <= n)
            .map(|len| Fold {
                train_len: len,
                test: len..len + self.horizon,
            })
            .collect())
    }

    /// A configuration scaled to a series of length `n`: the first fold
    /// trains on the first `start_fraction` of the data and the last one
    /// ends one horizon before the end.
    pub fn for_length(n: usize, horizon: usize, steps: usize, start_fraction: f64) -> Result<Self> {
        if n <= horizon + 1 {
            return Err(Error::Config(format!(
                "series of length {n} is too short for horizon {horizon}"
            )));
        }
        let ending = n - horizon;
        let starting = ((n as f64 * start_fraction).round() as usize).clamp(1, ending);
        Ok(Self {
            starting_window: starting,
            ending_window: ending,
            horizon,
            expanding_steps: steps.max(1),
        })
    }
}

/// Result of a cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    /// Mean score over the folds that succeeded.
    pub mean: f64,
    /// Per-fold scores in fold order; `None` marks a skipped fold.
    pub fold_scores: Vec<Option<f64>>,
}

/// Runs expanding-window cross-validation.
///
/// `fit_forecast(train_y, train_x, future_x, h)` must fit on the training
/// prefix and return `h` forecasts. Folds whose fit or metric fails are
/// skipped with a warning; if every fold fails the last error is returned.
pub fn expanding_window_cv<F>(
    y: &[f64],
    exog: Option<&DMatrix<f64>>,
    cfg: &CvConfig,
    metric: Metric,
    fit_forecast: F,
) -> Result<CvOutcome>
where
    F: Fn(&[f64], Option<&DMatrix<f64>>, Option<&DMatrix<f64>>, usize) -> Result<Vec<f64>> + Sync,
{
    if let Some(x) = exog {
        if x.nrows() != y.len() {
            return Err(Error::shape(format!("{} regressor rows", y.len()), x.nrows()));
        }
    }
    let folds = cfg.folds(y.len())?;
    let results: Vec<Result<f64>> = folds
        .par_iter()
        .map(|fold| {
            let train = &y[..fold.train_len];
            let (train_x, future_x) = match exog {
                Some(x) => (
                    Some(x.rows(0, fold.train_len).into_owned()),
                    Some(x.rows(fold.test.start, fold.test.len()).into_owned()),
                ),
                None => (None, None),
            };
            let forecast = fit_forecast(train, train_x.as_ref(), future_x.as_ref(), cfg.horizon)?;
            metric.score(&y[fold.test.clone()], &forecast, train)
        })
        .collect();
    summarize(results)
}

pub(crate) fn summarize(results: Vec<Result<f64>>) -> Result<CvOutcome> {
    let mut last_err = None;
    let mut fold_scores = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) if s.is_finite() => fold_scores.push(Some(s)),
            Ok(s) => {
                warn!("fold {i} skipped: non-finite score {s}");
                fold_scores.push(None);
            }
            Err(e) => {
                warn!("fold {i} skipped: {e}");
                fold_scores.push(None);
                last_err = Some(e);
            }
        }
    }
    let ok: Vec<f64> = fold_scores.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::Fit("no cross-validation fold succeeded".into())));
    }
    Ok(CvOutcome {
        mean: ok.iter().sum::<f64>() / ok.len() as f64,
        fold_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_enumeration() {
        let cfg = CvConfig {
            starting_window: 6,
            ending_window: 8,
            horizon: 2,
            expanding_steps: 2,
        };
        let folds = cfg.folds(10).unwrap();
        assert_eq!(
            folds,
            vec![
                Fold { train_len: 6, test: 6..8 },
                Fold { train_len: 8, test: 8..10 }
            ]
        );
        let single = CvConfig { ending_window: 6, ..cfg };
        assert_eq!(single.folds(10).unwrap().len(), 1);
    }

    #[test]
    fn partial_last_fold_needs_full_horizon() {
        let cfg = CvConfig {
            starting_window: 4,
            ending_window: 9,
            horizon: 2,
            expanding_steps: 3,
        };
        // 4, 7 fit; 10 is beyond the ending window.
        let folds = cfg.folds(11).unwrap();
        assert_eq!(folds.iter().map(|f| f.train_len).collect::<Vec<_>>(), vec![4, 7]);
    }

    #[test]
    fn invalid_configs() {
        let cfg = CvConfig {
            starting_window: 6,
            ending_window: 9,
            horizon: 2,
            expanding_steps: 1,
        };
        assert!(matches!(cfg.folds(10), Err(Error::Config(_))));
        assert!(CvConfig { expanding_steps: 0, ..cfg }.folds(20).is_err());
        assert!(CvConfig { starting_window: 10, ..cfg }.folds(20).is_err());
    }

    #[test]
    fn no_leakage() {
        let cfg = CvConfig {
            starting_window: 5,
            ending_window: 30,
            horizon: 3,
            expanding_steps: 4,
        };
        for f in cfg.folds(40).unwrap() {
            assert!(f.train_len - 1 < f.test.start);
        }
    }

    #[test]
    fn oracle_model_scores_zero() {
        let y: Vec<f64> = (0..20).map(|t| (t as f64 * 0.7).sin() * 5.0 + t as f64).collect();
        let cfg = CvConfig {
            starting_window: 10,
            ending_window: 16,
            horizon: 2,
            expanding_steps: 2,
        };
        let full = y.clone();
        let out = expanding_window_cv(&y, None, &cfg, Metric::Mase { period: 1 }, |train, _, _, h| {
            Ok(full[train.len()..train.len() + h].to_vec())
        })
        .unwrap();
        assert_eq!(out.mean, 0.0);
        assert_eq!(out.fold_scores.len(), 4);
    }

    #[test]
    fn failing_folds_are_skipped() {
        let y: Vec<f64> = (0..12).map(|t| t as f64 * 1.5).collect();
        let cfg = CvConfig {
            starting_window: 4,
            ending_window: 10,
            horizon: 2,
            expanding_steps: 2,
        };
        let out = expanding_window_cv(&y, None, &cfg, Metric::Mase { period: 1 }, |train, _, _, h| {
            if train.len() == 6 {
                Err(Error::Fit("boom".into()))
            } else {
                Ok(vec![*train.last().unwrap(); h])
            }
        })
        .unwrap();
        assert_eq!(out.fold_scores[1], None);
        assert_eq!(out.fold_scores.iter().flatten().count(), 3);

        let all_fail = expanding_window_cv(&y, None, &cfg, Metric::Smape, |_, _, _, _| {
            Err(Error::Fit("nope".into()))
        });
        assert!(all_fail.is_err());
    }
}
