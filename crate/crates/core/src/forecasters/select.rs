//! Candidate models behind one interface and expanding-window selection of
//! the best one by mean MASE.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arx::{fit_arx_auto, ArxModel};
use super::combine::{cls_weights, combine_mean, combine_weighted};
use super::ets::{fit_ets_auto, EtsModel};
use super::naive::{naive_forecast, seasonal_naive_fitted, seasonal_naive_forecast};
use super::nar::{fit_nar, NarConfig, NarModel};
use crate::error::{Error, Result};
use crate::evaluate::{summarize_folds, CvConfig, Fold, Metric};

/// Candidate families in canonical (tie-breaking) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Naive,
    SeasonalNaive,
    Arx,
    Ets,
    Narx,
    CombMean,
    CombCls,
}

/// Members of both combinations.
pub const COMBINATION_MEMBERS: [ModelKind; 3] = [ModelKind::Arx, ModelKind::Narx, ModelKind::Ets];

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Naive,
        ModelKind::SeasonalNaive,
        ModelKind::Arx,
        ModelKind::Ets,
        ModelKind::Narx,
        ModelKind::CombMean,
        ModelKind::CombCls,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::SeasonalNaive => "seasonal_naive",
            ModelKind::Arx => "arx",
            ModelKind::Ets => "ets",
            ModelKind::Narx => "narx",
            ModelKind::CombMean => "comb_mean",
            ModelKind::CombCls => "comb_cls",
        }
    }

    pub fn is_combination(self) -> bool {
        matches!(self, ModelKind::CombMean | ModelKind::CombCls)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown model '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectConfig {
    pub candidates: Vec<ModelKind>,
    /// Seasonal period of the data.
    pub season: usize,
    pub max_arx_order: usize,
    pub ets_step: f64,
    pub nar: NarConfig,
    /// Most recent cross-validation folds used to fit CLS weights.
    pub cls_holdout_folds: usize,
    /// MASE scaling period; the season when absent.
    pub mase_period: Option<usize>,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            candidates: ModelKind::ALL.to_vec(),
            season: 7,
            max_arx_order: 14,
            ets_step: 0.1,
            nar: NarConfig::default(),
            cls_holdout_folds: 4,
            mase_period: None,
        }
    }
}

impl SelectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Config("no candidate models".into()));
        }
        if self.season == 0 || self.max_arx_order == 0 || self.cls_holdout_folds == 0 {
            return Err(Error::Config("season, ARX order and CLS folds must be positive".into()));
        }
        if !(self.ets_step > 0.0 && self.ets_step <= 1.0) {
            return Err(Error::Config(format!("ETS grid step must lie in (0, 1], got {}", self.ets_step)));
        }
        self.nar.train.validate()
    }

    fn metric(&self) -> Metric {
        Metric::Mase { period: self.mase_period.unwrap_or(self.season) }
    }
}

/// A fitted candidate.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Naive,
    SeasonalNaive { period: usize },
    Arx(ArxModel),
    Ets(EtsModel),
    Narx(NarModel),
    CombMean(Vec<FittedModel>),
    CombCls { members: Vec<FittedModel>, weights: Vec<f64> },
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Naive => ModelKind::Naive,
            FittedModel::SeasonalNaive { .. } => ModelKind::SeasonalNaive,
            FittedModel::Arx(_) => ModelKind::Arx,
            FittedModel::Ets(_) => ModelKind::Ets,
            FittedModel::Narx(_) => ModelKind::Narx,
            FittedModel::CombMean(_) => ModelKind::CombMean,
            FittedModel::CombCls { .. } => ModelKind::CombCls,
        }
    }

    /// `h` forecasts after `history`. `hist_x` holds the regressors aligned
    /// with `history`, `future_x` those of the forecast period.
    pub fn forecast(
        &self,
        history: &[f64],
        hist_x: Option<&DMatrix<f64>>,
        future_x: Option<&DMatrix<f64>>,
        h: usize,
    ) -> Result<Vec<f64>> {
        let out = match self {
            FittedModel::Naive => naive_forecast(history, h)?,
            FittedModel::SeasonalNaive { period } => seasonal_naive_forecast(history, *period, h)?,
            FittedModel::Arx(m) => m.forecast(history, hist_x, future_x, h)?,
            FittedModel::Ets(m) => m.forecast(history, h)?,
            FittedModel::Narx(m) => m.forecast(history, future_x, h)?,
            FittedModel::CombMean(members) => combine_mean(&member_forecasts(members, history, hist_x, future_x, h)?)?,
            FittedModel::CombCls { members, weights } => {
                combine_weighted(&member_forecasts(members, history, hist_x, future_x, h)?, weights)?
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("{} produced a non-finite forecast", self.kind())));
        }
        Ok(out)
    }

    /// One-step in-sample predictions; `NaN` where a model has no lags yet.
    pub fn fitted(&self, y: &[f64], x: Option<&DMatrix<f64>>) -> Vec<f64> {
        match self {
            FittedModel::Naive => seasonal_naive_fitted(y, 1),
            FittedModel::SeasonalNaive { period } => seasonal_naive_fitted(y, *period),
            FittedModel::Arx(m) => m.fitted(y, x),
            FittedModel::Ets(m) => m.fitted(y),
            FittedModel::Narx(m) => m.fitted(y, x),
            FittedModel::CombMean(members) => {
                let k = members.len() as f64;
                let f: Vec<Vec<f64>> = members.iter().map(|m| m.fitted(y, x)).collect();
                (0..y.len()).map(|t| f.iter().map(|v| v[t]).sum::<f64>() / k).collect()
            }
            FittedModel::CombCls { members, weights } => {
                let f: Vec<Vec<f64>> = members.iter().map(|m| m.fitted(y, x)).collect();
                (0..y.len()).map(|t| f.iter().zip(weights).map(|(v, w)| w * v[t]).sum()).collect()
            }
        }
    }

    /// Human-readable parameters for reports.
    pub fn describe(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            FittedModel::Naive => json!({"model": "naive"}),
            FittedModel::SeasonalNaive { period } => json!({"model": "seasonal_naive", "period": period}),
            FittedModel::Arx(m) => json!({"model": "arx", "params": m}),
            FittedModel::Ets(m) => json!({"model": "ets", "params": m}),
            FittedModel::Narx(m) => json!({"model": "narx", "order": m.order, "exog_width": m.exog_width, "spec": m.network.spec()}),
            FittedModel::CombMean(ms) => json!({"model": "comb_mean", "members": ms.iter().map(|m| m.describe()).collect::<Vec<_>>()}),
            FittedModel::CombCls { members, weights } => json!({
                "model": "comb_cls",
                "weights": weights,
                "members": members.iter().map(|m| m.describe()).collect::<Vec<_>>(),
            }),
        }
    }
}

fn member_forecasts(
    members: &[FittedModel],
    history: &[f64],
    hist_x: Option<&DMatrix<f64>>,
    future_x: Option<&DMatrix<f64>>,
    h: usize,
) -> Result<Vec<Vec<f64>>> {
    members.iter().map(|m| m.forecast(history, hist_x, future_x, h)).collect()
}

/// Fit a non-combination candidate on `y` (and regressors `x`, if any).
pub fn fit_base(kind: ModelKind, y: &[f64], x: Option<&DMatrix<f64>>, cfg: &SelectConfig) -> Result<FittedModel> {
    if y.is_empty() {
        return Err(Error::Fit("cannot fit an empty series".into()));
    }
    match kind {
        ModelKind::Naive => Ok(FittedModel::Naive),
        ModelKind::SeasonalNaive => {
            if y.len() < cfg.season {
                return Err(Error::Fit(format!("seasonal naive needs {} observations", cfg.season)));
            }
            Ok(FittedModel::SeasonalNaive { period: cfg.season })
        }
        ModelKind::Arx => Ok(FittedModel::Arx(fit_arx_auto(y, x, cfg.max_arx_order)?)),
        ModelKind::Ets => Ok(FittedModel::Ets(fit_ets_auto(y, cfg.season, cfg.ets_step)?)),
        ModelKind::Narx => Ok(FittedModel::Narx(fit_nar(y, x, &cfg.nar)?)),
        ModelKind::CombMean | ModelKind::CombCls => {
            Err(Error::Config(format!("{kind} is a combination; use select_model")))
        }
    }
}

fn rows(x: Option<&DMatrix<f64>>, start: usize, len: usize) -> Option<DMatrix<f64>> {
    x.map(|x| x.rows(start, len).into_owned())
}

/// Outcome of [`select_model`].
#[derive(Debug, Clone)]
pub struct Selection {
    pub model: FittedModel,
    /// Mean cross-validated MASE per candidate, `None` when it failed.
    pub cv_scores: Vec<(ModelKind, Option<f64>)>,
}

/// Pick the candidate with the lowest mean expanding-window MASE and refit
/// it on the whole series. Ties follow the canonical candidate order.
///
/// Combination forecasts in each fold are built from the members' fold
/// forecasts. CLS weights for a fold are fitted on the most recent
/// `cls_holdout_folds` earlier folds whose test windows lie inside that
/// fold's training data (uniform when there are none); the final CLS
/// weights use the last `cls_holdout_folds` folds.
pub fn select_model(y: &[f64], x: Option<&DMatrix<f64>>, cfg: &SelectConfig, cv: &CvConfig) -> Result<Selection> {
    cfg.validate()?;
    if let Some(x) = x {
        if x.nrows() != y.len() {
            return Err(Error::shape(format!("{} regressor rows", y.len()), x.nrows().to_string()));
        }
    }
    let mut candidates = cfg.candidates.clone();
    candidates.sort();
    candidates.dedup();
    if candidates.len() == 1 && !candidates[0].is_combination() {
        let model = fit_base(candidates[0], y, x, cfg)?;
        return Ok(Selection { model, cv_scores: vec![(candidates[0], None)] });
    }
    let folds = cv.folds(y.len())?;

    let mut base: Vec<ModelKind> = candidates.iter().copied().filter(|k| !k.is_combination()).collect();
    if candidates.iter().any(|k| k.is_combination()) {
        base.extend(COMBINATION_MEMBERS);
    }
    base.sort();
    base.dedup();

    let tasks: Vec<(ModelKind, usize)> = base.iter().flat_map(|&k| (0..folds.len()).map(move |f| (k, f))).collect();
    let results: Vec<Option<Vec<f64>>> = tasks
        .par_iter()
        .map(|&(kind, f)| {
            let fold = &folds[f];
            let run = || -> Result<Vec<f64>> {
                let train_x = rows(x, 0, fold.train_len);
                let test_x = rows(x, fold.test.start, fold.test.len());
                let train = &y[..fold.train_len];
                let m = fit_base(kind, train, train_x.as_ref(), cfg)?;
                m.forecast(train, train_x.as_ref(), test_x.as_ref(), fold.test.len())
            };
            match run() {
                Ok(v) => Some(v),
                Err(e) => {
                    log::debug!("{kind} failed on fold {f}: {e}");
                    None
                }
            }
        })
        .collect();
    let fold_forecasts = |kind: ModelKind| -> Vec<Option<Vec<f64>>> {
        let i = base.iter().position(|&k| k == kind).expect("base kind");
        results[i * folds.len()..(i + 1) * folds.len()].to_vec()
    };
    let members: Vec<Vec<Option<Vec<f64>>>> = if candidates.iter().any(|k| k.is_combination()) {
        COMBINATION_MEMBERS.iter().map(|&k| fold_forecasts(k)).collect()
    } else {
        Vec::new()
    };
    let complete = |f: usize| -> Option<Vec<Vec<f64>>> {
        if members.is_empty() {
            return None;
        }
        members.iter().map(|m| m[f].clone()).collect()
    };

    let metric = cfg.metric();
    let score = |f: usize, forecast: Option<Vec<f64>>| -> Result<f64> {
        let fold = &folds[f];
        let fc = forecast.ok_or_else(|| Error::Fit(format!("no forecast for fold {f}")))?;
        selection_score(metric, &y[fold.test.clone()], &fc, &y[..fold.train_len])
    };

    let mut cv_scores = Vec::new();
    for &kind in &candidates {
        let per_fold: Vec<Option<Vec<f64>>> = match kind {
            ModelKind::CombMean => (0..folds.len()).map(|f| complete(f).and_then(|m| combine_mean(&m).ok())).collect(),
            ModelKind::CombCls => (0..folds.len())
                .map(|f| {
                    let m = complete(f)?;
                    let w = cls_fold_weights(&folds, f, folds[f].train_len, &complete, y, cfg.cls_holdout_folds);
                    combine_weighted(&m, &w).ok()
                })
                .collect(),
            k => fold_forecasts(k),
        };
        let outcome = summarize_folds((0..folds.len()).map(|f| score(f, per_fold[f].clone())).collect());
        match outcome {
            Ok(o) => cv_scores.push((kind, Some(o.mean))),
            Err(e) => {
                log::warn!("candidate {kind} failed cross-validation: {e}");
                cv_scores.push((kind, None));
            }
        }
    }

    let mut ranked: Vec<(f64, ModelKind)> = cv_scores.iter().filter_map(|(k, s)| s.map(|s| (s, *k))).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if ranked.is_empty() {
        return Err(Error::Fit("every candidate model failed cross-validation".into()));
    }
    let mut last_err = None;
    for (_, kind) in ranked {
        let fitted = match kind {
            ModelKind::CombMean => fit_members(y, x, cfg).map(FittedModel::CombMean),
            ModelKind::CombCls => fit_members(y, x, cfg).map(|ms| {
                let w = cls_fold_weights(&folds, folds.len(), y.len(), &complete, y, cfg.cls_holdout_folds);
                FittedModel::CombCls { members: ms, weights: w }
            }),
            k => fit_base(k, y, x, cfg),
        };
        match fitted {
            Ok(model) => return Ok(Selection { model, cv_scores }),
            Err(e) => {
                log::warn!("refitting {kind} on the full series failed: {e}");
                last_err = Some(e);
            }
        }
    }
    Err(last_err.unwrap())
}

/// MASE, falling back to the one-step scale and then to the plain MAE when
/// the training window makes the scale vanish. The fallback depends only on
/// the training window, so all candidates of a fold are scored alike.
fn selection_score(metric: Metric, actual: &[f64], forecast: &[f64], insample: &[f64]) -> Result<f64> {
    let Metric::Mase { period } = metric else {
        return metric.score(actual, forecast, insample);
    };
    if actual.len() != forecast.len() || actual.is_empty() {
        return Err(Error::shape(format!("{} forecasts", actual.len()), forecast.len().to_string()));
    }
    let mae = actual.iter().zip(forecast).map(|(a, f)| (a - f).abs()).sum::<f64>() / actual.len() as f64;
    let scale = |p: usize| -> Option<f64> {
        (insample.len() > p).then(|| {
            insample.iter().skip(p).zip(insample).map(|(a, b)| (a - b).abs()).sum::<f64>() / (insample.len() - p) as f64
        })
    };
    let scales = [scale(period.max(1)), scale(1)];
    if scales.iter().all(Option::is_none) {
        return Err(Error::Metric(format!("MASE needs more than {period} in-sample points")));
    }
    match scales.iter().flatten().find(|s| **s > 0.0) {
        Some(s) => Ok(mae / s),
        None => Ok(mae),
    }
}

fn fit_members(y: &[f64], x: Option<&DMatrix<f64>>, cfg: &SelectConfig) -> Result<Vec<FittedModel>> {
    COMBINATION_MEMBERS.iter().map(|&k| fit_base(k, y, x, cfg)).collect()
}

/// CLS weights from the last `keep` folds before index `upto` whose test
/// windows end by `limit`.
fn cls_fold_weights(
    folds: &[Fold],
    upto: usize,
    limit: usize,
    complete: &dyn Fn(usize) -> Option<Vec<Vec<f64>>>,
    y: &[f64],
    keep: usize,
) -> Vec<f64> {
    let k = COMBINATION_MEMBERS.len();
    let usable: Vec<(usize, Vec<Vec<f64>>)> = (0..upto)
        .filter(|&j| folds[j].test.end <= limit)
        .filter_map(|j| complete(j).map(|m| (j, m)))
        .collect();
    let chosen = &usable[usable.len().saturating_sub(keep)..];
    if chosen.is_empty() {
        return vec![1.0 / k as f64; k];
    }
    let mut stacked = vec![Vec::new(); k];
    let mut actual = Vec::new();
    for (j, m) in chosen {
        for (s, f) in stacked.iter_mut().zip(m) {
            s.extend_from_slice(f);
        }
        actual.extend_from_slice(&y[folds[*j].test.clone()]);
    }
    cls_weights(&stacked, &actual).unwrap_or_else(|e| {
        log::warn!("CLS weights fell back to uniform: {e}");
        vec![1.0 / k as f64; k]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, Normal};

    fn cv_for(n: usize) -> CvConfig {
        CvConfig::for_length(n, 7, 7, 0.5).unwrap()
    }

    fn only(kinds: &[ModelKind]) -> SelectConfig {
        SelectConfig { candidates: kinds.to_vec(), ..SelectConfig::default() }
    }

    #[test]
    fn canonical_order_and_names() {
        let mut v = ModelKind::ALL.to_vec();
        v.reverse();
        v.sort();
        assert_eq!(v, ModelKind::ALL.to_vec());
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("arima".parse::<ModelKind>().is_err());
    }

    #[test]
    fn seasonal_series_selects_seasonal_naive() {
        let pattern = [5.0, 9.0, 12.0, 8.0, 3.0, 1.0, 6.0];
        let y: Vec<f64> = (0..84).map(|t| pattern[t % 7]).collect();
        let s = select_model(&y, None, &only(&[ModelKind::Naive, ModelKind::SeasonalNaive]), &cv_for(y.len())).unwrap();
        assert_eq!(s.model.kind(), ModelKind::SeasonalNaive);
        assert_eq!(s.cv_scores[1].1, Some(0.0));
    }

    #[test]
    fn selection_score_falls_back_when_scale_vanishes() {
        let m = Metric::Mase { period: 2 };
        // seasonal scale 0, one-step scale 1
        assert_eq!(selection_score(m, &[1.0, 2.0], &[2.0, 2.0], &[1.0, 2.0, 1.0, 2.0]).unwrap(), 0.5);
        // constant window: plain MAE
        assert_eq!(selection_score(m, &[1.0, 2.0], &[2.0, 2.0], &[3.0, 3.0, 3.0]).unwrap(), 0.5);
        // regular MASE otherwise
        let v = selection_score(m, &[4.0], &[3.0], &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert!((v - 1.0 / 2.5).abs() < 1e-12);
    }

    #[test]
    fn random_walk_selects_naive() {
        let mut rng = rng_from_seed(17);
        let step = Normal::new(0.0, 1.0).unwrap();
        let mut y = vec![100.0];
        for _ in 1..140 {
            let prev = *y.last().unwrap();
            y.push(prev + step.sample(&mut rng));
        }
        let s = select_model(&y, None, &only(&[ModelKind::Naive, ModelKind::SeasonalNaive]), &cv_for(y.len())).unwrap();
        assert_eq!(s.model.kind(), ModelKind::Naive);
    }

    #[test]
    fn single_candidate_and_total_failure() {
        let y: Vec<f64> = (0..40).map(|t| (t % 3) as f64 + 1.0).collect();
        let s = select_model(&y, None, &only(&[ModelKind::Ets]), &cv_for(y.len())).unwrap();
        assert_eq!(s.model.kind(), ModelKind::Ets);
        let short = [1.0, 2.0, 3.0];
        let cv = CvConfig { starting_window: 1, ending_window: 2, horizon: 1, expanding_steps: 1 };
        let cfg = SelectConfig { season: 7, ..only(&[ModelKind::SeasonalNaive, ModelKind::Arx]) };
        assert!(select_model(&short, None, &cfg, &cv).is_err());
    }

    #[test]
    fn combinations_are_scored_and_refit() {
        let mut rng = rng_from_seed(5);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let y: Vec<f64> = (0..120)
            .map(|t| 50.0 + 0.2 * t as f64 + 5.0 * (t as f64 * std::f64::consts::TAU / 7.0).sin() + noise.sample(&mut rng))
            .collect();
        let mut cfg = only(&[ModelKind::CombMean, ModelKind::CombCls]);
        cfg.nar.train.max_epochs = 30;
        let s = select_model(&y, None, &cfg, &cv_for(y.len())).unwrap();
        assert!(s.cv_scores.iter().all(|(_, v)| v.is_some()));
        if let FittedModel::CombCls { weights, .. } = &s.model {
            assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-8);
            assert!(weights.iter().all(|w| *w >= 0.0));
        }
        let f = s.model.forecast(&y, None, None, 7).unwrap();
        assert_eq!(f.len(), 7);
    }

    #[test]
    fn regressors_reach_arx() {
        let x = DMatrix::from_fn(90, 1, |t, _| ((t * 7) % 11) as f64);
        let y: Vec<f64> = (0..90).map(|t| 3.0 + 2.0 * x[(t, 0)]).collect();
        let s = select_model(&y, Some(&x), &only(&[ModelKind::Naive, ModelKind::Arx]), &cv_for(90)).unwrap();
        assert_eq!(s.model.kind(), ModelKind::Arx);
        let fx = DMatrix::from_column_slice(2, 1, &[4.0, 1.0]);
        let f = s.model.forecast(&y, Some(&x), Some(&fx), 2).unwrap();
        assert!((f[0] - 11.0).abs() < 1e-6 && (f[1] - 5.0).abs() < 1e-6, "{f:?}");
    }
}
