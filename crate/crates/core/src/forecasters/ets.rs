//! Additive exponential smoothing (simple, Holt, additive Holt-Winters) with
//! smoothing parameters picked from a grid by in-sample one-step SSE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtsVariant {
    Ses,
    Holt,
    HoltWintersAdditive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsModel {
    pub variant: EtsVariant,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub period: usize,
    /// In-sample one-step SSE at the chosen parameters.
    pub sse: f64,
}

struct Run {
    sse: f64,
    n_errors: usize,
    level: f64,
    trend: f64,
    season: Vec<f64>,
    fitted: Vec<f64>,
}

fn min_len(variant: EtsVariant, period: usize) -> usize {
    match variant {
        EtsVariant::Ses => 1,
        EtsVariant::Holt => 2,
        EtsVariant::HoltWintersAdditive => 2 * period,
    }
}

/// Runs the smoothing recursions; errors are accumulated from index
/// `score_from` on.
fn run(y: &[f64], variant: EtsVariant, params: (f64, f64, f64), period: usize, score_from: usize, keep_fitted: bool) -> Run {
    let (alpha, beta, gamma) = params;
    let n = y.len();
    let mut fitted = if keep_fitted { vec![f64::NAN; n] } else { Vec::new() };
    let (mut level, mut trend, mut season, start) = match variant {
        EtsVariant::Ses => (y[0], 0.0, Vec::new(), 1),
        EtsVariant::Holt => (y[0], if n > 1 { y[1] - y[0] } else { 0.0 }, Vec::new(), 1),
        EtsVariant::HoltWintersAdditive => {
            let m = period;
            let first = y[..m].iter().sum::<f64>() / m as f64;
            let second = y[m..2 * m].iter().sum::<f64>() / m as f64;
            let season = y[..m].iter().map(|v| v - first).collect();
            (first, (second - first) / m as f64, season, m)
        }
    };
    let mut sse = 0.0;
    let mut n_errors = 0;
    for t in start..n {
        let s_idx = if season.is_empty() { 0 } else { t % period };
        let s = season.get(s_idx).copied().unwrap_or(0.0);
        let pred = level + trend + s;
        if keep_fitted {
            fitted[t] = pred;
        }
        if t >= score_from {
            let e = y[t] - pred;
            sse += e * e;
            n_errors += 1;
        }
        match variant {
            EtsVariant::Ses => level = alpha * y[t] + (1.0 - alpha) * level,
            EtsVariant::Holt => {
                let prev = level;
                level = alpha * y[t] + (1.0 - alpha) * (level + trend);
                trend = beta * (level - prev) + (1.0 - beta) * trend;
            }
            EtsVariant::HoltWintersAdditive => {
                let (prev_level, prev_trend) = (level, trend);
                level = alpha * (y[t] - s) + (1.0 - alpha) * (level + trend);
                trend = beta * (level - prev_level) + (1.0 - beta) * trend;
                season[s_idx] = gamma * (y[t] - prev_level - prev_trend) + (1.0 - gamma) * s;
            }
        }
    }
    Run {
        sse,
        n_errors,
        level,
        trend,
        season,
        fitted,
    }
}

fn grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (1..=n).map(|i| (i as f64 * step).min(1.0)).collect()
}

impl EtsModel {
    fn check(y: &[f64], variant: EtsVariant, period: usize) -> Result<()> {
        if variant == EtsVariant::HoltWintersAdditive && period < 2 {
            return Err(Error::Config("Holt-Winters needs a seasonal period of at least 2".into()));
        }
        let need = min_len(variant, period);
        if y.len() < need.max(1) {
            return Err(Error::Fit(format!(
                "{variant:?} needs at least {need} observations, got {}",
                y.len()
            )));
        }
        Ok(())
    }
}

/// Fits one variant: every `(alpha, beta, gamma)` on the grid
/// `{step, 2 step, ..., 1}` is tried and the lowest one-step SSE wins, the
/// first grid point winning ties.
pub fn fit_ets(y: &[f64], variant: EtsVariant, period: usize, step: f64) -> Result<EtsModel> {
    fit_ets_scored(y, variant, period, step, min_len(variant, period).max(1))
}

fn fit_ets_scored(y: &[f64], variant: EtsVariant, period: usize, step: f64, score_from: usize) -> Result<EtsModel> {
    EtsModel::check(y, variant, period)?;
    let values = grid(step);
    let betas: &[f64] = if variant == EtsVariant::Ses { &[0.0] } else { &values };
    let gammas: &[f64] = if variant == EtsVariant::HoltWintersAdditive { &values } else { &[0.0] };
    let mut best: Option<EtsModel> = None;
    for &alpha in &values {
        for &beta in betas {
            for &gamma in gammas {
                let r = run(y, variant, (alpha, beta, gamma), period, score_from, false);
                if !r.sse.is_finite() {
                    continue;
                }
                if best.as_ref().is_none_or(|b| r.sse < b.sse) {
                    best = Some(EtsModel {
                        variant,
                        alpha,
                        beta,
                        gamma,
                        period,
                        sse: r.sse,
                    });
                }
            }
        }
    }
    best.ok_or_else(|| Error::Fit(format!("{variant:?}: no finite fit on the grid")))
}

/// Fits every feasible variant and keeps the lowest AIC, all variants being
/// scored on the same observations.
pub fn fit_ets_auto(y: &[f64], period: usize, step: f64) -> Result<EtsModel> {
    let mut variants = vec![EtsVariant::Ses, EtsVariant::Holt];
    if period >= 2 && y.len() >= 2 * period {
        variants.push(EtsVariant::HoltWintersAdditive);
    }
    let score_from = variants.iter().map(|v| min_len(*v, period)).max().unwrap_or(1).max(2);
    if y.len() <= score_from {
        return fit_ets(y, EtsVariant::Ses, period, step);
    }
    let mut best: Option<(f64, EtsModel)> = None;
    for v in variants {
        let model = fit_ets_scored(y, v, period, step, score_from)?;
        let n = (y.len() - score_from) as f64;
        let k = match v {
            EtsVariant::Ses => 2,
            EtsVariant::Holt => 4,
            EtsVariant::HoltWintersAdditive => 4 + period,
        } as f64;
        let aic = n * (model.sse / n).max(1e-300).ln() + 2.0 * k;
        if best.as_ref().is_none_or(|(b, _)| aic < *b) {
            best = Some((aic, model));
        }
    }
    Ok(best.unwrap().1)
}

impl EtsModel {
    fn params(&self) -> (f64, f64, f64) {
        (self.alpha, self.beta, self.gamma)
    }

    /// Forecast after `history`, rerunning the recursions with the fitted
    /// smoothing parameters.
    pub fn forecast(&self, history: &[f64], h: usize) -> Result<Vec<f64>> {
        Self::check(history, self.variant, self.period)?;
        let r = run(history, self.variant, self.params(), self.period, usize::MAX, false);
        let n = history.len();
        Ok((1..=h)
            .map(|i| {
                let s = if r.season.is_empty() { 0.0 } else { r.season[(n + i - 1) % self.period] };
                r.level + i as f64 * r.trend + s
            })
            .collect())
    }

    pub fn fitted(&self, y: &[f64]) -> Vec<f64> {
        if Self::check(y, self.variant, self.period).is_err() {
            return vec![f64::NAN; y.len()];
        }
        run(y, self.variant, self.params(), self.period, usize::MAX, true).fitted
    }

    pub fn n_scored(&self, y: &[f64]) -> usize {
        run(y, self.variant, self.params(), self.period, min_len(self.variant, self.period), false).n_errors
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ses_alpha_one_forecasts_last_value() {
        let y = [3.0, 8.0, 1.0, 6.0];
        let m = EtsModel {
            variant: EtsVariant::Ses,
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
            period: 1,
            sse: 0.0,
        };
        assert_eq!(m.forecast(&y, 3).unwrap(), vec![6.0; 3]);
    }

    #[test]
    fn constant_series_all_variants() {
        let y = vec![5.0; 28];
        for v in [EtsVariant::Ses, EtsVariant::Holt, EtsVariant::HoltWintersAdditive] {
            let m = fit_ets(&y, v, 7, 0.1).unwrap();
            let f = m.forecast(&y, 10).unwrap();
            assert!(f.iter().all(|x| (x - 5.0).abs() < 1e-12), "{v:?} {f:?}");
        }
        let f = fit_ets_auto(&y, 7, 0.1).unwrap().forecast(&y, 3).unwrap();
        assert!(f.iter().all(|x| (x - 5.0).abs() < 1e-12));
    }

    #[test]
    fn holt_winters_noiseless_seasonal() {
        let y: Vec<f64> = (0..12).map(|t| 10.0 + if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let m = fit_ets(&y, EtsVariant::HoltWintersAdditive, 2, 0.1).unwrap();
        let f = m.forecast(&y, 2).unwrap();
        assert!((f[0] - 11.0).abs() < 1e-3 && (f[1] - 9.0).abs() < 1e-3, "{f:?}");
    }

    #[test]
    fn holt_tracks_linear_trend() {
        let y: Vec<f64> = (0..20).map(|t| 2.0 + 0.5 * t as f64).collect();
        let m = fit_ets(&y, EtsVariant::Holt, 1, 0.1).unwrap();
        let f = m.forecast(&y, 3).unwrap();
        for (i, v) in f.iter().enumerate() {
            assert!((v - (2.0 + 0.5 * (20 + i) as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn too_short_for_variant() {
        assert!(fit_ets(&[1.0, 2.0, 3.0], EtsVariant::HoltWintersAdditive, 2, 0.1).is_err());
        assert!(fit_ets(&[], EtsVariant::Ses, 1, 0.1).is_err());
        assert!(fit_ets(&[1.0], EtsVariant::Holt, 1, 0.1).is_err());
    }

    #[test]
    fn fitted_is_one_step_forecast() {
        let y: Vec<f64> = (0..40).map(|t| 10.0 + (t % 7) as f64 + 0.1 * t as f64).collect();
        let m = fit_ets_auto(&y, 7, 0.1).unwrap();
        let fitted = m.fitted(&y);
        for t in [20, 30, 39] {
            let f = m.forecast(&y[..t], 1).unwrap();
            assert!((f[0] - fitted[t]).abs() < 1e-9);
        }
    }
}
