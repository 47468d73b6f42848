use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy measures supported by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Mase,
    Smape,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Mase => "MASE",
            MetricKind::Smape => "SMAPE",
        }
    }
}

/// A metric with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mase { period: usize },
    Smape,
}

impl Metric {
    pub fn kind(&self) -> MetricKind {
        match self {
            Metric::Mase { .. } => MetricKind::Mase,
            Metric::Smape => MetricKind::Smape,
        }
    }

    pub fn score(&self, actual: &[f64], forecast: &[f64], insample: &[f64]) -> Result<f64> {
        match *self {
            Metric::Mase { period } => mase(actual, forecast, insample, period),
            Metric::Smape => smape(actual, forecast),
        }
    }
}

fn check_lengths(actual: &[f64], forecast: &[f64]) -> Result<()> {
    if actual.len() != forecast.len() {
        return Err(Error::shape(
            format!("{} forecast values", actual.len()),
            forecast.len(),
        ));
    }
    if actual.is_empty() {
        return Err(Error::Metric("empty forecast horizon".into()));
    }
    Ok(())
}

/// Mean absolute scaled error: out-of-sample MAE divided by the in-sample
/// MAE of the seasonal naive forecast with period `period`.
pub fn mase(actual: &[f64], forecast: &[f64], insample: &[f64], period: usize) -> Result<f64> {
    check_lengths(actual, forecast)?;
    let period = period.max(1);
    if insample.len() <= period {
        return Err(Error::Metric(format!(
            "MASE needs more than {period} in-sample points, got {}",
            insample.len()
        )));
    }
    let scale = insample
        .iter()
        .skip(period)
        .zip(insample)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / (insample.len() - period) as f64;
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::Metric(
            "MASE scale is zero: the in-sample series repeats with its period".into(),
        ));
    }
    let mae = actual
        .iter()
        .zip(forecast)
        .map(|(a, f)| (a - f).abs())
        .sum::<f64>()
        / actual.len() as f64;
    Ok(mae / scale)
}

/// Symmetric MAPE on the `[0, 2]` scale.
pub fn smape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_lengths(actual, forecast)?;
    let mut total = 0.0;
    for (i, (a, f)) in actual.iter().zip(forecast).enumerate() {
        let denom = a.abs() + f.abs();
        if denom == 0.0 {
            return Err(Error::Metric(format!(
                "SMAPE undefined: actual and forecast are both zero at step {}",
                i + 1
            )));
        }
        total += (a - f).abs() / denom;
    }
    Ok(2.0 * total / actual.len() as f64)
}
