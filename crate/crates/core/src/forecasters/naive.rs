use crate::error::{Error, Result};

/// Repeats the last observation `h` times.
pub fn naive_forecast(y: &[f64], h: usize) -> Result<Vec<f64>> {
    let last = *y.last().ok_or_else(|| Error::Fit("naive forecast of an empty series".into()))?;
    Ok(vec![last; h])
}

/// Repeats the last full season: the value at `T + i` is `y[T + i - period]`
/// for `i <= period`, and so on cyclically.
pub fn seasonal_naive_forecast(y: &[f64], period: usize, h: usize) -> Result<Vec<f64>> {
    if period == 0 {
        return Err(Error::Config("seasonal period must be positive".into()));
    }
    if y.len() < period {
        return Err(Error::Fit(format!(
            "seasonal naive needs at least {period} observations, got {}",
            y.len()
        )));
    }
    let last_season = &y[y.len() - period..];
    Ok((0..h).map(|i| last_season[i % period]).collect())
}

/// One-step in-sample predictions of the seasonal naive method (`NaN` for
/// the first `period` points).
pub fn seasonal_naive_fitted(y: &[f64], period: usize) -> Vec<f64> {
    (0..y.len())
        .map(|t| if t >= period { y[t - period] } else { f64::NAN })
        .collect()
}
