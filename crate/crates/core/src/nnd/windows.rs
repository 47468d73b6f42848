use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::SeriesPanel;

/// Sliding windows over an aggregate series: `w` values ending at (and
/// including) the target time, advancing by `hop`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub w: usize,
    pub hop: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { w: 30, hop: 1 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w == 0 || self.hop == 0 {
            return Err(Error::Config("window length and hop must be at least 1".into()));
        }
        Ok(())
    }

    /// Zero-based target times of the windows over a series of length `n`.
    pub fn targets(&self, n: usize) -> Vec<usize> {
        if n < self.w {
            return Vec::new();
        }
        (self.w - 1..n).step_by(self.hop).collect()
    }
}

/// `(window, target time)` pairs; the window covers `t - w + 1 ..= t`.
pub fn make_windows(series: &[f64], cfg: WindowConfig) -> Result<Vec<(Vec<f64>, usize)>> {
    cfg.validate()?;
    if series.len() < cfg.w {
        return Err(Error::Data(format!("series of length {} is shorter than the window {}", series.len(), cfg.w)));
    }
    Ok(cfg.targets(series.len()).into_iter().map(|t| (series[t + 1 - cfg.w..=t].to_vec(), t)).collect())
}

/// Explanatory features at time `t`: the regressors of each node in
/// `children` (in the given order), then the calendar dummies if enabled.
pub fn assemble_features(panel: &SeriesPanel, children: &[usize], calendar: bool, t: usize) -> Result<Vec<f64>> {
    if t >= panel.len() {
        return Err(Error::Data(format!("no explanatory variables at step {t}; the panel has {} steps", panel.len())));
    }
    let mut out = Vec::new();
    for &c in children {
        out.extend(panel.exog(c).row(t));
    }
    if calendar {
        out.extend(panel.calendar_row(t));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("missing explanatory value at step {t}")));
    }
    Ok(out)
}

/// Width of [`assemble_features`] output.
pub fn feature_width(panel: &SeriesPanel, children: &[usize], calendar: bool) -> usize {
    children.iter().map(|&c| panel.exog(c).width()).sum::<usize>() + if calendar { panel.calendar().width() } else { 0 }
}
