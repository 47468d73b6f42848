//! Neural autoregression: a dense network over `p` lags and the current
//! regressors, forecasting recursively.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuralnet::{train, Example, Network, NetworkSpec, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NarConfig {
    pub order: usize,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for NarConfig {
    fn default() -> Self {
        Self {
            order: 7,
            hidden: vec![16],
            train: TrainConfig { learning_rate: 0.01, max_epochs: 200, patience: 20, ..TrainConfig::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct NarModel {
    pub order: usize,
    pub exog_width: usize,
    pub network: Network,
}

fn features(z: &[f64], t: usize, p: usize, x: Option<&DMatrix<f64>>, xrow: usize) -> Vec<f64> {
    let mut f: Vec<f64> = (1..=p).map(|j| z[t - j]).collect();
    if let Some(x) = x {
        f.extend(x.row(xrow).iter());
    }
    f
}

/// Fit on `y` with optional regressors `x` (rows aligned with `y`). The
/// order is capped so that at least `2 p` training examples remain.
pub fn fit_nar(y: &[f64], x: Option<&DMatrix<f64>>, cfg: &NarConfig) -> Result<NarModel> {
    if let Some(x) = x {
        if x.nrows() != y.len() {
            return Err(Error::shape(format!("{} regressor rows", y.len()), x.nrows().to_string()));
        }
    }
    let p = cfg.order.min(y.len() / 3).max(1);
    if y.len() < p + 4 {
        return Err(Error::Fit(format!("NAR needs at least {} observations, got {}", p + 4, y.len())));
    }
    let examples: Vec<Example> = (p..y.len())
        .map(|t| Example { window: Vec::new(), exog: features(y, t, p, x, t), target: vec![y[t]] })
        .collect();
    let width = x.map_or(0, |x| x.ncols());
    let spec = NetworkSpec { window: 0, conv: Vec::new(), exog_dim: p + width, dense: cfg.hidden.clone(), outputs: 1, window_skip: false };
    let fit = train(&spec, &examples, &cfg.train)?;
    Ok(NarModel { order: p, exog_width: width, network: fit.network })
}

impl NarModel {
    pub fn uses_exog(&self) -> bool {
        self.exog_width > 0
    }

    pub fn forecast(&self, history: &[f64], future_x: Option<&DMatrix<f64>>, h: usize) -> Result<Vec<f64>> {
        if history.len() < self.order {
            return Err(Error::Fit(format!("NAR forecast needs {} past observations", self.order)));
        }
        let fx = if self.uses_exog() {
            let fx = future_x.ok_or_else(|| Error::Fit("NARX forecast needs future regressors".into()))?;
            if fx.nrows() < h || fx.ncols() != self.exog_width {
                return Err(Error::shape(
                    format!("{h} x {} future regressors", self.exog_width),
                    format!("{} x {}", fx.nrows(), fx.ncols()),
                ));
            }
            Some(fx)
        } else {
            None
        };
        let mut z = history[history.len() - self.order..].to_vec();
        for i in 0..h {
            let t = z.len();
            let ex = Example { window: Vec::new(), exog: features(&z, t, self.order, fx, i), target: Vec::new() };
            z.push(self.network.predict(&ex)?[0]);
        }
        Ok(z.split_off(self.order))
    }

    /// One-step in-sample predictions (`NaN` for the first `order` points).
    pub fn fitted(&self, y: &[f64], x: Option<&DMatrix<f64>>) -> Vec<f64> {
        let x = if self.uses_exog() { x } else { None };
        let mut out = vec![f64::NAN; y.len()];
        for (t, slot) in out.iter_mut().enumerate().skip(self.order) {
            let ex = Example { window: Vec::new(), exog: features(y, t, self.order, x, t), target: Vec::new() };
            if let Ok(v) = self.network.predict(&ex) {
                *slot = v[0];
            }
        }
        out
    }
}
