use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::windows::{assemble_features, feature_width, WindowConfig};
use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, SeriesPanel};
use crate::neuralnet::{grid_search, train, EpochLoss, Example, GridSpace, Network, NetworkSpec, TrainConfig};
use crate::rng::derive_seed;

/// Layer counts and widths of the disaggregation network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchitectureConfig {
    pub conv_layers: usize,
    pub filters: usize,
    pub kernel: usize,
    pub dense_layers: usize,
    pub hidden: usize,
    /// Feed the standardized window straight into the output layer too.
    pub window_skip: bool,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        Self { conv_layers: 6, filters: 16, kernel: 4, dense_layers: 3, hidden: 64, window_skip: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NndConfig {
    pub window: WindowConfig,
    pub architecture: ArchitectureConfig,
    pub train: TrainConfig,
    /// Architecture grid searched per model when set.
    pub grid: Option<GridSpace>,
    /// Append calendar dummies to the explanatory variables.
    pub use_calendar: bool,
    /// Root seed; each model derives its own stream from its parent id.
    pub seed: u64,
}

impl Default for NndConfig {
    fn default() -> Self {
        Self {
            window: WindowConfig::default(),
            architecture: ArchitectureConfig::default(),
            train: TrainConfig::default(),
            grid: None,
            use_calendar: true,
            seed: 0,
        }
    }
}

impl NndConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.train.validate()?;
        let a = &self.architecture;
        if a.filters == 0 || a.kernel == 0 || a.hidden == 0 {
            return Err(Error::Config("filters, kernel and hidden width must be at least 1".into()));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }

    pub fn model_seed(&self, parent_id: &str) -> u64 {
        derive_seed(self.seed, &format!("nnd/{parent_id}"))
    }

    fn spec(&self, exog_dim: usize, outputs: usize) -> NetworkSpec {
        let a = &self.architecture;
        NetworkSpec::layered(self.window.w, exog_dim, outputs, a.conv_layers, a.filters, a.kernel, a.dense_layers, a.hidden)
            .with_window_skip(a.window_skip)
    }
}

/// Trained network mapping a window of one aggregate and the explanatory
/// variables of its targets to the target values.
#[derive(Debug, Clone)]
pub struct DisaggregationModel {
    pub parent: usize,
    pub parent_id: String,
    pub children: Vec<usize>,
    pub child_ids: Vec<String>,
    pub window: WindowConfig,
    pub use_calendar: bool,
    pub network: Network,
    pub history: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub seed: u64,
}

fn example(panel: &SeriesPanel, parent_series: &[f64], children: &[usize], calendar: bool, w: usize, t: usize) -> Result<Example> {
    Ok(Example {
        window: parent_series[t + 1 - w..=t].to_vec(),
        exog: assemble_features(panel, children, calendar, t)?,
        target: Vec::new(),
    })
}

/// Train the disaggregation model of `parent` into `children` on every
/// window of the training panel.
pub fn train_nnd(h: &Hierarchy, panel: &SeriesPanel, parent: usize, children: &[usize], cfg: &NndConfig) -> Result<DisaggregationModel> {
    cfg.validate()?;
    if children.is_empty() {
        return Err(Error::Structure { node: h.id(parent).to_string(), reason: "no targets to disaggregate into".into() });
    }
    let w = cfg.window.w;
    let parent_series = panel.series(parent);
    let targets = cfg.window.targets(panel.len());
    if targets.len() < 2 {
        return Err(Error::Data(format!(
            "{}: {} observations leave fewer than 2 windows of length {w}",
            h.id(parent),
            panel.len()
        )));
    }
    let examples: Vec<Example> = targets
        .iter()
        .map(|&t| {
            let mut ex = example(panel, parent_series, children, cfg.use_calendar, w, t)?;
            ex.target = children.iter().map(|&c| panel.values()[(t, c)]).collect();
            Ok(ex)
        })
        .collect::<Result<_>>()?;
    let spec = cfg.spec(feature_width(panel, children, cfg.use_calendar), children.len());
    let seed = cfg.model_seed(h.id(parent));
    let tcfg = TrainConfig { seed, ..cfg.train.clone() };
    let fit = match &cfg.grid {
        Some(space) => grid_search(space, &spec, &examples, &tcfg)?.1,
        None => train(&spec, &examples, &tcfg)?,
    };
    log::info!(
        "NND {} -> {} targets: {} epochs, best {} (validation {:.6})",
        h.id(parent),
        children.len(),
        fit.history.len(),
        fit.best_epoch,
        fit.history[fit.best_epoch].validation
    );
    Ok(DisaggregationModel {
        parent,
        parent_id: h.id(parent).to_string(),
        children: children.to_vec(),
        child_ids: children.iter().map(|&c| h.id(c).to_string()).collect(),
        window: cfg.window,
        use_calendar: cfg.use_calendar,
        network: fit.network,
        history: fit.history,
        best_epoch: fit.best_epoch,
        seed,
    })
}

impl DisaggregationModel {
    /// Disaggregate `parent_forecast` for times `origin, origin + 1, ...`.
    ///
    /// The window for time `t` holds observed parent values before `origin`
    /// and the parent forecasts from `origin` up to `t`. Explanatory
    /// variables come from `panel` at time `t`. Returns `h x children`.
    pub fn disaggregate(&self, panel: &SeriesPanel, origin: usize, parent_forecast: &[f64]) -> Result<DMatrix<f64>> {
        let w = self.window.w;
        let hsteps = parent_forecast.len();
        if parent_forecast.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("{}: non-finite parent forecast", self.parent_id)));
        }
        if origin + hsteps > panel.len() {
            return Err(Error::Data(format!(
                "{}: explanatory variables end at step {}, forecasts need {}",
                self.parent_id,
                panel.len(),
                origin + hsteps
            )));
        }
        let observed = &panel.series(self.parent)[..origin];
        let mut path: Vec<f64> = observed.to_vec();
        path.extend_from_slice(parent_forecast);
        let mut out = DMatrix::zeros(hsteps, self.children.len());
        for i in 0..hsteps {
            let t = origin + i;
            if t + 1 < w {
                return Err(Error::Data(format!("{}: not enough history for a window of {w}", self.parent_id)));
            }
            let ex = example(panel, &path, &self.children, self.use_calendar, w, t)?;
            let y = self.network.predict(&ex)?;
            for (j, v) in y.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// Network output at time `t` from observed values only.
    pub fn predict_at(&self, panel: &SeriesPanel, t: usize) -> Result<Vec<f64>> {
        let w = self.window.w;
        if t + 1 < w || t >= panel.len() {
            return Err(Error::Data(format!("no complete window ends at step {t}")));
        }
        let ex = example(panel, panel.series(self.parent), &self.children, self.use_calendar, w, t)?;
        self.network.predict(&ex)
    }
}

/// Mean over steps of `|sum(children) - parent| / |parent|` (steps with a
/// zero parent use the absolute gap).
pub fn raw_coherence_gap(parent_forecast: &[f64], children: &DMatrix<f64>) -> f64 {
    if parent_forecast.is_empty() {
        return 0.0;
    }
    let total: f64 = parent_forecast
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s: f64 = children.row(i).iter().sum();
            let gap = (s - p).abs();
            if *p != 0.0 { gap / p.abs() } else { gap }
        })
        .sum();
    total / parent_forecast.len() as f64
}
