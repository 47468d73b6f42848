use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{raw_coherence_gap, train_nnd, DisaggregationModel, NndConfig};
use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, SeriesPanel};

/// How disaggregation models are laid over the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NndStrategy {
    /// One model from the root straight to the bottom level.
    Standard,
    /// One model per interior node, cascading level by level.
    Iterative,
    /// Cascading models below the given level, whose nodes are forecast
    /// directly.
    MiddleOut { level: usize },
}

impl NndStrategy {
    fn check(&self, h: &Hierarchy) -> Result<()> {
        if h.n_levels() < 2 {
            return Err(Error::Config("disaggregation needs at least two levels".into()));
        }
        if let NndStrategy::MiddleOut { level } = self {
            if *level >= h.n_levels() - 1 {
                return Err(Error::Config(format!(
                    "middle-out level {level} must lie above the bottom level {}",
                    h.n_levels() - 1
                )));
            }
        }
        Ok(())
    }

    /// `(parent, targets)` of every model, in canonical parent order.
    pub fn plan(&self, h: &Hierarchy) -> Result<Vec<(usize, Vec<usize>)>> {
        self.check(h)?;
        Ok(match self {
            NndStrategy::Standard => vec![(h.root(), h.bottom_range().collect())],
            NndStrategy::Iterative => h.interior_nodes().into_iter().map(|n| (n, h.children(n).to_vec())).collect(),
            NndStrategy::MiddleOut { level } => h
                .interior_nodes()
                .into_iter()
                .filter(|&n| h.level(n) >= *level)
                .map(|n| (n, h.children(n).to_vec()))
                .collect(),
        })
    }

    /// Nodes whose forecasts must be supplied.
    pub fn start_nodes(&self, h: &Hierarchy) -> Result<Vec<usize>> {
        self.check(h)?;
        Ok(match self {
            NndStrategy::Standard | NndStrategy::Iterative => vec![h.root()],
            NndStrategy::MiddleOut { level } => h.level_range(*level).collect(),
        })
    }
}

/// All models of one strategy.
#[derive(Debug, Clone)]
pub struct NndModels {
    pub strategy: NndStrategy,
    pub config: NndConfig,
    pub models: Vec<DisaggregationModel>,
}

/// Output of [`NndModels::forecast`].
#[derive(Debug, Clone)]
pub struct NndForecast {
    /// `h x m_bottom` network outputs at the bottom level.
    pub bottom: DMatrix<f64>,
    /// `h x M`, bottom forecasts summed through the hierarchy.
    pub published: DMatrix<f64>,
    /// Per model: mean relative gap between its summed outputs and its
    /// parent forecast.
    pub raw_gaps: Vec<(String, f64)>,
}

impl NndForecast {
    pub fn mean_raw_gap(&self) -> f64 {
        if self.raw_gaps.is_empty() {
            return 0.0;
        }
        self.raw_gaps.iter().map(|g| g.1).sum::<f64>() / self.raw_gaps.len() as f64
    }
}

/// Train every model of `strategy` on `panel` (the training period).
/// Models are independent and trained in parallel; the result is ordered
/// by parent.
pub fn fit_nnd(h: &Hierarchy, panel: &SeriesPanel, strategy: NndStrategy, cfg: &NndConfig) -> Result<NndModels> {
    cfg.validate()?;
    let plan = strategy.plan(h)?;
    let models = plan
        .par_iter()
        .map(|(parent, targets)| {
            train_nnd(h, panel, *parent, targets, cfg).map_err(|e| match e {
                Error::Divergence { epoch, reason } => {
                    Error::Divergence { epoch, reason: format!("{}: {reason}", h.id(*parent)) }
                }
                Error::Fit(m) => Error::Fit(format!("{}: {m}", h.id(*parent))),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NndModels { strategy, config: cfg.clone(), models })
}

impl NndModels {
    /// Disaggregate the forecasts of the start nodes for times
    /// `origin .. origin + h` down to the bottom level.
    ///
    /// `start` maps each start node to its forecast; `panel` must cover the
    /// history before `origin` and the explanatory variables of the
    /// forecast period.
    pub fn forecast(&self, h: &Hierarchy, panel: &SeriesPanel, origin: usize, start: &BTreeMap<usize, Vec<f64>>) -> Result<NndForecast> {
        let needed = self.strategy.start_nodes(h)?;
        let steps = start.values().next().map_or(0, |v| v.len());
        let mut known: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for n in needed {
            let f = start
                .get(&n)
                .ok_or_else(|| Error::Config(format!("missing forecast for start node {}", h.id(n))))?;
            if f.len() != steps {
                return Err(Error::shape(format!("{steps} forecast steps"), f.len().to_string()));
            }
            known.insert(n, f.clone());
        }
        let mut raw_gaps = Vec::with_capacity(self.models.len());
        for m in &self.models {
            let parent_fc = known
                .get(&m.parent)
                .ok_or_else(|| Error::Config(format!("no forecast reached {}", m.parent_id)))?
                .clone();
            let out = m.disaggregate(panel, origin, &parent_fc)?;
            raw_gaps.push((m.parent_id.clone(), raw_coherence_gap(&parent_fc, &out)));
            for (j, &c) in m.children.iter().enumerate() {
                known.insert(c, out.column(j).iter().copied().collect());
            }
        }
        let r = h.bottom_range();
        let mut bottom = DMatrix::zeros(steps, r.len());
        for (j, node) in r.enumerate() {
            let f = known.get(&node).ok_or_else(|| Error::Config(format!("no forecast reached {}", h.id(node))))?;
            for (i, v) in f.iter().enumerate() {
                bottom[(i, j)] = *v;
            }
        }
        let published = h.summing_matrix().aggregate(&bottom)?;
        Ok(NndForecast { bottom, published, raw_gaps })
    }
}
