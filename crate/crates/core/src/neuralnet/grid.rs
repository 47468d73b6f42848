use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::Example;
use super::spec::{NetworkSpec, TrainConfig};
use super::train::{train, validation_count, TrainedNetwork};
use crate::error::{Error, Result};

/// Candidate filter counts, kernel sizes and hidden widths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpace {
    pub filters: Vec<usize>,
    pub kernels: Vec<usize>,
    pub hidden: Vec<usize>,
}

impl Default for GridSpace {
    fn default() -> Self {
        Self { filters: vec![16, 32, 64], kernels: vec![4, 8, 16], hidden: vec![64, 128, 256] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCell {
    pub filters: usize,
    pub kernel: usize,
    pub hidden: usize,
}

impl GridSpace {
    /// Cells in lexicographic `(filters, kernel, hidden)` order.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut f = self.filters.clone();
        let mut k = self.kernels.clone();
        let mut h = self.hidden.clone();
        for v in [&mut f, &mut k, &mut h] {
            v.sort_unstable();
            v.dedup();
        }
        let mut out = Vec::new();
        for &filters in &f {
            for &kernel in &k {
                for &hidden in &h {
                    out.push(GridCell { filters, kernel, hidden });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells().is_empty() || self.cells().iter().any(|c| c.filters == 0 || c.kernel == 0 || c.hidden == 0) {
            return Err(Error::Config("grid needs non-empty lists of positive values".into()));
        }
        Ok(())
    }
}

/// `base` with every convolution set to the cell's filters and kernel and
/// every dense layer to the cell's width.
pub fn apply_cell(base: &NetworkSpec, cell: GridCell) -> NetworkSpec {
    let mut s = base.clone();
    for c in &mut s.conv {
        c.filters = cell.filters;
        c.kernel = cell.kernel;
    }
    for d in &mut s.dense {
        *d = cell.hidden;
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridScore {
    pub cell: GridCell,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best: GridCell,
    pub spec: NetworkSpec,
    pub scores: Vec<GridScore>,
}

/// Score every cell with `evaluate` (lower is better) and keep the best;
/// ties go to the lexicographically smallest cell. Failed cells are logged
/// and skipped.
pub fn grid_search_with<F>(space: &GridSpace, base: &NetworkSpec, evaluate: F) -> Result<GridOutcome>
where
    F: Fn(&NetworkSpec) -> Result<f64> + Sync,
{
    space.validate()?;
    let cells = space.cells();
    let results: Vec<(GridCell, Result<f64>)> =
        cells.par_iter().map(|&c| (c, evaluate(&apply_cell(base, c)))).collect();
    let mut scores = Vec::with_capacity(results.len());
    let mut best: Option<(f64, GridCell)> = None;
    let mut last_err = None;
    for (cell, r) in results {
        let score = match r {
            Ok(v) if v.is_finite() => Some(v),
            Ok(v) => {
                log::warn!("grid cell {cell:?} produced loss {v}");
                None
            }
            Err(e) => {
                log::warn!("grid cell {cell:?} failed: {e}");
                last_err = Some(e);
                None
            }
        };
        if let Some(v) = score {
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, cell));
            }
        }
        scores.push(GridScore { cell, validation_loss: score });
    }
    match best {
        Some((_, cell)) => Ok(GridOutcome { best: cell, spec: apply_cell(base, cell), scores }),
        None => Err(last_err.unwrap_or_else(|| Error::Fit("every grid cell failed".into()))),
    }
}

/// Grid search by best validation loss, then return the network trained
/// with the winning cell.
pub fn grid_search(
    space: &GridSpace,
    base: &NetworkSpec,
    examples: &[Example],
    cfg: &TrainConfig,
) -> Result<(GridOutcome, TrainedNetwork)> {
    if validation_count(examples.len(), cfg.validation_fraction) == 0 {
        return Err(Error::Config("grid search needs a validation split".into()));
    }
    let trained = std::sync::Mutex::new(std::collections::BTreeMap::new());
    let outcome = grid_search_with(space, base, |spec| {
        let t = train(spec, examples, cfg)?;
        let loss = t.history[t.best_epoch].validation;
        let key = (spec.conv.first().map(|c| (c.filters, c.kernel)), spec.dense.first().copied());
        trained.lock().expect("grid results").insert(key, t);
        Ok(loss)
    })?;
    let key = (outcome.spec.conv.first().map(|c| (c.filters, c.kernel)), outcome.spec.dense.first().copied());
    let net = trained.into_inner().expect("grid results").remove(&key).ok_or_else(|| Error::Fit("grid winner missing".into()))?;
    Ok((outcome, net))
}
