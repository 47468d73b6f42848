use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;

/// Disaggregation shares of a node's value among its bottom descendants,
/// in bottom-column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionVector(pub Vec<f64>);

impl ProportionVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numeric("proportions must be finite and non-negative".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Numeric(format!("proportions sum to {s}, not 1")));
        }
        Ok(Self(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProportionMethod {
    Ahp,
    Pha,
    Fp,
}

fn check_cols(h: &Hierarchy, m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.ncols() != h.len() {
        return Err(Error::shape(format!("{what} with {} columns", h.len()), format!("{} columns", m.ncols())));
    }
    Ok(())
}

/// `S b` row by row: `H x m_bottom` bottom forecasts to all nodes.
pub fn bottom_up(h: &Hierarchy, bottom: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    h.summing_matrix().aggregate(bottom)
}

/// Bottom-up from the bottom columns of a full `H x M` base matrix.
pub fn bottom_up_from_base(h: &Hierarchy, base: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_cols(h, base, "base forecasts")?;
    let r = h.bottom_range();
    bottom_up(h, &base.columns(r.start, r.len()).into_owned())
}

/// Average historical proportions of the bottom descendants of `node`:
/// `p_i = mean_t y_{t,i} / y_{t,node}`, skipping steps where the node is 0.
pub fn ahp_below(h: &Hierarchy, history: &DMatrix<f64>, node: usize) -> Result<ProportionVector> {
    check_cols(h, history, "history")?;
    let leaves = h.bottom_descendants(node);
    let mut acc = vec![0.0; leaves.len()];
    let mut used = 0usize;
    for t in 0..history.nrows() {
        let total = history[(t, node)];
        if total == 0.0 {
            continue;
        }
        used += 1;
        for (a, &l) in acc.iter_mut().zip(&leaves) {
            *a += history[(t, l)] / total;
        }
    }
    let skipped = history.nrows() - used;
    if skipped > 0 {
        log::warn!("AHP for {}: skipped {skipped} steps with a zero total", h.id(node));
    }
    if used == 0 {
        return Err(Error::Data(format!("AHP for {}: the total is zero at every step", h.id(node))));
    }
    ProportionVector::new(normalize(acc.into_iter().map(|a| a / used as f64).collect()))
}

/// Proportions of the historical averages below `node`:
/// `p_i = mean(y_i) / mean(y_node)`.
pub fn pha_below(h: &Hierarchy, history: &DMatrix<f64>, node: usize) -> Result<ProportionVector> {
    check_cols(h, history, "history")?;
    if history.nrows() == 0 {
        return Err(Error::Data("PHA needs history".into()));
    }
    let total = history.column(node).mean();
    if total == 0.0 {
        return Err(Error::Data(format!("PHA for {}: the mean total is zero", h.id(node))));
    }
    let p = h.bottom_descendants(node).iter().map(|&l| history.column(l).mean() / total).collect();
    ProportionVector::new(normalize(p))
}

/// Removes rounding drift so the shares sum to one exactly.
fn normalize(p: Vec<f64>) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    if s > 0.0 && s.is_finite() { p.into_iter().map(|v| v / s).collect() } else { p }
}

pub fn proportions_ahp(h: &Hierarchy, history: &DMatrix<f64>) -> Result<ProportionVector> {
    ahp_below(h, history, h.root())
}

pub fn proportions_pha(h: &Hierarchy, history: &DMatrix<f64>) -> Result<ProportionVector> {
    pha_below(h, history, h.root())
}

/// Forecast proportions below `node` at one step: nested shares of each
/// node's base forecast within its sibling set. `base` holds one value per
/// node; `step` only labels errors. Negative base forecasts count as zero.
pub fn fp_below(h: &Hierarchy, base: &[f64], node: usize, step: usize) -> Result<ProportionVector> {
    if base.len() != h.len() {
        return Err(Error::shape(format!("{} base forecasts", h.len()), base.len().to_string()));
    }
    let first = h.bottom_columns(node).first().copied().unwrap_or(0);
    let mut p = vec![0.0; h.bottom_columns(node).len()];
    let mut stack = vec![(node, 1.0)];
    while let Some((n, share)) = stack.pop() {
        let kids = h.children(n);
        if kids.is_empty() {
            p[h.bottom_columns(n)[0] - first] = share;
            continue;
        }
        let sigma: f64 = kids.iter().map(|&c| base[c].max(0.0)).sum();
        if sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::Numeric(format!(
                "FP: base forecasts below {} sum to {sigma} at step {step}",
                h.id(n)
            )));
        }
        for &c in kids {
            stack.push((c, share * base[c].max(0.0) / sigma));
        }
    }
    let pv = ProportionVector::new(p.clone());
    pv.map_err(|_| {
        Error::Numeric(format!(
            "FP proportions below {} at step {step} are not a distribution: {p:?}",
            h.id(node)
        ))
    })
}

pub fn proportions_fp(h: &Hierarchy, base: &[f64], step: usize) -> Result<ProportionVector> {
    fp_below(h, base, h.root(), step)
}

/// `S p y0_t` for every step of the top forecast `top`.
pub fn apply_topdown(h: &Hierarchy, p: &ProportionVector, top: &[f64]) -> Result<DMatrix<f64>> {
    if p.0.len() != h.n_bottom() {
        return Err(Error::shape(format!("{} proportions", h.n_bottom()), p.0.len().to_string()));
    }
    let bottom = DMatrix::from_fn(top.len(), h.n_bottom(), |t, j| p.0[j] * top[t]);
    bottom_up(h, &bottom)
}

/// Top-down from the root column of `base` (`H x M`). AHP and PHA use
/// `history` (`T x M`); FP uses the base forecasts of every node.
pub fn top_down(h: &Hierarchy, base: &DMatrix<f64>, method: ProportionMethod, history: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
    middle_out(h, 0, base, method, history)
}

/// Middle-out from level `level`: each node there is disaggregated to its
/// bottom descendants with the chosen proportions, and everything is summed
/// back up. Level 0 is top-down; the bottom level is bottom-up.
pub fn middle_out(
    h: &Hierarchy,
    level: usize,
    base: &DMatrix<f64>,
    method: ProportionMethod,
    history: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    check_cols(h, base, "base forecasts")?;
    if level >= h.n_levels() {
        return Err(Error::Config(format!("level {level} outside a {}-level hierarchy", h.n_levels())));
    }
    let steps = base.nrows();
    let mut bottom = DMatrix::zeros(steps, h.n_bottom());
    for node in h.level_range(level) {
        let cols = h.bottom_columns(node);
        match method {
            ProportionMethod::Ahp | ProportionMethod::Pha => {
                let hist = history.ok_or_else(|| Error::Config("AHP and PHA need history".into()))?;
                let p = if method == ProportionMethod::Ahp { ahp_below(h, hist, node)? } else { pha_below(h, hist, node)? };
                for t in 0..steps {
                    for (k, &c) in cols.iter().enumerate() {
                        bottom[(t, c)] = p.0[k] * base[(t, node)];
                    }
                }
            }
            ProportionMethod::Fp => {
                for t in 0..steps {
                    let row: Vec<f64> = base.row(t).iter().copied().collect();
                    let p = fp_below(h, &row, node, t)?;
                    for (k, &c) in cols.iter().enumerate() {
                        bottom[(t, c)] = p.0[k] * base[(t, node)];
                    }
                }
            }
        }
    }
    bottom_up(h, &bottom)
}
