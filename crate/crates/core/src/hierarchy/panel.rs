use std::ops::Range;

use chrono::{Datelike, NaiveDateTime, Timelike};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Hierarchy;
use crate::error::{Error, Result};

/// Default tolerance for the observed-coherence check.
pub const DEFAULT_DATA_EPS: f64 = 1e-6;

/// Which calendar dummies to derive from the timestamps.
///
/// Each enabled factor is one-hot encoded with its first category dropped
/// (Monday, January, hour 0).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarSpec {
    pub day_of_week: bool,
    pub month: bool,
    pub hour: bool,
}

impl CalendarSpec {
    pub fn daily() -> Self {
        Self {
            day_of_week: true,
            month: true,
            hour: false,
        }
    }

    pub fn width(&self) -> usize {
        6 * self.day_of_week as usize + 11 * self.month as usize + 23 * self.hour as usize
    }

    pub fn encode(&self, ts: &NaiveDateTime, out: &mut Vec<f64>) {
        let mut one_hot = |n: usize, k: usize| {
            out.extend((1..n).map(|c| if c == k { 1.0 } else { 0.0 }));
        };
        if self.day_of_week {
            one_hot(7, ts.weekday().num_days_from_monday() as usize);
        }
        if self.month {
            one_hot(12, ts.month0() as usize);
        }
        if self.hour {
            one_hot(24, ts.hour() as usize);
        }
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        if self.day_of_week {
            names.extend((1..7).map(|d| format!("dow_{d}")));
        }
        if self.month {
            names.extend((2..13).map(|m| format!("month_{m}")));
        }
        if self.hour {
            names.extend((1..24).map(|h| format!("hour_{h}")));
        }
        names
    }
}

/// Exogenous regressors of one node: `T x d` with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogBlock {
    pub names: Vec<String>,
    pub data: DMatrix<f64>,
}

impl ExogBlock {
    pub fn empty(t: usize) -> Self {
        Self {
            names: Vec::new(),
            data: DMatrix::zeros(t, 0),
        }
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn row(&self, t: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.width()).map(move |j| self.data[(t, j)])
    }
}

/// Aligned observations of every node of a hierarchy.
#[derive(Debug, Clone)]
pub struct SeriesPanel {
    timestamps: Vec<NaiveDateTime>,
    /// `T x M`, columns in canonical node order.
    values: DMatrix<f64>,
    exog: Vec<ExogBlock>,
    calendar: CalendarSpec,
}

impl SeriesPanel {
    /// Builds a panel and checks it against the hierarchy.
    ///
    /// Timestamps must be strictly increasing with a constant step, values
    /// finite, and every interior node within `eps` of the sum of its
    /// children at every time step.
    pub fn new(
        h: &Hierarchy,
        timestamps: Vec<NaiveDateTime>,
        values: DMatrix<f64>,
        exog: Vec<ExogBlock>,
        calendar: CalendarSpec,
        eps: f64,
    ) -> Result<Self> {
        let t = timestamps.len();
        if t == 0 {
            return Err(Error::Data("panel has no observations".into()));
        }
        if values.nrows() != t || values.ncols() != h.len() {
            return Err(Error::shape(
                format!("{t} x {} values", h.len()),
                format!("{} x {}", values.nrows(), values.ncols()),
            ));
        }
        if exog.len() != h.len() {
            return Err(Error::shape(
                format!("{} exogenous blocks", h.len()),
                exog.len(),
            ));
        }
        if t > 1 {
            let step = timestamps[1] - timestamps[0];
            if step <= chrono::TimeDelta::zero() {
                return Err(Error::Data(format!(
                    "timestamps not strictly increasing at {}",
                    timestamps[1]
                )));
            }
            for w in timestamps.windows(2) {
                if w[1] - w[0] != step {
                    return Err(Error::Data(format!(
                        "missing or irregular timestamp between {} and {}",
                        w[0], w[1]
                    )));
                }
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % t, pos / t);
            return Err(Error::Data(format!(
                "non-finite value for node `{}` at {}",
                h.id(col),
                timestamps[row]
            )));
        }
        for (node, block) in exog.iter().enumerate() {
            if block.data.nrows() != t || block.data.ncols() != block.names.len() {
                return Err(Error::shape(
                    format!("{t} x {} exogenous values for `{}`", block.names.len(), h.id(node)),
                    format!("{} x {}", block.data.nrows(), block.data.ncols()),
                ));
            }
            if block.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite exogenous value for node `{}`",
                    h.id(node)
                )));
            }
        }
        for node in h.interior_nodes() {
            for row in 0..t {
                let sum: f64 = h.children(node).iter().map(|&c| values[(row, c)]).sum();
                let gap = (values[(row, node)] - sum).abs();
                if gap > eps {
                    return Err(Error::Data(format!(
                        "incoherent observation: node `{}` at {} differs from the sum of its children by {gap:e}",
                        h.id(node),
                        timestamps[row]
                    )));
                }
            }
        }
        Ok(Self {
            timestamps,
            values,
            exog,
            calendar,
        })
    }

    /// Panel with bottom observations only; interior nodes are summed.
    pub fn from_bottom(
        h: &Hierarchy,
        timestamps: Vec<NaiveDateTime>,
        bottom: &DMatrix<f64>,
        exog: Vec<ExogBlock>,
        calendar: CalendarSpec,
    ) -> Result<Self> {
        let values = h.summing_matrix().aggregate(bottom)?;
        Self::new(h, timestamps, values, exog, calendar, DEFAULT_DATA_EPS)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Observations of one node, contiguous in time.
    pub fn series(&self, node: usize) -> &[f64] {
        let t = self.len();
        &self.values.as_slice()[node * t..(node + 1) * t]
    }

    pub fn exog(&self, node: usize) -> &ExogBlock {
        &self.exog[node]
    }

    pub fn calendar(&self) -> CalendarSpec {
        self.calendar
    }

    pub fn calendar_row(&self, t: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.calendar.width());
        self.calendar.encode(&self.timestamps[t], &mut out);
        out
    }

    /// Regressor matrix of one node: its exogenous columns, optionally
    /// followed by the calendar dummies.
    pub fn regressors(&self, node: usize, with_calendar: bool) -> DMatrix<f64> {
        let block = &self.exog[node];
        let cal = if with_calendar { self.calendar.width() } else { 0 };
        let mut out = DMatrix::zeros(self.len(), block.width() + cal);
        for t in 0..self.len() {
            for j in 0..block.width() {
                out[(t, j)] = block.data[(t, j)];
            }
            if cal > 0 {
                for (j, v) in self.calendar_row(t).into_iter().enumerate() {
                    out[(t, block.width() + j)] = v;
                }
            }
        }
        out
    }

    /// Rows `range` of the panel.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.is_empty() {
            return Err(Error::shape(
                format!("non-empty row range within 0..{}", self.len()),
                format!("{range:?}"),
            ));
        }
        let n = range.len();
        Ok(Self {
            timestamps: self.timestamps[range.clone()].to_vec(),
            values: self.values.rows(range.start, n).into_owned(),
            exog: self
                .exog
                .iter()
                .map(|b| ExogBlock {
                    names: b.names.clone(),
                    data: b.data.rows(range.start, n).into_owned(),
                })
                .collect(),
            calendar: self.calendar,
        })
    }

    pub fn with_calendar(mut self, calendar: CalendarSpec) -> Self {
        self.calendar = calendar;
        self
    }

    /// Fills every interior node that has no regressors of its own with the
    /// mean of its bottom descendants' regressors, for each variable that
    /// all of them carry. For binary promotion flags this is the share of
    /// items on promotion.
    pub fn with_aggregated_exog(mut self, h: &Hierarchy) -> Self {
        for node in h.interior_nodes() {
            if !self.exog[node].is_empty() {
                continue;
            }
            let leaves = h.bottom_descendants(node);
            let first = &self.exog[leaves[0]];
            let shared: Vec<String> = first
                .names
                .iter()
                .filter(|name| leaves.iter().all(|&l| self.exog[l].names.contains(name)))
                .cloned()
                .collect();
            let mut data = DMatrix::zeros(self.len(), shared.len());
            for (j, name) in shared.iter().enumerate() {
                for &leaf in &leaves {
                    let block = &self.exog[leaf];
                    let col = block.names.iter().position(|n| n == name).unwrap();
                    for t in 0..self.len() {
                        data[(t, j)] += block.data[(t, col)];
                    }
                }
                for t in 0..self.len() {
                    data[(t, j)] /= leaves.len() as f64;
                }
            }
            self.exog[node] = ExogBlock {
                names: shared,
                data,
            };
        }
        self
    }

    /// SHA-256 over timestamps, values and regressors.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for ts in &self.timestamps {
            hasher.update(ts.and_utc().timestamp().to_le_bytes());
        }
        for v in self.values.iter() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        for block in &self.exog {
            for name in &block.names {
                hasher.update(name.as_bytes());
                hasher.update([0u8]);
            }
            for v in block.data.iter() {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        super::hex_digest(&hasher.finalize())
    }
}

/// `count` consecutive timestamps starting at `start`, spaced by `step`.
pub fn regular_timestamps(
    start: NaiveDateTime,
    step: chrono::TimeDelta,
    count: usize,
) -> Vec<NaiveDateTime> {
    (0..count).map(|i| start + step * i as i32).collect()
}
