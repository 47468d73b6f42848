//! Deterministic generator of hierarchical datasets with known shares.
//!
//! The top series is a latent driver: level, linear trend, sinusoidal
//! seasonal terms and Gaussian noise. Each node passes its driver down to
//! its children through shares on the simplex, with per-level noise added
//! to every child driver. Observations are the bottom drivers, summed up
//! the tree, so the panel is exactly coherent.
//!
//! In the switching regime each bottom node carries a binary `promo`
//! flag. A node's weight is its base share times `1 + lift * f`, where `f`
//! is the fraction of its bottom descendants on promotion, and shares are
//! the weights normalized within each sibling set. Static proportions can
//! then never match the realized shares.

use std::collections::BTreeMap;

use chrono::{NaiveDate, TimeDelta};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{regular_timestamps, CalendarSpec, ExogBlock, Hierarchy, SeriesPanel};
use crate::rng::derived_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seasonality {
    pub period: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareRegime {
    Static,
    Switching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Child counts per node, level by level.
    pub shape: Vec<Vec<usize>>,
    pub length: usize,
    pub start: NaiveDate,
    pub level: f64,
    /// Added per time step.
    pub trend: f64,
    pub seasonality: Vec<Seasonality>,
    /// Noise standard deviation of the drivers at each level, root first.
    /// Missing trailing levels use zero.
    pub noise: Vec<f64>,
    pub regime: ShareRegime,
    /// Per-step probability that a bottom node is on promotion.
    pub promo_probability: f64,
    /// Relative weight increase of a node fully on promotion.
    pub promo_lift: f64,
    /// Base shares of each interior node's children, keyed by node id.
    /// Unlisted sibling sets draw their shares at random.
    pub shares: BTreeMap<String, Vec<f64>>,
    /// The series must span at least three times this many points.
    pub starting_window: usize,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            shape: vec![vec![3], vec![4, 4, 4]],
            length: 1460,
            start: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
            level: 1000.0,
            trend: 0.1,
            seasonality: vec![
                Seasonality { period: 7.0, amplitude: 120.0 },
                Seasonality { period: 365.25, amplitude: 150.0 },
            ],
            noise: vec![30.0, 5.0, 2.0],
            regime: ShareRegime::Switching,
            promo_probability: 0.3,
            promo_lift: 2.0,
            shares: BTreeMap::new(),
            starting_window: 365,
            seed: 0,
        }
    }
}

/// Everything needed to recompute the oracle shares of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: GeneratorSpec,
    /// Base shares of every interior node's children, keyed by node id.
    pub base_shares: BTreeMap<String, Vec<f64>>,
    pub panel_hash: String,
}

impl GroundTruth {
    /// Realized shares of `node`'s children at time `t`, given the promo
    /// flags of the bottom nodes (canonical bottom order). Exact when the
    /// noise of the levels below `node` is zero.
    pub fn shares_at(&self, h: &Hierarchy, node: usize, promo: &[f64]) -> Vec<f64> {
        let base = &self.base_shares[h.id(node)];
        let weights: Vec<f64> = h
            .children(node)
            .iter()
            .zip(base)
            .map(|(&c, &s)| s * (1.0 + self.lift() * promo_fraction(h, c, promo)))
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter().map(|w| w / total).collect()
    }

    fn lift(&self) -> f64 {
        match self.spec.regime {
            ShareRegime::Static => 0.0,
            ShareRegime::Switching => self.spec.promo_lift,
        }
    }
}

fn promo_fraction(h: &Hierarchy, node: usize, promo: &[f64]) -> f64 {
    let cols = h.bottom_columns(node);
    cols.iter().map(|&c| promo[c]).sum::<f64>() / cols.len() as f64
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.shape.is_empty() {
            return bad("generator shape needs at least one level of children".into());
        }
        if self.shape.iter().flatten().any(|&c| c == 0) {
            return bad("every generated node needs at least one child".into());
        }
        if self.length < 3 * self.starting_window.max(1) {
            return bad(format!(
                "length {} is shorter than three starting windows ({})",
                self.length, self.starting_window
            ));
        }
        if !(0.0..=1.0).contains(&self.promo_probability) {
            return bad(format!("promo probability {} outside [0, 1]", self.promo_probability));
        }
        if !(self.promo_lift >= 0.0) {
            return bad(format!("promo lift {} must be nonnegative", self.promo_lift));
        }
        if self.noise.iter().any(|s| !(*s >= 0.0)) {
            return bad("noise standard deviations must be nonnegative".into());
        }
        if !self.level.is_finite() || !self.trend.is_finite() {
            return bad("level and trend must be finite".into());
        }
        for (id, s) in &self.shares {
            if s.iter().any(|v| !(*v >= 0.0)) || (s.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad(format!("shares of `{id}` are not on the simplex: {s:?}"));
            }
        }
        Ok(())
    }
}

/// A generated dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub hierarchy: Hierarchy,
    pub panel: SeriesPanel,
    pub truth: GroundTruth,
}

/// Generates the dataset described by `spec`. The output depends only on
/// the spec, seed included.
pub fn generate(spec: &GeneratorSpec) -> Result<Dataset> {
    spec.validate()?;
    let h = Hierarchy::from_child_counts(&spec.shape)?;
    let n = spec.length;
    let m = h.n_bottom();

    let mut base_shares = BTreeMap::new();
    let mut share_rng = derived_rng(spec.seed, "synthetic/shares");
    for node in h.interior_nodes() {
        let k = h.children(node).len();
        let shares = match spec.shares.get(h.id(node)) {
            Some(s) if s.len() == k => s.clone(),
            Some(s) => {
                return Err(Error::Config(format!(
                    "`{}` has {k} children but {} shares were given",
                    h.id(node),
                    s.len()
                )))
            }
            None => {
                let raw: Vec<f64> = (0..k).map(|_| share_rng.random_range(0.5..1.5)).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|r| r / total).collect()
            }
        };
        base_shares.insert(h.id(node).to_string(), shares);
    }
    if let Some(id) = spec.shares.keys().find(|id| !base_shares.contains_key(*id)) {
        return Err(Error::Config(format!("shares given for unknown interior node `{id}`")));
    }

    let mut promo = DMatrix::zeros(n, m);
    if spec.regime == ShareRegime::Switching {
        let mut rng = derived_rng(spec.seed, "synthetic/promo");
        for t in 0..n {
            for j in 0..m {
                promo[(t, j)] = if rng.random_bool(spec.promo_probability) { 1.0 } else { 0.0 };
            }
        }
    }

    let truth = GroundTruth {
        spec: spec.clone(),
        base_shares,
        panel_hash: String::new(),
    };
    let noise_at = |level: usize| spec.noise.get(level).copied().unwrap_or(0.0);
    let mut noise_rng = derived_rng(spec.seed, "synthetic/noise");
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let mut bottom = DMatrix::zeros(n, m);
    let mut driver = vec![0.0; h.len()];
    let mut flags = vec![0.0; m];
    for t in 0..n {
        let tf = t as f64;
        let seasonal: f64 = spec
            .seasonality
            .iter()
            .map(|s| s.amplitude * (std::f64::consts::TAU * tf / s.period).sin())
            .sum();
        driver[h.root()] = spec.level + spec.trend * tf + seasonal + noise_at(0) * std_normal.sample(&mut noise_rng);
        for (j, f) in flags.iter_mut().enumerate() {
            *f = promo[(t, j)];
        }
        // Canonical order visits every parent before its children.
        for node in h.interior_nodes() {
            let shares = truth.shares_at(&h, node, &flags);
            for (&c, s) in h.children(node).iter().zip(shares) {
                let sigma = noise_at(h.level(c));
                driver[c] = s * driver[node] + sigma * std_normal.sample(&mut noise_rng);
            }
        }
        let r = h.bottom_range();
        for j in 0..m {
            bottom[(t, j)] = driver[r.start + j];
        }
    }

    let ts = regular_timestamps(spec.start.into(), TimeDelta::days(1), n);
    let r = h.bottom_range();
    let exog: Vec<ExogBlock> = (0..h.len())
        .map(|node| {
            if r.contains(&node) {
                let j = node - r.start;
                ExogBlock {
                    names: vec!["promo".into()],
                    data: DMatrix::from_fn(n, 1, |t, _| promo[(t, j)]),
                }
            } else {
                ExogBlock::empty(n)
            }
        })
        .collect();
    let exog = if spec.regime == ShareRegime::Switching {
        exog
    } else {
        (0..h.len()).map(|_| ExogBlock::empty(n)).collect()
    };
    let panel = SeriesPanel::from_bottom(&h, ts, &bottom, exog, CalendarSpec::daily())?.with_aggregated_exog(&h);
    let truth = GroundTruth {
        panel_hash: panel.content_hash(),
        ..truth
    };
    Ok(Dataset {
        hierarchy: h,
        panel,
        truth,
    })
}
