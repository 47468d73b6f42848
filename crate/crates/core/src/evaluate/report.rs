use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::metrics::{Metric, MetricKind};
use super::ranks::{friedman_test, nemenyi_test, FriedmanResult, NemenyiResult};
use crate::error::{Error, Result};
use crate::forecast_set::ForecastSet;
use crate::hierarchy::Hierarchy;

/// Scores of one series under one metric, keyed by method label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesScores {
    pub node_id: String,
    pub level: usize,
    pub metric: MetricKind,
    /// `None` where the metric is undefined for that method.
    pub scores: BTreeMap<String, Option<f64>>,
    /// Set when the series is excluded from averages and rank tests.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAverage {
    pub level: usize,
    pub metric: MetricKind,
    pub method: String,
    pub mean: Option<f64>,
    pub n_series: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTest {
    pub metric: MetricKind,
    /// Methods in column order of the ranks.
    pub methods: Vec<String>,
    pub friedman: FriedmanResult,
    pub nemenyi: NemenyiResult,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub methods: Vec<String>,
    pub metrics: Vec<MetricKind>,
    pub series: Vec<SeriesScores>,
    pub level_averages: Vec<LevelAverage>,
    pub rank_tests: Vec<RankTest>,
}

/// Scores every forecast set against the test actuals.
///
/// `insample` holds the training observations (`T x M`) used for the MASE
/// scale; `actuals` holds the test observations (`H x M`) aligned with the
/// forecast sets. Series for which any method's metric is undefined are
/// flagged and left out of the averages and the rank tests for that metric.
pub fn evaluate_sets(
    h: &Hierarchy,
    insample: &DMatrix<f64>,
    actuals: &DMatrix<f64>,
    sets: &[ForecastSet],
    metrics: &[Metric],
) -> Result<EvalReport> {
    if sets.is_empty() {
        return Err(Error::Config("no forecast sets to evaluate".into()));
    }
    for set in sets {
        if set.values.shape() != actuals.shape() {
            return Err(Error::shape(
                format!("{:?} forecasts for {}", actuals.shape(), set.method),
                format!("{:?}", set.values.shape()),
            ));
        }
    }
    let methods: Vec<String> = sets.iter().map(|s| s.method.label().to_string()).collect();
    let mut series = Vec::new();
    for metric in metrics {
        for node in 0..h.len() {
            let actual: Vec<f64> = actuals.column(node).iter().copied().collect();
            let train: Vec<f64> = insample.column(node).iter().copied().collect();
            let mut scores = BTreeMap::new();
            let mut excluded = None;
            for set in sets {
                let value = match metric.score(&actual, &set.node(node), &train) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        excluded.get_or_insert_with(|| format!("{}: {e}", set.method));
                        None
                    }
                };
                scores.insert(set.method.label().to_string(), value);
            }
            series.push(SeriesScores {
                node_id: h.id(node).to_string(),
                level: h.level(node),
                metric: metric.kind(),
                scores,
                excluded,
            });
        }
    }
    let mut report = EvalReport {
        methods,
        metrics: metrics.iter().map(Metric::kind).collect(),
        series,
        level_averages: Vec::new(),
        rank_tests: Vec::new(),
    };
    report.level_averages = level_averages(&report, h);
    Ok(report)
}

/// Mean score per level, metric and method over the included series.
pub fn level_averages(report: &EvalReport, h: &Hierarchy) -> Vec<LevelAverage> {
    let mut out = Vec::new();
    for &metric in &report.metrics {
        for level in 0..h.n_levels() {
            let rows: Vec<&SeriesScores> = report
                .series
                .iter()
                .filter(|s| s.metric == metric && s.level == level && s.excluded.is_none())
                .collect();
            for method in &report.methods {
                let values: Vec<f64> = rows.iter().filter_map(|s| s.scores[method]).collect();
                out.push(LevelAverage {
                    level,
                    metric,
                    method: method.clone(),
                    mean: (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64),
                    n_series: values.len(),
                });
            }
        }
    }
    out
}

impl EvalReport {
    pub fn average(&self, level: usize, metric: MetricKind, method: &str) -> Option<f64> {
        self.level_averages
            .iter()
            .find(|a| a.level == level && a.metric == metric && a.method == method)
            .and_then(|a| a.mean)
    }

    /// `N x k` matrix of included series (rows) by methods (columns).
    pub fn error_matrix(&self, metric: MetricKind) -> DMatrix<f64> {
        let rows: Vec<&SeriesScores> = self
            .series
            .iter()
            .filter(|s| s.metric == metric && s.excluded.is_none())
            .collect();
        DMatrix::from_fn(rows.len(), self.methods.len(), |r, c| {
            rows[r].scores[&self.methods[c]].unwrap_or(f64::NAN)
        })
    }

    /// Runs Friedman and Nemenyi on every metric. Fails when fewer than two
    /// methods or two usable series are present.
    pub fn add_rank_tests(&mut self, alpha: f64) -> Result<()> {
        self.rank_tests.clear();
        for &metric in &self.metrics.clone() {
            let errors = self.error_matrix(metric);
            let friedman = friedman_test(&errors)?;
            let nemenyi = nemenyi_test(&errors, alpha)?;
            let note = format!(
                "Friedman chi-square approximation with {} degrees of freedom over {} series; {}",
                friedman.n_methods - 1,
                friedman.n_series,
                if nemenyi.friedman_rejected {
                    "null of equal performance rejected"
                } else {
                    "null of equal performance not rejected; Nemenyi groups shown for reference"
                }
            );
            self.rank_tests.push(RankTest {
                metric,
                methods: self.methods.clone(),
                friedman,
                nemenyi,
                note,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-series table for one metric: one row per series followed by one
    /// `Average level k` row per level, one column per method.
    pub fn to_csv(&self, metric: MetricKind) -> String {
        let mut out = String::from("series,level");
        for m in &self.methods {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "NA".into());
        for s in self.series.iter().filter(|s| s.metric == metric) {
            out.push_str(&format!("{},{}", s.node_id, s.level));
            for m in &self.methods {
                out.push(',');
                out.push_str(&fmt(s.scores[m]));
            }
            out.push('\n');
        }
        let levels = self.series.iter().map(|s| s.level).max().map_or(0, |l| l + 1);
        for level in 0..levels {
            out.push_str(&format!("Average level {level},{level}"));
            for m in &self.methods {
                out.push(',');
                out.push_str(&fmt(self.average(level, metric, m)));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast_set::Method;
    use crate::hierarchy::NodeSpec;
    use chrono::NaiveDate;
    use nalgebra::dmatrix;

    fn setup() -> (Hierarchy, DMatrix<f64>, DMatrix<f64>, Vec<ForecastSet>) {
        let h = Hierarchy::new(vec![
            NodeSpec::new("r", None, 0),
            NodeSpec::new("a", Some("r"), 1),
            NodeSpec::new("b", Some("r"), 1),
        ])
        .unwrap();
        let insample = dmatrix![3.0, 1.0, 2.0; 5.0, 2.0, 3.0; 4.0, 1.0, 3.0; 6.0, 3.0, 3.0];
        let actual = dmatrix![7.0, 3.0, 4.0; 8.0, 4.0, 4.0];
        let ts: Vec<_> = (0..2)
            .map(|d| NaiveDate::from_ymd_opt(2024, 1, 1 + d).unwrap().and_hms_opt(0, 0, 0).unwrap())
            .collect();
        let bu = ForecastSet::new(Method::Bu, ts.clone(), dmatrix![7.0, 3.0, 4.0; 7.0, 3.0, 4.0]).unwrap();
        let ahp = ForecastSet::new(Method::Ahp, ts, dmatrix![6.0, 2.0, 4.0; 6.0, 2.0, 4.0]).unwrap();
        (h, insample, actual, vec![bu, ahp])
    }

    #[test]
    fn averages_recompute_from_series_scores() {
        let (h, insample, actual, sets) = setup();
        let report = evaluate_sets(&h, &insample, &actual, &sets, &[Metric::Mase { period: 1 }]).unwrap();
        for level in 0..2 {
            for m in &report.methods {
                let rows: Vec<f64> = report
                    .series
                    .iter()
                    .filter(|s| s.level == level && s.excluded.is_none())
                    .map(|s| s.scores[m].unwrap())
                    .collect();
                let mean = rows.iter().sum::<f64>() / rows.len() as f64;
                assert!((report.average(level, MetricKind::Mase, m).unwrap() - mean).abs() < 1e-15);
            }
        }
        // Root: in-sample naive MAE = (2 + 1 + 2) / 3; BU error mean 0.5.
        let root = &report.series[0];
        assert!((root.scores["BU"].unwrap() - 0.5 / (5.0 / 3.0)).abs() < 1e-12);
        assert_eq!(report.average(0, MetricKind::Mase, "BU"), root.scores["BU"]);
    }

    #[test]
    fn degenerate_series_are_flagged() {
        let (h, mut insample, actual, sets) = setup();
        // Make series `b` constant in-sample: MASE scale zero.
        for t in 0..insample.nrows() {
            insample[(t, 2)] = 3.0;
            insample[(t, 0)] = insample[(t, 1)] + 3.0;
        }
        let report = evaluate_sets(&h, &insample, &actual, &sets, &[Metric::Mase { period: 1 }]).unwrap();
        let b = report.series.iter().find(|s| s.node_id == "b").unwrap();
        assert!(b.excluded.is_some());
        let lvl1 = report.level_averages.iter().find(|a| a.level == 1 && a.method == "BU").unwrap();
        assert_eq!(lvl1.n_series, 1);
        assert!(report.to_csv(MetricKind::Mase).contains("b,1,NA,NA"));
    }

    #[test]
    fn single_method_rank_test_is_refused() {
        let (h, insample, actual, sets) = setup();
        let mut report =
            evaluate_sets(&h, &insample, &actual, &sets[..1], &[Metric::Mase { period: 1 }]).unwrap();
        let err = report.add_rank_tests(0.05).unwrap_err();
        assert!(err.to_string().contains("k >= 2"));
    }

    #[test]
    fn csv_layout() {
        let (h, insample, actual, sets) = setup();
        let mut report = evaluate_sets(&h, &insample, &actual, &sets, &[Metric::Mase { period: 1 }]).unwrap();
        report.add_rank_tests(0.05).unwrap();
        let csv = report.to_csv(MetricKind::Mase);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "series,level,BU,AHP");
        assert_eq!(lines.len(), 1 + 3 + 2);
        assert!(lines[4].starts_with("Average level 0,0,"));
        let json = report.to_json().unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
