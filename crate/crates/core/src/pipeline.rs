//! End-to-end runs: base forecasts, reconciliation, disaggregation and
//! evaluation over a held-out test period.
//!
//! Models are fitted once on the training period. The test period is then
//! covered by consecutive forecast origins `horizon` steps apart; at each
//! origin the fitted models see the actual history up to the origin and
//! the regressors of the next `horizon` steps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_sets, EvalReport, MetricKind};
use crate::forecast_set::{ForecastSet, Method};
use crate::forecasters::select_model;
use crate::hierarchy::{Hierarchy, SeriesPanel};
use crate::io;
use crate::nnd::{fit_nnd, save_bundle, NndModels, NndStrategy};
use crate::plot;
use crate::reconcile::{bottom_up_from_base, middle_out, mint_reconcile, shrinkage_covariance, top_down, ProportionMethod};

pub const BASE_FORECASTS: &str = "base_forecasts.csv";
pub const BASE_RESIDUALS: &str = "base_residuals.csv";
pub const SELECTION: &str = "selection.json";
pub const RECONCILED_FORECASTS: &str = "reconciled_forecasts.csv";
pub const NND_FORECASTS: &str = "nnd_forecasts.csv";
pub const NND_DIAGNOSTICS: &str = "nnd_diagnostics.json";
pub const NND_MODELS: &str = "nnd_models";
pub const REPORT: &str = "report.json";

/// A loaded dataset and its train/test split.
#[derive(Debug, Clone)]
pub struct Data {
    pub hierarchy: Hierarchy,
    pub panel: SeriesPanel,
    /// Index of the first test observation.
    pub split: usize,
}

impl Data {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let h = io::read_hierarchy(&cfg.data.hierarchy_path()?)?;
        let exog = cfg.data.exogenous_path();
        let panel = io::read_panel(
            &h,
            &cfg.data.observations_path()?,
            exog.as_deref(),
            cfg.data.calendar.spec(),
            cfg.data.eps,
        )?;
        Self::new(h, panel, cfg)
    }

    pub fn new(hierarchy: Hierarchy, panel: SeriesPanel, cfg: &RunConfig) -> Result<Self> {
        let panel = panel.with_calendar(cfg.data.calendar.spec());
        let n = panel.len();
        let split = match (&cfg.split.test_start, cfg.split.test_size) {
            (Some(start), _) => {
                let ts = io::parse_timestamp(start)?;
                panel
                    .timestamps()
                    .iter()
                    .position(|t| *t >= ts)
                    .ok_or_else(|| Error::Config(format!("split.test_start {start} is after the last observation")))?
            }
            (None, Some(size)) if size < n => n - size,
            (None, size) => {
                return Err(Error::Config(format!("split.test_size {size:?} leaves no training data out of {n}")))
            }
        };
        let min_train = cfg.nnd.model.window.w.max(2 * cfg.split.horizon + 2);
        if split < min_train {
            return Err(Error::Config(format!(
                "the split leaves {split} training observations; at least {min_train} are needed"
            )));
        }
        Ok(Self {
            hierarchy,
            panel,
            split,
        })
    }

    pub fn test_len(&self) -> usize {
        self.panel.len() - self.split
    }

    pub fn train_panel(&self) -> Result<SeriesPanel> {
        self.panel.slice(0..self.split)
    }

    pub fn train_values(&self) -> DMatrix<f64> {
        self.panel.values().rows(0, self.split).into_owned()
    }

    pub fn test_values(&self) -> DMatrix<f64> {
        self.panel.values().rows(self.split, self.test_len()).into_owned()
    }

    pub fn test_timestamps(&self) -> Vec<NaiveDateTime> {
        self.panel.timestamps()[self.split..].to_vec()
    }

    /// `(origin, steps)` of every forecast origin in the test period.
    pub fn origins(&self, horizon: usize) -> Vec<(usize, usize)> {
        (self.split..self.panel.len())
            .step_by(horizon)
            .map(|o| (o, horizon.min(self.panel.len() - o)))
            .collect()
    }
}

/// Nodes that need base forecasts for the given methods.
pub fn required_nodes(h: &Hierarchy, methods: &[Method], middle_level: usize) -> Vec<usize> {
    let mut nodes = Vec::new();
    for m in methods {
        match m {
            Method::Base | Method::Fp | Method::Mint => nodes.extend(0..h.len()),
            Method::Bu => nodes.extend(h.bottom_range()),
            Method::Ahp | Method::Pha | Method::Nnd1 | Method::Nnd2 => nodes.push(h.root()),
            Method::Mo | Method::NndMo => nodes.extend(h.level_range(middle_level.min(h.n_levels() - 1))),
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    nodes
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSelection {
    pub node_id: String,
    pub model: String,
    pub cv_mase: BTreeMap<String, Option<f64>>,
    pub params: serde_json::Value,
}

/// Base forecasts over the test period. Columns of nodes that were not
/// forecast hold `NaN`, in both the forecasts and the residuals.
#[derive(Debug, Clone)]
pub struct BaseRun {
    pub forecasts: ForecastSet,
    /// One-step in-sample residuals over the training period, `T x M`.
    pub residuals: DMatrix<f64>,
    pub selections: Vec<NodeSelection>,
}

impl BaseRun {
    pub fn covers(&self, nodes: &[usize]) -> bool {
        nodes.iter().all(|&n| self.forecasts.values.column(n).iter().all(|v| v.is_finite()))
    }
}

/// Selects and fits a model per node on the training period and forecasts
/// the test period origin by origin. Nodes are processed in parallel.
pub fn base_forecasts(cfg: &RunConfig, data: &Data, nodes: &[usize]) -> Result<BaseRun> {
    let h = &data.hierarchy;
    let split = data.split;
    let horizon = cfg.split.horizon;
    let cv = cfg.cv.config(split, horizon)?;
    let origins = data.origins(horizon);
    let per_node: Vec<(usize, Vec<f64>, Vec<f64>, NodeSelection)> = nodes
        .par_iter()
        .map(|&node| {
            let y = data.panel.series(node);
            let x_full = data.panel.regressors(node, cfg.forecast.use_calendar);
            let x = (x_full.ncols() > 0).then_some(&x_full);
            let rows = |a: usize, n: usize| x.map(|m| m.rows(a, n).into_owned());
            let train_x = rows(0, split);
            let sel = select_model(&y[..split], train_x.as_ref(), &cfg.forecast.select, &cv)
                .map_err(|e| annotate(e, h.id(node)))?;
            let mut forecast = Vec::with_capacity(data.test_len());
            for &(o, steps) in &origins {
                let f = sel
                    .model
                    .forecast(&y[..o], rows(0, o).as_ref(), rows(o, steps).as_ref(), steps)
                    .map_err(|e| annotate(e, h.id(node)))?;
                forecast.extend(f);
            }
            let fitted = sel.model.fitted(&y[..split], train_x.as_ref());
            let residuals: Vec<f64> = y[..split].iter().zip(&fitted).map(|(a, f)| a - f).collect();
            let summary = NodeSelection {
                node_id: h.id(node).to_string(),
                model: sel.model.kind().name().to_string(),
                cv_mase: sel.cv_scores.iter().map(|(k, s)| (k.name().to_string(), *s)).collect(),
                params: sel.model.describe(),
            };
            Ok((node, forecast, residuals, summary))
        })
        .collect::<Result<_>>()?;
    let mut values = DMatrix::from_element(data.test_len(), h.len(), f64::NAN);
    let mut residuals = DMatrix::from_element(split, h.len(), f64::NAN);
    let mut selections = Vec::with_capacity(per_node.len());
    for (node, f, r, s) in per_node {
        values.set_column(node, &nalgebra::DVector::from_vec(f));
        residuals.set_column(node, &nalgebra::DVector::from_vec(r));
        selections.push(s);
    }
    Ok(BaseRun {
        forecasts: ForecastSet::new(Method::Base, data.test_timestamps(), values)?,
        residuals,
        selections,
    })
}

fn annotate(e: Error, node: &str) -> Error {
    match e {
        Error::Fit(m) => Error::Fit(format!("node `{node}`: {m}")),
        Error::Numeric(m) => Error::Numeric(format!("node `{node}`: {m}")),
        Error::Divergence { epoch, reason } => Error::Divergence {
            epoch,
            reason: format!("node `{node}`: {reason}"),
        },
        other => other,
    }
}

fn require(h: &Hierarchy, base: &BaseRun, method: Method, middle_level: usize) -> Result<()> {
    for n in required_nodes(h, &[method], middle_level) {
        if !base.forecasts.values.column(n).iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!(
                "{method} needs base forecasts for `{}`, which are missing",
                h.id(n)
            )));
        }
    }
    Ok(())
}

/// Applies the configured reconciliation methods to the base forecasts.
pub fn reconcile(cfg: &RunConfig, data: &Data, base: &BaseRun) -> Result<Vec<ForecastSet>> {
    let h = &data.hierarchy;
    let level = cfg.reconcile.middle_level;
    let history = data.train_values();
    let b = &base.forecasts.values;
    cfg.reconcile
        .methods
        .iter()
        .map(|&method| {
            require(h, base, method, level)?;
            let values = match method {
                Method::Bu => bottom_up_from_base(h, b)?,
                Method::Ahp => top_down(h, b, ProportionMethod::Ahp, Some(&history))?,
                Method::Pha => top_down(h, b, ProportionMethod::Pha, Some(&history))?,
                Method::Fp => top_down(h, b, ProportionMethod::Fp, None)?,
                Method::Mo => middle_out(h, level, b, cfg.reconcile.middle_out_proportions, Some(&history))?,
                Method::Mint => {
                    let w = shrinkage_covariance(&base.residuals, cfg.reconcile.mint_lambda)?;
                    mint_reconcile(h, b, &w.w)?
                }
                other => return Err(Error::Config(format!("{other} is not a reconciliation method"))),
            };
            let set = ForecastSet::new(method, base.forecasts.timestamps.clone(), values)?;
            set.check_coherent(h, 1e-9 * scale(&set.values))?;
            Ok(set)
        })
        .collect()
}

/// Coherence tolerances are absolute at unit scale and relative beyond.
fn scale(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(1.0_f64, |a, v| a.max(v.abs()))
}

pub fn strategy_for(method: Method, middle_level: usize) -> Result<NndStrategy> {
    match method {
        Method::Nnd1 => Ok(NndStrategy::Standard),
        Method::Nnd2 => Ok(NndStrategy::Iterative),
        Method::NndMo => Ok(NndStrategy::MiddleOut { level: middle_level }),
        other => Err(Error::Config(format!("{other} is not a disaggregation method"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDiagnostics {
    pub parent_id: String,
    pub n_children: usize,
    pub best_epoch: usize,
    pub epochs: usize,
    /// Mean over origins of the relative raw coherence gap.
    pub mean_raw_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NndDiagnostics {
    pub method: Method,
    pub models: Vec<ModelDiagnostics>,
    /// Mean relative gap between the raw network outputs and their parent
    /// forecasts, over models and origins.
    pub mean_raw_gap: f64,
    /// Coherence violation of the published forecasts.
    pub published_violation: f64,
}

pub struct NndRun {
    pub sets: Vec<ForecastSet>,
    pub diagnostics: Vec<NndDiagnostics>,
    pub models: Vec<(Method, NndModels)>,
}

/// Trains the configured disaggregation strategies on the training period
/// and disaggregates the base forecasts of their start nodes.
pub fn disaggregate(cfg: &RunConfig, data: &Data, base: &BaseRun) -> Result<NndRun> {
    let h = &data.hierarchy;
    let train = data.train_panel()?;
    let nnd_cfg = cfg.nnd_config();
    let origins = data.origins(cfg.split.horizon);
    let mut run = NndRun {
        sets: Vec::new(),
        diagnostics: Vec::new(),
        models: Vec::new(),
    };
    for &method in &cfg.nnd.methods {
        require(h, base, method, cfg.nnd.middle_level)?;
        let strategy = strategy_for(method, cfg.nnd.middle_level)?;
        let models = fit_nnd(h, &train, strategy, &nnd_cfg)?;
        let starts = strategy.start_nodes(h)?;
        let blocks = origins
            .par_iter()
            .map(|&(o, steps)| {
                let start: BTreeMap<usize, Vec<f64>> = starts
                    .iter()
                    .map(|&n| {
                        let col = base.forecasts.values.column(n);
                        (n, (0..steps).map(|i| col[o - data.split + i]).collect())
                    })
                    .collect();
                models.forecast(h, &data.panel, o, &start)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = DMatrix::zeros(data.test_len(), h.len());
        let mut gaps = vec![0.0; models.models.len()];
        for (&(o, steps), block) in origins.iter().zip(&blocks) {
            values.rows_mut(o - data.split, steps).copy_from(&block.published);
            for (g, (_, gap)) in gaps.iter_mut().zip(&block.raw_gaps) {
                *g += gap / origins.len() as f64;
            }
        }
        let set = ForecastSet::new(method, data.test_timestamps(), values)?;
        let violation = set.check_coherent(h, 1e-9 * scale(&set.values))?;
        run.diagnostics.push(NndDiagnostics {
            method,
            models: models
                .models
                .iter()
                .zip(&gaps)
                .map(|(m, g)| ModelDiagnostics {
                    parent_id: m.parent_id.clone(),
                    n_children: m.children.len(),
                    best_epoch: m.best_epoch,
                    epochs: m.history.len(),
                    mean_raw_gap: *g,
                })
                .collect(),
            mean_raw_gap: gaps.iter().sum::<f64>() / gaps.len() as f64,
            published_violation: violation,
        });
        run.sets.push(set);
        run.models.push((method, models));
    }
    Ok(run)
}

/// Scores forecast sets on the test period and runs the rank tests.
pub fn evaluate(cfg: &RunConfig, data: &Data, sets: &[ForecastSet]) -> Result<EvalReport> {
    let mut report = evaluate_sets(&data.hierarchy, &data.train_values(), &data.test_values(), sets, &cfg.metrics())?;
    report.add_rank_tests(cfg.evaluate.alpha)?;
    Ok(report)
}

/// Everything produced by [`run`].
pub struct RunOutputs {
    pub base: BaseRun,
    pub reconciled: Vec<ForecastSet>,
    pub nnd: NndRun,
    pub report: EvalReport,
}

impl RunOutputs {
    pub fn sets(&self) -> Vec<ForecastSet> {
        self.reconciled.iter().chain(&self.nnd.sets).cloned().collect()
    }
}

/// Base forecasts for exactly the nodes the configured methods need,
/// then reconciliation, disaggregation and evaluation.
pub fn run(cfg: &RunConfig, data: &Data) -> Result<RunOutputs> {
    let mut methods = cfg.reconcile.methods.clone();
    methods.extend(&cfg.nnd.methods);
    let mut nodes = required_nodes(&data.hierarchy, &cfg.reconcile.methods, cfg.reconcile.middle_level);
    nodes.extend(required_nodes(&data.hierarchy, &cfg.nnd.methods, cfg.nnd.middle_level));
    nodes.sort_unstable();
    nodes.dedup();
    let base = base_forecasts(cfg, data, &nodes)?;
    let reconciled = reconcile(cfg, data, &base)?;
    let nnd = disaggregate(cfg, data, &base)?;
    let sets: Vec<ForecastSet> = reconciled.iter().chain(&nnd.sets).cloned().collect();
    let report = evaluate(cfg, data, &sets)?;
    Ok(RunOutputs {
        base,
        reconciled,
        nnd,
        report,
    })
}

pub fn write_base(dir: &Path, data: &Data, base: &BaseRun) -> Result<()> {
    let h = &data.hierarchy;
    io::write_forecast_sets(&dir.join(BASE_FORECASTS), h, std::slice::from_ref(&base.forecasts))?;
    let ts = &data.panel.timestamps()[..data.split];
    io::write_node_matrix(&dir.join(BASE_RESIDUALS), h, ts, &base.residuals)?;
    io::write_json(&dir.join(SELECTION), &base.selections)
}

/// Reads base forecasts and residuals written by [`write_base`].
pub fn read_base(dir: &Path, data: &Data) -> Result<BaseRun> {
    let h = &data.hierarchy;
    let sets = io::read_forecast_sets(&dir.join(BASE_FORECASTS), h)?;
    let forecasts = sets
        .into_iter()
        .find(|s| s.method == Method::Base)
        .ok_or_else(|| Error::Data(format!("{BASE_FORECASTS} holds no BASE forecasts")))?;
    if forecasts.timestamps != data.test_timestamps() {
        return Err(Error::Data(format!("{BASE_FORECASTS} does not cover the configured test period")));
    }
    let (ts, residuals) = io::read_node_matrix(&dir.join(BASE_RESIDUALS), h)?;
    if ts != data.panel.timestamps()[..data.split] {
        return Err(Error::Data(format!("{BASE_RESIDUALS} does not cover the training period")));
    }
    Ok(BaseRun {
        forecasts,
        residuals,
        selections: Vec::new(),
    })
}

/// Base forecasts from the output directory when they cover `nodes`,
/// computed (and written) otherwise.
pub fn load_or_compute_base(cfg: &RunConfig, data: &Data, nodes: &[usize]) -> Result<BaseRun> {
    let dir = &cfg.output.dir;
    if dir.join(BASE_FORECASTS).exists() && dir.join(BASE_RESIDUALS).exists() {
        let base = read_base(dir, data)?;
        if base.covers(nodes) {
            return Ok(base);
        }
        log::info!("stored base forecasts do not cover every needed node; refitting");
    }
    let base = base_forecasts(cfg, data, nodes)?;
    write_base(dir, data, &base)?;
    Ok(base)
}

pub fn write_nnd(dir: &Path, data: &Data, run: &NndRun) -> Result<()> {
    io::write_forecast_sets(&dir.join(NND_FORECASTS), &data.hierarchy, &run.sets)?;
    io::write_json(&dir.join(NND_DIAGNOSTICS), &run.diagnostics)?;
    for (method, models) in &run.models {
        save_bundle(models, &data.hierarchy, &dir.join(NND_MODELS).join(method.label().to_ascii_lowercase()))?;
    }
    Ok(())
}

/// Writes the JSON report, one CSV table per metric and one Nemenyi chart
/// per metric.
pub fn write_report(dir: &Path, report: &EvalReport) -> Result<Vec<PathBuf>> {
    let mut written = vec![dir.join(REPORT)];
    io::write_text(&written[0], &(report.to_json()? + "\n"))?;
    for &metric in &report.metrics {
        let name = metric.name().to_ascii_lowercase();
        let p = dir.join(format!("scores_{name}.csv"));
        io::write_text(&p, &report.to_csv(metric))?;
        written.push(p);
    }
    for test in &report.rank_tests {
        let p = dir.join(format!("nemenyi_{}.svg", test.metric.name().to_ascii_lowercase()));
        io::write_text(&p, &plot::nemenyi_chart(test))?;
        written.push(p);
    }
    Ok(written)
}

/// Reads every forecast set the other commands write into `dir`.
pub fn read_emitted_sets(dir: &Path, h: &Hierarchy) -> Result<Vec<ForecastSet>> {
    let mut sets = Vec::new();
    for name in [RECONCILED_FORECASTS, NND_FORECASTS] {
        let p = dir.join(name);
        if p.exists() {
            sets.extend(io::read_forecast_sets(&p, h)?);
        }
    }
    if sets.is_empty() {
        return Err(Error::Config(format!(
            "no forecast files in {}; run reconcile or nnd first",
            dir.display()
        )));
    }
    Ok(sets)
}

/// Mean MASE of each method over the bottom level.
pub fn bottom_mase(report: &EvalReport, h: &Hierarchy) -> BTreeMap<String, Option<f64>> {
    let bottom = h.n_levels() - 1;
    report
        .methods
        .iter()
        .map(|m| (m.clone(), report.average(bottom, MetricKind::Mase, m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecasters::ModelKind;
    use crate::neuralnet::TrainConfig;
    use crate::nnd::{ArchitectureConfig, WindowConfig};
    use crate::synthetic::{generate, GeneratorSpec};

    fn quick_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.split.test_size = Some(28);
        cfg.forecast.select.candidates = vec![ModelKind::Naive, ModelKind::SeasonalNaive, ModelKind::Ets];
        cfg.forecast.use_calendar = false;
        cfg.cv.expanding_steps = 14;
        cfg.nnd.methods = vec![Method::Nnd1, Method::Nnd2, Method::NndMo];
        cfg.nnd.model.window = WindowConfig { w: 7, hop: 1 };
        cfg.nnd.model.architecture = ArchitectureConfig {
            conv_layers: 1,
            filters: 2,
            kernel: 3,
            dense_layers: 1,
            hidden: 4,
            window_skip: true,
        };
        cfg.nnd.model.train = TrainConfig {
            max_epochs: 5,
            ..TrainConfig::default()
        };
        cfg.nnd.model.use_calendar = false;
        cfg
    }

    fn quick_data(cfg: &RunConfig) -> Data {
        let d = generate(&GeneratorSpec {
            length: 150,
            starting_window: 30,
            ..GeneratorSpec::default()
        })
        .unwrap();
        Data::new(d.hierarchy, d.panel, cfg).unwrap()
    }

    #[test]
    fn origins_tile_the_test_period() {
        let cfg = quick_config();
        let data = quick_data(&cfg);
        assert_eq!(data.split, 122);
        let o = data.origins(7);
        assert_eq!(o.first(), Some(&(122, 7)));
        assert_eq!(o.iter().map(|x| x.1).sum::<usize>(), 28);
        let o = data.origins(10);
        assert_eq!(o.last(), Some(&(142, 8)));
    }

    #[test]
    fn required_nodes_per_method() {
        let h = Hierarchy::from_child_counts(&[vec![2], vec![2, 2]]).unwrap();
        assert_eq!(required_nodes(&h, &[Method::Bu], 1), vec![3, 4, 5, 6]);
        assert_eq!(required_nodes(&h, &[Method::Ahp, Method::Nnd2], 1), vec![0]);
        assert_eq!(required_nodes(&h, &[Method::Mo], 1), vec![1, 2]);
        assert_eq!(required_nodes(&h, &[Method::Mint], 1).len(), 7);
    }

    #[test]
    fn full_run_is_coherent_and_complete() {
        let cfg = quick_config();
        let data = quick_data(&cfg);
        let out = run(&cfg, &data).unwrap();
        let sets = out.sets();
        assert_eq!(sets.len(), 9);
        for s in &sets {
            assert_eq!(s.values.shape(), (28, data.hierarchy.len()));
            assert!(data.hierarchy.coherence_violation(&s.values).unwrap() <= 1e-9 * scale(&s.values));
        }
        assert_eq!(out.report.rank_tests.len(), 2);
        // BU equals S applied to the bottom base forecasts.
        let r = data.hierarchy.bottom_range();
        let bottom = out.base.forecasts.values.columns(r.start, r.len()).into_owned();
        assert_eq!(sets[0].values, data.hierarchy.summing_matrix().aggregate(&bottom).unwrap());
        // two-level parts of a three-level tree differ, but NNDMO exists
        assert_eq!(out.nnd.diagnostics[2].models.len(), 3);
    }

    #[test]
    fn missing_base_nodes_are_reported() {
        let cfg = quick_config();
        let data = quick_data(&cfg);
        let base = base_forecasts(&cfg, &data, &[0]).unwrap();
        let err = reconcile(&cfg, &data, &base).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("BU needs base forecasts"));
    }

    #[test]
    fn base_files_round_trip() {
        let cfg = quick_config();
        let data = quick_data(&cfg);
        let base = base_forecasts(&cfg, &data, &[0, 1]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_base(dir.path(), &data, &base).unwrap();
        let back = read_base(dir.path(), &data).unwrap();
        assert!(back.covers(&[0, 1]) && !back.covers(&[2]));
        assert_eq!(back.forecasts.values.column(0), base.forecasts.values.column(0));
        let bits = |m: &DMatrix<f64>| m.column(1).iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.residuals), bits(&base.residuals));
    }
}
