//! End-to-end run: base forecasts, reconciliation, NND and evaluation on a
//! synthetic dataset, with charts written as SVG.

use htsnnd::config::RunConfig;
use htsnnd::evaluate::MetricKind;
use htsnnd::forecast_set::Method;
use htsnnd::forecasters::ModelKind;
use htsnnd::nnd::ArchitectureConfig;
use htsnnd::pipeline::{self, Data};
use htsnnd::plot;
use htsnnd::synthetic::{generate, GeneratorSpec};

fn main() -> htsnnd::Result<()> {
    let d = generate(&GeneratorSpec { shape: vec![vec![2], vec![2, 2]], length: 500, starting_window: 60, seed: 3, ..GeneratorSpec::default() })?;

    let mut cfg = RunConfig::default();
    cfg.seed = 3;
    cfg.split.test_size = Some(56);
    cfg.split.horizon = 7;
    cfg.forecast.select.candidates = vec![ModelKind::Naive, ModelKind::SeasonalNaive, ModelKind::Ets];
    cfg.reconcile.methods = vec![Method::Bu, Method::Ahp, Method::Pha, Method::Mint];
    cfg.nnd.methods = vec![Method::Nnd2];
    cfg.nnd.model.window.w = 14;
    cfg.nnd.model.architecture =
        ArchitectureConfig { conv_layers: 0, filters: 8, kernel: 3, dense_layers: 1, hidden: 32, window_skip: true };
    cfg.nnd.model.train.max_epochs = 200;

    let data = Data::new(d.hierarchy, d.panel, &cfg)?;
    let out = pipeline::run(&cfg, &data)?;
    let h = &data.hierarchy;

    for level in 0..h.n_levels() {
        let row: Vec<String> = out
            .report
            .methods
            .iter()
            .map(|m| format!("{m} {:.3}", out.report.average(level, MetricKind::Mase, m).unwrap_or(f64::NAN)))
            .collect();
        println!("level {level} MASE: {}", row.join(", "));
    }
    for diag in &out.nnd.diagnostics {
        println!("{}: mean raw coherence gap {:.2e}", diag.method, diag.mean_raw_gap);
    }

    let dir = std::env::temp_dir().join("htsnnd-pipeline");
    pipeline::write_report(&dir, &out.report)?;
    let sets = out.sets();
    let node = h.bottom_range().start;
    let actual = &data.test_values().column(node).iter().copied().collect::<Vec<_>>();
    let columns: Vec<(&str, Vec<f64>)> = sets.iter().map(|s| (s.method.label(), s.node(node))).collect();
    let mut lines = vec![plot::Line { name: "actual", values: actual }];
    lines.extend(columns.iter().map(|(name, v)| plot::Line { name, values: v }));
    let labels: Vec<String> = data.test_timestamps().iter().map(|t| t.format("%m-%d").to_string()).collect();
    htsnnd::io::write_text(&dir.join("bottom.svg"), &plot::line_chart(h.id(node), &labels, &lines))?;
    println!("report and charts in {}", dir.display());
    Ok(())
}
