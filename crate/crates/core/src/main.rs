use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use htsnnd::config::{extract_overrides, RunConfig};
use htsnnd::forecast_set::Method;
use htsnnd::pipeline::{self, Data};
use htsnnd::synthetic::{generate, GeneratorSpec};
use htsnnd::{fetch, io, plot, Error, Result};

/// Coherent hierarchical forecasting.
///
/// Any configuration key can be overridden with `--section.key value`,
/// e.g. `--nnd.window.w 14` or `--split.horizon 7`.
///
/// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
/// failure. Failures print a JSON object on stderr.
#[derive(Parser)]
#[command(name = "htsnnd", version)]
struct Cli {
    /// Worker threads; all cores when absent. Output does not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (hierarchy, observations, regressors,
    /// truth.json). Errors: invalid generator spec (2).
    Synth {
        /// TOML generator spec; defaults when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Select and fit a base model per node and forecast the test period.
    /// Errors: bad config (2), unreadable or incoherent data (3), fit failure (4).
    Forecast {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated node ids; every node when absent.
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<String>>,
    },
    /// Reconcile base forecasts with the configured methods.
    /// Errors: missing base nodes (2), data (3), singular covariance (4).
    Reconcile {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train disaggregation networks and publish coherent forecasts.
    /// Errors: bad config (2), data (3), divergence (4).
    Nnd {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score emitted forecasts; write tables, JSON report and Nemenyi chart.
    /// Errors: fewer than two methods for the rank tests (2), data (3).
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Forecast files; those in the output directory when absent.
        #[arg(long)]
        forecasts: Vec<PathBuf>,
    },
    /// Plot actual and forecast values of selected nodes as SVG.
    /// Errors: unknown node (2), data (3).
    Plot {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        forecasts: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        nodes: Vec<String>,
        /// Directory for the SVG files; the output directory when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Download the Italian pasta sales data and convert it to the
    /// standard CSV files. Errors: network or format (3).
    FetchItalian {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = fetch::ITALIAN_URL)]
        url: String,
        /// Convert a local copy of the sales table instead of downloading.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load_config(args: &ConfigArgs, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(args.config.as_deref(), overrides)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn report(msg: &str) {
    eprintln!("{msg}");
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<()> {
    match cli.command {
        Command::Synth { spec, out, seed } => {
            let mut spec: GeneratorSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                }
                None => GeneratorSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let d = generate(&spec)?;
            io::write_triplet(&out, &d.hierarchy, &d.panel)?;
            io::write_json(&out.join("truth.json"), &d.truth)?;
            report(&format!("wrote {} series x {} steps to {}", d.hierarchy.len(), d.panel.len(), out.display()));
        }
        Command::Forecast { cfg, nodes } => {
            let cfg = load_config(&cfg, &overrides)?;
            let data = Data::load(&cfg)?;
            let h = &data.hierarchy;
            let nodes: Vec<usize> = match nodes {
                None => (0..h.len()).collect(),
                Some(ids) => ids
                    .iter()
                    .map(|id| h.index_of(id).ok_or_else(|| Error::Config(format!("unknown node `{id}`"))))
                    .collect::<Result<_>>()?,
            };
            let base = pipeline::base_forecasts(&cfg, &data, &nodes)?;
            pipeline::write_base(&cfg.output.dir, &data, &base)?;
            report(&format!("base forecasts for {} nodes in {}", nodes.len(), cfg.output.dir.display()));
        }
        Command::Reconcile { cfg } => {
            let cfg = load_config(&cfg, &overrides)?;
            let data = Data::load(&cfg)?;
            let nodes = pipeline::required_nodes(&data.hierarchy, &cfg.reconcile.methods, cfg.reconcile.middle_level);
            let base = pipeline::load_or_compute_base(&cfg, &data, &nodes)?;
            let sets = pipeline::reconcile(&cfg, &data, &base)?;
            io::write_forecast_sets(&cfg.output.dir.join(pipeline::RECONCILED_FORECASTS), &data.hierarchy, &sets)?;
            report(&format!("{} reconciled forecast sets in {}", sets.len(), cfg.output.dir.display()));
        }
        Command::Nnd { cfg } => {
            let cfg = load_config(&cfg, &overrides)?;
            let data = Data::load(&cfg)?;
            let nodes = pipeline::required_nodes(&data.hierarchy, &cfg.nnd.methods, cfg.nnd.middle_level);
            let base = pipeline::load_or_compute_base(&cfg, &data, &nodes)?;
            let run = pipeline::disaggregate(&cfg, &data, &base)?;
            pipeline::write_nnd(&cfg.output.dir, &data, &run)?;
            for d in &run.diagnostics {
                report(&format!(
                    "{}: {} models, mean raw coherence gap {:.2e}",
                    d.method,
                    d.models.len(),
                    d.mean_raw_gap
                ));
            }
        }
        Command::Evaluate { cfg, forecasts } => {
            let cfg = load_config(&cfg, &overrides)?;
            let data = Data::load(&cfg)?;
            let sets = if forecasts.is_empty() {
                pipeline::read_emitted_sets(&cfg.output.dir, &data.hierarchy)?
            } else {
                let mut sets = Vec::new();
                for p in &forecasts {
                    sets.extend(io::read_forecast_sets(p, &data.hierarchy)?);
                }
                sets
            };
            let report_ = pipeline::evaluate(&cfg, &data, &sets)?;
            pipeline::write_report(&cfg.output.dir, &report_)?;
            let bottom = data.hierarchy.n_levels() - 1;
            for m in &report_.methods {
                if let Some(v) = report_.average(bottom, htsnnd::evaluate::MetricKind::Mase, m) {
                    report(&format!("{m}: bottom-level mean MASE {v:.4}"));
                }
            }
        }
        Command::Plot { cfg, forecasts, nodes, out } => {
            let cfg = load_config(&cfg, &overrides)?;
            let data = Data::load(&cfg)?;
            let h = &data.hierarchy;
            let sets = io::read_forecast_sets(&forecasts, h)?;
            let out = out.unwrap_or_else(|| cfg.output.dir.join("plots"));
            for id in &nodes {
                let node = h.index_of(id).ok_or_else(|| Error::Config(format!("unknown node `{id}`")))?;
                let path = plot_node(&data, &sets, node, &out)?;
                report(&format!("wrote {}", path.display()));
            }
        }
        Command::FetchItalian { out, url, input } => {
            let (h, panel) = fetch::fetch_italian(&url, input.as_deref(), &out)?;
            report(&format!("wrote {} series x {} steps to {}", h.len(), panel.len(), out.display()));
        }
    }
    Ok(())
}

fn plot_node(data: &Data, sets: &[htsnnd::forecast_set::ForecastSet], node: usize, out: &Path) -> Result<PathBuf> {
    let h = &data.hierarchy;
    let first = sets.first().ok_or_else(|| Error::Data("the forecast file is empty".into()))?;
    let ts = data.panel.timestamps();
    let start = ts
        .iter()
        .position(|t| *t == first.timestamps[0])
        .ok_or_else(|| Error::Data("forecast timestamps are outside the observations".into()))?;
    let actual = &data.panel.series(node)[start..(start + first.horizon()).min(ts.len())];
    let columns: Vec<(Method, Vec<f64>)> = sets.iter().map(|s| (s.method, s.node(node))).collect();
    let mut lines = vec![plot::Line { name: "actual", values: actual }];
    for (m, v) in &columns {
        lines.push(plot::Line { name: m.label(), values: v });
    }
    let labels: Vec<String> = first.timestamps.iter().map(|t| t.format("%Y-%m-%d").to_string()).collect();
    let svg = plot::line_chart(h.id(node), &labels, &lines);
    let path = out.join(format!("{}.svg", h.id(node)));
    io::write_text(&path, &svg)?;
    Ok(path)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let outcome = extract_overrides(std::env::args().collect()).and_then(|(args, overrides)| {
        let cli = match Cli::try_parse_from(args) {
            Ok(cli) => cli,
            Err(e) if !e.use_stderr() => e.exit(),
            Err(e) => return Err(Error::Config(e.to_string().trim_end().to_string())),
        };
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            pool = pool.num_threads(j.max(1));
        }
        let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| run(cli, overrides))
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": e.exit_code(),
            });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
