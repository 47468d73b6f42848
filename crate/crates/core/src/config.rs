//! Run configuration: a TOML file of sections, each key overridable from
//! the command line as `--section.key value`. Precedence is flag, then
//! file, then default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::evaluate::{CvConfig, Metric, MetricKind};
use crate::forecast_set::Method;
use crate::forecasters::SelectConfig;
use crate::hierarchy::{CalendarSpec, DEFAULT_DATA_EPS};
use crate::io::{EXOGENOUS_FILE, HIERARCHY_FILE, OBSERVATIONS_FILE};
use crate::nnd::NndConfig;
use crate::reconcile::ProportionMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalendarChoice {
    None,
    Daily,
    Hourly,
}

impl CalendarChoice {
    pub fn spec(self) -> CalendarSpec {
        match self {
            CalendarChoice::None => CalendarSpec::default(),
            CalendarChoice::Daily => CalendarSpec::daily(),
            CalendarChoice::Hourly => CalendarSpec {
                day_of_week: true,
                month: false,
                hour: true,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory holding the standard triplet; individual paths override it.
    pub dir: Option<PathBuf>,
    pub hierarchy: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub exogenous: Option<PathBuf>,
    pub calendar: CalendarChoice,
    pub eps: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: None,
            hierarchy: None,
            observations: None,
            exogenous: None,
            calendar: CalendarChoice::Daily,
            eps: DEFAULT_DATA_EPS,
        }
    }
}

impl DataConfig {
    fn resolve(&self, explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
        explicit.clone().or_else(|| self.dir.as_ref().map(|d| d.join(name)))
    }

    pub fn hierarchy_path(&self) -> Result<PathBuf> {
        self.resolve(&self.hierarchy, HIERARCHY_FILE)
            .ok_or_else(|| Error::Config("no hierarchy file: set data.dir or data.hierarchy".into()))
    }

    pub fn observations_path(&self) -> Result<PathBuf> {
        self.resolve(&self.observations, OBSERVATIONS_FILE)
            .ok_or_else(|| Error::Config("no observations file: set data.dir or data.observations".into()))
    }

    /// The regressor file, if configured or present in the data directory.
    pub fn exogenous_path(&self) -> Option<PathBuf> {
        if self.exogenous.is_some() {
            return self.exogenous.clone();
        }
        self.dir.as_ref().map(|d| d.join(EXOGENOUS_FILE)).filter(|p| p.exists())
    }
}

/// Train/test split. The test period is either everything from
/// `test_start` on or the last `test_size` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_start: Option<String>,
    pub test_size: Option<usize>,
    /// Forecast horizon; the test period is covered by consecutive
    /// origins this many steps apart.
    pub horizon: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_start: None,
            test_size: Some(365),
            horizon: 7,
        }
    }
}

/// Expanding-window cross-validation used for model selection inside the
/// training period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub starting_window: Option<usize>,
    pub ending_window: Option<usize>,
    /// Starting window as a fraction of the training length when
    /// `starting_window` is not set.
    pub start_fraction: f64,
    pub expanding_steps: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        Self {
            starting_window: None,
            ending_window: None,
            start_fraction: 0.8,
            expanding_steps: 28,
        }
    }
}

impl CvSection {
    pub fn config(&self, train_len: usize, horizon: usize) -> Result<CvConfig> {
        let mut cv = CvConfig::for_length(train_len, horizon, self.expanding_steps, self.start_fraction)?;
        if let Some(s) = self.starting_window {
            cv.starting_window = s;
        }
        if let Some(e) = self.ending_window {
            cv.ending_window = e;
        }
        cv.validate(train_len)?;
        Ok(cv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastSection {
    /// Use calendar dummies as regressors of the base models.
    pub use_calendar: bool,
    #[serde(flatten)]
    pub select: SelectConfig,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            use_calendar: true,
            select: SelectConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconcileSection {
    pub methods: Vec<Method>,
    pub middle_level: usize,
    /// Proportions used below the middle level.
    pub middle_out_proportions: ProportionMethod,
    /// Forces the MinT shrinkage intensity instead of estimating it.
    pub mint_lambda: Option<f64>,
}

impl Default for ReconcileSection {
    fn default() -> Self {
        Self {
            methods: vec![Method::Bu, Method::Ahp, Method::Pha, Method::Fp, Method::Mo, Method::Mint],
            middle_level: 1,
            middle_out_proportions: ProportionMethod::Ahp,
            mint_lambda: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NndSection {
    /// Any of NND1, NND2, NNDMO.
    pub methods: Vec<Method>,
    pub middle_level: usize,
    #[serde(flatten)]
    pub model: NndConfig,
}

impl Default for NndSection {
    fn default() -> Self {
        Self {
            methods: vec![Method::Nnd1, Method::Nnd2],
            middle_level: 1,
            model: NndConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub metrics: Vec<MetricKind>,
    /// MASE scaling period; the forecast season when absent.
    pub mase_period: Option<usize>,
    pub alpha: f64,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            metrics: vec![MetricKind::Mase, MetricKind::Smape],
            mase_period: None,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every random component derives its own seed from it.
    pub seed: u64,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub cv: CvSection,
    pub forecast: ForecastSection,
    pub reconcile: ReconcileSection,
    pub nnd: NndSection,
    pub evaluate: EvaluateSection,
    pub output: OutputSection,
}

const PATH_KEYS: [&[&str]; 5] = [
    &["data", "dir"],
    &["data", "hierarchy"],
    &["data", "observations"],
    &["data", "exogenous"],
    &["output", "dir"],
];

impl RunConfig {
    /// Loads `path` (or the defaults when `None`) and applies the
    /// `(dotted key, raw value)` overrides. Relative paths in the file are
    /// taken relative to the file's directory; paths given as overrides
    /// relative to the working directory.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                let mut t: Table = text
                    .parse()
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                for key in PATH_KEYS {
                    rebase_path(&mut t, key, base);
                }
                t
            }
            None => Table::new(),
        };
        for (key, raw) in overrides {
            set_dotted(&mut table, key, parse_value(raw))?;
        }
        let cfg: RunConfig = Value::Table(table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let known: Table = toml::Table::try_from(&cfg).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(key) = unknown_key(&table, &known, "") {
            return Err(Error::Config(format!("unknown configuration key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.split.horizon == 0 {
            return Err(Error::Config("split.horizon must be positive".into()));
        }
        if self.split.test_start.is_none() && self.split.test_size.is_none_or(|s| s == 0) {
            return Err(Error::Config("set split.test_start or a positive split.test_size".into()));
        }
        if !(self.evaluate.alpha == 0.05 || self.evaluate.alpha == 0.10) {
            return Err(Error::Config(format!("evaluate.alpha must be 0.05 or 0.10, got {}", self.evaluate.alpha)));
        }
        if self.evaluate.metrics.is_empty() {
            return Err(Error::Config("evaluate.metrics is empty".into()));
        }
        if let Some(m) = self.nnd.methods.iter().find(|m| !matches!(m, Method::Nnd1 | Method::Nnd2 | Method::NndMo)) {
            return Err(Error::Config(format!("nnd.methods may only hold NND1, NND2, NNDMO; got {m}")));
        }
        if let Some(m) = self
            .reconcile
            .methods
            .iter()
            .find(|m| matches!(m, Method::Base | Method::Nnd1 | Method::Nnd2 | Method::NndMo))
        {
            return Err(Error::Config(format!("reconcile.methods may only hold BU, AHP, PHA, FP, MO, MINT; got {m}")));
        }
        self.forecast.select.validate()?;
        self.nnd.model.validate()
    }

    pub fn metrics(&self) -> Vec<Metric> {
        let period = self.evaluate.mase_period.unwrap_or(self.forecast.select.season);
        self.evaluate
            .metrics
            .iter()
            .map(|k| match k {
                MetricKind::Mase => Metric::Mase { period },
                MetricKind::Smape => Metric::Smape,
            })
            .collect()
    }

    /// The NND settings with the run seed folded in.
    pub fn nnd_config(&self) -> NndConfig {
        NndConfig {
            seed: crate::rng::derive_seed(self.seed, &format!("nnd-root/{}", self.nnd.model.seed)),
            ..self.nnd.model.clone()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// First key of `given` with no counterpart in `known`, the serialized
/// configuration (flattened sections do not reject unknown keys).
fn unknown_key(given: &Table, known: &Table, prefix: &str) -> Option<String> {
    for (k, v) in given {
        let path = format!("{prefix}{k}");
        match (v, known.get(k)) {
            (_, None) => return Some(path),
            (Value::Table(g), Some(Value::Table(kn))) => {
                if let Some(bad) = unknown_key(g, kn, &format!("{path}.")) {
                    return Some(bad);
                }
            }
            _ => {}
        }
    }
    None
}

fn rebase_path(t: &mut Table, key: &[&str], base: &Path) {
    let Some(Value::Table(section)) = t.get_mut(key[0]) else { return };
    if let Some(Value::String(s)) = section.get_mut(key[1]) {
        if Path::new(s.as_str()).is_relative() {
            *s = base.join(&*s).to_string_lossy().into_owned();
        }
    }
}

/// A TOML literal when `raw` parses as one, a bare string otherwise.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{key}`")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(Error::Config(format!("`{part}` in `{key}` is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `--a.b value` and `--a.b=value` pairs out of an argument list.
/// Only flags whose name contains a dot are taken.
pub fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--") {
            Some(flag) if flag.split('=').next().is_some_and(|k| k.contains('.')) => {
                if let Some((k, v)) = flag.split_once('=') {
                    overrides.push((k.to_string(), v.to_string()));
                } else {
                    let v = it
                        .next()
                        .ok_or_else(|| Error::Config(format!("override `--{flag}` needs a value")))?;
                    overrides.push((flag.to_string(), v));
                }
            }
            _ => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}
