//! CSV files: hierarchy, long-format observations and regressors, and
//! forecast sets.
//!
//! | file         | header                                  |
//! |--------------|-----------------------------------------|
//! | hierarchy    | `node_id,parent_id,level`               |
//! | observations | `timestamp,node_id,value`               |
//! | exogenous    | `timestamp,node_id,variable,value`      |
//! | forecasts    | `timestamp,node_id,forecast,method`     |
//!
//! Timestamps are written as `YYYY-MM-DD` when every one of them falls on
//! midnight and as `YYYY-MM-DDTHH:MM:SS` otherwise; both forms are read.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast_set::{ForecastSet, Method};
use crate::hierarchy::{CalendarSpec, ExogBlock, Hierarchy, NodeSpec, SeriesPanel};

pub fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(ts) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(ts);
        }
    }
    for fmt in ["%Y-%m-%d", "%d/%m/%Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Ok(d.into());
        }
    }
    Err(Error::Data(format!("unparseable timestamp `{s}`")))
}

fn timestamp_format(ts: &[NaiveDateTime]) -> &'static str {
    if ts.iter().all(|t| t.time() == chrono::NaiveTime::MIN) {
        "%Y-%m-%d"
    } else {
        "%Y-%m-%dT%H:%M:%S"
    }
}

fn format_timestamps(ts: &[NaiveDateTime]) -> Vec<String> {
    let fmt = timestamp_format(ts);
    ts.iter().map(|t| t.format(fmt).to_string()).collect()
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn read_hierarchy(path: &Path) -> Result<Hierarchy> {
    let mut rdr = reader(path)?;
    let nodes = rdr
        .deserialize::<NodeSpec>()
        .map(|r| {
            r.map(|mut n| {
                n.parent_id = n.parent_id.filter(|p| !p.is_empty());
                n
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Hierarchy::new(nodes)
}

pub fn write_hierarchy(path: &Path, h: &Hierarchy) -> Result<()> {
    let mut w = writer(path)?;
    for node in h.nodes() {
        w.serialize(node)?;
    }
    w.flush().map_err(|e| Error::io("writing hierarchy", e))
}

#[derive(Deserialize)]
struct ObservationRow {
    timestamp: String,
    node_id: String,
    value: f64,
}

#[derive(Deserialize)]
struct ExogRow {
    timestamp: String,
    node_id: String,
    variable: String,
    value: f64,
}

/// Reads observations (and optionally regressors) into a panel.
///
/// Every node must have a value at every timestamp. Regressor columns of a
/// node are ordered by variable name; every listed variable must be present
/// at every timestamp. Interior nodes without regressors receive the mean
/// of their bottom descendants' regressors.
pub fn read_panel(
    h: &Hierarchy,
    observations: &Path,
    exogenous: Option<&Path>,
    calendar: CalendarSpec,
    eps: f64,
) -> Result<SeriesPanel> {
    let mut rows: BTreeMap<NaiveDateTime, Vec<Option<f64>>> = BTreeMap::new();
    let mut rdr = reader(observations)?;
    for row in rdr.deserialize::<ObservationRow>() {
        let row = row?;
        let ts = parse_timestamp(&row.timestamp)?;
        let node = h
            .index_of(&row.node_id)
            .ok_or_else(|| Error::Data(format!("observation for unknown node `{}`", row.node_id)))?;
        let slot = &mut rows.entry(ts).or_insert_with(|| vec![None; h.len()])[node];
        if slot.replace(row.value).is_some() {
            return Err(Error::Data(format!("duplicate observation for `{}` at {ts}", row.node_id)));
        }
    }
    let timestamps: Vec<NaiveDateTime> = rows.keys().copied().collect();
    let t_index: HashMap<NaiveDateTime, usize> = timestamps.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let mut values = DMatrix::zeros(timestamps.len(), h.len());
    for (t, (ts, row)) in rows.iter().enumerate() {
        for (node, v) in row.iter().enumerate() {
            values[(t, node)] = v.ok_or_else(|| Error::Data(format!("missing observation for `{}` at {ts}", h.id(node))))?;
        }
    }

    let mut exog: Vec<ExogBlock> = (0..h.len()).map(|_| ExogBlock::empty(timestamps.len())).collect();
    if let Some(path) = exogenous {
        let mut cells: Vec<BTreeMap<String, Vec<Option<f64>>>> = vec![BTreeMap::new(); h.len()];
        let mut rdr = reader(path)?;
        for row in rdr.deserialize::<ExogRow>() {
            let row = row?;
            let ts = parse_timestamp(&row.timestamp)?;
            let node = h
                .index_of(&row.node_id)
                .ok_or_else(|| Error::Data(format!("regressor for unknown node `{}`", row.node_id)))?;
            let t = *t_index
                .get(&ts)
                .ok_or_else(|| Error::Data(format!("regressor at {ts} has no matching observation")))?;
            let col = cells[node]
                .entry(row.variable)
                .or_insert_with(|| vec![None; timestamps.len()]);
            col[t] = Some(row.value);
        }
        for (node, vars) in cells.into_iter().enumerate() {
            let names: Vec<String> = vars.keys().cloned().collect();
            let mut data = DMatrix::zeros(timestamps.len(), names.len());
            for (j, (name, col)) in vars.iter().enumerate() {
                for (t, v) in col.iter().enumerate() {
                    data[(t, j)] = v.ok_or_else(|| {
                        Error::Data(format!(
                            "missing regressor `{name}` for `{}` at {}",
                            h.id(node),
                            timestamps[t]
                        ))
                    })?;
                }
            }
            exog[node] = ExogBlock { names, data };
        }
    }
    Ok(SeriesPanel::new(h, timestamps, values, exog, calendar, eps)?.with_aggregated_exog(h))
}

pub fn write_observations(path: &Path, h: &Hierarchy, panel: &SeriesPanel) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["timestamp", "node_id", "value"])?;
    let ts = format_timestamps(panel.timestamps());
    for (t, stamp) in ts.iter().enumerate() {
        for node in 0..h.len() {
            w.write_record([stamp.as_str(), h.id(node), &panel.values()[(t, node)].to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("writing observations", e))
}

/// Writes the regressors of every node that has any.
pub fn write_exogenous(path: &Path, h: &Hierarchy, panel: &SeriesPanel) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["timestamp", "node_id", "variable", "value"])?;
    let ts = format_timestamps(panel.timestamps());
    for (t, stamp) in ts.iter().enumerate() {
        for node in 0..h.len() {
            let block = panel.exog(node);
            for (j, name) in block.names.iter().enumerate() {
                w.write_record([stamp.as_str(), h.id(node), name, &block.data[(t, j)].to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("writing regressors", e))
}

/// File names of the standard triplet inside a dataset directory.
pub const HIERARCHY_FILE: &str = "hierarchy.csv";
pub const OBSERVATIONS_FILE: &str = "observations.csv";
pub const EXOGENOUS_FILE: &str = "exogenous.csv";

pub fn write_triplet(dir: &Path, h: &Hierarchy, panel: &SeriesPanel) -> Result<()> {
    write_hierarchy(&dir.join(HIERARCHY_FILE), h)?;
    write_observations(&dir.join(OBSERVATIONS_FILE), h, panel)?;
    write_exogenous(&dir.join(EXOGENOUS_FILE), h, panel)
}

#[derive(Serialize, Deserialize)]
struct ForecastRow {
    timestamp: String,
    node_id: String,
    forecast: f64,
    method: String,
}

/// Writes forecast sets one after the other, rows ordered by time and then
/// canonical node order.
pub fn write_forecast_sets(path: &Path, h: &Hierarchy, sets: &[ForecastSet]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["timestamp", "node_id", "forecast", "method"])?;
    for set in sets {
        if set.values.ncols() != h.len() {
            return Err(Error::shape(format!("{} forecast columns", h.len()), set.values.ncols()));
        }
        let ts = format_timestamps(&set.timestamps);
        for (t, stamp) in ts.iter().enumerate() {
            for node in 0..h.len() {
                w.write_record([stamp.as_str(), h.id(node), &set.values[(t, node)].to_string(), set.method.label()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("writing forecasts", e))
}

/// Reads every forecast set in a file, in order of first appearance.
/// Node forecasts missing at some timestamp are an error.
pub fn read_forecast_sets(path: &Path, h: &Hierarchy) -> Result<Vec<ForecastSet>> {
    let mut order: Vec<Method> = Vec::new();
    let mut cells: HashMap<Method, BTreeMap<NaiveDateTime, Vec<Option<f64>>>> = HashMap::new();
    let mut rdr = reader(path)?;
    for row in rdr.deserialize::<ForecastRow>() {
        let row = row?;
        let method: Method = row.method.parse().map_err(|_| Error::Data(format!("unknown method `{}`", row.method)))?;
        let ts = parse_timestamp(&row.timestamp)?;
        let node = h
            .index_of(&row.node_id)
            .ok_or_else(|| Error::Data(format!("forecast for unknown node `{}`", row.node_id)))?;
        if !cells.contains_key(&method) {
            order.push(method);
        }
        let slot = &mut cells.entry(method).or_default().entry(ts).or_insert_with(|| vec![None; h.len()])[node];
        if slot.replace(row.forecast).is_some() {
            return Err(Error::Data(format!("duplicate {method} forecast for `{}` at {ts}", row.node_id)));
        }
    }
    order
        .into_iter()
        .map(|method| {
            let rows = &cells[&method];
            let timestamps: Vec<NaiveDateTime> = rows.keys().copied().collect();
            let mut values = DMatrix::zeros(rows.len(), h.len());
            for (t, (ts, row)) in rows.iter().enumerate() {
                for (node, v) in row.iter().enumerate() {
                    values[(t, node)] = v.ok_or_else(|| {
                        Error::Data(format!("missing {method} forecast for `{}` at {ts}", h.id(node)))
                    })?;
                }
            }
            ForecastSet::new(method, timestamps, values)
        })
        .collect()
}

/// Long table of one value per timestamp and node, used for in-sample
/// residuals: `timestamp,node_id,value`. Non-finite values are written as
/// `NaN`.
pub fn write_node_matrix(path: &Path, h: &Hierarchy, timestamps: &[NaiveDateTime], m: &DMatrix<f64>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["timestamp", "node_id", "value"])?;
    let ts = format_timestamps(timestamps);
    for (t, stamp) in ts.iter().enumerate() {
        for node in 0..h.len() {
            let v = m[(t, node)];
            let s = if v.is_finite() { v.to_string() } else { "NaN".into() };
            w.write_record([stamp.as_str(), h.id(node), &s])?;
        }
    }
    w.flush().map_err(|e| Error::io("writing node table", e))
}

pub fn read_node_matrix(path: &Path, h: &Hierarchy) -> Result<(Vec<NaiveDateTime>, DMatrix<f64>)> {
    let mut rows: BTreeMap<NaiveDateTime, Vec<f64>> = BTreeMap::new();
    let mut rdr = reader(path)?;
    for row in rdr.deserialize::<ObservationRow>() {
        let row = row?;
        let ts = parse_timestamp(&row.timestamp)?;
        let node = h
            .index_of(&row.node_id)
            .ok_or_else(|| Error::Data(format!("value for unknown node `{}`", row.node_id)))?;
        rows.entry(ts).or_insert_with(|| vec![f64::NAN; h.len()])[node] = row.value;
    }
    let ts: Vec<NaiveDateTime> = rows.keys().copied().collect();
    let m = DMatrix::from_fn(ts.len(), h.len(), |t, n| rows[&ts[t]][n]);
    Ok((ts, m))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, GeneratorSpec};
    use chrono::Timelike;

    #[test]
    fn triplet_round_trip() {
        let d = generate(&GeneratorSpec {
            length: 60,
            starting_window: 20,
            ..GeneratorSpec::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_triplet(dir.path(), &d.hierarchy, &d.panel).unwrap();
        let h = read_hierarchy(&dir.path().join(HIERARCHY_FILE)).unwrap();
        assert_eq!(h.structure_hash(), d.hierarchy.structure_hash());
        let p = read_panel(
            &h,
            &dir.path().join(OBSERVATIONS_FILE),
            Some(&dir.path().join(EXOGENOUS_FILE)),
            CalendarSpec::daily(),
            1e-6,
        )
        .unwrap();
        assert_eq!(p.content_hash(), d.panel.content_hash());
        let text = fs::read_to_string(dir.path().join(HIERARCHY_FILE)).unwrap();
        assert!(text.starts_with("node_id,parent_id,level\nT,,0\n"));
    }

    #[test]
    fn missing_and_incoherent_observations() {
        let dir = tempfile::tempdir().unwrap();
        let hp = dir.path().join("h.csv");
        fs::write(&hp, "node_id,parent_id,level\nT,,0\na,T,1\nb,T,1\n").unwrap();
        let h = read_hierarchy(&hp).unwrap();
        let op = dir.path().join("o.csv");
        fs::write(&op, "timestamp,node_id,value\n2024-01-01,T,3\n2024-01-01,a,1\n2024-01-01,b,2\n2024-01-02,T,3\n2024-01-02,a,1\n").unwrap();
        let err = read_panel(&h, &op, None, CalendarSpec::default(), 1e-6).unwrap_err();
        assert!(err.to_string().contains("missing observation for `b`"), "{err}");
        fs::write(&op, "timestamp,node_id,value\n2024-01-01,T,4\n2024-01-01,a,1\n2024-01-01,b,2\n").unwrap();
        let err = read_panel(&h, &op, None, CalendarSpec::default(), 1e-6).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn forecast_sets_round_trip() {
        let h = Hierarchy::from_child_counts(&[vec![2]]).unwrap();
        let ts: Vec<NaiveDateTime> = (0..2)
            .map(|i| NaiveDate::from_ymd_opt(2024, 3, 1).unwrap().and_hms_opt(i * 6, 30, 0).unwrap())
            .collect();
        let bu = ForecastSet::new(Method::Bu, ts.clone(), DMatrix::from_row_slice(2, 3, &[3.0, 1.0, 2.0, 0.1 + 0.2, 0.1, 0.2])).unwrap();
        let base = ForecastSet::new(Method::Base, ts, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_forecast_sets(&path, &h, &[bu.clone(), base.clone()]).unwrap();
        let back = read_forecast_sets(&path, &h).unwrap();
        assert_eq!(back, vec![bu, base]);
        assert_eq!(back[0].timestamps[1].hour(), 6);
    }
}
