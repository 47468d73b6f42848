//! Conversion of the public Italian pasta sales data to the standard CSV
//! triplet.
//!
//! The source is a wide CSV with a `DATE` column, one `QTY_Bb_i` column per
//! item (sales of item `i` of brand `b`) and a matching `PROMO_Bb_i` flag.
//! The hierarchy is store, brand, item. Empty quantity cells count as zero
//! sales; empty promotion cells as no promotion.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hierarchy::{CalendarSpec, ExogBlock, Hierarchy, NodeSpec, SeriesPanel};
use crate::io::{parse_timestamp, write_triplet};

/// Landing page of the dataset.
pub const ITALIAN_URL: &str = "https://data.mendeley.com/datasets/s8dgbs3rng/1";

pub const STORE_ID: &str = "store";

/// Downloads `url` into memory.
pub fn download(url: &str) -> Result<Vec<u8>> {
    let agent = ureq::Agent::new_with_config(
        ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(120)))
            .build(),
    );
    let mut body = agent
        .get(url)
        .call()
        .map_err(|e| Error::Network(format!("GET {url}: {e}")))?
        .into_body();
    let mut bytes = Vec::new();
    body.as_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Network(format!("reading {url}: {e}")))?;
    Ok(bytes)
}

fn parse_item(column: &str, prefix: &str) -> Option<(String, String)> {
    let rest = column.strip_prefix(prefix)?;
    let (brand, _) = rest.split_once('_')?;
    if !brand.starts_with('B') {
        return None;
    }
    Some((brand.to_string(), rest.to_string()))
}

/// Parses the wide sales table into a hierarchy and a panel.
pub fn parse_italian(bytes: &[u8]) -> Result<(Hierarchy, SeriesPanel)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let date_col = headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case("date"))
        .ok_or_else(|| {
            Error::Data(
                "expected a CSV with a DATE column and QTY_/PROMO_ item columns; download the sales table \
                 from the dataset page and pass it with --input"
                    .into(),
            )
        })?;
    let mut items: BTreeMap<String, (String, usize, Option<usize>)> = BTreeMap::new();
    for (c, name) in headers.iter().enumerate() {
        if let Some((brand, item)) = parse_item(name, "QTY_") {
            items.insert(item, (brand, c, None));
        }
    }
    for (c, name) in headers.iter().enumerate() {
        if let Some((_, item)) = parse_item(name, "PROMO_") {
            if let Some(entry) = items.get_mut(&item) {
                entry.2 = Some(c);
            }
        }
    }
    if items.is_empty() {
        return Err(Error::Data("no QTY_ item columns found".into()));
    }
    let mut nodes = vec![NodeSpec::new(STORE_ID, None, 0)];
    let brands: std::collections::BTreeSet<&String> = items.values().map(|v| &v.0).collect();
    for b in &brands {
        nodes.push(NodeSpec::new(b.as_str(), Some(STORE_ID), 1));
    }
    for (item, (brand, _, _)) in &items {
        nodes.push(NodeSpec::new(item.as_str(), Some(brand), 2));
    }
    let h = Hierarchy::new(nodes)?;

    let cell = |s: &str| -> Result<f64> {
        if s.is_empty() {
            Ok(0.0)
        } else {
            s.parse::<f64>().map_err(|_| Error::Data(format!("non-numeric cell `{s}`")))
        }
    };
    let mut timestamps = Vec::new();
    let mut qty: Vec<Vec<f64>> = Vec::new();
    let mut promo: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        timestamps.push(parse_timestamp(&rec[date_col])?);
        let mut q = Vec::with_capacity(items.len());
        let mut p = Vec::with_capacity(items.len());
        for (_, qc, pc) in items.values() {
            q.push(cell(&rec[*qc])?);
            p.push(match pc {
                Some(c) => cell(&rec[*c])?,
                None => 0.0,
            });
        }
        qty.push(q);
        promo.push(p);
    }
    let t = timestamps.len();
    // canonical bottom order is lexicographic by item id, as in `items`
    let r = h.bottom_range();
    let bottom = DMatrix::from_fn(t, r.len(), |i, j| qty[i][j]);
    let has_promo = items.values().any(|v| v.2.is_some());
    let exog = (0..h.len())
        .map(|node| {
            if has_promo && r.contains(&node) {
                let j = node - r.start;
                ExogBlock {
                    names: vec!["promo".into()],
                    data: DMatrix::from_fn(t, 1, |i, _| promo[i][j]),
                }
            } else {
                ExogBlock::empty(t)
            }
        })
        .collect();
    let panel = SeriesPanel::from_bottom(&h, timestamps, &bottom, exog, CalendarSpec::daily())?.with_aggregated_exog(&h);
    Ok((h, panel))
}

/// Converts the sales table at `input` (or downloaded from `url`) and
/// writes the triplet to `out`.
pub fn fetch_italian(url: &str, input: Option<&Path>, out: &Path) -> Result<(Hierarchy, SeriesPanel)> {
    let bytes = match input {
        Some(p) => std::fs::read(p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?,
        None => download(url)?,
    };
    let (h, panel) = parse_italian(&bytes)?;
    write_triplet(out, &h, &panel)?;
    Ok((h, panel))
}
