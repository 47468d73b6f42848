use std::path::Path;
use std::process::{Command, Output};

use htsnnd::io::{read_forecast_sets, read_hierarchy, read_node_matrix};

const BIN: &str = env!("CARGO_BIN_EXE_htsnnd");

const RUN: &str = r#"seed = 3
[data]
dir = "data"
[split]
test_size = 14
[forecast]
candidates = ["naive", "seasonal_naive", "ets"]
use_calendar = false
[reconcile]
methods = ["BU", "AHP", "MINT"]
[nnd]
methods = ["NND2"]
use_calendar = false
[nnd.window]
w = 7
[nnd.architecture]
conv_layers = 1
filters = 2
kernel = 3
dense_layers = 1
hidden = 4
[nnd.train]
max_epochs = 10
[output]
dir = "out"
"#;

fn htsnnd(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = htsnnd(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON in {text}"));
    serde_json::from_str(line).unwrap()
}

fn workspace() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("gen.toml"), "shape = [[2], [2, 2]]\nlength = 120\nstarting_window = 30\nseed = 4\n").unwrap();
    std::fs::write(dir.join("run.toml"), RUN).unwrap();
    ok(dir, &["synth", "--spec", "gen.toml", "--out", "data"]);
    tmp
}

#[test]
fn bottom_up_file_is_the_aggregate_of_bottom_base_forecasts() {
    let tmp = workspace();
    let dir = tmp.path();
    ok(dir, &["forecast", "--config", "run.toml"]);
    ok(dir, &["reconcile", "--config", "run.toml"]);
    let h = read_hierarchy(&dir.join("data/hierarchy.csv")).unwrap();
    let base = read_forecast_sets(&dir.join("out/base_forecasts.csv"), &h).unwrap();
    let rec = read_forecast_sets(&dir.join("out/reconciled_forecasts.csv"), &h).unwrap();
    assert_eq!(rec.iter().map(|s| s.method.label()).collect::<Vec<_>>(), ["BU", "AHP", "MINT"]);
    let r = h.bottom_range();
    let bottom = base[0].values.columns(r.start, r.len()).into_owned();
    let want = h.summing_matrix().aggregate(&bottom).unwrap();
    let diff = (&rec[0].values - &want).abs().max();
    assert!(diff < 1e-9, "BU deviates by {diff}");
    for s in &rec {
        assert!(h.coherence_violation(&s.values).unwrap() < 1e-6);
    }
    let (_, residuals) = read_node_matrix(&dir.join("out/base_residuals.csv"), &h).unwrap();
    assert_eq!(residuals.ncols(), h.len());
}

#[test]
fn evaluate_needs_two_methods_for_rank_tests() {
    let tmp = workspace();
    let dir = tmp.path();
    ok(dir, &["reconcile", "--config", "run.toml", "--reconcile.methods", "[\"BU\"]"]);
    let out = htsnnd(dir, &["evaluate", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "config");
    assert_eq!(err["exit_code"], 2);
    assert!(err["message"].as_str().unwrap().contains("at least 2 methods"));
}

#[test]
fn full_sequence_writes_report_and_charts() {
    let tmp = workspace();
    let dir = tmp.path();
    ok(dir, &["reconcile", "--config", "run.toml"]);
    let out = ok(dir, &["nnd", "--config", "run.toml"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("NND2: 3 models"));
    let out = ok(dir, &["evaluate", "--config", "run.toml"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("NND2: bottom-level mean MASE"));
    for f in ["report.json", "scores_mase.csv", "scores_smape.csv", "nemenyi_mase.svg", "nnd_diagnostics.json"] {
        assert!(dir.join("out").join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["methods"].as_array().unwrap().len(), 4);
    ok(dir, &["plot", "--config", "run.toml", "--forecasts", "out/nnd_forecasts.csv", "--nodes", "T,T_000_001"]);
    let svg = std::fs::read_to_string(dir.join("out/plots/T_000_001.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("NND2"));
}

#[test]
fn flags_override_the_file_and_bad_input_has_exit_codes() {
    let tmp = workspace();
    let dir = tmp.path();
    // flag beats file: with horizon 14 a single origin covers the test set
    ok(dir, &["forecast", "--config", "run.toml", "--nodes", "T", "--split.horizon", "14"]);
    let out = htsnnd(dir, &["forecast", "--config", "run.toml", "--nnd.window.w", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = htsnnd(dir, &["forecast", "--config", "run.toml", "--forecast.no_such_key", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_json(&out)["message"].as_str().unwrap().contains("no_such_key"));
    let out = htsnnd(dir, &["plot", "--config", "run.toml", "--forecasts", "out/base_forecasts.csv", "--nodes", "nope"]);
    assert_eq!(out.status.code(), Some(2));

    // incoherent observations are a data error
    let obs = dir.join("data/observations.csv");
    let text = std::fs::read_to_string(&obs).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines.iter().position(|l| l.contains(",T,")).unwrap();
    let mut cells: Vec<String> = lines[row].split(',').map(String::from).collect();
    let last = cells.len() - 1;
    cells[last] = format!("{}", cells[last].parse::<f64>().unwrap() + 5.0);
    lines[row] = cells.join(",");
    std::fs::write(&obs, lines.join("\n") + "\n").unwrap();
    let out = htsnnd(dir, &["forecast", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"], "data");
}

#[test]
fn synth_is_reproducible_and_fetch_converts_a_local_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--out", "a", "--seed", "8"]);
    ok(dir, &["synth", "--out", "b", "--seed", "8"]);
    for f in ["hierarchy.csv", "observations.csv", "exogenous.csv", "truth.json"] {
        assert_eq!(std::fs::read(dir.join("a").join(f)).unwrap(), std::fs::read(dir.join("b").join(f)).unwrap(), "{f}");
    }
    std::fs::write(
        dir.join("sales.csv"),
        "DATE,QTY_B1_1,QTY_B1_2,QTY_B2_1,PROMO_B1_1,PROMO_B1_2,PROMO_B2_1\n\
         2014-01-02,3,1,2,0,1,0\n2014-01-03,4,0,2,1,0,0\n",
    )
    .unwrap();
    ok(dir, &["fetch-italian", "--input", "sales.csv", "--out", "italian"]);
    let h = read_hierarchy(&dir.join("italian/hierarchy.csv")).unwrap();
    assert_eq!(h.level_sizes(), vec![1, 2, 3]);
    let out = htsnnd(dir, &["fetch-italian", "--input", "missing.csv", "--out", "x"]);
    assert_ne!(out.status.code(), Some(0));
}
