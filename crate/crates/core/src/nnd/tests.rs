use std::collections::BTreeMap;

use chrono::{NaiveDate, TimeDelta};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::evaluate::mase;
use crate::hierarchy::{regular_timestamps, CalendarSpec, ExogBlock, Hierarchy, SeriesPanel};
use crate::neuralnet::TrainConfig;
use crate::reconcile::{apply_topdown, proportions_ahp, proportions_pha};
use crate::rng::rng_from_seed;

fn parent_signal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, 4.0).unwrap();
    (0..n)
        .map(|t| 200.0 + 0.05 * t as f64 + 30.0 * (t as f64 * std::f64::consts::TAU / 7.0).sin() + noise.sample(&mut rng))
        .collect()
}

fn panel(h: &Hierarchy, bottom: &DMatrix<f64>, exog: Vec<ExogBlock>) -> SeriesPanel {
    let ts = regular_timestamps(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().into(), TimeDelta::days(1), bottom.nrows());
    SeriesPanel::from_bottom(h, ts, bottom, exog, CalendarSpec::default()).unwrap().with_aggregated_exog(h)
}

fn fixed_share(h: &Hierarchy, shares: &[f64], n: usize, seed: u64) -> SeriesPanel {
    let p = parent_signal(n, seed);
    let bottom = DMatrix::from_fn(n, shares.len(), |t, j| shares[j] * p[t]);
    panel(h, &bottom, (0..h.len()).map(|_| ExogBlock::empty(n)).collect())
}

/// Two children whose shares flip between 0.2/0.8 and 0.8/0.2 with a
/// promotion flag on the first child.
fn flipping(n: usize, seed: u64) -> (Hierarchy, SeriesPanel) {
    let h = Hierarchy::from_child_counts(&[vec![2]]).unwrap();
    let p = parent_signal(n, seed);
    let mut rng = rng_from_seed(seed ^ 0xabc);
    let flag: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.4) { 1.0 } else { 0.0 }).collect();
    let bottom = DMatrix::from_fn(n, 2, |t, j| {
        let s = if flag[t] == 1.0 { 0.8 } else { 0.2 };
        if j == 0 { s * p[t] } else { (1.0 - s) * p[t] }
    });
    let mut exog: Vec<ExogBlock> = (0..h.len()).map(|_| ExogBlock::empty(n)).collect();
    exog[1] = ExogBlock { names: vec!["promo".into()], data: DMatrix::from_column_slice(n, 1, &flag) };
    exog[2] = ExogBlock { names: vec!["promo".into()], data: DMatrix::zeros(n, 1) };
    (h.clone(), panel(&h, &bottom, exog))
}

fn small_cfg() -> NndConfig {
    NndConfig {
        window: WindowConfig { w: 7, hop: 1 },
        architecture: ArchitectureConfig { conv_layers: 2, filters: 4, kernel: 3, dense_layers: 2, hidden: 16, window_skip: true },
        train: TrainConfig { learning_rate: 0.005, max_epochs: 150, patience: 20, ..TrainConfig::default() },
        use_calendar: false,
        seed: 3,
        ..NndConfig::default()
    }
}

#[test]
fn fixed_shares_are_recovered() {
    let h = Hierarchy::from_child_counts(&[vec![2]]).unwrap();
    let full = fixed_share(&h, &[0.3, 0.7], 400, 1);
    let train_panel = full.slice(0..330).unwrap();
    let cfg = NndConfig { train: TrainConfig { max_epochs: 400, patience: 40, ..small_cfg().train }, ..small_cfg() };
    let models = fit_nnd(&h, &train_panel, NndStrategy::Standard, &cfg).unwrap();
    let m = &models.models[0];
    for t in 330..400 {
        let y = m.predict_at(&full, t).unwrap();
        let parent = full.series(0)[t];
        assert!((y[0] / parent - 0.3).abs() < 0.02 * 0.3, "t {t}: {y:?} of {parent}");
        assert!((y[1] / parent - 0.7).abs() < 0.02 * 0.7, "t {t}: {y:?} of {parent}");
    }
    // forecasting: children follow the parent forecast
    let fc: Vec<f64> = full.series(0)[330..337].iter().map(|v| v * 1.02).collect();
    let out = m.disaggregate(&full, 330, &fc).unwrap();
    for i in 0..7 {
        assert!((out[(i, 0)] / fc[i] - 0.3).abs() < 0.02 * 0.3, "{i}: {} of {}", out[(i, 0)], fc[i]);
        assert!((out[(i, 1)] / fc[i] - 0.7).abs() < 0.02 * 0.7);
    }
    assert!(raw_coherence_gap(&fc, &out) < 1e-2);
}

#[test]
fn promotion_flips_beat_static_proportions() {
    let (h, full) = flipping(500, 2);
    let split = 430;
    let train_panel = full.slice(0..split).unwrap();
    let models = fit_nnd(&h, &train_panel, NndStrategy::Standard, &small_cfg()).unwrap();
    let hist = train_panel.values();
    let actual_parent: Vec<f64> = full.series(0)[split..].to_vec();
    let mut start = BTreeMap::new();
    start.insert(h.root(), actual_parent.clone());
    let nnd = models.forecast(&h, &full, split, &start).unwrap();
    for (name, p) in [("AHP", proportions_ahp(&h, hist).unwrap()), ("PHA", proportions_pha(&h, hist).unwrap())] {
        let td = apply_topdown(&h, &p, &actual_parent).unwrap();
        for node in h.bottom_range() {
            let actual = &full.series(node)[split..];
            let insample = &full.series(node)[..split];
            let f_nnd: Vec<f64> = nnd.published.column(node).iter().copied().collect();
            let f_td: Vec<f64> = td.column(node).iter().copied().collect();
            let a = mase(actual, &f_nnd, insample, 7).unwrap();
            let b = mase(actual, &f_td, insample, 7).unwrap();
            assert!(a < b, "{name} node {node}: NND {a} vs {b}");
        }
    }
}

#[test]
fn training_is_reproducible() {
    let h = Hierarchy::from_child_counts(&[vec![2]]).unwrap();
    let p = fixed_share(&h, &[0.4, 0.6], 120, 5);
    let cfg = NndConfig { train: TrainConfig { max_epochs: 10, ..small_cfg().train }, ..small_cfg() };
    let a = fit_nnd(&h, &p, NndStrategy::Standard, &cfg).unwrap();
    let b = fit_nnd(&h, &p, NndStrategy::Standard, &cfg).unwrap();
    assert_eq!(a.models[0].network.params(), b.models[0].network.params());
}

#[test]
fn zero_parent_gives_near_zero_children() {
    let h = Hierarchy::from_child_counts(&[vec![2]]).unwrap();
    let n = 300;
    let mut rng = rng_from_seed(9);
    let p: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
    let bottom = DMatrix::from_fn(n, 2, |t, j| [0.25, 0.75][j] * p[t]);
    let full = panel(&h, &bottom, (0..3).map(|_| ExogBlock::empty(n)).collect());
    let cfg = NndConfig { train: TrainConfig { max_epochs: 200, ..small_cfg().train }, ..small_cfg() };
    let models = fit_nnd(&h, &full.slice(0..250).unwrap(), NndStrategy::Standard, &cfg).unwrap();
    let out = models.models[0].disaggregate(&full, 250, &[0.0; 14]).unwrap();
    // the last steps see windows made only of zero forecasts
    for i in 7..14 {
        for j in 0..2 {
            assert!(out[(i, j)].abs() < 2.0, "{}", out[(i, j)]);
        }
    }
}

#[test]
fn model_counts_follow_the_hierarchy() {
    let italian = Hierarchy::from_child_counts(&[vec![4], vec![42, 45, 10, 21]]).unwrap();
    let std_plan = NndStrategy::Standard.plan(&italian).unwrap();
    assert_eq!(std_plan.len(), 1);
    assert_eq!(std_plan[0].1.len(), 118);
    assert_eq!(NndStrategy::Iterative.plan(&italian).unwrap().len(), 5);
    let mo = NndStrategy::MiddleOut { level: 1 };
    assert_eq!(mo.plan(&italian).unwrap().len(), 4);
    assert_eq!(mo.start_nodes(&italian).unwrap().len(), 4);
    assert_eq!(NndStrategy::MiddleOut { level: 0 }.plan(&italian).unwrap(), NndStrategy::Iterative.plan(&italian).unwrap());
    assert!(NndStrategy::MiddleOut { level: 2 }.plan(&italian).is_err());
    let walmart = Hierarchy::from_child_counts(&[vec![3], vec![4, 3, 3], vec![3; 10]]).unwrap();
    assert_eq!(NndStrategy::Iterative.plan(&walmart).unwrap().len(), 14);
    let flat = Hierarchy::new(vec![crate::hierarchy::NodeSpec::new("T", None, 0)]).unwrap();
    assert!(NndStrategy::Standard.plan(&flat).is_err());
}

#[test]
fn iterative_equals_standard_on_two_levels() {
    let h = Hierarchy::from_child_counts(&[vec![3]]).unwrap();
    let p = fixed_share(&h, &[0.2, 0.3, 0.5], 150, 4);
    let cfg = NndConfig { train: TrainConfig { max_epochs: 15, ..small_cfg().train }, ..small_cfg() };
    let train_panel = p.slice(0..140).unwrap();
    let a = fit_nnd(&h, &train_panel, NndStrategy::Standard, &cfg).unwrap();
    let b = fit_nnd(&h, &train_panel, NndStrategy::Iterative, &cfg).unwrap();
    let mut start = BTreeMap::new();
    start.insert(h.root(), vec![100.0, 120.0, 90.0]);
    let fa = a.forecast(&h, &p, 140, &start).unwrap();
    let fb = b.forecast(&h, &p, 140, &start).unwrap();
    let bits = |m: &DMatrix<f64>| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&fa.published), bits(&fb.published));
}

#[test]
fn cascades_publish_coherent_forecasts() {
    let h = Hierarchy::from_child_counts(&[vec![2], vec![2, 2]]).unwrap();
    let full = fixed_share(&h, &[0.1, 0.2, 0.3, 0.4], 160, 6);
    let cfg = NndConfig { train: TrainConfig { max_epochs: 20, ..small_cfg().train }, ..small_cfg() };
    let train_panel = full.slice(0..150).unwrap();
    for strategy in [NndStrategy::Standard, NndStrategy::Iterative, NndStrategy::MiddleOut { level: 1 }] {
        let models = fit_nnd(&h, &train_panel, strategy, &cfg).unwrap();
        let mut start = BTreeMap::new();
        for n in strategy.start_nodes(&h).unwrap() {
            start.insert(n, vec![full.series(n)[150]; 5]);
        }
        let f = models.forecast(&h, &full, 150, &start).unwrap();
        assert_eq!(f.published.shape(), (5, 7));
        assert!(h.coherence_violation(&f.published).unwrap() <= 1e-9);
        assert!(f.mean_raw_gap().is_finite());
    }
}

#[test]
fn predictions_never_look_ahead() {
    let h = Hierarchy::from_child_counts(&[vec![2]]).unwrap();
    let n = 120;
    let full = fixed_share(&h, &[0.5, 0.5], n, 8);
    let cfg = NndConfig { train: TrainConfig { max_epochs: 5, ..small_cfg().train }, ..small_cfg() };
    let models = fit_nnd(&h, &full, NndStrategy::Standard, &cfg).unwrap();
    let t = 60;
    let before = models.models[0].predict_at(&full, t).unwrap();
    let r = h.bottom_range();
    let mut bottom = full.values().columns(r.start, r.len()).into_owned();
    bottom[(t + 1, 0)] += 1e6;
    bottom[(t + 1, 1)] += 1e6;
    let spiked = panel(&h, &bottom, (0..3).map(|_| ExogBlock::empty(n)).collect());
    let after = models.models[0].predict_at(&spiked, t).unwrap();
    assert_eq!(before, after);
    let moved = models.models[0].predict_at(&spiked, t + 1).unwrap();
    assert_ne!(before, moved);
}

#[test]
fn bundles_round_trip() {
    let h = Hierarchy::from_child_counts(&[vec![2], vec![1, 2]]).unwrap();
    let full = fixed_share(&h, &[0.2, 0.3, 0.5], 100, 10);
    let cfg = NndConfig { train: TrainConfig { max_epochs: 3, ..small_cfg().train }, ..small_cfg() };
    let models = fit_nnd(&h, &full, NndStrategy::Iterative, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&models, &h, dir.path()).unwrap();
    let back = load_bundle(&h, dir.path()).unwrap();
    assert_eq!(back.models.len(), models.models.len());
    for (a, b) in models.models.iter().zip(&back.models) {
        assert_eq!(a.network.params(), b.network.params());
        assert_eq!(a.children, b.children);
    }
    let other = Hierarchy::from_child_counts(&[vec![3]]).unwrap();
    assert!(load_bundle(&other, dir.path()).is_err());
}
