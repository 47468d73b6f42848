//! Select a base model by expanding-window cross-validation and combine
//! forecasts with simplex-constrained least squares.

use htsnnd::evaluate::CvConfig;
use htsnnd::forecasters::{cls_weights, combine_weighted, fit_ets_auto, naive_forecast, seasonal_naive_forecast};
use htsnnd::forecasters::{select_model, ModelKind, SelectConfig};
use htsnnd::rng::rng_from_seed;
use rand_distr::{Distribution, Normal};

fn main() -> htsnnd::Result<()> {
    let mut rng = rng_from_seed(1);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let y: Vec<f64> = (0..200)
        .map(|t| 50.0 + 0.1 * t as f64 + 10.0 * (2.0 * std::f64::consts::PI * t as f64 / 7.0).sin() + noise.sample(&mut rng))
        .collect();
    let (train, test) = y.split_at(186);

    let cfg = SelectConfig {
        candidates: vec![ModelKind::Naive, ModelKind::SeasonalNaive, ModelKind::Arx, ModelKind::Ets],
        ..SelectConfig::default()
    };
    let cv = CvConfig::for_length(train.len(), 7, 14, 0.7)?;
    let sel = select_model(train, None, &cfg, &cv)?;
    for (kind, score) in &sel.cv_scores {
        println!("{:>15}: cv MASE {}", kind.name(), score.map_or("failed".into(), |s| format!("{s:.3}")));
    }
    println!("selected {}", sel.model.kind().name());
    let f = sel.model.forecast(train, None, None, 14)?;
    println!("forecast {:?}", f.iter().map(|v| v.round()).collect::<Vec<_>>());

    // CLS weights over a held-out week
    let (fit, hold) = train.split_at(179);
    let members = vec![
        naive_forecast(fit, 7)?,
        seasonal_naive_forecast(fit, 7, 7)?,
        fit_ets_auto(fit, 7, 0.1)?.forecast(fit, 7)?,
    ];
    let w = cls_weights(&members, hold)?;
    println!("CLS weights (naive, seasonal naive, ETS): {w:.3?}");
    let combined = combine_weighted(&members, &w)?;
    let mae = |f: &[f64]| f.iter().zip(hold).map(|(a, b)| (a - b).abs()).sum::<f64>() / 7.0;
    println!("held-out MAE: combined {:.2}, members {:.2?}", mae(&combined), members.iter().map(|m| mae(m)).collect::<Vec<_>>());
    println!("test actuals {:?}", test.iter().map(|v| v.round()).collect::<Vec<_>>());
    Ok(())
}
