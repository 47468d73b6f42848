//! Error metrics, expanding-window cross-validation and the Friedman and
//! Nemenyi rank tests.

use htsnnd::evaluate::{expanding_window_cv, friedman_test, mase, nemenyi_test, smape, CvConfig, Metric};
use htsnnd::forecasters::{naive_forecast, seasonal_naive_forecast};
use nalgebra::DMatrix;

fn main() -> htsnnd::Result<()> {
    let y: Vec<f64> = (0..120).map(|t| 20.0 + [5.0, 1.0, 0.0, 2.0, 3.0, 9.0, 12.0][t % 7] + (t as f64 * 0.7).sin()).collect();
    let (train, test) = y.split_at(113);
    let naive = naive_forecast(train, 7)?;
    let snaive = seasonal_naive_forecast(train, 7, 7)?;
    println!("naive:          MASE {:.3}, SMAPE {:.2}", mase(test, &naive, train, 7)?, smape(test, &naive)?);
    println!("seasonal naive: MASE {:.3}, SMAPE {:.2}", mase(test, &snaive, train, 7)?, smape(test, &snaive)?);

    let cv = CvConfig::for_length(y.len(), 7, 7, 0.6)?;
    let metric = Metric::Mase { period: 7 };
    let a = expanding_window_cv(&y, None, &cv, metric, |t, _, _, h| naive_forecast(t, h))?;
    let b = expanding_window_cv(&y, None, &cv, metric, |t, _, _, h| seasonal_naive_forecast(t, 7, h))?;
    println!("cv over {} folds: naive {:.3}, seasonal naive {:.3}", a.fold_scores.len(), a.mean, b.mean);

    // errors of 4 methods on 12 series; the first two are clearly better
    let errors = DMatrix::from_fn(12, 4, |r, c| [0.5, 0.6, 1.0, 1.2][c] + 0.3 * ((r * 7 + c * 3) % 5) as f64);
    let fr = friedman_test(&errors)?;
    println!("Friedman statistic {:.2}, p = {:.4}, mean ranks {:.2?}", fr.statistic, fr.p_value, fr.mean_ranks);
    let ne = nemenyi_test(&errors, 0.05)?;
    println!("Nemenyi critical distance {:.3}", ne.critical_distance);
    for &m in &ne.order {
        println!("  method {m}: rank {:.2}, interval [{:.2}, {:.2}]", ne.mean_ranks[m], ne.intervals[m].0, ne.intervals[m].1);
    }
    println!("methods 0 and 3 indistinguishable: {}", ne.not_significantly_different(0, 3));
    Ok(())
}
