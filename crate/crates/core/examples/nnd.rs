//! Train disaggregation networks on a synthetic hierarchy and split a
//! forecast of the total into coherent bottom-level forecasts.

use std::collections::BTreeMap;

use htsnnd::neuralnet::TrainConfig;
use htsnnd::nnd::{fit_nnd, ArchitectureConfig, NndConfig, NndStrategy, WindowConfig};
use htsnnd::synthetic::{generate, GeneratorSpec};

fn main() -> htsnnd::Result<()> {
    let d = generate(&GeneratorSpec { shape: vec![vec![2], vec![2, 3]], length: 500, starting_window: 60, seed: 5, ..GeneratorSpec::default() })?;
    let h = &d.hierarchy;
    let origin = 486;
    let steps = 14;
    let train = d.panel.slice(0..origin)?;

    let cfg = NndConfig {
        window: WindowConfig { w: 14, hop: 1 },
        architecture: ArchitectureConfig { conv_layers: 0, filters: 8, kernel: 3, dense_layers: 1, hidden: 32, window_skip: true },
        train: TrainConfig { max_epochs: 200, ..TrainConfig::default() },
        use_calendar: false,
        seed: 1,
        ..NndConfig::default()
    };
    let actual = |node: usize| d.panel.series(node)[origin..origin + steps].to_vec();
    let mae = |f: &[f64], a: &[f64]| f.iter().zip(a).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;

    for (name, strategy) in [("standard", NndStrategy::Standard), ("iterative", NndStrategy::Iterative)] {
        let models = fit_nnd(h, &train, strategy, &cfg)?;
        // the true total stands in for a forecast of it
        let start: BTreeMap<usize, Vec<f64>> = [(h.root(), actual(h.root()))].into();
        let f = models.forecast(h, &d.panel, origin, &start)?;
        println!("{name}: {} models, violation {:.1e}", models.models.len(), h.coherence_violation(&f.published)?);
        for (parent, gap) in &f.raw_gaps {
            println!("  raw gap below {parent}: {gap:.2e}");
        }
        for node in h.bottom_range() {
            let j = node - h.bottom_range().start;
            let fc: Vec<f64> = f.bottom.column(j).iter().copied().collect();
            println!("  {:>10}: MAE {:.2} (mean level {:.1})", h.id(node), mae(&fc, &actual(node)), actual(node).iter().sum::<f64>() / steps as f64);
        }
    }
    Ok(())
}
