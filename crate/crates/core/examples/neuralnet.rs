//! Train a two-branch network on the coherence-penalized loss and round-trip
//! its weights through a file.

use htsnnd::neuralnet::{coherence_loss, load_weights, save_weights, train, Example, NetworkSpec, TrainConfig};

fn main() -> htsnnd::Result<()> {
    // two children sharing a parent 30/70, with a flag that flips the shares
    let examples: Vec<Example> = (0..300)
        .map(|t| {
            let parent = 100.0 + 20.0 * (t as f64 * 0.3).sin();
            let flag = if t % 5 == 0 { 1.0 } else { 0.0 };
            let share = if flag > 0.0 { 0.7 } else { 0.3 };
            Example {
                window: vec![parent * 0.98, parent * 1.01, parent],
                exog: vec![flag],
                target: vec![share * parent, (1.0 - share) * parent],
            }
        })
        .collect();
    let spec = NetworkSpec::layered(3, 1, 2, 1, 4, 3, 1, 8).with_window_skip(true);
    let cfg = TrainConfig { learning_rate: 0.01, max_epochs: 300, ..TrainConfig::default() };
    let trained = train(&spec, &examples, &cfg)?;
    println!(
        "{} parameters, {} epochs, best epoch {}, final train loss {:.4}",
        spec.n_params(),
        trained.history.len(),
        trained.best_epoch,
        trained.history[trained.best_epoch].train
    );

    let preds = trained.network.predict_many(&examples)?;
    let targets: Vec<Vec<f64>> = examples.iter().map(|e| e.target.clone()).collect();
    println!("loss on all examples: {:.4}", coherence_loss(&targets, &preds, cfg.alpha)?);
    for e in examples.iter().take(3) {
        let p = trained.network.predict(e)?;
        println!("parent {:.1} flag {} -> [{:.2}, {:.2}] sum {:.2}", e.window[2], e.exog[0], p[0], p[1], p[0] + p[1]);
    }

    let dir = tempfile_dir();
    let path = dir.join("net.bin");
    save_weights(&trained.network, &path)?;
    let back = load_weights(&path)?;
    assert_eq!(back.params(), trained.network.params());
    println!("weights saved to and restored from {}", path.display());
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("htsnnd-example");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
