//! Generate a synthetic hierarchy with promotion-driven shares and write it
//! as CSV files.

use htsnnd::synthetic::{generate, GeneratorSpec, ShareRegime};

fn main() -> htsnnd::Result<()> {
    let spec = GeneratorSpec {
        shape: vec![vec![2], vec![3, 2]],
        length: 400,
        regime: ShareRegime::Switching,
        starting_window: 60,
        seed: 11,
        ..GeneratorSpec::default()
    };
    let d = generate(&spec)?;
    let h = &d.hierarchy;
    println!("{} series over {} days, levels {:?}", h.len(), d.panel.len(), h.level_sizes());
    for node in 0..h.len() {
        let s = d.panel.series(node);
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let promos = d.panel.exog(node).width();
        println!("{:>10}  mean {mean:8.1}  regressors {promos}", h.id(node));
    }
    for (parent, shares) in &d.truth.base_shares {
        println!("base shares below {parent}: {shares:.3?}");
    }
    println!("violation {:.1e}, content hash {}", h.coherence_violation(d.panel.values())?, d.truth.panel_hash);

    let out = std::env::temp_dir().join("htsnnd-synth");
    htsnnd::io::write_triplet(&out, h, &d.panel)?;
    println!("written to {}", out.display());
    Ok(())
}
