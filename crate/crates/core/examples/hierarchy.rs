//! Build a hierarchy, inspect its summing matrix and measure coherence.

use htsnnd::{Hierarchy, NodeSpec};
use nalgebra::DMatrix;

fn main() -> htsnnd::Result<()> {
    let h = Hierarchy::new(vec![
        NodeSpec::new("total", None, 0),
        NodeSpec::new("north", Some("total"), 1),
        NodeSpec::new("south", Some("total"), 1),
        NodeSpec::new("n1", Some("north"), 2),
        NodeSpec::new("n2", Some("north"), 2),
        NodeSpec::new("s1", Some("south"), 2),
    ])?;
    println!("levels {:?}, {} series, {} bottom", h.level_sizes(), h.len(), h.n_bottom());
    println!("S ({} x {}):{}", h.len(), h.n_bottom(), h.summing_matrix().matrix());

    let bottom = DMatrix::from_row_slice(2, 3, &[4.0, 5.0, 1.0, 2.0, 2.0, 3.0]);
    let all = h.summing_matrix().aggregate(&bottom)?;
    println!("aggregated:{all}");
    println!("violation of aggregated values: {}", h.coherence_violation(&all)?);

    let mut off = all.clone();
    off[(0, 0)] += 0.5;
    println!("violation after nudging the total: {}", h.coherence_violation(&off)?);
    Ok(())
}
