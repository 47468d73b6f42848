//! Bottom-up, top-down (AHP, PHA, FP) and middle-out reconciliation of
//! incoherent base forecasts.

use htsnnd::reconcile::{bottom_up_from_base, middle_out, top_down, ProportionMethod};
use htsnnd::Hierarchy;
use nalgebra::DMatrix;

fn main() -> htsnnd::Result<()> {
    let h = Hierarchy::from_child_counts(&[vec![2], vec![2, 2]])?;
    let ids: Vec<&str> = (0..h.len()).map(|n| h.id(n)).collect();
    println!("nodes: {ids:?}");

    // three periods of history, coherent by construction
    let bottom = DMatrix::from_row_slice(3, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 2.0, 3.0, 5.0, 1.0, 3.0, 4.0, 4.0]);
    let history = h.summing_matrix().aggregate(&bottom)?;

    // base forecasts for two steps that do not add up
    let base = DMatrix::from_row_slice(2, 7, &[11.0, 4.0, 8.0, 1.5, 2.0, 3.5, 4.5, 12.0, 5.0, 6.0, 2.0, 2.0, 3.0, 4.0]);
    println!("base violation: {}", h.coherence_violation(&base)?);

    let show = |name: &str, m: &DMatrix<f64>| {
        let row: Vec<String> = m.row(0).iter().map(|v| format!("{v:.3}")).collect();
        println!("{name:>4}: step 1 = [{}], violation {:.1e}", row.join(", "), h.coherence_violation(m).unwrap());
    };
    show("BU", &bottom_up_from_base(&h, &base)?);
    show("AHP", &top_down(&h, &base, ProportionMethod::Ahp, Some(&history))?);
    show("PHA", &top_down(&h, &base, ProportionMethod::Pha, Some(&history))?);
    show("FP", &top_down(&h, &base, ProportionMethod::Fp, None)?);
    show("MO", &middle_out(&h, 1, &base, ProportionMethod::Ahp, Some(&history))?);
    Ok(())
}
