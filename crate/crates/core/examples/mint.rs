//! MinT reconciliation with a shrinkage estimate of the base-forecast error
//! covariance.

use htsnnd::reconcile::{mint_reconcile, shrinkage_covariance};
use htsnnd::rng::rng_from_seed;
use htsnnd::Hierarchy;
use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

fn main() -> htsnnd::Result<()> {
    let h = Hierarchy::from_child_counts(&[vec![3]])?;
    let mut rng = rng_from_seed(7);
    let noise = Normal::new(0.0, 1.0).unwrap();
    // in-sample one-step errors: the total is noisier than its children
    let errors = DMatrix::from_fn(60, h.len(), |_, c| noise.sample(&mut rng) * if c == 0 { 4.0 } else { 1.0 });
    let cov = shrinkage_covariance(&errors, None)?;
    println!("shrinkage intensity {:.3}", cov.lambda);

    let base = DMatrix::from_row_slice(1, 4, &[30.0, 9.0, 10.0, 8.0]);
    let rec = mint_reconcile(&h, &base, &cov.w)?;
    println!("base      {base:.3}");
    println!("MinT      {rec:.3}");
    println!("violation {:.1e}", h.coherence_violation(&rec)?);

    let identity = mint_reconcile(&h, &base, &DMatrix::identity(4, 4))?;
    println!("OLS (W=I) {identity:.3}");
    Ok(())
}
