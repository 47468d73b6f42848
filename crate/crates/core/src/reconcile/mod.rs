//! Coherent baselines: bottom-up, top-down with historical or forecast
//! proportions, middle-out, and MinT with a shrinkage covariance.

mod mint;
mod topdown;

pub use mint::{complete_rows, mint_reconcile, sample_covariance, shrinkage_covariance, ErrorCovariance};
pub use topdown::{
    ahp_below, apply_topdown, bottom_up, bottom_up_from_base, fp_below, middle_out, pha_below, proportions_ahp,
    proportions_fp, proportions_pha, top_down, ProportionMethod, ProportionVector,
};
