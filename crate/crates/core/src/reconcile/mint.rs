use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;

/// Base-forecast error covariance used by MinT.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCovariance {
    pub w: DMatrix<f64>,
    /// Shrinkage intensity towards the diagonal.
    pub lambda: f64,
}

/// Rows of `errors` without missing values.
pub fn complete_rows(errors: &DMatrix<f64>) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..errors.nrows()).filter(|&r| errors.row(r).iter().all(|v| v.is_finite())).collect();
    DMatrix::from_fn(keep.len(), errors.ncols(), |r, c| errors[(keep[r], c)])
}

fn centered(errors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = errors.nrows();
    if n < 2 {
        return Err(Error::Data(format!("covariance needs at least 2 complete error rows, got {n}")));
    }
    let mut x = errors.clone();
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    Ok(x)
}

/// Sample covariance with divisor `n` of the centered errors.
pub fn sample_covariance(errors: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = centered(errors)?;
    Ok(x.transpose() * &x / x.nrows() as f64)
}

/// Shrinkage of the sample covariance towards its diagonal,
/// `W = lambda diag(S) + (1 - lambda) S`. With `lambda = None` the
/// intensity is the Schäfer–Strimmer estimate on standardized errors,
/// clipped to `[0, 1]`. Rows containing missing values are dropped first.
pub fn shrinkage_covariance(errors: &DMatrix<f64>, lambda: Option<f64>) -> Result<ErrorCovariance> {
    let e = complete_rows(errors);
    if e.nrows() < errors.nrows() {
        log::debug!("covariance: dropped {} incomplete error rows", errors.nrows() - e.nrows());
    }
    let x = centered(&e)?;
    let (n, m) = x.shape();
    let s = x.transpose() * &x / n as f64;
    let lambda = match lambda {
        Some(l) if (0.0..=1.0).contains(&l) => l,
        Some(l) => return Err(Error::Config(format!("shrinkage intensity must lie in [0, 1], got {l}"))),
        None => {
            let sd: Vec<f64> = (0..m).map(|i| s[(i, i)].sqrt()).collect();
            let z = DMatrix::from_fn(n, m, |r, c| if sd[c] > 0.0 { x[(r, c)] / sd[c] } else { 0.0 });
            let mut num = 0.0;
            let mut den = 0.0;
            let nf = n as f64;
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let w: Vec<f64> = (0..n).map(|t| z[(t, i)] * z[(t, j)]).collect();
                    let wbar = w.iter().sum::<f64>() / nf;
                    let var = nf / (nf - 1.0).powi(3) * w.iter().map(|v| (v - wbar).powi(2)).sum::<f64>();
                    num += var;
                    den += (wbar * nf / (nf - 1.0)).powi(2);
                }
            }
            if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 1.0 }
        }
    };
    let mut w = s.clone() * (1.0 - lambda);
    for i in 0..m {
        w[(i, i)] = s[(i, i)];
    }
    Ok(ErrorCovariance { w: ensure_positive_definite(w)?, lambda })
}

/// Adds growing diagonal jitter, starting at `1e-8` times the mean
/// variance, until a Cholesky factorization succeeds.
fn ensure_positive_definite(mut w: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("covariance has non-finite entries".into()));
    }
    let m = w.nrows();
    let mean_diag = (0..m).map(|i| w[(i, i)]).sum::<f64>() / m.max(1) as f64;
    let mut jitter = 1e-8 * if mean_diag > 0.0 { mean_diag } else { 1.0 };
    for _ in 0..12 {
        if w.clone().cholesky().is_some() {
            return Ok(w);
        }
        for i in 0..m {
            w[(i, i)] += jitter;
        }
        jitter *= 10.0;
    }
    Err(Error::Numeric("covariance is not positive definite after jitter".into()))
}

/// MinT: `S (S' W^-1 S)^-1 S' W^-1 y` applied to every row of `base`
/// (`H x M`), with Cholesky solves throughout.
pub fn mint_reconcile(h: &Hierarchy, base: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = h.summing_matrix().matrix();
    let m = h.len();
    if base.ncols() != m || w.shape() != (m, m) {
        return Err(Error::shape(
            format!("{m} base columns and a {m}x{m} covariance"),
            format!("{} columns, {}x{}", base.ncols(), w.nrows(), w.ncols()),
        ));
    }
    let chol_w = w.clone().cholesky().ok_or_else(|| Error::Numeric("MinT covariance is not positive definite".into()))?;
    let winv_s = chol_w.solve(s);
    let a = s.transpose() * &winv_s;
    let chol_a = a.cholesky().ok_or_else(|| Error::Numeric("S' W^-1 S is singular".into()))?;
    // P = (S' W^-1 S)^-1 (W^-1 S)'
    let p = chol_a.solve(&winv_s.transpose());
    let bottom = base * p.transpose();
    h.summing_matrix().aggregate(&bottom)
}
