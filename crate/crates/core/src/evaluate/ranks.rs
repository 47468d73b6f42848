//! Friedman test with the Nemenyi post-hoc critical difference.
//!
//! The Friedman statistic uses the classical chi-square approximation with
//! `k - 1` degrees of freedom. Critical values `q_alpha` for the Nemenyi
//! test are the studentized range quantiles for infinite degrees of
//! freedom divided by `sqrt(2)`, as tabulated by Demšar (2006, JMLR 7) for
//! `k <= 10` and extended to `k <= 20` from the same distribution.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const Q_05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];
const Q_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120,
    3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
];

/// Nemenyi critical value for `k` methods at significance `alpha`
/// (0.05 or 0.10).
pub fn q_alpha(k: usize, alpha: f64) -> Result<f64> {
    if !(2..=20).contains(&k) {
        return Err(Error::Config(format!(
            "Nemenyi table covers 2 to 20 methods, got {k}"
        )));
    }
    let table = if (alpha - 0.05).abs() < 1e-12 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-12 {
        &Q_10
    } else {
        return Err(Error::Config(format!(
            "Nemenyi significance must be 0.05 or 0.10, got {alpha}"
        )));
    };
    Ok(table[k - 2])
}

/// Ranks of one row, smallest value first; ties share their average rank.
pub fn average_ranks(row: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    let mut ranks = vec![0.0; row.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p_value: f64,
    pub mean_ranks: Vec<f64>,
    pub n_series: usize,
    pub n_methods: usize,
}

fn check_errors(errors: &DMatrix<f64>) -> Result<()> {
    if errors.ncols() < 2 {
        return Err(Error::Config(format!(
            "rank tests need at least 2 methods (k >= 2), got {}",
            errors.ncols()
        )));
    }
    if errors.nrows() < 2 {
        return Err(Error::Config(format!(
            "rank tests need at least 2 series (N >= 2), got {}",
            errors.nrows()
        )));
    }
    if errors.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("rank tests need finite errors".into()));
    }
    Ok(())
}

/// Mean rank of each column over the rows of an `N x k` error matrix.
pub fn mean_ranks(errors: &DMatrix<f64>) -> Vec<f64> {
    let (n, k) = errors.shape();
    let mut sums = vec![0.0; k];
    for r in 0..n {
        let row: Vec<f64> = errors.row(r).iter().copied().collect();
        for (s, rank) in sums.iter_mut().zip(average_ranks(&row)) {
            *s += rank;
        }
    }
    sums.into_iter().map(|s| s / n as f64).collect()
}

/// Friedman rank test over `N` series (rows) and `k` methods (columns).
pub fn friedman_test(errors: &DMatrix<f64>) -> Result<FriedmanResult> {
    check_errors(errors)?;
    let (n, k) = errors.shape();
    let ranks = mean_ranks(errors);
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = ranks.iter().map(|r| r * r).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0)).max(0.0);
    Ok(FriedmanResult {
        statistic,
        p_value: chi_square_sf(statistic, (k - 1) as f64),
        mean_ranks: ranks,
        n_series: n,
        n_methods: k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NemenyiResult {
    pub alpha: f64,
    pub q_alpha: f64,
    pub critical_distance: f64,
    pub mean_ranks: Vec<f64>,
    /// `[rank - CD/2, rank + CD/2]` per method.
    pub intervals: Vec<(f64, f64)>,
    /// Method indices sorted by ascending mean rank.
    pub order: Vec<usize>,
    /// Whether the Friedman test rejected at the same significance.
    pub friedman_rejected: bool,
}

impl NemenyiResult {
    /// Two methods are not significantly different iff their intervals
    /// overlap, i.e. their mean ranks differ by at most the critical distance.
    pub fn not_significantly_different(&self, a: usize, b: usize) -> bool {
        let (lo_a, hi_a) = self.intervals[a];
        let (lo_b, hi_b) = self.intervals[b];
        lo_a <= hi_b && lo_b <= hi_a
    }
}

/// Nemenyi post-hoc test. Computed regardless of the Friedman outcome, which
/// is reported in [`NemenyiResult::friedman_rejected`].
pub fn nemenyi_test(errors: &DMatrix<f64>, alpha: f64) -> Result<NemenyiResult> {
    let friedman = friedman_test(errors)?;
    let k = friedman.n_methods;
    let q = q_alpha(k, alpha)?;
    let cd = q * ((k * (k + 1)) as f64 / (6.0 * friedman.n_series as f64)).sqrt();
    let intervals = friedman
        .mean_ranks
        .iter()
        .map(|r| (r - cd / 2.0, r + cd / 2.0))
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| friedman.mean_ranks[a].total_cmp(&friedman.mean_ranks[b]).then(a.cmp(&b)));
    Ok(NemenyiResult {
        alpha,
        q_alpha: q,
        critical_distance: cd,
        mean_ranks: friedman.mean_ranks,
        intervals,
        order,
        friedman_rejected: friedman.p_value < alpha,
    })
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(dof / 2.0, x / 2.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = COEF[1..]
        .iter()
        .enumerate()
        .fold(COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Upper regularized incomplete gamma `Q(a, x)`: power series for
/// `x < a + 1`, Lentz continued fraction otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-15;
    const MAX_ITER: usize = 10_000;
    if x <= 0.0 {
        return 1.0;
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        (1.0 - sum * log_prefactor.exp()).clamp(0.0, 1.0)
    } else {
        let tiny = f64::MIN_POSITIVE / EPS;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        (log_prefactor.exp() * h).clamp(0.0, 1.0)
    }
}
