//! Least-squares autoregression with exogenous regressors.
//!
//! `z_t = c + sum_j gamma_j w_{t,j} + sum_i phi_i z_{t-i}`, where `z` is the
//! series (or its first difference) and `w` the regressors (differenced
//! alongside). Regressor columns that are constant over the training window
//! are dropped before fitting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lag-1 autocorrelation above which the series is differenced once.
pub const UNIT_ROOT_AUTOCORR: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArxModel {
    pub order: usize,
    pub differenced: bool,
    pub intercept: f64,
    /// `phi_1..phi_p`.
    pub ar: Vec<f64>,
    /// Indices of the input regressor columns used by the model.
    pub exog_cols: Vec<usize>,
    pub exog_coef: Vec<f64>,
    /// Number of regressor columns the model was fitted with.
    pub exog_width: usize,
}

fn difference(y: &[f64]) -> Vec<f64> {
    y.windows(2).map(|w| w[1] - w[0]).collect()
}

fn difference_rows(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows().saturating_sub(1), x.ncols(), |r, c| x[(r + 1, c)] - x[(r, c)])
}

pub fn lag1_autocorrelation(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 3 {
        return 0.0;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let var: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    let cov: f64 = y.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    cov / var
}

fn varying_columns(w: &DMatrix<f64>) -> Vec<usize> {
    (0..w.ncols())
        .filter(|&c| {
            let col = w.column(c);
            col.iter().any(|v| *v != col[0])
        })
        .collect()
}

/// Design with columns `[1, w_used..., z_{t-1}, ..., z_{t-max_lag}]` over
/// rows `t = start..z.len()`.
fn design(z: &[f64], w: Option<&DMatrix<f64>>, cols: &[usize], max_lag: usize, start: usize) -> DMatrix<f64> {
    let rows = z.len() - start;
    let k = 1 + cols.len() + max_lag;
    DMatrix::from_fn(rows, k, |r, c| {
        let t = start + r;
        if c == 0 {
            1.0
        } else if c <= cols.len() {
            w.expect("regressors")[(t, cols[c - 1])]
        } else {
            z[t - (c - cols.len())]
        }
    })
}

struct NestedFits {
    r: DMatrix<f64>,
    qty: DVector<f64>,
    yty: f64,
    col_norms: Vec<f64>,
}

impl NestedFits {
    fn new(a: DMatrix<f64>, target: &DVector<f64>) -> Self {
        let col_norms = (0..a.ncols()).map(|c| a.column(c).norm()).collect();
        let qr = a.qr();
        let qty = qr.q().transpose() * target;
        Self {
            r: qr.r(),
            qty,
            yty: target.dot(target),
            col_norms,
        }
    }

    /// Whether the first `j` columns have full column rank.
    fn full_rank(&self, j: usize) -> bool {
        (0..j).all(|i| self.r[(i, i)].abs() > 1e-9 * self.col_norms[i].max(f64::MIN_POSITIVE))
    }

    /// Residual sum of squares of the regression on the first `j` columns.
    fn sse(&self, j: usize) -> f64 {
        (self.yty - self.qty.rows(0, j).norm_squared()).max(0.0)
    }

    fn coefficients(&self, j: usize) -> Option<DVector<f64>> {
        let r = self.r.view((0, 0), (j, j));
        r.solve_upper_triangular(&self.qty.rows(0, j).into_owned())
    }
}

struct Prepared {
    z: Vec<f64>,
    w: Option<DMatrix<f64>>,
    cols: Vec<usize>,
    width: usize,
}

fn prepare(y: &[f64], x: Option<&DMatrix<f64>>, differenced: bool) -> Result<Prepared> {
    if let Some(x) = x {
        if x.nrows() != y.len() {
            return Err(Error::shape(format!("{} regressor rows", y.len()), x.nrows()));
        }
    }
    let (z, w) = if differenced {
        (difference(y), x.map(difference_rows))
    } else {
        (y.to_vec(), x.cloned())
    };
    let cols = w.as_ref().map(varying_columns).unwrap_or_default();
    Ok(Prepared {
        z,
        w,
        cols,
        width: x.map_or(0, |x| x.ncols()),
    })
}

fn constant_model(p: &Prepared, differenced: bool) -> ArxModel {
    ArxModel {
        order: 0,
        differenced,
        intercept: p.z.first().copied().unwrap_or(0.0),
        ar: Vec::new(),
        exog_cols: Vec::new(),
        exog_coef: Vec::new(),
        exog_width: p.width,
    }
}

fn model_from(p: &Prepared, order: usize, differenced: bool, coef: &DVector<f64>) -> ArxModel {
    let k = p.cols.len();
    ArxModel {
        order,
        differenced,
        intercept: coef[0],
        exog_cols: p.cols.clone(),
        exog_coef: coef.rows(1, k).iter().copied().collect(),
        ar: coef.rows(1 + k, order).iter().copied().collect(),
        exog_width: p.width,
    }
}

/// Fits an ARX model with a fixed lag order.
pub fn fit_arx(y: &[f64], x: Option<&DMatrix<f64>>, order: usize, differenced: bool) -> Result<ArxModel> {
    let p = prepare(y, x, differenced)?;
    if p.z.iter().all(|v| *v == p.z[0]) && !p.z.is_empty() {
        return Ok(constant_model(&p, differenced));
    }
    let k = 1 + p.cols.len() + order;
    if p.z.len() <= order + k {
        return Err(Error::Fit(format!(
            "ARX({order}) with {} regressors needs more than {} observations, got {}",
            p.cols.len(),
            order + k,
            y.len()
        )));
    }
    let a = design(&p.z, p.w.as_ref(), &p.cols, order, order);
    let target = DVector::from_column_slice(&p.z[order..]);
    let fits = NestedFits::new(a, &target);
    if !fits.full_rank(k) {
        return Err(Error::Fit("rank-deficient ARX design matrix".into()));
    }
    let coef = fits
        .coefficients(k)
        .ok_or_else(|| Error::Fit("singular ARX triangular factor".into()))?;
    Ok(model_from(&p, order, differenced, &coef))
}

/// Fits ARX with the lag order minimizing AIC over `1..=max_order`, after
/// differencing once when the lag-1 autocorrelation exceeds
/// [`UNIT_ROOT_AUTOCORR`]. All orders are compared on a common sample and
/// come from one QR factorization of the widest design.
pub fn fit_arx_auto(y: &[f64], x: Option<&DMatrix<f64>>, max_order: usize) -> Result<ArxModel> {
    let differenced = lag1_autocorrelation(y) > UNIT_ROOT_AUTOCORR;
    let p = prepare(y, x, differenced)?;
    if !p.z.is_empty() && p.z.iter().all(|v| *v == p.z[0]) {
        return Ok(constant_model(&p, differenced));
    }
    let base = 1 + p.cols.len();
    // Largest order leaving more rows than columns on the common sample.
    let mut max_lag = max_order.max(1);
    while max_lag > 1 && p.z.len() <= 2 * max_lag + base {
        max_lag -= 1;
    }
    if p.z.len() <= 2 * max_lag + base {
        return Err(Error::Fit(format!("series of length {} too short for ARX", y.len())));
    }
    let a = design(&p.z, p.w.as_ref(), &p.cols, max_lag, max_lag);
    let target = DVector::from_column_slice(&p.z[max_lag..]);
    let fits = NestedFits::new(a, &target);
    let n = target.len() as f64;
    let mut best: Option<(f64, usize)> = None;
    for order in 1..=max_lag {
        let k = base + order;
        if !fits.full_rank(k) {
            continue;
        }
        let aic = n * (fits.sse(k) / n).max(1e-300).ln() + 2.0 * k as f64;
        if best.is_none_or(|(b, _)| aic < b) {
            best = Some((aic, order));
        }
    }
    let (_, order) = best.ok_or_else(|| Error::Fit("rank-deficient ARX design matrix".into()))?;
    fit_arx(y, x, order, differenced)
}

impl ArxModel {
    pub fn uses_exog(&self) -> bool {
        !self.exog_cols.is_empty()
    }

    fn exog_term(&self, row: impl Fn(usize) -> f64) -> f64 {
        self.exog_cols
            .iter()
            .zip(&self.exog_coef)
            .map(|(&c, b)| b * row(c))
            .sum()
    }

    /// Recursive `h`-step forecast after `history`. `hist_x` and `future_x`
    /// are required when the model uses regressors (`hist_x` only its last
    /// row, for differencing).
    pub fn forecast(
        &self,
        history: &[f64],
        hist_x: Option<&DMatrix<f64>>,
        future_x: Option<&DMatrix<f64>>,
        h: usize,
    ) -> Result<Vec<f64>> {
        let need = self.order + self.differenced as usize;
        if history.len() < need.max(1) {
            return Err(Error::Fit(format!(
                "ARX forecast needs {need} past observations, got {}",
                history.len()
            )));
        }
        if self.uses_exog() {
            let fx = future_x.ok_or_else(|| Error::Fit("ARX forecast needs future regressors".into()))?;
            if fx.nrows() < h || fx.ncols() != self.exog_width {
                return Err(Error::shape(format!("{h} x {} future regressors", self.exog_width), format!("{} x {}", fx.nrows(), fx.ncols())));
            }
            if self.differenced && hist_x.is_none_or(|hx| hx.nrows() == 0) {
                return Err(Error::Fit("differenced ARX forecast needs past regressors".into()));
            }
        }
        let mut z: Vec<f64> = if self.differenced { difference(history) } else { history.to_vec() };
        let mut level = *history.last().unwrap();
        let mut out = Vec::with_capacity(h);
        for i in 0..h {
            let exog = if self.uses_exog() {
                let fx = future_x.unwrap();
                if self.differenced {
                    let prev = |c: usize| {
                        if i == 0 {
                            let hx = hist_x.unwrap();
                            hx[(hx.nrows() - 1, c)]
                        } else {
                            fx[(i - 1, c)]
                        }
                    };
                    self.exog_term(|c| fx[(i, c)] - prev(c))
                } else {
                    self.exog_term(|c| fx[(i, c)])
                }
            } else {
                0.0
            };
            let ar: f64 = self.ar.iter().enumerate().map(|(j, phi)| phi * z[z.len() - 1 - j]).sum();
            let next = self.intercept + exog + ar;
            z.push(next);
            if self.differenced {
                level += next;
                out.push(level);
            } else {
                out.push(next);
            }
        }
        Ok(out)
    }

    /// One-step in-sample predictions (`NaN` where lags are unavailable).
    pub fn fitted(&self, y: &[f64], x: Option<&DMatrix<f64>>) -> Vec<f64> {
        let d = self.differenced as usize;
        let mut out = vec![f64::NAN; y.len()];
        for (t, slot) in out.iter_mut().enumerate().skip(self.order + d) {
            let zlag = |j: usize| {
                let s = t - j;
                if self.differenced { y[s] - y[s - 1] } else { y[s] }
            };
            let exog = match x {
                Some(x) if self.uses_exog() => {
                    if self.differenced {
                        self.exog_term(|c| x[(t, c)] - x[(t - 1, c)])
                    } else {
                        self.exog_term(|c| x[(t, c)])
                    }
                }
                _ => 0.0,
            };
            let ar: f64 = self.ar.iter().enumerate().map(|(j, phi)| phi * zlag(j + 1)).sum();
            let pred = self.intercept + exog + ar;
            *slot = if self.differenced { y[t - 1] + pred } else { pred };
        }
        out
    }
}
