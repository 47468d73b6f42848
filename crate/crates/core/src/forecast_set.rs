use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;

/// Label of the procedure that produced a forecast set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Base,
    Bu,
    Ahp,
    Pha,
    Fp,
    Mo,
    Mint,
    Nnd1,
    Nnd2,
    NndMo,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Base,
        Method::Bu,
        Method::Ahp,
        Method::Pha,
        Method::Fp,
        Method::Mo,
        Method::Mint,
        Method::Nnd1,
        Method::Nnd2,
        Method::NndMo,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Base => "BASE",
            Method::Bu => "BU",
            Method::Ahp => "AHP",
            Method::Pha => "PHA",
            Method::Fp => "FP",
            Method::Mo => "MO",
            Method::Mint => "MINT",
            Method::Nnd1 => "NND1",
            Method::Nnd2 => "NND2",
            Method::NndMo => "NNDMO",
        }
    }

    /// Base forecasts are the only sets allowed to be incoherent.
    pub fn is_coherent(&self) -> bool {
        *self != Method::Base
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Method::ALL
            .into_iter()
            .find(|m| m.label() == upper)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Forecasts of every node over a horizon, `H x M` in canonical node order.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub method: Method,
    pub timestamps: Vec<NaiveDateTime>,
    pub values: DMatrix<f64>,
}

impl ForecastSet {
    pub fn new(method: Method, timestamps: Vec<NaiveDateTime>, values: DMatrix<f64>) -> Result<Self> {
        if timestamps.len() != values.nrows() {
            return Err(Error::shape(
                format!("{} forecast rows", timestamps.len()),
                values.nrows(),
            ));
        }
        Ok(Self {
            method,
            timestamps,
            values,
        })
    }

    pub fn horizon(&self) -> usize {
        self.values.nrows()
    }

    /// Forecasts of one node over the horizon.
    pub fn node(&self, node: usize) -> Vec<f64> {
        self.values.column(node).iter().copied().collect()
    }

    /// Errors if a set labelled coherent violates the aggregation
    /// constraints by more than `tol`.
    pub fn check_coherent(&self, h: &Hierarchy, tol: f64) -> Result<f64> {
        let v = h.coherence_violation(&self.values)?;
        if self.method.is_coherent() && !(v <= tol) {
            return Err(Error::Numeric(format!(
                "{} forecasts violate coherence by {v:e} (tolerance {tol:e})",
                self.method
            )));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert_eq!("mint".parse::<Method>().unwrap(), Method::Mint);
        assert!("xyz".parse::<Method>().is_err());
    }
}
