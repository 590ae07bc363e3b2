//! File schema for operators and channels.
//!
//! Operator: `{"dim": d, "re": [[..]], "im": [[..]]}`, row-major. `im` may be
//! omitted for real matrices. Channel: `{"dim_in": a, "dim_out": b, "kraus":
//! [op, ..]}` where each Kraus entry has `dim_out` rows of `dim_in` entries
//! and its `dim` field records the row count.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CMatrix, DensityOperator, Error, HermitianOperator, QuantumChannel, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus: Vec<MatrixJson>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Self { dim: m.nrows(), re: rows(|z| z.re), im: rows(|z| z.im) }
    }

    /// Parses a `dim × cols` matrix; `cols` defaults to `dim`.
    pub fn to_matrix(&self, cols: Option<usize>) -> Result<CMatrix> {
        let cols = cols.unwrap_or(self.dim);
        if self.re.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: self.re.len() });
        }
        if !self.im.is_empty() && self.im.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: self.im.len() });
        }
        for row in self.re.iter().chain(self.im.iter()) {
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, actual: row.len() });
            }
        }
        Ok(CMatrix::from_fn(self.dim, cols, |i, j| {
            let im = if self.im.is_empty() { 0.0 } else { self.im[i][j] };
            Complex64::new(self.re[i][j], im)
        }))
    }

    pub fn to_hermitian(&self) -> Result<HermitianOperator> {
        HermitianOperator::new(self.to_matrix(None)?)
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        DensityOperator::new(self.to_hermitian()?)
    }
}

impl ChannelJson {
    pub fn from_channel(ch: &QuantumChannel) -> Self {
        Self { dim_in: ch.dim_in(), dim_out: ch.dim_out(), kraus: ch.kraus().iter().map(MatrixJson::from_matrix).collect() }
    }

    pub fn to_channel(&self) -> Result<QuantumChannel> {
        let kraus = self
            .kraus
            .iter()
            .map(|k| {
                if k.dim != self.dim_out {
                    return Err(Error::DimensionMismatch { expected: self.dim_out, actual: k.dim });
                }
                k.to_matrix(Some(self.dim_in))
            })
            .collect::<Result<Vec<_>>>()?;
        QuantumChannel::new(self.dim_in, self.dim_out, kraus)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_density(path: &Path) -> Result<DensityOperator> {
    read_json::<MatrixJson>(path)?.to_density()
}

pub fn read_channel(path: &Path) -> Result<QuantumChannel> {
    read_json::<ChannelJson>(path)?.to_channel()
}
