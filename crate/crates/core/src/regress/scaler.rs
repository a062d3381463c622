use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Column-wise z-scoring with population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fits on the given rows. Constant columns get std 1.
pub fn fit_scaler(x: &Matrix) -> Result<StandardScaler> {
    if x.rows() == 0 || x.cols() == 0 {
        return Err(Error::Argument("cannot fit a scaler on an empty matrix".into()));
    }
    let n = x.rows() as f64;
    let mut mean = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(StandardScaler { mean, std })
}

impl StandardScaler {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.std) {
            *o = (v - m) / s;
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::Argument(format!(
                "scaler fitted on {} columns, got {}",
                self.dim(),
                x.cols()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            self.transform_row(x.row(i), out.row_mut(i));
        }
        Ok(out)
    }
}

pub fn apply_scaler(scaler: &StandardScaler, x: &Matrix) -> Result<Matrix> {
    scaler.apply(x)
}
