//! Regressors, feature scaling and k-fold cross-validation.

mod head;
mod kfold;
mod scaler;
mod svr;

pub use head::{train_multitask_head, EvalRecord, HeadParams, MultiHeadModel};
pub use kfold::{kfold_split, FoldPlan};
pub use scaler::{apply_scaler, fit_scaler, StandardScaler};
pub use svr::{train_svr, SvrFit, SvrParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// `w.x + b`, optionally after z-scoring the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub scaler: Option<StandardScaler>,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.scaler {
            Some(s) => {
                let mut buf = vec![0.0; row.len()];
                s.transform_row(row, &mut buf);
                dot(&self.weights, &buf) + self.bias
            }
            None => dot(&self.weights, row) + self.bias,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::Argument(format!(
                "model expects {} features, got {}",
                self.weights.len(),
                x.cols()
            )));
        }
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }

    /// Weights and bias expressed on the unscaled inputs.
    pub fn effective_weights(&self) -> (Vec<f64>, f64) {
        match &self.scaler {
            None => (self.weights.clone(), self.bias),
            Some(s) => {
                let w: Vec<f64> = self.weights.iter().zip(&s.std).map(|(w, sd)| w / sd).collect();
                let b = self.bias - dot(&w, &s.mean);
                (w, b)
            }
        }
    }
}

/// A trainable model family used inside cross-validation. Targets and
/// predictions are `n x T` matrices.
pub trait Pipeline: Sync {
    fn name(&self) -> String;

    fn fit_predict(&self, x_train: &Matrix, y_train: &Matrix, x_test: &Matrix) -> Result<Matrix>;
}

/// One linear SVR per target column.
#[derive(Debug, Clone, Default)]
pub struct SvrPipeline {
    pub params: SvrParams,
}

impl SvrPipeline {
    pub fn fit(&self, x: &Matrix, y: &Matrix) -> Result<Vec<SvrFit>> {
        (0..y.cols())
            .map(|t| train_svr(x, &y.column(t), &self.params))
            .collect()
    }
}

impl Pipeline for SvrPipeline {
    fn name(&self) -> String {
        "svr".into()
    }

    fn fit_predict(&self, x_train: &Matrix, y_train: &Matrix, x_test: &Matrix) -> Result<Matrix> {
        let fits = self.fit(x_train, y_train)?;
        let mut out = Matrix::zeros(x_test.rows(), y_train.cols());
        for (t, fit) in fits.iter().enumerate() {
            for (i, p) in fit.model.predict(x_test)?.into_iter().enumerate() {
                out.set(i, t, p);
            }
        }
        Ok(out)
    }
}

/// A shared multi-task linear head over all target columns.
#[derive(Debug, Clone, Default)]
pub struct HeadPipeline {
    pub params: HeadParams,
}

impl Pipeline for HeadPipeline {
    fn name(&self) -> String {
        "head".into()
    }

    fn fit_predict(&self, x_train: &Matrix, y_train: &Matrix, x_test: &Matrix) -> Result<Matrix> {
        train_multitask_head(x_train, y_train, &self.params)?.predict(x_test)
    }
}

/// Out-of-fold predictions: row `i` comes from the model that did not see
/// sample `i`.
pub fn cross_val_predict(
    x: &Matrix,
    y: &Matrix,
    plan: &FoldPlan,
    pipeline: &dyn Pipeline,
) -> Result<Matrix> {
    if x.rows() != y.rows() || x.rows() != plan.n() {
        return Err(Error::Argument(format!(
            "cross-validation shape mismatch: {} inputs, {} targets, plan over {}",
            x.rows(),
            y.rows(),
            plan.n()
        )));
    }
    let folds: Vec<Result<(Vec<usize>, Matrix)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..plan.k)
            .map(|f| {
                scope.spawn(move || {
                    let train = plan.train_indices(f);
                    let test = plan.test_indices(f);
                    let pred = pipeline.fit_predict(
                        &x.select_rows(&train),
                        &y.select_rows(&train),
                        &x.select_rows(&test),
                    )?;
                    Ok((test, pred))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect()
    });
    let mut out = Matrix::zeros(x.rows(), y.cols());
    for fold in folds {
        let (test, pred) = fold?;
        for (r, &i) in test.iter().enumerate() {
            out.row_mut(i).copy_from_slice(pred.row(r));
        }
    }
    Ok(out)
}
