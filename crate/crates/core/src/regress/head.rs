//! Multi-task linear regression heads over a shared input representation,
//! trained by mini-batch gradient descent on the sum of per-task MSEs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scaler::{fit_scaler, StandardScaler};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Evaluate every this many optimizer steps.
    pub eval_every: usize,
    /// Stop after this many evaluations without a validation improvement.
    /// `None` trains for the full number of epochs.
    pub patience: Option<usize>,
    /// Fraction of rows held out for validation; 0 disables the split and
    /// the final parameters are returned.
    pub validation_fraction: f64,
    pub standardize: bool,
    pub seed: u64,
}

impl Default for HeadParams {
    fn default() -> Self {
        HeadParams {
            lr: 1e-3,
            batch: 32,
            epochs: 15,
            eval_every: 40,
            patience: Some(5),
            validation_fraction: 0.1,
            standardize: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiHeadModel {
    pub input_dim: usize,
    /// One weight vector per task.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub scaler: Option<StandardScaler>,
    pub log: Vec<EvalRecord>,
    /// Step whose parameters were kept.
    pub best_step: usize,
}

impl MultiHeadModel {
    pub fn tasks(&self) -> usize {
        self.biases.len()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim {
            return Err(Error::Argument(format!(
                "model expects {} inputs, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        let mut out = Matrix::zeros(x.rows(), self.tasks());
        let mut buf = vec![0.0; self.input_dim];
        for i in 0..x.rows() {
            let row = match &self.scaler {
                Some(s) => {
                    s.transform_row(x.row(i), &mut buf);
                    buf.as_slice()
                }
                None => x.row(i),
            };
            for t in 0..self.tasks() {
                out.set(i, t, dot(&self.weights[t], row) + self.biases[t]);
            }
        }
        Ok(out)
    }
}

struct Heads {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Heads {
    /// Sum over tasks of the mean squared error on `rows`.
    fn loss(&self, x: &Matrix, y: &Matrix, rows: &[usize]) -> f64 {
        let mut total = 0.0;
        for &i in rows {
            for t in 0..self.b.len() {
                let r = dot(&self.w[t], x.row(i)) + self.b[t] - y.get(i, t);
                total += r * r;
            }
        }
        total / rows.len() as f64
    }

    fn step(&mut self, x: &Matrix, y: &Matrix, batch: &[usize], lr: f64) {
        let scale = 2.0 / batch.len() as f64;
        let tasks = self.b.len();
        let mut gw = vec![vec![0.0; x.cols()]; tasks];
        let mut gb = vec![0.0; tasks];
        for &i in batch {
            let xi = x.row(i);
            for t in 0..tasks {
                let r = dot(&self.w[t], xi) + self.b[t] - y.get(i, t);
                gb[t] += r;
                for (g, v) in gw[t].iter_mut().zip(xi) {
                    *g += r * v;
                }
            }
        }
        for t in 0..tasks {
            for (w, g) in self.w[t].iter_mut().zip(&gw[t]) {
                *w -= lr * scale * g;
            }
            self.b[t] -= lr * scale * gb[t];
        }
    }
}

/// Trains one linear head per column of `y`.
///
/// Weights start at zero and each bias at its task's mean over the
/// training rows, so the first evaluation is the mean predictor. The log
/// always holds the evaluation at step 0; with a validation split the
/// parameters of the first evaluation that reached the lowest validation
/// loss are returned.
pub fn train_multitask_head(x: &Matrix, y: &Matrix, params: &HeadParams) -> Result<MultiHeadModel> {
    let n = x.rows();
    if n != y.rows() {
        return Err(Error::Argument(format!("{n} inputs but {} target rows", y.rows())));
    }
    if y.cols() == 0 {
        return Err(Error::Argument("at least one task is required".into()));
    }
    if n == 0 || x.cols() == 0 {
        return Err(Error::Argument("empty training matrix".into()));
    }
    if !x.all_finite() || !y.all_finite() {
        return Err(Error::Value("non-finite training data".into()));
    }
    if params.batch == 0 || params.eval_every == 0 || !(params.lr > 0.0) {
        return Err(Error::Argument(format!("invalid head parameters {params:?}")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let (train_rows, val_rows) = if params.validation_fraction > 0.0 {
        let n_val = (n as f64 * params.validation_fraction).floor() as usize;
        if n_val == 0 || n_val >= n {
            return Err(Error::Argument(format!(
                "validation fraction {} of {n} rows leaves an empty split",
                params.validation_fraction
            )));
        }
        order.shuffle(&mut rng);
        let val = order[..n_val].to_vec();
        let mut train = order[n_val..].to_vec();
        train.sort_unstable();
        (train, val)
    } else {
        (order, Vec::new())
    };

    let scaler = if params.standardize {
        Some(fit_scaler(&x.select_rows(&train_rows))?)
    } else {
        None
    };
    let xs = match &scaler {
        Some(s) => s.apply(x)?,
        None => x.clone(),
    };

    let tasks = y.cols();
    let mut heads = Heads {
        w: vec![vec![0.0; x.cols()]; tasks],
        b: (0..tasks)
            .map(|t| train_rows.iter().map(|&i| y.get(i, t)).sum::<f64>() / train_rows.len() as f64)
            .collect(),
    };
    let use_val = !val_rows.is_empty();
    let mut log = Vec::new();
    let evaluate = |heads: &Heads, step: usize, epoch: usize| EvalRecord {
        step,
        epoch,
        train_loss: heads.loss(&xs, y, &train_rows),
        val_loss: use_val.then(|| heads.loss(&xs, y, &val_rows)),
    };

    let first = evaluate(&heads, 0, 0);
    let mut best_loss = first.val_loss.unwrap_or(first.train_loss);
    let mut best = (heads.w.clone(), heads.b.clone(), 0usize);
    log.push(first);
    let mut stale = 0usize;
    let mut step = 0usize;
    let mut batch_order = train_rows.clone();

    'train: for epoch in 1..=params.epochs {
        batch_order.shuffle(&mut rng);
        for batch in batch_order.chunks(params.batch) {
            heads.step(&xs, y, batch, params.lr);
            step += 1;
            if step % params.eval_every == 0 {
                let rec = evaluate(&heads, step, epoch);
                if let Some(v) = rec.val_loss {
                    if v < best_loss {
                        best_loss = v;
                        best = (heads.w.clone(), heads.b.clone(), step);
                        stale = 0;
                    } else {
                        stale += 1;
                    }
                }
                log.push(rec);
                if use_val && params.patience.is_some_and(|p| stale >= p) {
                    break 'train;
                }
            }
        }
    }
    if log.last().map_or(true, |r| r.step != step) {
        let rec = evaluate(&heads, step, params.epochs);
        if let Some(v) = rec.val_loss {
            if v < best_loss {
                best = (heads.w.clone(), heads.b.clone(), step);
            }
        }
        log.push(rec);
    }

    let (weights, biases, best_step) = if use_val {
        best
    } else {
        (heads.w, heads.b, step)
    };
    Ok(MultiHeadModel {
        input_dim: x.cols(),
        weights,
        biases,
        scaler,
        log,
        best_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalx::r_squared;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn synthetic(n: usize, d: usize, tasks: usize, seed: u64) -> (Matrix, Matrix, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coef: Vec<Vec<f64>> = (0..tasks)
            .map(|_| (0..=d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            for c in &coef {
                ys.push(dot(&c[..d], &row) + c[d]);
            }
            xs.extend(row);
        }
        (
            Matrix::from_vec(n, d, xs).unwrap(),
            Matrix::from_vec(n, tasks, ys).unwrap(),
            coef,
        )
    }

    #[test]
    fn recovers_linear_tasks() {
        let (x, y, _) = synthetic(400, 5, 4, 1);
        let params = HeadParams {
            lr: 0.05,
            epochs: 60,
            ..HeadParams::default()
        };
        let model = train_multitask_head(&x, &y, &params).unwrap();
        let pred = model.predict(&x).unwrap();
        for t in 0..4 {
            assert!(r_squared(&y.column(t), &pred.column(t)).unwrap() >= 0.99);
        }
    }

    #[test]
    fn zero_epochs_returns_initial() {
        let (x, y, _) = synthetic(50, 3, 2, 2);
        let params = HeadParams {
            epochs: 0,
            validation_fraction: 0.0,
            ..HeadParams::default()
        };
        let model = train_multitask_head(&x, &y, &params).unwrap();
        assert_eq!(model.log.len(), 1);
        assert_eq!(model.log[0].step, 0);
        assert!(model.weights.iter().flatten().all(|&w| w == 0.0));
        for t in 0..2 {
            let col = y.column(t);
            assert_eq!(model.biases[t], col.iter().sum::<f64>() / col.len() as f64);
        }
    }

    #[test]
    fn too_few_rows_for_validation() {
        let (x, y, _) = synthetic(9, 2, 1, 3);
        assert!(matches!(
            train_multitask_head(&x, &y, &HeadParams::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn training_loss_non_increasing_with_small_lr() {
        let (x, y, _) = synthetic(300, 4, 2, 4);
        let params = HeadParams {
            lr: 1e-3,
            eval_every: 5,
            patience: None,
            ..HeadParams::default()
        };
        let model = train_multitask_head(&x, &y, &params).unwrap();
        for w in model.log.windows(2) {
            assert!(w[1].train_loss <= w[0].train_loss, "{:?}", w);
        }
    }

    #[test]
    fn early_stopping_keeps_first_best() {
        // Pure-noise targets: validation loss stops improving quickly.
        let (x, _, _) = synthetic(200, 8, 1, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let y = Matrix::column_vector(&noise);
        let params = HeadParams {
            lr: 0.1,
            eval_every: 2,
            epochs: 200,
            ..HeadParams::default()
        };
        let model = train_multitask_head(&x, &y, &params).unwrap();
        let vals: Vec<f64> = model.log.iter().map(|r| r.val_loss.unwrap()).collect();
        let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let first_best = model.log.iter().find(|r| r.val_loss == Some(best)).unwrap();
        assert_eq!(model.best_step, first_best.step);
        assert!(model.log.last().unwrap().epoch < 200);
    }

    #[test]
    fn predict_checks_dimension() {
        let (x, y, _) = synthetic(20, 3, 1, 6);
        let model = train_multitask_head(&x, &y, &HeadParams { epochs: 1, ..HeadParams::default() }).unwrap();
        assert!(model.predict(&Matrix::zeros(2, 4)).is_err());
    }
}
