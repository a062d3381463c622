//! Linear epsilon-insensitive support vector regression trained by dual
//! coordinate descent.
//!
//! The solver works on the dual of
//!
//! ```text
//! min_w  C * sum_i max(0, |y_i - w.x_i| - eps) + 0.5 * |w|^2
//! ```
//!
//! where each `x_i` is augmented with a constant 1 so the last weight acts
//! as the intercept. Targets and inputs are centred on their training
//! means first and the means are folded back into the intercept, so only
//! the offset from the mean is regularized. Each coordinate step minimizes the dual exactly
//! along one variable, which keeps the dual objective non-increasing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scaler::fit_scaler;
use super::LinearModel;
use crate::error::{Error, Result};
use crate::matrix::{dot, mean, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
    /// Maximum number of passes over the data.
    pub max_iter: usize,
    /// Seeds the per-epoch coordinate order.
    pub seed: u64,
    /// z-standardize features on the training rows before solving.
    pub standardize: bool,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: 1.0,
            epsilon: 0.1,
            tol: 1e-4,
            max_iter: 10_000,
            seed: 0,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrFit {
    pub model: LinearModel,
    pub epochs: usize,
    /// False when `max_iter` passes ran out before the dual violation fell
    /// below `tol`.
    pub converged: bool,
    /// Dual objective before the first pass and after every pass.
    pub dual_objective: Vec<f64>,
    /// Primal objective (on centred targets, intercept included in the
    /// norm) after every pass.
    pub primal_objective: Vec<f64>,
}

pub fn train_svr(x: &Matrix, y: &[f64], params: &SvrParams) -> Result<SvrFit> {
    let n = x.rows();
    if n != y.len() {
        return Err(Error::Argument(format!(
            "{n} rows but {} targets",
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::Argument("SVR needs at least two samples".into()));
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Value("non-finite SVR input".into()));
    }
    if !(params.c > 0.0) || !(params.epsilon >= 0.0) || !(params.tol > 0.0) {
        return Err(Error::Argument(format!("invalid SVR parameters {params:?}")));
    }

    let scaler = if params.standardize {
        Some(fit_scaler(x)?)
    } else {
        None
    };
    let d = x.cols();
    // Unscaled inputs are still centred so the penalised intercept only
    // has to absorb a small offset.
    let centre: Vec<f64> = match &scaler {
        Some(_) => vec![0.0; d],
        None => (0..d).map(|j| mean(&x.column(j))).collect(),
    };
    // Augmented design: features (scaled) followed by a constant 1.
    let mut xa = Matrix::zeros(n, d + 1);
    for i in 0..n {
        let row = xa.row_mut(i);
        match &scaler {
            Some(s) => s.transform_row(x.row(i), &mut row[..d]),
            None => {
                for (r, (v, c)) in row[..d].iter_mut().zip(x.row(i).iter().zip(&centre)) {
                    *r = v - c;
                }
            }
        }
        row[d] = 1.0;
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let q_diag: Vec<f64> = xa.iter_rows().map(|r| dot(r, r)).collect();
    let upper = params.c;
    let eps = params.epsilon;
    let mut beta = vec![0.0; n];
    let mut w = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut dual = vec![dual_objective(&w, &beta, &yc, eps)];
    let mut primal = Vec::new();
    let mut converged = false;
    let mut epochs = 0;

    while epochs < params.max_iter {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut max_violation: f64 = 0.0;
        for &i in &order {
            let xi = xa.row(i);
            let g = dot(&w, xi) - yc[i];
            let gp = g + eps;
            let gn = g - eps;
            let b = beta[i];
            let violation = if b == 0.0 {
                if gp < 0.0 {
                    -gp
                } else if gn > 0.0 {
                    gn
                } else {
                    0.0
                }
            } else if b >= upper {
                gp.max(0.0)
            } else if b <= -upper {
                (-gn).max(0.0)
            } else if b > 0.0 {
                gp.abs()
            } else {
                gn.abs()
            };
            max_violation = max_violation.max(violation);

            let h = q_diag[i];
            let mut z = if gp < h * b {
                -gp / h
            } else if gn > h * b {
                -gn / h
            } else {
                -b
            };
            z = (b + z).clamp(-upper, upper) - b;
            if z.abs() < 1e-15 {
                continue;
            }
            beta[i] = b + z;
            for (wj, xj) in w.iter_mut().zip(xi) {
                *wj += z * xj;
            }
        }
        dual.push(dual_objective(&w, &beta, &yc, eps));
        primal.push(primal_objective(&w, &xa, &yc, params.c, eps));
        if max_violation < params.tol {
            converged = true;
            break;
        }
    }

    let intercept = w[d];
    w.truncate(d);
    let bias = intercept + y_mean - dot(&w, &centre);
    Ok(SvrFit {
        model: LinearModel {
            weights: w,
            bias,
            scaler,
        },
        epochs,
        converged,
        dual_objective: dual,
        primal_objective: primal,
    })
}

fn dual_objective(w: &[f64], beta: &[f64], y: &[f64], eps: f64) -> f64 {
    0.5 * dot(w, w) - dot(beta, y) + eps * beta.iter().map(|b| b.abs()).sum::<f64>()
}

fn primal_objective(w: &[f64], xa: &Matrix, y: &[f64], c: f64, eps: f64) -> f64 {
    let loss: f64 = xa
        .iter_rows()
        .zip(y)
        .map(|(r, t)| ((t - dot(w, r)).abs() - eps).max(0.0))
        .sum();
    c * loss + 0.5 * dot(w, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalx::r_squared;

    fn line(n: usize) -> (Matrix, Vec<f64>) {
        let xs: Vec<f64> = (1..=n).map(|v| v as f64).collect();
        let y = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        (Matrix::column_vector(&xs), y)
    }

    #[test]
    fn recovers_line_raw_and_standardized() {
        let (x, y) = line(20);
        for standardize in [false, true] {
            let params = SvrParams {
                standardize,
                ..SvrParams::default()
            };
            let fit = train_svr(&x, &y, &params).unwrap();
            assert!(fit.converged);
            let (w, _) = fit.model.effective_weights();
            assert!((1.9..=2.1).contains(&w[0]), "slope {} (standardize={standardize})", w[0]);
            let pred = fit.model.predict(&x).unwrap();
            assert!(r_squared(&y, &pred).unwrap() >= 0.99);
        }
    }

    #[test]
    fn constant_target() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, -1.0], [3.0, 0.5], [4.0, 2.0]]).unwrap();
        let y = [7.5; 4];
        let fit = train_svr(&x, &y, &SvrParams::default()).unwrap();
        assert!(fit.model.weights.iter().all(|w| w.abs() < 1e-9));
        for p in fit.model.predict(&x).unwrap() {
            assert!((p - 7.5).abs() <= 0.1);
        }
    }

    #[test]
    fn dual_objective_never_increases() {
        let x = Matrix::from_rows(
            &(0..60)
                .map(|i| {
                    let a = (i as f64 * 0.37).sin();
                    let b = (i as f64 * 1.3).cos();
                    [a, b, a * b]
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let y: Vec<f64> = (0..60)
            .map(|i| 3.0 * x.get(i, 0) - x.get(i, 1) + 0.3 * ((i * 7 % 11) as f64 - 5.0))
            .collect();
        let fit = train_svr(&x, &y, &SvrParams::default()).unwrap();
        for pair in fit.dual_objective.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn duplicating_rows_keeps_solution() {
        // Inside the tube every dual variable stays below C, so each copy
        // carries half of the original weight and w is unchanged.
        let (x, y) = line(20);
        let params = SvrParams {
            standardize: false,
            tol: 1e-8,
            ..SvrParams::default()
        };
        let single = train_svr(&x, &y, &params).unwrap();
        let doubled_rows: Vec<Vec<f64>> = (0..40).map(|i| x.row(i % 20).to_vec()).collect();
        let doubled_y: Vec<f64> = (0..40).map(|i| y[i % 20]).collect();
        let double = train_svr(&Matrix::from_rows(&doubled_rows).unwrap(), &doubled_y, &params).unwrap();
        assert!((single.model.weights[0] - double.model.weights[0]).abs() < 1e-4);
        assert!((single.model.bias - double.model.bias).abs() < 1e-4);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let (x, y) = line(20);
        let params = SvrParams {
            max_iter: 1,
            tol: 1e-12,
            ..SvrParams::default()
        };
        let fit = train_svr(&x, &y, &params).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.epochs, 1);
    }

    #[test]
    fn rejects_bad_input() {
        let (x, mut y) = line(5);
        y[2] = f64::NAN;
        assert!(matches!(train_svr(&x, &y, &SvrParams::default()), Err(Error::Value(_))));
        assert!(train_svr(&x, &y[..3], &SvrParams::default()).is_err());
    }
}
