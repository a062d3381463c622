use gazeprobe_core::regress::{train_multitask_head, HeadParams};
use gazeprobe_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Least squares with intercept via the normal equations, solved by
/// Gaussian elimination with partial pivoting.
fn ols(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let d = x.cols() + 1;
    let mut a = vec![vec![0.0; d + 1]; d];
    for (i, row) in x.iter_rows().enumerate() {
        let z: Vec<f64> = row.iter().copied().chain([1.0]).collect();
        for r in 0..d {
            for c in 0..d {
                a[r][c] += z[r] * z[c];
            }
            a[r][d] += z[r] * y[i];
        }
    }
    for col in 0..d {
        let piv = (col..d)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..d {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=d {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..d).map(|r| a[r][d] / a[r][r]).collect()
}

#[test]
fn single_head_matches_ols() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 400;
    let rows: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(0.0..10.0), rng.random_range(-1.0..1.0)])
        .collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| 1.5 * r[0] - 0.3 * r[1] + 2.0 * r[2] + 4.0 + rng.random_range(-0.5..0.5))
        .collect();

    let beta = ols(&x, &y);
    let params = HeadParams {
        lr: 0.2,
        batch: n,
        epochs: 2000,
        patience: None,
        validation_fraction: 0.0,
        ..HeadParams::default()
    };
    let model = train_multitask_head(&x, &Matrix::column_vector(&y), &params).unwrap();
    let pred = model.predict(&x).unwrap();
    let mse: f64 = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let o = beta[0] * r[0] + beta[1] * r[1] + beta[2] * r[2] + beta[3];
            (pred.get(i, 0) - o).powi(2)
        })
        .sum::<f64>()
        / n as f64;
    assert!(mse.sqrt() < 1e-2, "rmse {}", mse.sqrt());
}

#[test]
fn early_stopping_keeps_first_best() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rows: Vec<[f64; 2]> = (0..200).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let y = Matrix::from_rows(&rows.iter().map(|r| [r[0] - r[1], 2.0 * r[1]]).collect::<Vec<_>>()).unwrap();
    let params = HeadParams {
        lr: 0.01,
        eval_every: 5,
        ..HeadParams::default()
    };
    let model = train_multitask_head(&x, &y, &params).unwrap();
    assert_eq!(model.log[0].step, 0);
    let best = model
        .log
        .iter()
        .map(|r| r.val_loss.unwrap())
        .fold(f64::INFINITY, f64::min);
    let first_best = model.log.iter().find(|r| r.val_loss == Some(best)).unwrap();
    assert_eq!(model.best_step, first_best.step);
}
