//! Probing frozen sentence embeddings for the nine complexity features.
//!
//! For every fold a nine-head linear regressor is trained on the
//! embeddings of the training sentences (targets z-scored on those rows),
//! with no validation split and a fixed number of epochs, then scored by
//! R² on the held-out sentences. The same folds, target scaling and seed
//! are used for both embedding sets so their difference isolates the
//! representation.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::complexity::{ComplexityProfile, FEATURE_NAMES};
use crate::embed::EmbeddingSet;
use crate::error::{Error, Result};
use crate::evalx::r_squared;
use crate::matrix::{variance, Matrix};
use crate::regress::{fit_scaler, kfold_split, train_multitask_head, HeadParams, StandardScaler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeMode {
    /// One model with nine heads.
    MultiTask,
    /// Nine independent single-head models.
    SingleTask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub folds: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    pub mode: ProbeMode,
    pub language: String,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            folds: 5,
            train_size: 800,
            test_size: 200,
            epochs: 5,
            lr: 1e-2,
            batch: 32,
            seed: 0,
            mode: ProbeMode::MultiTask,
            language: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub feature: String,
    pub r2_pretrained: f64,
    pub r2_finetuned: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub language: String,
    pub folds: usize,
    pub seed: u64,
    pub rows: Vec<ProbeRow>,
    /// Features that were constant on some fold and therefore not scored.
    pub excluded: Vec<String>,
}

impl ProbeReport {
    pub fn row(&self, feature: &str) -> Option<&ProbeRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }

    pub fn mean_delta(&self) -> f64 {
        self.rows.iter().map(|r| r.delta).sum::<f64>() / self.rows.len() as f64
    }
}

/// The nine features as columns, in table order. Rows follow `ids`.
pub fn probe_targets(
    ids: &[String],
    profiles: &BTreeMap<String, ComplexityProfile>,
) -> Result<Matrix> {
    if ids.is_empty() {
        return Err(Error::Argument("no profiles to probe".into()));
    }
    let rows = ids
        .iter()
        .map(|id| {
            profiles
                .get(id)
                .ok_or_else(|| Error::Alignment(format!("no profile for {id}")))?
                .to_vec()
        })
        .collect::<Result<Vec<_>>>()?;
    Matrix::from_rows(&rows)
}

/// Z-scores target columns with statistics from `train` rows. Returns the
/// scaled matrix and, per column, whether it was constant there.
pub fn zscore_targets(y: &Matrix, train: &[usize]) -> Result<(Matrix, Vec<bool>)> {
    let sub = y.select_rows(train);
    let constant: Vec<bool> = (0..y.cols()).map(|j| variance(&sub.column(j)) == 0.0).collect();
    let scaler: StandardScaler = fit_scaler(&sub)?;
    Ok((scaler.apply(y)?, constant))
}

pub fn run_probe(
    emb_pre: &EmbeddingSet,
    emb_ft: &EmbeddingSet,
    profiles: &BTreeMap<String, ComplexityProfile>,
    cfg: &ProbeConfig,
) -> Result<ProbeReport> {
    let ids: Vec<String> = profiles.keys().cloned().collect();
    for id in &ids {
        if emb_pre.get(id).is_none() || emb_ft.get(id).is_none() {
            return Err(Error::Alignment(format!("sentence {id} lacks an embedding")));
        }
    }
    let n = ids.len();
    if n != cfg.train_size + cfg.test_size || cfg.test_size * cfg.folds != n {
        return Err(Error::Argument(format!(
            "{n} sentences cannot be split into {} folds of {} train / {} test",
            cfg.folds, cfg.train_size, cfg.test_size
        )));
    }
    let x_pre = gather(emb_pre, &ids)?;
    let x_ft = gather(emb_ft, &ids)?;
    let y = probe_targets(&ids, profiles)?;
    let plan = kfold_split(n, cfg.folds, cfg.seed)?;

    let params = HeadParams {
        lr: cfg.lr,
        batch: cfg.batch,
        epochs: cfg.epochs,
        eval_every: usize::MAX,
        patience: None,
        validation_fraction: 0.0,
        standardize: true,
        seed: cfg.seed,
    };

    let features = FEATURE_NAMES.len();
    let mut excluded = vec![false; features];
    let mut sum_pre = vec![0.0; features];
    let mut sum_ft = vec![0.0; features];
    for f in 0..cfg.folds {
        let train = plan.train_indices(f);
        let test = plan.test_indices(f);
        let (yz, constant) = zscore_targets(&y, &train)?;
        let y_test = yz.select_rows(&test);
        for j in 0..features {
            if constant[j] || variance(&y_test.column(j)) == 0.0 {
                excluded[j] = true;
            }
        }
        let y_train = yz.select_rows(&train);
        let pred_pre = fit_predict(&x_pre, &y_train, &train, &test, &params, cfg.mode)?;
        let pred_ft = fit_predict(&x_ft, &y_train, &train, &test, &params, cfg.mode)?;
        for j in (0..features).filter(|&j| !excluded[j]) {
            let truth = y_test.column(j);
            sum_pre[j] += r_squared(&truth, &pred_pre.column(j))?;
            sum_ft[j] += r_squared(&truth, &pred_ft.column(j))?;
        }
    }

    let k = cfg.folds as f64;
    let rows = (0..features)
        .filter(|&j| !excluded[j])
        .map(|j| {
            let r2_pretrained = sum_pre[j] / k;
            let r2_finetuned = sum_ft[j] / k;
            ProbeRow {
                feature: FEATURE_NAMES[j].to_string(),
                r2_pretrained,
                r2_finetuned,
                delta: r2_finetuned - r2_pretrained,
            }
        })
        .collect();
    Ok(ProbeReport {
        language: cfg.language.clone(),
        folds: cfg.folds,
        seed: cfg.seed,
        rows,
        excluded: (0..features)
            .filter(|&j| excluded[j])
            .map(|j| FEATURE_NAMES[j].to_string())
            .collect(),
    })
}

fn gather(set: &EmbeddingSet, ids: &[String]) -> Result<Matrix> {
    let rows: Vec<&[f64]> = ids.iter().map(|id| set.get(id).unwrap_or(&[])).collect();
    Matrix::from_rows(&rows)
}

fn fit_predict(
    x: &Matrix,
    y_train: &Matrix,
    train: &[usize],
    test: &[usize],
    params: &HeadParams,
    mode: ProbeMode,
) -> Result<Matrix> {
    let x_train = x.select_rows(train);
    let x_test = x.select_rows(test);
    match mode {
        ProbeMode::MultiTask => train_multitask_head(&x_train, y_train, params)?.predict(&x_test),
        ProbeMode::SingleTask => {
            let mut out = Matrix::zeros(test.len(), y_train.cols());
            for j in 0..y_train.cols() {
                let yj = Matrix::column_vector(&y_train.column(j));
                let pred = train_multitask_head(&x_train, &yj, params)?.predict(&x_test)?;
                for i in 0..test.len() {
                    out.set(i, j, pred.get(i, 0));
                }
            }
            Ok(out)
        }
    }
}

/// `feature,r2_pre,r2_ft,delta,language`
pub fn write_probe_csv<W: Write>(reports: &[ProbeReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "r2_pre", "r2_ft", "delta", "language"])?;
    for rep in reports {
        for r in &rep.rows {
            w.write_record([
                r.feature.clone(),
                format!("{:.6}", r.r2_pretrained),
                format!("{:.6}", r.r2_finetuned),
                format!("{:.6}", r.delta),
                rep.language.clone(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn zscore_three_profiles() {
        let y = Matrix::from_rows(&[[10.0, 3.0], [14.0, 3.0], [10.0, 3.0]]).unwrap();
        let (z, constant) = zscore_targets(&y, &[0, 1, 2]).unwrap();
        let col = z.column(0);
        let s2 = 2f64.sqrt();
        assert!((col[0] + 1.0 / s2).abs() < 1e-12);
        assert!((col[1] - s2).abs() < 1e-12);
        assert!((col[0] - (-0.707)).abs() < 1e-3 && (col[1] - 1.414).abs() < 1e-3);
        assert_eq!(constant, [false, true]);
    }

    #[test]
    fn targets_have_nine_columns() {
        let profiles = synth::random_profiles(4, 1);
        let ids: Vec<String> = profiles.keys().cloned().collect();
        assert_eq!(probe_targets(&ids, &profiles).unwrap().cols(), 9);
    }

    #[test]
    fn wrong_size_is_argument_error() {
        let profiles = synth::random_profiles(50, 2);
        let emb = synth::noise_embeddings(&profiles, 4, 3);
        assert!(matches!(
            run_probe(&emb, &emb, &profiles, &ProbeConfig::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn coverage_gap_is_alignment_error() {
        let profiles = synth::random_profiles(10, 2);
        let mut emb = EmbeddingSet::new(2, "x").unwrap();
        emb.insert("nope", vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            run_probe(&emb, &emb, &profiles, &ProbeConfig::default()),
            Err(Error::Alignment(_))
        ));
    }

    #[test]
    fn constant_feature_is_excluded() {
        let mut profiles = synth::random_profiles(100, 4);
        for p in profiles.values_mut() {
            p.syntax.as_mut().unwrap().parse_tree_depth = 3;
        }
        let emb = synth::noise_embeddings(&profiles, 4, 5);
        let cfg = ProbeConfig {
            train_size: 80,
            test_size: 20,
            ..ProbeConfig::default()
        };
        let rep = run_probe(&emb, &emb, &profiles, &cfg).unwrap();
        assert_eq!(rep.excluded, ["parse_tree_depth"]);
        assert_eq!(rep.rows.len(), 8);
        assert!(rep.rows.iter().all(|r| r.delta == 0.0));
    }
}
