//! Scores, rank correlation and the permuted-target baseline.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complexity::{ComplexityProfile, FEATURE_NAMES};
use crate::error::{Error, Result};
use crate::gaze::{GazeMetrics, Metric};
use crate::matrix::{mean, variance, Matrix};
use crate::regress::{cross_val_predict, kfold_split, FoldPlan, Pipeline};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub explained_variance: f64,
    pub r_squared: f64,
    pub n: usize,
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::Argument(format!(
            "{} targets but {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::Argument("scoring needs at least two samples".into()));
    }
    if variance(y) == 0.0 {
        return Err(Error::Degenerate("target is constant".into()));
    }
    Ok(())
}

/// `1 - Var(y - yhat) / Var(y)` with biased variances.
pub fn explained_variance(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let resid: Vec<f64> = y.iter().zip(yhat).map(|(a, b)| a - b).collect();
    Ok(1.0 - variance(&resid) / variance(y))
}

/// `1 - SS_res / SS_tot`.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let m = mean(y);
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let ss_tot: f64 = y.iter().map(|a| (a - m) * (a - m)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn score_pair(y: &[f64], yhat: &[f64]) -> Result<ScorePair> {
    Ok(ScorePair {
        explained_variance: explained_variance(y, yhat)?,
        r_squared: r_squared(y, yhat)?,
        n: y.len(),
    })
}

/// 1-based ranks, ties sharing the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's rho: Pearson correlation of tie-averaged ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Argument("spearman inputs differ in length".into()));
    }
    if x.len() < 3 {
        return Err(Error::Argument("spearman needs at least three pairs".into()));
    }
    if x.iter().any(|v| v.is_nan()) || y.iter().any(|v| v.is_nan()) {
        return Err(Error::Value("NaN in spearman input".into()));
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::Degenerate("spearman input is constant".into()));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

/// Scores per fold and target: `result[fold][target]`.
pub fn fold_scores(y: &Matrix, pred: &Matrix, plan: &FoldPlan) -> Result<Vec<Vec<ScorePair>>> {
    (0..plan.k)
        .map(|f| {
            let test = plan.test_indices(f);
            let ys = y.select_rows(&test);
            let ps = pred.select_rows(&test);
            (0..y.cols())
                .map(|t| score_pair(&ys.column(t), &ps.column(t)))
                .collect()
        })
        .collect()
}

/// Mean over folds for each target.
pub fn mean_over_folds(per_fold: &[Vec<ScorePair>]) -> Vec<ScorePair> {
    let tasks = per_fold.first().map_or(0, Vec::len);
    let k = per_fold.len() as f64;
    (0..tasks)
        .map(|t| ScorePair {
            explained_variance: per_fold.iter().map(|f| f[t].explained_variance).sum::<f64>() / k,
            r_squared: per_fold.iter().map(|f| f[t].r_squared).sum::<f64>() / k,
            n: per_fold.iter().map(|f| f[t].n).sum(),
        })
        .collect()
}

/// Cross-validated scores of `pipeline` on `(x, y)`.
pub fn evaluate_cv(
    x: &Matrix,
    y: &Matrix,
    plan: &FoldPlan,
    pipeline: &dyn Pipeline,
) -> Result<Vec<Vec<ScorePair>>> {
    let pred = cross_val_predict(x, y, plan, pipeline)?;
    fold_scores(y, &pred, plan)
}

/// Cross-validated scores after pairing input `i` with target row
/// `perm[i]`.
pub fn permuted_scores(
    x: &Matrix,
    y: &Matrix,
    plan: &FoldPlan,
    pipeline: &dyn Pipeline,
    perm: &[usize],
) -> Result<Vec<Vec<ScorePair>>> {
    if perm.len() != y.rows() {
        return Err(Error::Argument("permutation length differs from sample count".into()));
    }
    evaluate_cv(x, &y.select_rows(perm), plan, pipeline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub seed: u64,
    /// `[fold][target]`
    pub folds: Vec<Vec<ScorePair>>,
    /// Per target, averaged over folds.
    pub mean: Vec<ScorePair>,
}

/// Pairs every input with the targets of a uniformly random other row
/// (one permutation per seed) and scores the cross-validated pipeline
/// against the shuffled targets.
pub fn random_baseline(
    x: &Matrix,
    y: &Matrix,
    pipeline: &dyn Pipeline,
    seeds: &[u64],
    k: usize,
    cv_seed: u64,
) -> Result<Vec<BaselineRun>> {
    if seeds.is_empty() {
        return Err(Error::Argument("random baseline needs at least one seed".into()));
    }
    let plan = kfold_split(x.rows(), k, cv_seed)?;
    seeds
        .iter()
        .map(|&seed| {
            let mut perm: Vec<usize> = (0..y.rows()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let folds = permuted_scores(x, y, &plan, pipeline, &perm)?;
            Ok(BaselineRun {
                seed,
                mean: mean_over_folds(&folds),
                folds,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    pub metrics: Vec<Metric>,
    /// `cells[feature][metric]`; `None` where either side is constant or
    /// the feature is unavailable.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Two-sided p < 0.05 under the large-sample t approximation.
    pub significant: Vec<Vec<bool>>,
    pub n: usize,
}

/// Spearman correlation of each complexity feature with each metric over
/// the sentences present in both inputs.
pub fn correlation_matrix(
    profiles: &[(String, ComplexityProfile)],
    metrics: &[GazeMetrics],
) -> Result<CorrelationMatrix> {
    let by_id: HashMap<&str, &GazeMetrics> =
        metrics.iter().map(|g| (g.sentence_id.as_str(), g)).collect();
    let pairs: Vec<(&ComplexityProfile, &GazeMetrics)> = profiles
        .iter()
        .filter_map(|(id, p)| by_id.get(id.as_str()).map(|g| (p, *g)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Alignment("no sentence has both a profile and metrics".into()));
    }
    if pairs.len() < 3 {
        return Err(Error::Argument(format!(
            "correlations need at least three aligned sentences, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len();
    let mut cells = vec![vec![None; Metric::ALL.len()]; FEATURE_NAMES.len()];
    let mut significant = vec![vec![false; Metric::ALL.len()]; FEATURE_NAMES.len()];
    for (fi, row) in cells.iter_mut().enumerate() {
        let feat: Option<Vec<f64>> = pairs.iter().map(|(p, _)| p.feature(fi)).collect();
        let Some(feat) = feat else { continue };
        for (mi, m) in Metric::ALL.into_iter().enumerate() {
            let vals: Vec<f64> = pairs.iter().map(|(_, g)| g.get(m)).collect();
            match spearman(&feat, &vals) {
                Ok(rho) => {
                    row[mi] = Some(rho);
                    significant[fi][mi] = t_significant(rho, n);
                }
                Err(Error::Degenerate(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(CorrelationMatrix {
        features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        metrics: Metric::ALL.to_vec(),
        cells,
        significant,
        n,
    })
}

fn t_significant(rho: f64, n: usize) -> bool {
    if n < 4 {
        return false;
    }
    if rho.abs() >= 1.0 {
        return true;
    }
    let t = rho * ((n as f64 - 2.0) / (1.0 - rho * rho)).sqrt();
    t.abs() > 1.96
}

/// Matrix layout: one row per feature, one column per metric, `NA` for
/// missing cells.
pub fn write_correlation_csv<W: Write>(cm: &CorrelationMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["feature".to_string()];
    header.extend(cm.metrics.iter().map(|m| m.abbrev().to_string()));
    w.write_record(&header)?;
    for (f, row) in cm.features.iter().zip(&cm.cells) {
        let mut rec = vec![f.clone()];
        rec.extend(row.iter().map(|c| match c {
            Some(v) => format!("{v:.6}"),
            None => "NA".to_string(),
        }));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexity::SyntacticFeatures;
    use proptest::prelude::*;

    #[test]
    fn explained_variance_examples() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(explained_variance(&y, &y).unwrap(), 1.0);
        assert_eq!(explained_variance(&y, &[2.0, 3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(explained_variance(&y, &[2.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn r_squared_examples() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&y, &[2.0, 3.0, 4.0]).unwrap(), -0.5);
        assert_eq!(r_squared(&y, &[2.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn constant_target_is_degenerate() {
        assert!(matches!(
            explained_variance(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(r_squared(&[4.0; 3], &[1.0; 3]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        let tied = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        // ranks [1, 2.5, 2.5, 4] vs [1, 2, 3, 4]: 4.5 / sqrt(4.5 * 5)
        assert!((tied - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-12);
        assert!((tied - 0.9487).abs() < 1e-4);
        assert!(matches!(spearman(&[1.0; 4], &[1.0, 2.0, 3.0, 4.0]), Err(Error::Degenerate(_))));
    }

    fn prof(len: usize, depth: usize) -> ComplexityProfile {
        ComplexityProfile {
            sentence_length: len,
            avg_word_length: 4.0 + len as f64 * 0.1,
            avg_word_frequency: 5.0,
            n_low_frequency_words: len / 3,
            lexical_density: 0.5,
            syntax: Some(SyntacticFeatures {
                parse_tree_depth: depth,
                avg_dep_link_length: 1.5,
                max_dep_link_length: len / 2,
                n_verbal_heads: 1,
            }),
        }
    }

    #[test]
    fn correlation_matrix_shape_and_missing() {
        let profiles: Vec<(String, ComplexityProfile)> = (0..10)
            .map(|i| (format!("s{i}"), prof(5 + i, 2 + i % 3)))
            .collect();
        let metrics: Vec<GazeMetrics> = (0..10)
            .map(|i| GazeMetrics {
                sentence_id: format!("s{i}"),
                fixation_count: (5 + i) as f64 * 2.0,
                total_fixation_duration: (5 + i) as f64 * 200.0,
                first_pass_duration: ((i * 7) % 10) as f64,
                regression_duration: ((i * 3) % 10) as f64,
            })
            .collect();
        let cm = correlation_matrix(&profiles, &metrics).unwrap();
        assert_eq!(cm.cells.len(), 9);
        assert!(cm.cells.iter().all(|r| r.len() == 4));
        assert_eq!(cm.cells[0][0], Some(1.0));
        assert_eq!(cm.cells[0][1], Some(1.0));
        // constant features
        assert_eq!(cm.cells[2], vec![None; 4]);
        assert_eq!(cm.cells[4], vec![None; 4]);
        assert!(cm.cells[5][0].is_some());
        let mut buf = Vec::new();
        write_correlation_csv(&cm, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("feature,FC,TFD,FPD,RD\n"));
        assert!(text.contains("avg_word_frequency,NA,NA,NA,NA"));
    }

    #[test]
    fn correlation_needs_alignment() {
        let profiles = vec![("a".to_string(), prof(5, 2))];
        assert!(matches!(
            correlation_matrix(&profiles, &[GazeMetrics::zero("b")]),
            Err(Error::Alignment(_))
        ));
    }

    fn vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n),
                proptest::collection::vec(-100.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn r2_never_exceeds_ev((y, yhat) in vecs()) {
            prop_assume!(variance(&y) > 1e-6);
            let ev = explained_variance(&y, &yhat).unwrap();
            let r2 = r_squared(&y, &yhat).unwrap();
            prop_assert!(r2 <= ev + 1e-9);
            prop_assert!(ev <= 1.0 + 1e-12);
        }

        #[test]
        fn scores_invariant_under_joint_affine_map((y, yhat) in vecs(), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            prop_assume!(variance(&y) > 1e-3);
            let ty: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let th: Vec<f64> = yhat.iter().map(|v| a * v + b).collect();
            prop_assert!((explained_variance(&y, &yhat).unwrap() - explained_variance(&ty, &th).unwrap()).abs() < 1e-6);
            prop_assert!((r_squared(&y, &yhat).unwrap() - r_squared(&ty, &th).unwrap()).abs() < 1e-6);
        }

        #[test]
        fn spearman_monotone_invariance_and_symmetry((x, y) in vecs()) {
            prop_assume!(x.len() >= 3);
            let rho = spearman(&x, &y).unwrap();
            let tx: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
            prop_assert!((rho - spearman(&tx, &y).unwrap()).abs() < 1e-9);
            prop_assert!((rho - spearman(&y, &x).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&rho));
        }
    }
}
