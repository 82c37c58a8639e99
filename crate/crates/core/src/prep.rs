//! Training-data preparation: merit-based feature selection and minority
//! oversampling.
//!
//! Both transforms run on the training side of a split only; test rows never
//! pass through here.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ProjectTable, Task};

#[derive(Debug, Error)]
pub enum PrepError {
    #[error("feature selection needs at least 10 rows, got {0}")]
    TooFewRows(usize),
    #[error("feature selection needs at least 2 features, got {0}")]
    TooFewFeatures(usize),
    #[error("the label column is constant; nothing to select against")]
    ConstantLabel,
    #[error("no feature correlates with the label; the table carries no signal")]
    NoCorrelation,
    #[error("oversampling needs a classification table")]
    NotClassification,
    #[error("oversampling needs both classes present")]
    SingleClass,
    #[error("oversampling needs at least 2 minority rows, got {0}")]
    MinorityTooSmall(usize),
}

/// Outcome of feature selection: schema-relative column indices (ascending)
/// and the merit of the winning subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSubset {
    pub selected: Vec<usize>,
    pub merit: f64,
}

/// Pearson correlation; zero-variance inputs correlate with nothing.
fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Merit of a feature subset: `k * rcf / sqrt(k + k(k-1) * rff)`, where `rcf`
/// averages absolute feature-label correlations and `rff` averages absolute
/// pairwise feature-feature correlations.
fn merit(subset: &[usize], label_corr: &[f64], feature_corr: &[Vec<f64>]) -> f64 {
    let k = subset.len() as f64;
    let rcf = subset.iter().map(|&f| label_corr[f]).sum::<f64>() / k;
    let mut rff = 0.0;
    let mut pairs = 0.0;
    for (i, &a) in subset.iter().enumerate() {
        for &b in &subset[i + 1..] {
            rff += feature_corr[a][b];
            pairs += 1.0;
        }
    }
    if pairs > 0.0 {
        rff /= pairs;
    }
    k * rcf / (k + k * (k - 1.0) * rff).sqrt()
}

/// How many consecutive non-improving best-first expansions end the search.
const SEARCH_PATIENCE: usize = 5;

/// Correlation-based feature subset selection with forward best-first search.
///
/// Starting from the empty set, the best open subset is expanded by one
/// feature at a time; the search stops after [`SEARCH_PATIENCE`] expansions
/// in a row fail to improve on the best merit seen. The label correlation is
/// Pearson against the label column, which for 0/1 labels is the
/// point-biserial correlation.
pub fn cfs_select(table: &ProjectTable) -> Result<FeatureSubset, PrepError> {
    let n = table.n_rows();
    let f = table.n_features();
    if n < 10 {
        return Err(PrepError::TooFewRows(n));
    }
    if f < 2 {
        return Err(PrepError::TooFewFeatures(f));
    }
    let labels = table.labels();
    let first = labels[0];
    if labels.iter().all(|l| *l == first) {
        return Err(PrepError::ConstantLabel);
    }
    let columns: Vec<Vec<f64>> = (0..f).map(|j| table.feature_column(j)).collect();
    let label_corr: Vec<f64> = columns.iter().map(|c| pearson(c, labels).abs()).collect();
    if label_corr.iter().all(|c| *c == 0.0) {
        return Err(PrepError::NoCorrelation);
    }
    let mut feature_corr = vec![vec![0.0; f]; f];
    for i in 0..f {
        for j in i + 1..f {
            let r = pearson(&columns[i], &columns[j]).abs();
            feature_corr[i][j] = r;
            feature_corr[j][i] = r;
        }
    }

    let mut open: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new())];
    let mut visited: std::collections::BTreeSet<Vec<usize>> = std::collections::BTreeSet::new();
    visited.insert(Vec::new());
    let mut best_subset: Vec<usize> = Vec::new();
    let mut best_merit = 0.0;
    let mut stale = 0;
    while let Some(pos) = open
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then_with(|| b.1.cmp(&a.1)) // ties: lexicographically smaller subset
        })
        .map(|(i, _)| i)
    {
        let (_, state) = open.swap_remove(pos);
        let mut improved = false;
        for feat in 0..f {
            if state.contains(&feat) {
                continue;
            }
            let mut child = state.clone();
            child.push(feat);
            child.sort_unstable();
            if !visited.insert(child.clone()) {
                continue;
            }
            let m = merit(&child, &label_corr, &feature_corr);
            if m > best_merit + 1e-12 {
                best_merit = m;
                best_subset = child.clone();
                improved = true;
            }
            open.push((m, child));
        }
        if improved {
            stale = 0;
        } else {
            stale += 1;
            if stale >= SEARCH_PATIENCE {
                break;
            }
        }
    }
    Ok(FeatureSubset {
        selected: best_subset,
        merit: best_merit,
    })
}

/// Default neighbour count for oversampling.
pub const SMOTE_K: usize = 5;

/// Balances a classification table by synthesizing minority rows.
///
/// Each synthetic row interpolates between a minority row and one of its
/// `min(k, minority-1)` nearest minority neighbours: `x + u * (nbr - x)` with
/// `u` uniform in `[0,1)`. Originals are preserved and synthetic rows are
/// appended, so the result has exactly `2 * majority` rows.
pub fn smote(table: &ProjectTable, k: usize, seed: u64) -> Result<ProjectTable, PrepError> {
    if table.schema.task != Task::Classification {
        return Err(PrepError::NotClassification);
    }
    let labels = table.labels();
    let pos: Vec<usize> = (0..table.n_rows()).filter(|&i| labels[i] == 1.0).collect();
    let neg: Vec<usize> = (0..table.n_rows()).filter(|&i| labels[i] == 0.0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(PrepError::SingleClass);
    }
    let (minority, majority_count, minority_label) = if pos.len() < neg.len() {
        (pos, neg.len(), 1.0)
    } else if neg.len() < pos.len() {
        (neg, pos.len(), 0.0)
    } else {
        // already balanced
        let idx: Vec<usize> = (0..table.n_rows()).collect();
        return Ok(table.subset_rows(&idx));
    };
    if minority.len() < 2 {
        return Err(PrepError::MinorityTooSmall(minority.len()));
    }

    let m = minority.len();
    let kn = k.min(m - 1);
    // k nearest minority neighbours per minority row, ties by row index
    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut dist: Vec<(f64, usize)> = minority
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (crate::util::euclidean(table.row(i), table.row(j)), j))
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(kn);
            dist.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let need = majority_count - m;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = (0..table.n_rows()).map(|i| table.row(i).to_vec()).collect();
    let mut labels_out = labels.to_vec();
    let mut effort_out = table.effort().map(|e| e.to_vec());
    for s in 0..need {
        let mi = s % m;
        let parent = minority[mi];
        let nbr = neighbours[mi][rng.gen_range(0..kn)];
        let u: f64 = rng.gen_range(0.0..1.0);
        let row: Vec<f64> = table
            .row(parent)
            .iter()
            .zip(table.row(nbr))
            .map(|(a, b)| a + u * (b - a))
            .collect();
        rows.push(row);
        labels_out.push(minority_label);
        if let (Some(out), Some(e)) = (effort_out.as_mut(), table.effort()) {
            out.push(e[parent] + u * (e[nbr] - e[parent]));
        }
    }
    Ok(ProjectTable::new(
        table.project_id.clone(),
        table.schema.clone(),
        rows,
        labels_out,
        effort_out,
    )
    .expect("interpolated rows stay valid"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSchema;
    use std::sync::Arc;

    fn table(features: Vec<Vec<f64>>, labels: Vec<f64>) -> ProjectTable {
        let f = features[0].len();
        let names = (0..f).map(|i| format!("f{i}")).collect();
        let schema =
            Arc::new(FeatureSchema::new(Task::Classification, names, "buggy", None).unwrap());
        ProjectTable::new("t", schema, features, labels, None).unwrap()
    }

    /// Exhaustive merit search over all non-empty subsets, for cross-checking.
    pub(crate) fn best_subset_exhaustive(t: &ProjectTable) -> (Vec<usize>, f64) {
        let f = t.n_features();
        let labels = t.labels();
        let columns: Vec<Vec<f64>> = (0..f).map(|j| t.feature_column(j)).collect();
        let label_corr: Vec<f64> = columns.iter().map(|c| pearson(c, labels).abs()).collect();
        let mut feature_corr = vec![vec![0.0; f]; f];
        for i in 0..f {
            for j in i + 1..f {
                let r = pearson(&columns[i], &columns[j]).abs();
                feature_corr[i][j] = r;
                feature_corr[j][i] = r;
            }
        }
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        for mask in 1u32..(1 << f) {
            let subset: Vec<usize> = (0..f).filter(|i| mask & (1 << i) != 0).collect();
            let m = merit(&subset, &label_corr, &feature_corr);
            if m > best.1 {
                best = (subset, m);
            }
        }
        best
    }

    fn planted_table(rows: usize, seed: u64) -> ProjectTable {
        use rand::Rng;
        let mut rng = StdRng::seed_from_u64(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..rows {
            let relevant: f64 = rng.gen_range(-1.0..1.0);
            let noise_a: f64 = rng.gen_range(-1.0..1.0);
            let noise_b: f64 = rng.gen_range(-1.0..1.0);
            // the duplicate column shadows the relevant one exactly
            features.push(vec![relevant, noise_a, relevant, noise_b]);
            labels.push(f64::from(relevant > 0.0));
        }
        table(features, labels)
    }

    #[test]
    fn cfs_keeps_the_planted_feature_and_drops_its_duplicate() {
        let t = planted_table(60, 42);
        let subset = cfs_select(&t).unwrap();
        assert!(subset.selected.contains(&0) ^ subset.selected.contains(&2));
        assert!(subset.merit > 0.5);
    }

    #[test]
    fn cfs_matches_the_exhaustive_merit_search() {
        for seed in [7, 8, 9] {
            let t = planted_table(80, seed);
            let found = cfs_select(&t).unwrap();
            let (best, best_merit) = best_subset_exhaustive(&t);
            assert_eq!(found.selected, best, "seed {seed}");
            assert!((found.merit - best_merit).abs() < 1e-12);
        }
    }

    #[test]
    fn cfs_rejects_degenerate_tables() {
        let t = planted_table(9, 1);
        assert!(matches!(cfs_select(&t), Err(PrepError::TooFewRows(9))));

        let constant = table(
            (0..12).map(|i| vec![i as f64, 1.0]).collect(),
            vec![1.0; 12],
        );
        assert!(matches!(cfs_select(&constant), Err(PrepError::ConstantLabel)));

        let flat = table(
            (0..12).map(|_| vec![3.0, 3.0]).collect(),
            (0..12).map(|i| f64::from(i % 2 == 0)).collect(),
        );
        assert!(matches!(cfs_select(&flat), Err(PrepError::NoCorrelation)));
    }

    #[test]
    fn zero_variance_feature_gets_zero_correlation_not_nan() {
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn smote_balances_exactly_and_keeps_originals() {
        let mut features: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 0.0]).collect();
        features.extend((0..5).map(|i| vec![100.0 + i as f64, 50.0]));
        let labels: Vec<f64> = (0..25).map(|i| f64::from(i >= 20)).collect();
        let t = table(features.clone(), labels);
        let balanced = smote(&t, SMOTE_K, 17).unwrap();
        assert_eq!(balanced.n_rows(), 40);
        let pos = balanced.labels().iter().filter(|l| **l == 1.0).count();
        assert_eq!(pos, 20);
        for (i, row) in features.iter().enumerate() {
            assert_eq!(balanced.row(i), row.as_slice(), "original row {i} moved");
        }
    }

    #[test]
    fn smote_synthetics_lie_on_segments_between_minority_neighbours() {
        // minority rows on the line y = 2x: every interpolation stays on it
        let mut features: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, -5.0]).collect();
        features.extend([1.0f64, 2.0, 4.0].iter().map(|&x| vec![x, 2.0 * x]));
        let labels: Vec<f64> = (0..15).map(|i| f64::from(i >= 12)).collect();
        let t = table(features, labels);
        let balanced = smote(&t, SMOTE_K, 3).unwrap();
        for i in 15..balanced.n_rows() {
            let row = balanced.row(i);
            assert!((row[1] - 2.0 * row[0]).abs() < 1e-9, "row {i} is off the segment");
            assert_eq!(balanced.labels()[i], 1.0);
        }
    }

    #[test]
    fn smote_is_deterministic_and_seed_sensitive() {
        let features: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![i as f64, (i * i % 13) as f64])
            .collect();
        let labels: Vec<f64> = (0..30).map(|i| f64::from(i % 5 == 0)).collect();
        let t = table(features, labels);
        let a = smote(&t, SMOTE_K, 100).unwrap();
        let b = smote(&t, SMOTE_K, 100).unwrap();
        let c = smote(&t, SMOTE_K, 101).unwrap();
        assert_eq!(a.row(35), b.row(35));
        assert_ne!(a.row(35), c.row(35));
    }

    #[test]
    fn smote_error_paths() {
        let t = table((0..6).map(|i| vec![i as f64, 0.0]).collect(), vec![0.0; 6]);
        assert!(matches!(smote(&t, 5, 1), Err(PrepError::SingleClass)));

        let mut labels = vec![0.0; 6];
        labels[0] = 1.0;
        let t = table((0..6).map(|i| vec![i as f64, 0.0]).collect(), labels);
        assert!(matches!(smote(&t, 5, 1), Err(PrepError::MinorityTooSmall(1))));

        let schema = Arc::new(
            FeatureSchema::new(Task::Regression, vec!["x".into()], "y", None).unwrap(),
        );
        let t = ProjectTable::new("r", schema, vec![vec![1.0], vec![2.0]], vec![0.5, 0.7], None)
            .unwrap();
        assert!(matches!(smote(&t, 5, 1), Err(PrepError::NotClassification)));
    }

    #[test]
    fn already_balanced_table_passes_through() {
        let features: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0]).collect();
        let labels: Vec<f64> = (0..10).map(|i| f64::from(i % 2 == 0)).collect();
        let t = table(features, labels);
        let out = smote(&t, 5, 9).unwrap();
        assert_eq!(out.n_rows(), 10);
    }
}
