//! Learners built from scratch: CART decision trees, a bagged forest over
//! them, impurity-based feature importances, and a DE/rand/1/bin tuner.
//!
//! Trees split greedily on midpoints of consecutive distinct feature values,
//! minimizing Gini impurity for classification or variance for regression.
//! Ties prefer the lower feature index, then the lower split value, so a
//! refit on the same data is bit-identical.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ProjectTable;
use crate::eval::mre;
use crate::util::{derive_seed, derive_seed_indexed};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("invalid tuning setup: {0}")]
    InvalidBounds(String),
    #[error("expected a row of {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot fit a tree on an empty table")]
    EmptyTable,
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

/// Per-split feature subsetting policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    /// `ceil(sqrt(F))` features per split.
    Sqrt,
    /// `ceil(fraction * F)` features per split.
    Fraction(f64),
}

impl MaxFeatures {
    pub fn count(&self, n_features: usize) -> usize {
        let c = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::Fraction(x) => (x * n_features as f64).ceil() as usize,
        };
        c.clamp(1, n_features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<u32>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            bootstrap: true,
            tree: TreeParams {
                max_features: MaxFeatures::Sqrt,
                ..TreeParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitCriterion {
    Gini,
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LeafValue {
    /// Class probabilities `[p(label 0), p(label 1)]`.
    Probs([f64; 2]),
    /// Mean target of the leaf's samples.
    Mean(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        samples: usize,
        /// Impurity of this node minus the weighted impurity of its children;
        /// recorded at fit time so importances can be recomputed later.
        decrease: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf { samples: usize, value: LeafValue },
}

impl TreeNode {
    /// Walks a row to its leaf. Values less than or equal to a split's
    /// threshold go left.
    pub fn leaf(&self, row: &[f64]) -> &LeafValue {
        let mut node = self;
        loop {
            match node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
                TreeNode::Leaf { value, .. } => return value,
            }
        }
    }

    /// Positive-class probability (classification) or mean target
    /// (regression) of the row's leaf.
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.leaf(row) {
            LeafValue::Probs(p) => p[1],
            LeafValue::Mean(m) => *m,
        }
    }

    pub fn samples(&self) -> usize {
        match self {
            TreeNode::Split { samples, .. } | TreeNode::Leaf { samples, .. } => *samples,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

fn gini(n0: f64, n1: f64) -> f64 {
    let n = n0 + n1;
    if n == 0.0 {
        return 0.0;
    }
    1.0 - (n0 / n) * (n0 / n) - (n1 / n) * (n1 / n)
}

fn variance(sum: f64, sumsq: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    (sumsq / n - (sum / n) * (sum / n)).max(0.0)
}

struct TreeFit<'a> {
    table: &'a ProjectTable,
    params: TreeParams,
    criterion: SplitCriterion,
    feature_count: usize,
    rng: StdRng,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl<'a> TreeFit<'a> {
    fn node_impurity(&self, rows: &[usize]) -> f64 {
        let labels = self.table.labels();
        match self.criterion {
            SplitCriterion::Gini => {
                let n1 = rows.iter().filter(|&&i| labels[i] == 1.0).count() as f64;
                gini(rows.len() as f64 - n1, n1)
            }
            SplitCriterion::Variance => {
                let sum: f64 = rows.iter().map(|&i| labels[i]).sum();
                let sumsq: f64 = rows.iter().map(|&i| labels[i] * labels[i]).sum();
                variance(sum, sumsq, rows.len() as f64)
            }
        }
    }

    /// Features to consider at one node: all of them, or a random subset
    /// drawn without replacement and scanned in ascending order.
    fn candidate_features(&mut self) -> Vec<usize> {
        let f = self.table.n_features();
        if self.feature_count >= f {
            return (0..f).collect();
        }
        let mut pool: Vec<usize> = (0..f).collect();
        for i in 0..self.feature_count {
            let j = self.rng.gen_range(i..f);
            pool.swap(i, j);
        }
        let mut chosen = pool[..self.feature_count].to_vec();
        chosen.sort_unstable();
        chosen
    }

    fn best_split(&mut self, rows: &[usize], node_impurity: f64) -> Option<BestSplit> {
        let labels = self.table.labels();
        let n = rows.len() as f64;
        let msl = self.params.min_samples_leaf;
        let mut best: Option<BestSplit> = None;
        for feature in self.candidate_features() {
            let mut order: Vec<usize> = rows.to_vec();
            order.sort_by(|&a, &b| {
                self.table.row(a)[feature].total_cmp(&self.table.row(b)[feature])
            });
            let values: Vec<f64> = order.iter().map(|&i| self.table.row(i)[feature]).collect();
            // prefix aggregates over the sorted order
            let mut left_n1 = 0.0;
            let mut left_sum = 0.0;
            let mut left_sumsq = 0.0;
            let (total_n1, total_sum, total_sumsq) = {
                let mut n1 = 0.0;
                let mut s = 0.0;
                let mut sq = 0.0;
                for &i in &order {
                    n1 += f64::from(labels[i] == 1.0);
                    s += labels[i];
                    sq += labels[i] * labels[i];
                }
                (n1, s, sq)
            };
            for cut in 1..order.len() {
                let i = order[cut - 1];
                left_n1 += f64::from(labels[i] == 1.0);
                left_sum += labels[i];
                left_sumsq += labels[i] * labels[i];
                if values[cut - 1] >= values[cut] {
                    continue; // not a boundary between distinct values
                }
                let nl = cut as f64;
                let nr = n - nl;
                if cut < msl || order.len() - cut < msl {
                    continue;
                }
                let (imp_l, imp_r) = match self.criterion {
                    SplitCriterion::Gini => {
                        (gini(nl - left_n1, left_n1), gini(nr - (total_n1 - left_n1), total_n1 - left_n1))
                    }
                    SplitCriterion::Variance => (
                        variance(left_sum, left_sumsq, nl),
                        variance(total_sum - left_sum, total_sumsq - left_sumsq, nr),
                    ),
                };
                let decrease = node_impurity - (nl / n) * imp_l - (nr / n) * imp_r;
                if decrease <= 1e-12 {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => decrease > b.decrease + 1e-15,
                };
                if better {
                    let mut threshold = (values[cut - 1] + values[cut]) / 2.0;
                    if threshold >= values[cut] {
                        // midpoint rounded up to the right value; fall back so
                        // `<= threshold` routes exactly the scanned left set
                        threshold = values[cut - 1];
                    }
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        decrease,
                        left: order[..cut].to_vec(),
                        right: order[cut..].to_vec(),
                    });
                }
            }
        }
        best
    }

    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let labels = self.table.labels();
        let value = match self.criterion {
            SplitCriterion::Gini => {
                let n1 = rows.iter().filter(|&&i| labels[i] == 1.0).count() as f64;
                let n = rows.len() as f64;
                LeafValue::Probs([(n - n1) / n, n1 / n])
            }
            SplitCriterion::Variance => {
                let mean = rows.iter().map(|&i| labels[i]).sum::<f64>() / rows.len() as f64;
                LeafValue::Mean(mean)
            }
        };
        TreeNode::Leaf {
            samples: rows.len(),
            value,
        }
    }

    fn build(&mut self, rows: &[usize], depth: u32) -> TreeNode {
        let impurity = self.node_impurity(rows);
        let depth_capped = self.params.max_depth.map(|d| depth >= d).unwrap_or(false);
        if depth_capped
            || rows.len() < self.params.min_samples_split
            || impurity <= 1e-12
        {
            return self.leaf(rows);
        }
        match self.best_split(rows, impurity) {
            None => self.leaf(rows),
            Some(split) => {
                let left = self.build(&split.left, depth + 1);
                let right = self.build(&split.right, depth + 1);
                TreeNode::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    samples: rows.len(),
                    decrease: split.decrease,
                    left: Box::new(left),
                    right: Box::new(right),
                }
            }
        }
    }
}

/// Fits one CART tree over all rows of the table.
pub fn fit_tree(
    table: &ProjectTable,
    params: &TreeParams,
    criterion: SplitCriterion,
    seed: u64,
) -> Result<TreeNode, LearnError> {
    fit_tree_on(table, &(0..table.n_rows()).collect::<Vec<_>>(), params, criterion, seed)
}

fn fit_tree_on(
    table: &ProjectTable,
    rows: &[usize],
    params: &TreeParams,
    criterion: SplitCriterion,
    seed: u64,
) -> Result<TreeNode, LearnError> {
    if rows.is_empty() {
        return Err(LearnError::EmptyTable);
    }
    let mut fit = TreeFit {
        table,
        params: *params,
        criterion,
        feature_count: params.max_features.count(table.n_features()),
        rng: StdRng::seed_from_u64(seed),
    };
    Ok(fit.build(rows, 0))
}

/// A bagged ensemble of CART trees sharing one input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub params: ForestParams,
    pub n_features: usize,
    pub criterion: SplitCriterion,
}

/// Fits a forest: each tree sees a bootstrap resample of the rows (unless
/// `bootstrap` is off) and a fresh feature-subset stream. Trees fit in
/// parallel; per-tree seeds derive from `seed`, so the result does not
/// depend on scheduling.
pub fn fit_forest(
    table: &ProjectTable,
    params: &ForestParams,
    criterion: SplitCriterion,
    seed: u64,
) -> Result<ForestModel, LearnError> {
    let n = table.n_rows();
    if n == 0 {
        return Err(LearnError::EmptyTable);
    }
    let trees: Result<Vec<TreeNode>, LearnError> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = derive_seed_indexed(seed, "tree", t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                let mut rng = StdRng::seed_from_u64(derive_seed(tree_seed, "bootstrap"));
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(table, &rows, &params.tree, criterion, derive_seed(tree_seed, "splits"))
        })
        .collect();
    Ok(ForestModel {
        trees: trees?,
        params: *params,
        n_features: table.n_features(),
        criterion,
    })
}

impl ForestModel {
    /// Mean positive-class probability over the trees.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, LearnError> {
        if row.len() != self.n_features {
            return Err(LearnError::DimensionMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Mean-decrease-impurity importances over the model's input columns.
    /// Every split contributes its impurity decrease weighted by the fraction
    /// of the tree's samples that reached it; tree totals are averaged and
    /// the result normalized to sum to one (all zeros when no tree split).
    pub fn feature_importance(&self) -> Vec<f64> {
        feature_importance(&self.trees, self.n_features)
    }
}

/// See [`ForestModel::feature_importance`]; works over any tree set.
pub fn feature_importance(trees: &[TreeNode], n_features: usize) -> Vec<f64> {
    fn accumulate(node: &TreeNode, root_samples: f64, acc: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            samples,
            decrease,
            left,
            right,
            ..
        } = node
        {
            acc[*feature] += decrease * (*samples as f64 / root_samples);
            accumulate(left, root_samples, acc);
            accumulate(right, root_samples, acc);
        }
    }
    let mut total = vec![0.0; n_features];
    for tree in trees {
        let mut acc = vec![0.0; n_features];
        accumulate(tree, tree.samples() as f64, &mut acc);
        for (t, a) in total.iter_mut().zip(&acc) {
            *t += a;
        }
    }
    for t in total.iter_mut() {
        *t /= trees.len() as f64;
    }
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        for t in total.iter_mut() {
            *t /= sum;
        }
    }
    total
}

/// One tunable dimension: name, inclusive bounds, and whether values are
/// rounded to integers before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub integer: bool,
}

impl ParamSpec {
    pub fn integer(name: &str, lo: u32, hi: u32) -> Self {
        ParamSpec {
            name: name.to_string(),
            lo: lo as f64,
            hi: hi as f64,
            integer: true,
        }
    }

    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        ParamSpec {
            name: name.to_string(),
            lo,
            hi,
            integer: false,
        }
    }
}

/// Named hyperparameter values, each within its declared bounds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HyperParams(pub BTreeMap<String, f64>);

impl HyperParams {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn get_usize(&self, name: &str) -> Option<usize> {
        self.get(name).map(|v| v.round().max(0.0) as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub population: usize,
    pub generations: usize,
    pub f: f64,
    pub cr: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            population: 20,
            generations: 20,
            f: 0.75,
            cr: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeOutcome {
    pub best: HyperParams,
    pub best_score: f64,
    /// Objective calls spent: `population * (generations + 1)`.
    pub evaluations: u64,
    /// Best score after initialization and after each generation;
    /// non-increasing by construction.
    pub best_by_generation: Vec<f64>,
}

fn de_params(vector: &[f64], bounds: &[ParamSpec]) -> HyperParams {
    let mut map = BTreeMap::new();
    for (v, spec) in vector.iter().zip(bounds) {
        let value = if spec.integer {
            v.round().clamp(spec.lo, spec.hi)
        } else {
            *v
        };
        map.insert(spec.name.clone(), value);
    }
    HyperParams(map)
}

/// DE/rand/1/bin minimization of `objective` over the given bounds.
///
/// Trial vectors are `a + F * (b - c)` for three distinct random population
/// members, recombined dimension-wise at rate `cr` (one dimension always
/// crosses over), clipped to bounds, and kept when no worse than the target.
pub fn de_tune(
    objective: impl Fn(&HyperParams) -> f64 + Sync,
    bounds: &[ParamSpec],
    cfg: &DeConfig,
    seed: u64,
) -> Result<DeOutcome, LearnError> {
    if bounds.is_empty() {
        return Err(LearnError::InvalidBounds("no parameters to tune".into()));
    }
    for spec in bounds {
        if !spec.lo.is_finite() || !spec.hi.is_finite() || spec.lo > spec.hi {
            return Err(LearnError::InvalidBounds(format!(
                "parameter '{}' has bounds [{}, {}]",
                spec.name, spec.lo, spec.hi
            )));
        }
    }
    if cfg.population < 4 {
        return Err(LearnError::InvalidBounds(format!(
            "DE/rand/1 needs a population of at least 4, got {}",
            cfg.population
        )));
    }
    if !(0.0..=1.0).contains(&cfg.cr) || !cfg.f.is_finite() || cfg.f <= 0.0 {
        return Err(LearnError::InvalidBounds(format!(
            "mutation factor {} / crossover rate {} out of range",
            cfg.f, cfg.cr
        )));
    }
    let d = bounds.len();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut population: Vec<Vec<f64>> = (0..cfg.population)
        .map(|_| {
            bounds
                .iter()
                .map(|s| {
                    if s.hi > s.lo {
                        rng.gen_range(s.lo..s.hi)
                    } else {
                        s.lo
                    }
                })
                .collect()
        })
        .collect();
    let mut scores: Vec<f64> = population
        .iter()
        .map(|v| objective(&de_params(v, bounds)))
        .collect();
    let mut evaluations = cfg.population as u64;

    let best_of = |scores: &[f64]| -> usize {
        let mut best = 0;
        for i in 1..scores.len() {
            if scores[i] < scores[best] {
                best = i;
            }
        }
        best
    };
    let mut best_idx = best_of(&scores);
    let mut best_vec = population[best_idx].clone();
    let mut best_score = scores[best_idx];
    let mut history = vec![best_score];

    for _ in 0..cfg.generations {
        for i in 0..cfg.population {
            let mut pick = || loop {
                let j = rng.gen_range(0..cfg.population);
                if j != i {
                    return j;
                }
            };
            let a = pick();
            let b = loop {
                let j = pick();
                if j != a {
                    break j;
                }
            };
            let c = loop {
                let j = pick();
                if j != a && j != b {
                    break j;
                }
            };
            let j_rand = rng.gen_range(0..d);
            let mut trial = population[i].clone();
            for j in 0..d {
                if j == j_rand || rng.gen_range(0.0..1.0) < cfg.cr {
                    let v = population[a][j] + cfg.f * (population[b][j] - population[c][j]);
                    trial[j] = v.clamp(bounds[j].lo, bounds[j].hi);
                }
            }
            let trial_score = objective(&de_params(&trial, bounds));
            evaluations += 1;
            if trial_score <= scores[i] {
                population[i] = trial;
                scores[i] = trial_score;
                if trial_score < best_score {
                    best_score = trial_score;
                    best_vec = population[i].clone();
                }
            }
        }
        best_idx = best_of(&scores);
        if scores[best_idx] < best_score {
            best_score = scores[best_idx];
            best_vec = population[best_idx].clone();
        }
        history.push(best_score);
    }
    Ok(DeOutcome {
        best: de_params(&best_vec, bounds),
        best_score,
        evaluations,
        best_by_generation: history,
    })
}

/// Tuning space for the regression tree: depth and leaf-size knobs.
pub fn regressor_space() -> Vec<ParamSpec> {
    vec![
        ParamSpec::integer("max_depth", 1, 12),
        ParamSpec::integer("min_samples_split", 2, 20),
        ParamSpec::integer("min_samples_leaf", 1, 12),
    ]
}

fn regressor_params(hp: &HyperParams) -> TreeParams {
    TreeParams {
        max_depth: hp.get("max_depth").map(|v| v.round() as u32),
        min_samples_split: hp.get_usize("min_samples_split").unwrap_or(2).max(2),
        min_samples_leaf: hp.get_usize("min_samples_leaf").unwrap_or(1).max(1),
        max_features: MaxFeatures::All,
    }
}

/// Fits a regression tree with DE-tuned hyperparameters.
///
/// The tuner scores candidates by their median magnitude of relative error on
/// an internal 2:1 split of the training rows, then the winning parameters
/// are refit on the full table. Tables too small to split skip tuning and
/// use default parameters.
pub fn fit_regressor_tuned(
    table: &ProjectTable,
    cfg: &DeConfig,
    seed: u64,
) -> Result<(TreeNode, HyperParams), LearnError> {
    if table.n_rows() < 6 {
        let tree = fit_tree(
            table,
            &TreeParams::default(),
            SplitCriterion::Variance,
            derive_seed(seed, "regressor"),
        )?;
        return Ok((tree, HyperParams::default()));
    }
    let (train_idx, test_idx) = crate::data::split_row_indices(table, derive_seed(seed, "tune-split"))?;
    let train = table.subset_rows(&train_idx);
    let holdout = table.subset_rows(&test_idx);
    let objective = |hp: &HyperParams| -> f64 {
        let params = regressor_params(hp);
        match fit_tree(&train, &params, SplitCriterion::Variance, derive_seed(seed, "tune-fit")) {
            Ok(tree) => {
                let mut errs: Vec<f64> = (0..holdout.n_rows())
                    .map(|i| mre(tree.predict(holdout.row(i)), holdout.labels()[i]))
                    .collect();
                errs.sort_by(f64::total_cmp);
                crate::util::median(&errs).unwrap_or(f64::INFINITY)
            }
            Err(_) => f64::INFINITY,
        }
    };
    let outcome = de_tune(objective, &regressor_space(), cfg, derive_seed(seed, "de"))?;
    let tree = fit_tree(
        table,
        &regressor_params(&outcome.best),
        SplitCriterion::Variance,
        derive_seed(seed, "regressor"),
    )?;
    Ok((tree, outcome.best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, Task};
    use std::sync::Arc;

    fn class_table(features: Vec<Vec<f64>>, labels: Vec<f64>) -> ProjectTable {
        let f = features[0].len();
        let names = (0..f).map(|i| format!("f{i}")).collect();
        let schema =
            Arc::new(FeatureSchema::new(Task::Classification, names, "buggy", None).unwrap());
        ProjectTable::new("t", schema, features, labels, None).unwrap()
    }

    fn reg_table(features: Vec<Vec<f64>>, targets: Vec<f64>) -> ProjectTable {
        let f = features[0].len();
        let names = (0..f).map(|i| format!("f{i}")).collect();
        let schema = Arc::new(FeatureSchema::new(Task::Regression, names, "y", None).unwrap());
        ProjectTable::new("t", schema, features, targets, None).unwrap()
    }

    #[test]
    fn tree_learns_a_clean_threshold() {
        let features: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let labels: Vec<f64> = (0..20).map(|i| f64::from(i >= 10)).collect();
        let t = class_table(features, labels);
        let tree = fit_tree(&t, &TreeParams::default(), SplitCriterion::Gini, 1).unwrap();
        match &tree {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 9.5);
            }
            TreeNode::Leaf { .. } => panic!("expected a split"),
        }
        assert_eq!(tree.predict(&[3.0]), 0.0);
        assert_eq!(tree.predict(&[15.0]), 1.0);
    }

    #[test]
    fn split_ties_prefer_the_lower_feature_index() {
        // feature 1 duplicates feature 0, so both give identical decreases
        let features: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let labels: Vec<f64> = (0..10).map(|i| f64::from(i >= 5)).collect();
        let t = class_table(features, labels);
        let tree = fit_tree(&t, &TreeParams::default(), SplitCriterion::Gini, 1).unwrap();
        match tree {
            TreeNode::Split { feature, .. } => assert_eq!(feature, 0),
            TreeNode::Leaf { .. } => panic!("expected a split"),
        }
    }

    #[test]
    fn depth_zero_gives_a_single_majority_leaf() {
        let features: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels: Vec<f64> = (0..10).map(|i| f64::from(i >= 7)).collect();
        let t = class_table(features, labels);
        let params = TreeParams {
            max_depth: Some(0),
            ..TreeParams::default()
        };
        let tree = fit_tree(&t, &params, SplitCriterion::Gini, 1).unwrap();
        match tree {
            TreeNode::Leaf { samples, value: LeafValue::Probs(p) } => {
                assert_eq!(samples, 10);
                assert_eq!(p, [0.7, 0.3]);
            }
            _ => panic!("expected a bare leaf"),
        }
    }

    #[test]
    fn min_samples_split_and_max_depth_stop_growth() {
        let features: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let labels: Vec<f64> = (0..16).map(|i| f64::from(i % 2 == 0)).collect();
        let t = class_table(features, labels);
        let params = TreeParams {
            min_samples_split: 17,
            ..TreeParams::default()
        };
        let tree = fit_tree(&t, &params, SplitCriterion::Gini, 1).unwrap();
        assert!(matches!(tree, TreeNode::Leaf { .. }));

        let params = TreeParams {
            max_depth: Some(2),
            ..TreeParams::default()
        };
        let tree = fit_tree(&t, &params, SplitCriterion::Gini, 1).unwrap();
        assert!(tree.depth() <= 2);
    }

    #[test]
    fn regression_tree_predicts_leaf_means() {
        let features: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64]).collect();
        let targets: Vec<f64> = (0..12).map(|i| if i < 6 { 10.0 } else { 50.0 }).collect();
        let t = reg_table(features, targets);
        let tree = fit_tree(&t, &TreeParams::default(), SplitCriterion::Variance, 1).unwrap();
        assert_eq!(tree.predict(&[2.0]), 10.0);
        assert_eq!(tree.predict(&[9.0]), 50.0);
    }

    #[test]
    fn single_unbootstrapped_tree_forest_equals_the_bare_tree() {
        let features: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![i as f64, (i % 7) as f64, (i % 3) as f64])
            .collect();
        let labels: Vec<f64> = (0..30).map(|i| f64::from(i % 2 == 0)).collect();
        let t = class_table(features, labels);
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            tree: TreeParams::default(),
        };
        let forest = fit_forest(&t, &params, SplitCriterion::Gini, 5).unwrap();
        let lone = fit_tree(
            &t,
            &TreeParams::default(),
            SplitCriterion::Gini,
            derive_seed(derive_seed_indexed(5, "tree", 0), "splits"),
        )
        .unwrap();
        for i in 0..t.n_rows() {
            assert_eq!(forest.predict_proba(t.row(i)).unwrap(), lone.predict(t.row(i)));
        }
    }

    #[test]
    fn forest_probability_is_the_mean_over_trees() {
        let features: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 11) as f64, (i % 5) as f64])
            .collect();
        let labels: Vec<f64> = (0..40).map(|i| f64::from(i % 3 == 0)).collect();
        let t = class_table(features, labels);
        let forest = fit_forest(&t, &ForestParams { n_trees: 7, ..ForestParams::default() }, SplitCriterion::Gini, 2).unwrap();
        for i in 0..t.n_rows() {
            let manual: f64 = forest.trees.iter().map(|tr| tr.predict(t.row(i))).sum::<f64>()
                / forest.trees.len() as f64;
            assert_eq!(forest.predict_proba(t.row(i)).unwrap(), manual);
        }
    }

    #[test]
    fn forest_fit_is_deterministic_per_seed() {
        let features: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 11) as f64, (i % 5) as f64, (i % 7) as f64])
            .collect();
        let labels: Vec<f64> = (0..40).map(|i| f64::from(i % 3 == 0)).collect();
        let t = class_table(features, labels);
        let a = fit_forest(&t, &ForestParams::default(), SplitCriterion::Gini, 11).unwrap();
        let b = fit_forest(&t, &ForestParams::default(), SplitCriterion::Gini, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predict_rejects_wrong_width_rows() {
        let t = class_table(
            (0..12).map(|i| vec![i as f64, 0.0]).collect(),
            (0..12).map(|i| f64::from(i % 2 == 0)).collect(),
        );
        let forest = fit_forest(&t, &ForestParams::default(), SplitCriterion::Gini, 1).unwrap();
        assert!(matches!(
            forest.predict_proba(&[1.0]),
            Err(LearnError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn importances_cover_both_additive_features_and_sum_to_one() {
        use rand::Rng;
        let mut rng = StdRng::seed_from_u64(3);
        let features: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let labels: Vec<f64> = features
            .iter()
            .map(|r| f64::from(r[0] + r[1] > 1.0))
            .collect();
        let t = class_table(features, labels);
        let forest = fit_forest(&t, &ForestParams::default(), SplitCriterion::Gini, 4).unwrap();
        let imp = forest.feature_importance();
        assert!(imp[0] > 0.1 && imp[1] > 0.1, "importances {imp:?}");
        assert!(imp[2] < imp[0] && imp[2] < imp[1]);
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn importances_recomputed_from_recorded_splits_match() {
        let features: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i % 10) as f64, (i % 4) as f64])
            .collect();
        let labels: Vec<f64> = (0..50).map(|i| f64::from((i % 10) >= 5)).collect();
        let t = class_table(features, labels);
        let forest =
            fit_forest(&t, &ForestParams { n_trees: 5, ..ForestParams::default() }, SplitCriterion::Gini, 8)
                .unwrap();
        // oracle: re-walk every tree by hand
        fn walk(node: &TreeNode, root: f64, acc: &mut [f64]) {
            if let TreeNode::Split { feature, samples, decrease, left, right, .. } = node {
                acc[*feature] += decrease * (*samples as f64) / root;
                walk(left, root, acc);
                walk(right, root, acc);
            }
        }
        let mut raw = vec![0.0; 2];
        for tree in &forest.trees {
            let mut acc = vec![0.0; 2];
            walk(tree, tree.samples() as f64, &mut acc);
            raw[0] += acc[0];
            raw[1] += acc[1];
        }
        raw[0] /= forest.trees.len() as f64;
        raw[1] /= forest.trees.len() as f64;
        let sum = raw[0] + raw[1];
        let expect = [raw[0] / sum, raw[1] / sum];
        let got = forest.feature_importance();
        assert!((got[0] - expect[0]).abs() < 1e-12);
        assert!((got[1] - expect[1]).abs() < 1e-12);
    }

    #[test]
    fn unselected_criterion_zero_variance_target_yields_leaf() {
        let t = reg_table((0..8).map(|i| vec![i as f64]).collect(), vec![4.0; 8]);
        let tree = fit_tree(&t, &TreeParams::default(), SplitCriterion::Variance, 1).unwrap();
        assert!(matches!(tree, TreeNode::Leaf { .. }));
    }

    #[test]
    fn de_minimizes_the_sphere() {
        let bounds = vec![ParamSpec::real("x", -5.0, 5.0), ParamSpec::real("y", -5.0, 5.0)];
        let sphere = |hp: &HyperParams| {
            let x = hp.get("x").unwrap();
            let y = hp.get("y").unwrap();
            x * x + y * y
        };
        let mut hits = 0;
        for seed in 0..10 {
            let out = de_tune(sphere, &bounds, &DeConfig::default(), seed).unwrap();
            assert_eq!(out.evaluations, 420);
            assert!(out.best_score < 0.5, "seed {seed} stalled at {}", out.best_score);
            for w in out.best_by_generation.windows(2) {
                assert!(w[1] <= w[0], "best score regressed: {:?}", out.best_by_generation);
            }
            if out.best_score < 1e-2 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "only {hits}/10 seeds got below 1e-2");
    }

    #[test]
    fn de_respects_bounds_and_integer_rounding() {
        let bounds = vec![ParamSpec::integer("d", 1, 12)];
        let out = de_tune(
            |hp| (hp.get("d").unwrap() - 7.3).abs(),
            &bounds,
            &DeConfig::default(),
            3,
        )
        .unwrap();
        let d = out.best.get("d").unwrap();
        assert_eq!(d, d.round());
        assert!((1.0..=12.0).contains(&d));
        assert_eq!(d, 7.0);
    }

    #[test]
    fn de_rejects_degenerate_setups() {
        let ok = vec![ParamSpec::real("x", 0.0, 1.0)];
        assert!(de_tune(|_| 0.0, &[], &DeConfig::default(), 1).is_err());
        let tiny = DeConfig { population: 3, ..DeConfig::default() };
        assert!(matches!(
            de_tune(|_| 0.0, &ok, &tiny, 1),
            Err(LearnError::InvalidBounds(_))
        ));
        let bad = vec![ParamSpec::real("x", 2.0, 1.0)];
        assert!(de_tune(|_| 0.0, &bad, &DeConfig::default(), 1).is_err());
    }

    #[test]
    fn tuned_regressor_returns_in_bounds_params() {
        use rand::Rng;
        let mut rng = StdRng::seed_from_u64(5);
        let features: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen_range(0.0..10.0)]).collect();
        let targets: Vec<f64> = features.iter().map(|r| r[0] * 3.0 + 1.0).collect();
        let t = reg_table(features, targets);
        let (tree, hp) = fit_regressor_tuned(&t, &DeConfig::default(), 2).unwrap();
        assert!(matches!(tree, TreeNode::Split { .. }));
        let d = hp.get("max_depth").unwrap();
        assert!((1.0..=12.0).contains(&d));
    }
}
