//! Bellwether tournaments and their hierarchical generalization.
//!
//! A tournament trains one model per candidate project, scores every model on
//! every other candidate, aggregates per-goal medians, normalizes each goal
//! across candidates, and crowns the candidate that loses fewest pairwise
//! comparisons under a multi-goal continuous-domination indicator. The
//! hierarchical pass runs one tournament per leaf cluster of a CF tree, then
//! promotes winners upward: each internal cluster holds a tournament among
//! its child clusters' winners, ending in a single corpus-level bellwether.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ClusterError, ClusterTree};
use crate::data::{DataError, ProjectTable, Task};
use crate::eval::{self, EvalError, GoalVector};
use crate::learn::{
    de_tune, fit_forest, fit_regressor_tuned, fit_tree, feature_importance, regressor_space,
    DeConfig, ForestModel, ForestParams, HyperParams, LearnError, MaxFeatures, SplitCriterion,
    TreeNode, TreeParams,
};
use crate::prep::{cfs_select, smote, FeatureSubset, PrepError, SMOTE_K};
use crate::util::derive_seed;

#[derive(Debug, Error)]
pub enum BellwetherError {
    #[error("goal vectors disagree in kind or length")]
    GoalMismatch,
    #[error("tournament needs at least one candidate")]
    NoCandidates,
    #[error("candidate '{0}' appears twice")]
    DuplicateCandidate(String),
    #[error("every candidate was disqualified: {0}")]
    AllCandidatesFailed(String),
    #[error("project '{0}' is clustered but missing from the corpus")]
    UnknownProject(String),
    #[error("no cluster recorded at level {level} for the descended path")]
    UnknownCluster { level: usize },
    #[error("model was trained with feature '{feature}' that table '{table}' lacks")]
    SchemaMismatch { feature: String, table: String },
    #[error("leaf sizes sum to {got} but the corpus has {expected} projects")]
    InconsistentSizes { expected: usize, got: usize },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Continuous-domination loss of `x` against `y` over normalized goals.
/// More negative is better; `loss(x, x)` is exactly -1 up to rounding.
pub fn loss(x: &GoalVector, y: &GoalVector) -> Result<f64, BellwetherError> {
    if x.kind != y.kind || x.len() != y.len() {
        return Err(BellwetherError::GoalMismatch);
    }
    let n = x.len() as f64;
    let weights = x.weights();
    let mut sum = 0.0;
    for j in 0..x.len() {
        sum -= (weights[j] * (x.values[j] - y.values[j]) / n).exp() / n;
    }
    Ok(sum)
}

/// `x` is worse than `y` when it loses the two-way loss comparison.
pub fn worse(x: &GoalVector, y: &GoalVector) -> Result<bool, BellwetherError> {
    Ok(loss(x, y)? > loss(y, x)?)
}

/// How each candidate's raw per-goal scores become comparable: every goal is
/// min-max normalized across the candidate set before domination counting.
fn normalize_goals(scored: &[(String, GoalVector)]) -> Vec<GoalVector> {
    let goals = scored[0].1.len();
    let mut lo = vec![f64::INFINITY; goals];
    let mut hi = vec![f64::NEG_INFINITY; goals];
    for (_, g) in scored {
        for j in 0..goals {
            lo[j] = lo[j].min(g.values[j]);
            hi[j] = hi[j].max(g.values[j]);
        }
    }
    scored
        .iter()
        .map(|(_, g)| GoalVector {
            kind: g.kind,
            values: (0..goals)
                .map(|j| {
                    if hi[j] > lo[j] {
                        (g.values[j] - lo[j]) / (hi[j] - lo[j])
                    } else {
                        0.0
                    }
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    /// Index into the scored slice.
    pub winner: usize,
    /// Pairwise losses per candidate, in input order.
    pub losses: Vec<usize>,
}

/// Round-robin domination count over normalized goals. The winner is the
/// candidate with the fewest losses; ties go to the lexicographically
/// smallest project id.
pub fn select_winner(scored: &[(String, GoalVector)]) -> Result<SelectionOutcome, BellwetherError> {
    if scored.is_empty() {
        return Err(BellwetherError::NoCandidates);
    }
    let kind = scored[0].1.kind;
    if scored.iter().any(|(_, g)| g.kind != kind || g.len() != kind.len()) {
        return Err(BellwetherError::GoalMismatch);
    }
    if scored.len() == 1 {
        return Ok(SelectionOutcome {
            winner: 0,
            losses: vec![0],
        });
    }
    let normalized = normalize_goals(scored);
    let n = scored.len();
    let mut losses = vec![0usize; n];
    for x in 0..n {
        for y in 0..n {
            if x != y && worse(&normalized[x], &normalized[y])? {
                losses[x] += 1;
            }
        }
    }
    let mut winner = 0;
    for i in 1..n {
        if losses[i] < losses[winner]
            || (losses[i] == losses[winner] && scored[i].0 < scored[winner].0)
        {
            winner = i;
        }
    }
    Ok(SelectionOutcome { winner, losses })
}

/// Knobs for the per-project training pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Correlation-based feature selection before anything else.
    pub select_features: bool,
    /// Oversample the minority class (classification only).
    pub balance: bool,
    /// Tune learner hyperparameters with differential evolution.
    pub tune: bool,
    pub forest: ForestParams,
    pub de: DeConfig,
}

impl PipelineConfig {
    /// Defect pipeline: feature selection, class balancing, untuned forest.
    pub fn defect() -> Self {
        PipelineConfig {
            select_features: true,
            balance: true,
            tune: false,
            forest: ForestParams::default(),
            de: DeConfig::default(),
        }
    }

    /// Health pipeline: feature selection, tuned regression tree.
    pub fn health() -> Self {
        PipelineConfig {
            select_features: true,
            balance: false,
            tune: true,
            forest: ForestParams::default(),
            de: DeConfig::default(),
        }
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification => Self::defect(),
            Task::Regression => Self::health(),
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::defect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Learner {
    Forest(ForestModel),
    Tree { tree: TreeNode, params: HyperParams },
}

/// A trained per-project model plus everything needed to apply it elsewhere:
/// the training schema's feature names and the selected subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub project_id: String,
    pub task: Task,
    pub feature_names: Vec<String>,
    pub subset: FeatureSubset,
    pub learner: Learner,
}

impl TrainedModel {
    /// Raw outputs on another table: defect probabilities for classification,
    /// predicted values for regression. Columns are resolved by name, so the
    /// table may order or extend its features differently.
    pub fn predict(&self, table: &ProjectTable) -> Result<Vec<f64>, BellwetherError> {
        let positions: Vec<usize> = self
            .subset
            .selected
            .iter()
            .map(|&j| {
                let name = &self.feature_names[j];
                table
                    .schema
                    .feature_index(name)
                    .ok_or_else(|| BellwetherError::SchemaMismatch {
                        feature: name.clone(),
                        table: table.project_id.clone(),
                    })
            })
            .collect::<Result<_, _>>()?;
        let mut buf = vec![0.0; positions.len()];
        let mut out = Vec::with_capacity(table.n_rows());
        for i in 0..table.n_rows() {
            let row = table.row(i);
            for (b, &p) in buf.iter_mut().zip(&positions) {
                *b = row[p];
            }
            let v = match &self.learner {
                Learner::Forest(f) => f.predict_proba(&buf)?,
                Learner::Tree { tree, .. } => tree.predict(&buf),
            };
            out.push(v);
        }
        Ok(out)
    }

    pub fn score(&self, table: &ProjectTable) -> Result<GoalVector, BellwetherError> {
        let outputs = self.predict(table)?;
        Ok(eval::score_table(&outputs, table)?)
    }

    /// Importances aligned to the full training schema; features outside the
    /// selected subset score zero.
    pub fn importance(&self) -> Vec<f64> {
        let sub = match &self.learner {
            Learner::Forest(f) => f.feature_importance(),
            Learner::Tree { tree, .. } => {
                feature_importance(std::slice::from_ref(tree), self.subset.selected.len())
            }
        };
        let mut full = vec![0.0; self.feature_names.len()];
        for (k, &j) in self.subset.selected.iter().enumerate() {
            full[j] = sub[k];
        }
        full
    }
}

fn tree_knobs(hp: &HyperParams, max_features: MaxFeatures) -> TreeParams {
    TreeParams {
        max_depth: hp.get("max_depth").map(|v| v.round() as u32),
        min_samples_split: hp.get_usize("min_samples_split").unwrap_or(2).max(2),
        min_samples_leaf: hp.get_usize("min_samples_leaf").unwrap_or(1).max(1),
        max_features,
    }
}

fn tune_forest(
    table: &ProjectTable,
    config: &PipelineConfig,
    seed: u64,
) -> Result<ForestParams, TrainError> {
    let (train_idx, holdout_idx) =
        crate::data::split_row_indices(table, derive_seed(seed, "tune-split"))?;
    let train = table.subset_rows(&train_idx);
    let holdout = table.subset_rows(&holdout_idx);
    let labels = holdout.bool_labels();
    let base = config.forest;
    let objective = |hp: &HyperParams| {
        let params = ForestParams {
            tree: tree_knobs(hp, base.tree.max_features),
            ..base
        };
        let forest = match fit_forest(&train, &params, SplitCriterion::Gini, derive_seed(seed, "tune-fit")) {
            Ok(f) => f,
            Err(_) => return f64::INFINITY,
        };
        let scores: Vec<f64> = (0..holdout.n_rows())
            .map(|i| forest.predict_proba(holdout.row(i)).unwrap_or(0.5))
            .collect();
        match eval::confusion(&scores, &labels, eval::DECISION_THRESHOLD) {
            Ok(c) => (1.0 - c.recall()) + c.false_alarm(),
            Err(_) => f64::INFINITY,
        }
    };
    let outcome = de_tune(objective, &regressor_space(), &config.de, derive_seed(seed, "de"))?;
    Ok(ForestParams {
        tree: tree_knobs(&outcome.best, base.tree.max_features),
        ..base
    })
}

/// Trains one project's model: feature selection, then balancing and a
/// forest for classification, or a (possibly tuned) regression tree.
pub fn train_pipeline(
    table: &ProjectTable,
    config: &PipelineConfig,
    seed: u64,
) -> Result<TrainedModel, TrainError> {
    let subset = if config.select_features {
        cfs_select(table)?
    } else {
        FeatureSubset {
            selected: (0..table.n_features()).collect(),
            merit: 0.0,
        }
    };
    let selected = table.select_features(&subset.selected);
    let learner = match table.schema.task {
        Task::Classification => {
            let balanced = if config.balance {
                smote(&selected, SMOTE_K, derive_seed(seed, "smote"))?
            } else {
                selected
            };
            let params = if config.tune {
                tune_forest(&balanced, config, seed)?
            } else {
                config.forest
            };
            Learner::Forest(fit_forest(
                &balanced,
                &params,
                SplitCriterion::Gini,
                derive_seed(seed, "forest"),
            )?)
        }
        Task::Regression => {
            if config.tune {
                let (tree, params) =
                    fit_regressor_tuned(&selected, &config.de, derive_seed(seed, "tune"))?;
                Learner::Tree { tree, params }
            } else {
                let tree = fit_tree(
                    &selected,
                    &TreeParams::default(),
                    SplitCriterion::Variance,
                    derive_seed(seed, "tree"),
                )?;
                Learner::Tree {
                    tree,
                    params: HyperParams::default(),
                }
            }
        }
    };
    Ok(TrainedModel {
        project_id: table.project_id.clone(),
        task: table.schema.task,
        feature_names: table.schema.feature_names.clone(),
        subset,
        learner,
    })
}

/// Trains each project at most once per run. The training seed depends only
/// on the run's master seed and the project id, never on which tournament
/// asked, so a project's model is identical at every level it reaches.
pub struct ModelCache {
    config: PipelineConfig,
    master_seed: u64,
    entries: HashMap<String, Result<Arc<TrainedModel>, String>>,
}

impl ModelCache {
    pub fn new(config: PipelineConfig, master_seed: u64) -> Self {
        ModelCache {
            config,
            master_seed,
            entries: HashMap::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn get_or_train(&mut self, table: &ProjectTable) -> Result<Arc<TrainedModel>, String> {
        if let Some(hit) = self.entries.get(&table.project_id) {
            return hit.clone();
        }
        let seed = derive_seed(self.master_seed, &table.project_id);
        let trained = train_pipeline(table, &self.config, seed)
            .map(Arc::new)
            .map_err(|e| e.to_string());
        self.entries.insert(table.project_id.clone(), trained.clone());
        trained
    }

    pub fn cached(&self, project_id: &str) -> Option<Result<Arc<TrainedModel>, String>> {
        self.entries.get(project_id).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ids of successfully trained projects, sorted.
    pub fn trained_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, v)| v.is_ok())
            .map(|(k, _)| k.as_str())
            .collect();
        ids.sort_unstable();
        ids
    }
}

/// One tournament's full account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentOutcome {
    pub winner: String,
    /// Pairwise losses per qualified candidate.
    pub losses: BTreeMap<String, usize>,
    /// Aggregated raw goal medians per qualified candidate.
    pub scores: BTreeMap<String, GoalVector>,
    /// Disqualified candidates and why.
    pub failed: BTreeMap<String, String>,
    /// Budgeted source-target evaluations: `c * (c - 1)` for `c` candidates.
    pub comparisons: u64,
    /// Evaluations actually executed; equals `comparisons` when every
    /// candidate trains.
    pub completed: u64,
}

/// Runs one round-robin tournament over the candidate tables.
///
/// Every candidate's model is scored on every other candidate (including
/// ones whose own training failed); per-goal medians over those scores are
/// the candidate's aggregate, and [`select_winner`] picks the bellwether.
/// A single candidate wins by default at zero cost.
pub fn tournament(
    candidates: &[&ProjectTable],
    cache: &mut ModelCache,
) -> Result<TournamentOutcome, BellwetherError> {
    let c = candidates.len();
    if c == 0 {
        return Err(BellwetherError::NoCandidates);
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for t in candidates {
            if !seen.insert(t.project_id.as_str()) {
                return Err(BellwetherError::DuplicateCandidate(t.project_id.clone()));
            }
        }
    }
    let mut failed = BTreeMap::new();
    let mut models: Vec<Option<Arc<TrainedModel>>> = Vec::with_capacity(c);
    for t in candidates {
        match cache.get_or_train(t) {
            Ok(m) => models.push(Some(m)),
            Err(reason) => {
                failed.insert(t.project_id.clone(), reason);
                models.push(None);
            }
        }
    }
    if c == 1 {
        let id = candidates[0].project_id.clone();
        return Ok(TournamentOutcome {
            winner: id.clone(),
            losses: BTreeMap::from([(id, 0)]),
            scores: BTreeMap::new(),
            failed,
            comparisons: 0,
            completed: 0,
        });
    }
    let comparisons = (c * (c - 1)) as u64;
    let mut completed = 0u64;
    let mut aggregated: Vec<(String, GoalVector)> = Vec::new();
    for (i, model) in models.iter().enumerate() {
        let Some(model) = model else { continue };
        let mut per_goal: Vec<Vec<f64>> = Vec::new();
        let mut kind = None;
        for (j, target) in candidates.iter().enumerate() {
            if i == j {
                continue;
            }
            completed += 1;
            if let Ok(g) = model.score(target) {
                if per_goal.is_empty() {
                    per_goal = vec![Vec::new(); g.len()];
                    kind = Some(g.kind);
                }
                for (col, v) in per_goal.iter_mut().zip(&g.values) {
                    col.push(*v);
                }
            }
        }
        match kind {
            Some(kind) => aggregated.push((
                candidates[i].project_id.clone(),
                GoalVector {
                    kind,
                    values: per_goal
                        .iter()
                        .map(|col| crate::util::median(col).unwrap())
                        .collect(),
                },
            )),
            None => {
                failed.insert(
                    candidates[i].project_id.clone(),
                    "no evaluation target could be scored".to_string(),
                );
            }
        }
    }
    if aggregated.is_empty() {
        let reasons = failed
            .iter()
            .map(|(id, why)| format!("{id}: {why}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(BellwetherError::AllCandidatesFailed(reasons));
    }
    let selection = select_winner(&aggregated)?;
    let losses = aggregated
        .iter()
        .zip(&selection.losses)
        .map(|((id, _), &l)| (id.clone(), l))
        .collect();
    let scores = aggregated.iter().cloned().collect();
    Ok(TournamentOutcome {
        winner: aggregated[selection.winner].0.clone(),
        losses,
        scores,
        failed,
        comparisons,
        completed,
    })
}

/// One cluster's tournament within the hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOutcome {
    /// Entry-index path identifying the cluster; empty at level zero.
    pub prefix: Vec<usize>,
    /// Candidate project ids, in cluster order.
    pub candidates: Vec<String>,
    pub outcome: TournamentOutcome,
}

pub struct GeneralResult {
    /// `levels[l]` holds the outcomes of every level-`l` cluster; level zero
    /// is the single corpus-wide promotion, the last level the leaf clusters.
    pub levels: Vec<Vec<ClusterOutcome>>,
    /// Budgeted evaluations summed over every tournament.
    pub comparisons: u64,
    /// Evaluations actually executed.
    pub completed: u64,
    /// Every model trained along the way, keyed by project id.
    pub models: ModelCache,
}

impl GeneralResult {
    /// The corpus-level bellwether.
    pub fn general0(&self) -> &str {
        &self.levels[0][0].outcome.winner
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn cluster(&self, level: usize, prefix: &[usize]) -> Option<&ClusterOutcome> {
        self.levels.get(level)?.iter().find(|c| c.prefix == prefix)
    }

    pub fn map(&self) -> BellwetherMap {
        BellwetherMap {
            levels: self
                .levels
                .iter()
                .map(|lvl| {
                    lvl.iter()
                        .map(|c| MapEntry {
                            prefix: c.prefix.clone(),
                            candidates: c.candidates.clone(),
                            winner: c.outcome.winner.clone(),
                            comparisons: c.outcome.comparisons,
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Runs the full hierarchical pass: a tournament in every leaf cluster, then
/// promotion tournaments among child winners at each level up to the root.
pub fn general(
    tree: &ClusterTree,
    corpus: &BTreeMap<String, ProjectTable>,
    config: &PipelineConfig,
    master_seed: u64,
) -> Result<GeneralResult, BellwetherError> {
    let depth = tree.depth();
    let mut cache = ModelCache::new(config.clone(), master_seed);
    let mut levels: Vec<Vec<ClusterOutcome>> = vec![Vec::new(); depth + 1];
    for level in (0..=depth).rev() {
        let clusters = tree.clusters_at_level(level)?;
        let mut outcomes = Vec::with_capacity(clusters.len());
        for cluster in &clusters {
            let candidates: Vec<String> = if level == depth {
                cluster.members.clone()
            } else {
                levels[level + 1]
                    .iter()
                    .filter(|o| o.prefix[..level] == cluster.prefix[..])
                    .map(|o| o.outcome.winner.clone())
                    .collect()
            };
            let tables: Vec<&ProjectTable> = candidates
                .iter()
                .map(|id| {
                    corpus
                        .get(id)
                        .ok_or_else(|| BellwetherError::UnknownProject(id.clone()))
                })
                .collect::<Result<_, _>>()?;
            let outcome = tournament(&tables, &mut cache)?;
            outcomes.push(ClusterOutcome {
                prefix: cluster.prefix.clone(),
                candidates,
                outcome,
            });
        }
        levels[level] = outcomes;
    }
    let comparisons = levels
        .iter()
        .flatten()
        .map(|c| c.outcome.comparisons)
        .sum();
    let completed = levels.iter().flatten().map(|c| c.outcome.completed).sum();
    Ok(GeneralResult {
        levels,
        comparisons,
        completed,
        models: cache,
    })
}

/// Evaluation budgets implied by a clustering, counted in source-target
/// model evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonBudget {
    /// Within-leaf round robins: the sum of `c * (c - 1)` over leaf clusters.
    pub leaf: u64,
    /// Promotion round robins at every internal level, including the final
    /// corpus-wide one.
    pub promotion: u64,
}

impl ComparisonBudget {
    pub fn total(&self) -> u64 {
        self.leaf + self.promotion
    }

    /// Budget of a flat one-level hierarchy: every leaf cluster plays its
    /// round robin, then the leaf winners meet once.
    pub fn from_leaf_sizes(n_projects: usize, sizes: &[usize]) -> Result<Self, BellwetherError> {
        let got: usize = sizes.iter().sum();
        if got != n_projects {
            return Err(BellwetherError::InconsistentSizes {
                expected: n_projects,
                got,
            });
        }
        let leaf = sizes.iter().map(|&c| (c * c.saturating_sub(1)) as u64).sum();
        let m = sizes.len();
        Ok(ComparisonBudget {
            leaf,
            promotion: (m * m.saturating_sub(1)) as u64,
        })
    }

    /// Exact budget of the hierarchical pass over this tree: what
    /// [`general`] will report as `comparisons`.
    pub fn for_tree(tree: &ClusterTree) -> Result<Self, BellwetherError> {
        let depth = tree.depth();
        let leaf = tree
            .clusters_at_level(depth)?
            .iter()
            .map(|c| {
                let m = c.members.len();
                (m * m.saturating_sub(1)) as u64
            })
            .sum();
        let mut promotion = 0u64;
        for level in 0..depth {
            let parents = tree.clusters_at_level(level)?;
            let children = tree.clusters_at_level(level + 1)?;
            for p in &parents {
                let k = children
                    .iter()
                    .filter(|c| c.prefix[..level] == p.prefix[..])
                    .count();
                promotion += (k * k.saturating_sub(1)) as u64;
            }
        }
        Ok(ComparisonBudget { leaf, promotion })
    }
}

/// Serializable view of a finished hierarchy: enough to route new projects
/// to their bellwethers without retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellwetherMap {
    pub levels: Vec<Vec<MapEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub prefix: Vec<usize>,
    pub candidates: Vec<String>,
    pub winner: String,
    pub comparisons: u64,
}

/// A new project's bellwether at one level of the hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAssignment {
    pub level: usize,
    pub prefix: Vec<usize>,
    pub bellwether: String,
}

impl BellwetherMap {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn entry(&self, level: usize, prefix: &[usize]) -> Option<&MapEntry> {
        self.levels.get(level)?.iter().find(|e| e.prefix == prefix)
    }

    /// Drops a new project summary down the tree and reads off its
    /// bellwether at every level, coarsest first.
    pub fn assignments(
        &self,
        tree: &ClusterTree,
        raw_summary: &[f64],
    ) -> Result<Vec<LevelAssignment>, BellwetherError> {
        let path = tree.descend(raw_summary)?;
        let mut out = Vec::with_capacity(self.levels.len());
        for level in 0..self.levels.len() {
            let prefix = &path[..level.min(path.len())];
            let entry = self
                .entry(level, prefix)
                .ok_or(BellwetherError::UnknownCluster { level })?;
            out.push(LevelAssignment {
                level,
                prefix: prefix.to_vec(),
                bellwether: entry.winner.clone(),
            });
        }
        Ok(out)
    }
}
