//! Experiment harness: repeated project-level holdouts, treatment scoring,
//! budget accounting, rank tables, and a deployable bundle from the first
//! repeat.
//!
//! Each repeat splits the corpus into training and test projects, builds the
//! cluster hierarchy over the training side only, and scores four treatments
//! on every test project's held-out rows: a model trained on the project's
//! own earlier rows (`self`), one model trained on all training projects
//! pooled (`global`), the winner of a flat corpus-wide tournament
//! (`bellwether0`), and the hierarchical winner at the configured report
//! level (`general<L>`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bellwether::{
    general, tournament, train_pipeline, BellwetherError, BellwetherMap, ComparisonBudget,
    GeneralResult, ModelCache, PipelineConfig, TrainedModel,
};
use crate::cluster::{build_tree, ClusterError, ClusterTree, DEFAULT_BRANCHING, DEFAULT_THRESHOLD};
use crate::data::{
    split_projects, split_row_indices, summarize, DataError, ProjectTable, Task, DEFAULT_HORIZON,
    HEALTH_GOALS,
};
use crate::eval::{GoalKind, GoalVector};
use crate::stats::{scott_knott, StatsError, TreatmentSamples};
use crate::util::{derive_seed, derive_seed_indexed, mean, median};

pub const TREATMENT_SELF: &str = "self";
pub const TREATMENT_GLOBAL: &str = "global";
pub const TREATMENT_BELLWETHER0: &str = "bellwether0";

/// Budget-row name for the hierarchical pass, shared by every reported level.
pub const TREATMENT_GENERAL: &str = "general";

/// Project id given to the table pooled from every training project.
pub const POOLED_ID: &str = "_pooled";

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RigError {
    #[error("invalid rig configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("leakage check failed: {0}")]
    Leakage(String),
    #[error("comparison budget mismatch: expected {expected}, ran {got}")]
    BudgetMismatch { expected: u64, got: u64 },
    #[error("unknown criterion {0:?}")]
    UnknownCriterion(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        source: Box<csv::Error>,
    },
    #[error("serializing {what}: {source}")]
    Json {
        what: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Bellwether(#[from] BellwetherError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Everything a rig run needs. Serializes to a flat JSON object; omitted
/// fields take the defaults below, so a config file only has to name what it
/// overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigConfig {
    /// Directory of project CSVs; used by the command line, ignored by
    /// [`run_rig`], which takes loaded tables.
    pub corpus: Option<PathBuf>,
    /// Output directory; same caveat as `corpus`.
    pub out: Option<PathBuf>,
    pub task: Task,
    /// Health goal to predict; must be set for regression and absent for
    /// classification.
    pub goal: Option<String>,
    /// Label column name expected in defect CSVs.
    pub label: String,
    /// Effort column name expected in defect CSVs.
    pub effort: String,
    /// Months between health features and their target.
    pub horizon: usize,
    pub seed: u64,
    pub repeats: usize,
    pub branching_factor: usize,
    pub threshold: f64,
    /// Hierarchy levels whose bellwethers get deployed as `general<L>`
    /// treatments. Defaults to `[0]` for classification and `[1]` for
    /// regression; levels deeper than a repeat's tree are clamped to its
    /// leaf level while keeping the configured name.
    pub report_levels: Option<Vec<usize>>,
    pub n_trees: usize,
    pub select_features: Option<bool>,
    pub balance: Option<bool>,
    /// Hyperparameter tuning with differential evolution; defaults by task.
    pub de_enabled: Option<bool>,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            corpus: None,
            out: None,
            task: Task::Classification,
            goal: None,
            label: "buggy".to_string(),
            effort: "la".to_string(),
            horizon: DEFAULT_HORIZON,
            seed: 1,
            repeats: 10,
            branching_factor: DEFAULT_BRANCHING,
            threshold: DEFAULT_THRESHOLD,
            report_levels: None,
            n_trees: 100,
            select_features: None,
            balance: None,
            de_enabled: None,
        }
    }
}

impl RigConfig {
    pub fn health(goal: &str) -> Self {
        RigConfig {
            task: Task::Regression,
            goal: Some(goal.to_string()),
            ..RigConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), RigError> {
        if self.repeats == 0 {
            return Err(RigError::InvalidConfig("repeats must be at least 1".into()));
        }
        if self.branching_factor < 2 {
            return Err(RigError::InvalidConfig(format!(
                "branching factor must be at least 2, got {}",
                self.branching_factor
            )));
        }
        if !(self.threshold > 0.0) {
            return Err(RigError::InvalidConfig(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.n_trees == 0 {
            return Err(RigError::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(RigError::InvalidConfig("horizon must be at least 1".into()));
        }
        if let Some(levels) = &self.report_levels {
            if levels.is_empty() {
                return Err(RigError::InvalidConfig(
                    "report_levels must name at least one level".into(),
                ));
            }
            if levels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(RigError::InvalidConfig(format!(
                    "report_levels must be strictly increasing, got {levels:?}"
                )));
            }
        }
        match (self.task, &self.goal) {
            (Task::Classification, Some(g)) => Err(RigError::InvalidConfig(format!(
                "goal {g:?} does not apply to classification"
            ))),
            (Task::Regression, None) => Err(RigError::InvalidConfig(
                "regression needs a goal".into(),
            )),
            (Task::Regression, Some(g)) if !HEALTH_GOALS.contains(&g.as_str()) => Err(
                RigError::InvalidConfig(format!("unknown goal {g:?}, expected one of {HEALTH_GOALS:?}")),
            ),
            _ => Ok(()),
        }
    }

    /// Per-project training pipeline implied by this config: the task's
    /// defaults with any explicit overrides applied.
    pub fn pipeline(&self) -> PipelineConfig {
        let mut p = PipelineConfig::for_task(self.task);
        p.forest.n_trees = self.n_trees;
        if let Some(v) = self.select_features {
            p.select_features = v;
        }
        if let Some(v) = self.balance {
            p.balance = v;
        }
        if let Some(v) = self.de_enabled {
            p.tune = v;
        }
        p
    }

    pub fn report_levels_or_default(&self) -> Vec<usize> {
        self.report_levels.clone().unwrap_or_else(|| match self.task {
            Task::Classification => vec![0],
            Task::Regression => vec![1],
        })
    }
}

/// One scored (project, treatment, criterion) cell of one repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub repeat: usize,
    pub project: String,
    pub treatment: String,
    pub criterion: String,
    /// Raw metric value; `None` when the treatment failed on this project.
    pub value: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow {
    pub repeat: usize,
    pub treatment: String,
    pub n_projects: usize,
    pub comparisons: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankRow {
    pub criterion: String,
    pub rank: usize,
    pub treatment: String,
    pub median: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceRow {
    pub feature: String,
    /// Median importance over the report-level bellwether models.
    pub bellwether_importance: f64,
    /// Median importance over every training project's own model.
    pub self_importance: f64,
    /// Whether the bellwether importance exceeds the mean of the nonzero
    /// bellwether importances.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format_version: u32,
    pub task: Task,
    pub goal: Option<String>,
    pub seed: u64,
    pub repeat: usize,
    pub config_hash: String,
    pub report_level: usize,
    pub tree_file: String,
    pub map: BellwetherMap,
}

pub struct RigOutcome {
    pub config: RigConfig,
    pub results: Vec<ResultRow>,
    pub budget: Vec<BudgetRow>,
    pub ranks: Vec<RankRow>,
    pub importance: Vec<ImportanceRow>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriterionInfo {
    pub minimize: bool,
    /// Report in percent (samples are scaled by 100 before ranking).
    pub percent: bool,
}

/// Canonical reporting order across both tasks.
pub const CRITERION_ORDER: [&str; 6] =
    ["recall", "false_alarm", "precision", "popt20", "ifa", "mre"];

pub fn criterion_info(name: &str) -> Option<CriterionInfo> {
    let (minimize, percent) = match name {
        "recall" => (false, true),
        "false_alarm" => (true, true),
        "precision" => (false, true),
        "popt20" => (false, true),
        "ifa" => (true, false),
        "mre" => (true, false),
        _ => return None,
    };
    Some(CriterionInfo { minimize, percent })
}

/// FNV-1a over the config's canonical JSON, as 16 hex digits.
pub fn config_hash(config: &RigConfig) -> Result<String, RigError> {
    let text = serde_json::to_string(config).map_err(|e| RigError::Json {
        what: "config".to_string(),
        source: e,
    })?;
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in text.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}

struct RepeatOutput {
    results: Vec<ResultRow>,
    budget: Vec<BudgetRow>,
    importance: Vec<ImportanceRow>,
}

/// Runs the whole experiment and writes `results.csv`, `budget.csv`,
/// `ranks.csv`, `ranks.txt`, `importance.csv`, and `bundle/` under
/// `out_dir`. Results and budget files are rewritten after every repeat, so
/// an interrupted run leaves complete rows for the repeats that finished.
pub fn run_rig(
    corpus: &[ProjectTable],
    config: &RigConfig,
    out_dir: &Path,
) -> Result<RigOutcome, RigError> {
    config.validate()?;
    let tables = sorted_corpus(corpus, config)?;
    fs::create_dir_all(out_dir).map_err(|e| RigError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;

    let mut results = Vec::new();
    let mut budget = Vec::new();
    let mut importance = Vec::new();
    for repeat in 0..config.repeats {
        let out = run_repeat(repeat, &tables, config, out_dir)?;
        results.extend(out.results);
        budget.extend(out.budget);
        if repeat == 0 {
            importance = out.importance;
        }
        write_results_csv(&out_dir.join("results.csv"), &results)?;
        write_budget_csv(&out_dir.join("budget.csv"), &budget)?;
    }

    write_importance_csv(&out_dir.join("importance.csv"), &importance)?;
    let ranks = compute_ranks(&results, derive_seed(config.seed, "ranks"))?;
    write_ranks_csv(&out_dir.join("ranks.csv"), &ranks)?;
    write_text(&out_dir.join("ranks.txt"), &format_rank_table(&ranks))?;

    Ok(RigOutcome {
        config: config.clone(),
        results,
        budget,
        ranks,
        importance,
        out_dir: out_dir.to_path_buf(),
    })
}

fn sorted_corpus<'a>(
    corpus: &'a [ProjectTable],
    config: &RigConfig,
) -> Result<Vec<&'a ProjectTable>, RigError> {
    if corpus.is_empty() {
        return Err(RigError::InvalidCorpus("no projects".into()));
    }
    let mut tables: Vec<&ProjectTable> = corpus.iter().collect();
    tables.sort_by(|a, b| a.project_id.cmp(&b.project_id));
    let names = &tables[0].schema.feature_names;
    for pair in tables.windows(2) {
        if pair[0].project_id == pair[1].project_id {
            return Err(RigError::InvalidCorpus(format!(
                "duplicate project id {:?}",
                pair[0].project_id
            )));
        }
    }
    for t in &tables {
        if t.project_id == POOLED_ID {
            return Err(RigError::InvalidCorpus(format!(
                "project id {POOLED_ID:?} is reserved"
            )));
        }
        if t.schema.task != config.task {
            return Err(RigError::InvalidCorpus(format!(
                "project {:?} is a {} table but the rig is configured for {}",
                t.project_id, t.schema.task, config.task
            )));
        }
        if &t.schema.feature_names != names {
            return Err(RigError::InvalidCorpus(format!(
                "project {:?} has a different feature set than {:?}",
                t.project_id, tables[0].project_id
            )));
        }
    }
    Ok(tables)
}

fn run_repeat(
    repeat: usize,
    tables: &[&ProjectTable],
    config: &RigConfig,
    out_dir: &Path,
) -> Result<RepeatOutput, RigError> {
    let rseed = derive_seed_indexed(config.seed, "repeat", repeat as u64);
    let (train_idx, test_idx) = split_projects(tables.len(), derive_seed(rseed, "project-split"))?;
    check_partition(tables.len(), &train_idx, &test_idx, "project split")?;
    let train: Vec<&ProjectTable> = train_idx.iter().map(|&i| tables[i]).collect();
    let tests: Vec<&ProjectTable> = test_idx.iter().map(|&i| tables[i]).collect();
    let pipeline = config.pipeline();
    let models_seed = derive_seed(rseed, "models");

    let general_clock = Instant::now();
    let summaries = train
        .iter()
        .map(|t| summarize(t))
        .collect::<Result<Vec<_>, _>>()?;
    let tree = build_tree(&summaries, config.branching_factor, config.threshold)?;
    let corpus_map: BTreeMap<String, ProjectTable> = train
        .iter()
        .map(|t| (t.project_id.clone(), (*t).clone()))
        .collect();
    let outcome = general(&tree, &corpus_map, &pipeline, models_seed)?;
    let general_secs = general_clock.elapsed().as_secs_f64();
    let expected = ComparisonBudget::for_tree(&tree)?.total();
    if outcome.comparisons != expected {
        return Err(RigError::BudgetMismatch {
            expected,
            got: outcome.comparisons,
        });
    }

    let flat_clock = Instant::now();
    let mut flat_cache = ModelCache::new(pipeline.clone(), models_seed);
    let flat = tournament(&train, &mut flat_cache)?;
    let flat_secs = flat_clock.elapsed().as_secs_f64();
    let bellwether0_model = resolve_model(&flat_cache, &flat.winner);

    let global_clock = Instant::now();
    let global_model: Result<Arc<TrainedModel>, String> = ProjectTable::pool(POOLED_ID, &train)
        .map_err(|e| e.to_string())
        .and_then(|pooled| {
            train_pipeline(&pooled, &pipeline, derive_seed(models_seed, POOLED_ID))
                .map(Arc::new)
                .map_err(|e| e.to_string())
        });
    let global_secs = global_clock.elapsed().as_secs_f64();

    let configured_level = config.report_level_or_default();
    let level = configured_level.min(tree.depth());
    let general_name = format!("general{configured_level}");
    let map = outcome.map();
    let goal_names = GoalKind::from(config.task).names();

    let mut results = Vec::new();
    let mut self_secs = 0.0;
    let row_seed_base = derive_seed(rseed, "rows");
    for t in &tests {
        let (train2_idx, test2_idx) =
            test_row_indices(t, config.task, derive_seed(row_seed_base, &t.project_id))?;
        check_partition(
            t.n_rows(),
            &train2_idx,
            &test2_idx,
            &format!("row split for {:?}", t.project_id),
        )?;
        let train2 = t.subset_rows(&train2_idx);
        let test2 = t.subset_rows(&test2_idx);

        let self_clock = Instant::now();
        let self_model: Result<Arc<TrainedModel>, String> =
            train_pipeline(&train2, &pipeline, derive_seed(models_seed, &t.project_id))
                .map(Arc::new)
                .map_err(|e| e.to_string());
        self_secs += self_clock.elapsed().as_secs_f64();

        let general_model: Result<Arc<TrainedModel>, String> = summarize(&train2)
            .map_err(|e| e.to_string())
            .and_then(|s| {
                map.assignments(&tree, &s.values)
                    .map_err(|e| e.to_string())
            })
            .and_then(|assignments| {
                resolve_model(&outcome.models, &assignments[level].bellwether)
            });

        for (name, model) in [
            (TREATMENT_SELF, &self_model),
            (TREATMENT_GLOBAL, &global_model),
            (TREATMENT_BELLWETHER0, &bellwether0_model),
            (general_name.as_str(), &general_model),
        ] {
            let scored = model
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|m| m.score(&test2).map_err(|e| e.to_string()));
            push_rows(&mut results, repeat, &t.project_id, name, goal_names, &scored);
        }
    }

    let budget = vec![
        BudgetRow {
            repeat,
            treatment: TREATMENT_SELF.to_string(),
            n_projects: tests.len(),
            comparisons: 0,
            wall_time_secs: self_secs,
        },
        BudgetRow {
            repeat,
            treatment: TREATMENT_GLOBAL.to_string(),
            n_projects: train.len(),
            comparisons: 0,
            wall_time_secs: global_secs,
        },
        BudgetRow {
            repeat,
            treatment: TREATMENT_BELLWETHER0.to_string(),
            n_projects: train.len(),
            comparisons: flat.comparisons,
            wall_time_secs: flat_secs,
        },
        BudgetRow {
            repeat,
            treatment: general_name,
            n_projects: train.len(),
            comparisons: outcome.comparisons,
            wall_time_secs: general_secs,
        },
    ];

    let importance = if repeat == 0 {
        let rows = importance_rows(&outcome, level, &train[0].schema.feature_names);
        write_bundle(out_dir, config, &tree, &outcome, level)?;
        rows
    } else {
        Vec::new()
    };

    Ok(RepeatOutput {
        results,
        budget,
        importance,
    })
}

fn resolve_model(cache: &ModelCache, id: &str) -> Result<Arc<TrainedModel>, String> {
    match cache.cached(id) {
        Some(Ok(m)) => Ok(m),
        Some(Err(e)) => Err(e),
        None => Err(format!("no model for {id:?}")),
    }
}

fn test_row_indices(
    table: &ProjectTable,
    task: Task,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    match task {
        Task::Classification => split_row_indices(table, seed),
        Task::Regression => {
            let n = table.n_rows();
            if n < 3 {
                return Err(DataError::TooFewRows {
                    project: table.project_id.clone(),
                    rows: n,
                });
            }
            let cut = n * 2 / 3;
            Ok(((0..cut).collect(), (cut..n).collect()))
        }
    }
}

fn check_partition(n: usize, a: &[usize], b: &[usize], what: &str) -> Result<(), RigError> {
    let mut seen = vec![false; n];
    for &i in a.iter().chain(b) {
        if i >= n {
            return Err(RigError::Leakage(format!("{what}: index {i} out of range")));
        }
        if seen[i] {
            return Err(RigError::Leakage(format!(
                "{what}: index {i} appears on both sides"
            )));
        }
        seen[i] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(RigError::Leakage(format!(
            "{what}: index {missing} assigned to neither side"
        )));
    }
    Ok(())
}

fn push_rows(
    out: &mut Vec<ResultRow>,
    repeat: usize,
    project: &str,
    treatment: &str,
    goal_names: &[&str],
    scored: &Result<GoalVector, String>,
) {
    match scored {
        Ok(gv) => {
            for (k, name) in goal_names.iter().enumerate() {
                out.push(ResultRow {
                    repeat,
                    project: project.to_string(),
                    treatment: treatment.to_string(),
                    criterion: name.to_string(),
                    value: Some(gv.values[k]),
                    status: "ok".to_string(),
                });
            }
        }
        Err(reason) => {
            for name in goal_names {
                out.push(ResultRow {
                    repeat,
                    project: project.to_string(),
                    treatment: treatment.to_string(),
                    criterion: name.to_string(),
                    value: None,
                    status: format!("failed({reason})"),
                });
            }
        }
    }
}

fn importance_rows(
    outcome: &GeneralResult,
    level: usize,
    feature_names: &[String],
) -> Vec<ImportanceRow> {
    let n = feature_names.len();
    let mut winner_cols = vec![Vec::new(); n];
    for cluster in &outcome.levels[level] {
        if let Ok(m) = resolve_model(&outcome.models, &cluster.outcome.winner) {
            for (j, v) in m.importance().iter().enumerate() {
                winner_cols[j].push(*v);
            }
        }
    }
    let mut self_cols = vec![Vec::new(); n];
    for id in outcome.models.trained_ids() {
        if let Ok(m) = resolve_model(&outcome.models, id) {
            for (j, v) in m.importance().iter().enumerate() {
                self_cols[j].push(*v);
            }
        }
    }
    let x: Vec<f64> = winner_cols
        .iter()
        .map(|c| median(c).unwrap_or(0.0))
        .collect();
    let y: Vec<f64> = self_cols.iter().map(|c| median(c).unwrap_or(0.0)).collect();
    let nonzero: Vec<f64> = x.iter().copied().filter(|&v| v > 0.0).collect();
    let cutoff = mean(&nonzero).unwrap_or(f64::INFINITY);
    feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| ImportanceRow {
            feature: name.clone(),
            bellwether_importance: x[j],
            self_importance: y[j],
            flagged: x[j] > cutoff,
        })
        .collect()
}

fn write_bundle(
    out_dir: &Path,
    config: &RigConfig,
    tree: &ClusterTree,
    outcome: &GeneralResult,
    level: usize,
) -> Result<(), RigError> {
    let dir = out_dir.join("bundle");
    let models_dir = dir.join("models");
    fs::create_dir_all(&models_dir).map_err(|e| RigError::Io {
        path: models_dir.clone(),
        source: e,
    })?;

    write_text(&dir.join("tree.json"), &tree.to_json())?;

    for (l, clusters) in outcome.levels.iter().enumerate() {
        for (c, cluster) in clusters.iter().enumerate() {
            if let Ok(model) = resolve_model(&outcome.models, &cluster.outcome.winner) {
                let text = serde_json::to_string_pretty(&*model).map_err(|e| RigError::Json {
                    what: format!("model for {:?}", model.project_id),
                    source: e,
                })?;
                write_text(&models_dir.join(format!("level{l}_cluster{c}.json")), &text)?;
            }
        }
    }

    let mut rows = Vec::new();
    for id in outcome.models.trained_ids() {
        if let Ok(m) = resolve_model(&outcome.models, id) {
            for (name, v) in m.feature_names.iter().zip(m.importance()) {
                rows.push(vec![id.to_string(), name.clone(), v.to_string()]);
            }
        }
    }
    write_csv(
        &dir.join("self_importance.csv"),
        &["project", "feature", "importance"],
        &rows,
    )?;

    let manifest = BundleManifest {
        format_version: BUNDLE_FORMAT_VERSION,
        task: config.task,
        goal: config.goal.clone(),
        seed: config.seed,
        repeat: 0,
        config_hash: config_hash(config)?,
        report_level: level,
        tree_file: "tree.json".to_string(),
        map: outcome.map(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RigError::Json {
        what: "manifest".to_string(),
        source: e,
    })?;
    write_text(&dir.join("manifest.json"), &text)
}

/// Groups every `ok` value by treatment and ranks treatments per criterion.
/// Percent-style criteria are scaled by 100 first, so medians and spreads
/// land in reporting units.
pub fn compute_ranks(rows: &[ResultRow], seed: u64) -> Result<Vec<RankRow>, RigError> {
    for row in rows {
        if criterion_info(&row.criterion).is_none() {
            return Err(RigError::UnknownCriterion(row.criterion.clone()));
        }
    }
    let mut out = Vec::new();
    for criterion in CRITERION_ORDER {
        let info = criterion_info(criterion).unwrap();
        let mut by_treatment: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for row in rows.iter().filter(|r| r.criterion == criterion) {
            if let Some(v) = row.value {
                let v = if info.percent { v * 100.0 } else { v };
                by_treatment.entry(&row.treatment).or_default().push(v);
            }
        }
        if by_treatment.is_empty() {
            continue;
        }
        let treatments: Vec<TreatmentSamples> = by_treatment
            .into_iter()
            .map(|(name, samples)| TreatmentSamples {
                name: name.to_string(),
                samples,
            })
            .collect();
        let ranked = scott_knott(&treatments, info.minimize, derive_seed(seed, criterion))?;
        out.extend(ranked.into_iter().map(|t| RankRow {
            criterion: criterion.to_string(),
            rank: t.rank,
            treatment: t.name,
            median: t.median,
            iqr: t.iqr,
        }));
    }
    Ok(out)
}

/// Plain-text rank tables, one block per criterion, best rank first.
pub fn format_rank_table(ranks: &[RankRow]) -> String {
    let name_width = ranks
        .iter()
        .map(|r| r.treatment.len())
        .chain(["treatment".len()])
        .max()
        .unwrap();
    let mut out = String::new();
    for criterion in CRITERION_ORDER {
        let rows: Vec<&RankRow> = ranks.iter().filter(|r| r.criterion == criterion).collect();
        if rows.is_empty() {
            continue;
        }
        let info = criterion_info(criterion).unwrap();
        let direction = if info.minimize {
            "lower is better"
        } else {
            "higher is better"
        };
        let unit = if info.percent { ", %" } else { "" };
        if !out.is_empty() {
            out.push('\n');
        }
        writeln!(out, "{criterion} ({direction}{unit})").unwrap();
        writeln!(
            out,
            "  rank  {:<name_width$}  {:>9}  {:>9}",
            "treatment", "median", "iqr"
        )
        .unwrap();
        for r in rows {
            writeln!(
                out,
                "  {:>4}  {:<name_width$}  {:>9.2}  {:>9.2}",
                r.rank, r.treatment, r.median, r.iqr
            )
            .unwrap();
        }
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<(), RigError> {
    fs::write(path, text).map_err(|e| RigError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), RigError> {
    let csv_err = |e: csv::Error| RigError::Csv {
        path: path.to_path_buf(),
        source: Box::new(e),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| RigError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub const RESULTS_HEADER: [&str; 6] =
    ["repeat", "project", "treatment", "criterion", "value", "status"];

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<(), RigError> {
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.repeat.to_string(),
                r.project.clone(),
                r.treatment.clone(),
                r.criterion.clone(),
                r.value.map(|v| v.to_string()).unwrap_or_default(),
                r.status.clone(),
            ]
        })
        .collect();
    write_csv(path, &RESULTS_HEADER, &records)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>, RigError> {
    let csv_err = |e: csv::Error| RigError::Csv {
        path: path.to_path_buf(),
        source: Box::new(e),
    };
    let bad = |line: usize, message: String| RigError::Format {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if !headers.iter().eq(RESULTS_HEADER) {
        return Err(RigError::Format {
            path: path.to_path_buf(),
            message: format!("expected header {RESULTS_HEADER:?}, found {headers:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(csv_err)?;
        if record.len() != RESULTS_HEADER.len() {
            return Err(bad(line, format!("expected 6 fields, found {}", record.len())));
        }
        let repeat: usize = record[0]
            .parse()
            .map_err(|_| bad(line, format!("bad repeat {:?}", &record[0])))?;
        let value = if record[4].is_empty() {
            None
        } else {
            Some(
                record[4]
                    .parse::<f64>()
                    .map_err(|_| bad(line, format!("bad value {:?}", &record[4])))?,
            )
        };
        rows.push(ResultRow {
            repeat,
            project: record[1].to_string(),
            treatment: record[2].to_string(),
            criterion: record[3].to_string(),
            value,
            status: record[5].to_string(),
        });
    }
    Ok(rows)
}

pub fn write_budget_csv(path: &Path, rows: &[BudgetRow]) -> Result<(), RigError> {
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.repeat.to_string(),
                r.treatment.clone(),
                r.n_projects.to_string(),
                r.comparisons.to_string(),
                format!("{:.6}", r.wall_time_secs),
            ]
        })
        .collect();
    write_csv(
        path,
        &["repeat", "treatment", "n_projects", "comparisons", "wall_time_secs"],
        &records,
    )
}

pub fn write_ranks_csv(path: &Path, rows: &[RankRow]) -> Result<(), RigError> {
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.criterion.clone(),
                r.rank.to_string(),
                r.treatment.clone(),
                r.median.to_string(),
                r.iqr.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["criterion", "rank", "treatment", "median", "iqr"], &records)
}

pub fn write_importance_csv(path: &Path, rows: &[ImportanceRow]) -> Result<(), RigError> {
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.feature.clone(),
                r.bellwether_importance.to_string(),
                r.self_importance.to_string(),
                r.flagged.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        &["feature", "bellwether_importance", "self_importance", "flagged"],
        &records,
    )
}
