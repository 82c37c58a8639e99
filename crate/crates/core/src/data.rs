//! Project tables, corpus loading, splits, and repository sanity checks.
//!
//! Everything downstream works on a [`ProjectTable`]: a numeric feature
//! matrix plus a label column and an optional effort column, described by a
//! [`FeatureSchema`]. Loading is schema driven, so any CSV whose header
//! carries the schema's columns can join a corpus; extra columns are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::median;

/// The 21 change-level metrics of the canonical defect schema.
pub const DEFECT_METRICS: [&str; 21] = [
    "la", "ld", "lt", "age", "ddev", "nuc", "own", "minor", "ndev", "ncomm", "adev", "avg_nddev",
    "avg_nadev", "avg_ncomm", "ns", "exp", "sexp", "rexp", "nd", "sctr", "nadev",
];

/// The 13 monthly project-health indicators, in canonical column order.
pub const HEALTH_METRICS: [&str; 13] = [
    "MC", "MAC", "MOP", "MCP", "MMP", "MPM", "MPC", "MOI", "MCI", "MIC", "MS", "MF", "MW",
];

/// Health indicators that can be used as a prediction goal.
pub const HEALTH_GOALS: [&str; 7] = ["MC", "MAC", "MOP", "MCP", "MOI", "MCI", "MS"];

/// Default lead time, in months, between health features and their target.
pub const DEFAULT_HORIZON: usize = 6;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: Box<csv::Error>,
    },
    #[error("{path} has no data rows")]
    EmptyFile { path: String },
    #[error("{path} is missing column '{column}'")]
    MissingColumn { path: String, column: String },
    #[error("{path} declares column '{column}' more than once")]
    DuplicateColumn { path: String, column: String },
    #[error("{path} row {row}, column '{column}': '{cell}' is not a finite number")]
    NonNumericCell {
        path: String,
        row: usize,
        column: String,
        cell: String,
    },
    #[error("{path} row {row}: label {value} is not 0 or 1")]
    InvalidLabel { path: String, row: usize, value: f64 },
    #[error("{path} row {row}: effort {value} is negative")]
    NegativeEffort { path: String, row: usize, value: f64 },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("table construction failed: {0}")]
    Shape(String),
    #[error("cannot summarize an empty table")]
    EmptyTable,
    #[error("need at least 10 projects to split a corpus, got {0}")]
    TooFewProjects(usize),
    #[error("need at least 3 rows to split '{project}', got {rows}")]
    TooFewRows { project: String, rows: usize },
    #[error("series for {project} has {months} months, not enough for a {horizon}-month horizon")]
    SeriesTooShort {
        project: String,
        months: usize,
        horizon: usize,
    },
    #[error("unknown health goal '{0}' (expected one of MC, MAC, MOP, MCP, MOI, MCI, MS)")]
    UnknownGoal(String),
    #[error("{path} row {row}: month {month} appears more than once")]
    DuplicateMonth { path: String, row: usize, month: i64 },
    #[error("corpus at {0} contains no project CSV files")]
    EmptyCorpus(String),
    #[error("cannot pool tables with mismatched schemas: '{0}' vs '{1}'")]
    SchemaMismatch(String, String),
}

/// Prediction task a schema describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Classification => write!(f, "classification"),
            Task::Regression => write!(f, "regression"),
        }
    }
}

/// Names the columns of a corpus: which are features, which one is the label,
/// and which one counts inspection effort.
///
/// The effort column may itself be a feature (in the canonical defect schema
/// the lines-added column `la` plays both roles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub task: Task,
    pub feature_names: Vec<String>,
    pub label_name: String,
    pub effort_name: Option<String>,
}

impl FeatureSchema {
    pub fn new(
        task: Task,
        feature_names: Vec<String>,
        label_name: impl Into<String>,
        effort_name: Option<String>,
    ) -> Result<Self, DataError> {
        let label_name = label_name.into();
        if feature_names.is_empty() {
            return Err(DataError::Schema("schema needs at least one feature".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::Schema(format!("duplicate feature name '{name}'")));
            }
        }
        if seen.contains(label_name.as_str()) {
            return Err(DataError::Schema(format!(
                "label column '{label_name}' cannot also be a feature"
            )));
        }
        Ok(FeatureSchema {
            task,
            feature_names,
            label_name,
            effort_name,
        })
    }

    /// Canonical change-level defect schema: 21 metrics, a `buggy` label, and
    /// lines-added as the inspection effort column.
    pub fn defect() -> Arc<Self> {
        Arc::new(
            FeatureSchema::new(
                Task::Classification,
                DEFECT_METRICS.iter().map(|s| s.to_string()).collect(),
                "buggy",
                Some("la".to_string()),
            )
            .expect("canonical defect schema is valid"),
        )
    }

    /// Monthly project-health schema for one prediction goal. Features are the
    /// 13 indicators at the current month; the label is the goal's value a
    /// fixed horizon later.
    pub fn health(goal: &str) -> Result<Arc<Self>, DataError> {
        if !HEALTH_GOALS.contains(&goal) {
            return Err(DataError::UnknownGoal(goal.to_string()));
        }
        Ok(Arc::new(
            FeatureSchema::new(
                Task::Regression,
                HEALTH_METRICS.iter().map(|s| s.to_string()).collect(),
                format!("{goal}_next"),
                None,
            )
            .expect("canonical health schema is valid"),
        ))
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }
}

/// One project's data: a row-major feature matrix with a label per row and an
/// optional effort value per row.
#[derive(Debug, Clone)]
pub struct ProjectTable {
    pub project_id: String,
    pub schema: Arc<FeatureSchema>,
    features: Vec<f64>,
    labels: Vec<f64>,
    effort: Option<Vec<f64>>,
}

impl ProjectTable {
    pub fn new(
        project_id: impl Into<String>,
        schema: Arc<FeatureSchema>,
        rows: Vec<Vec<f64>>,
        labels: Vec<f64>,
        effort: Option<Vec<f64>>,
    ) -> Result<Self, DataError> {
        let project_id = project_id.into();
        let width = schema.n_features();
        if rows.len() != labels.len() {
            return Err(DataError::Shape(format!(
                "{}: {} rows but {} labels",
                project_id,
                rows.len(),
                labels.len()
            )));
        }
        if let Some(e) = &effort {
            if e.len() != rows.len() {
                return Err(DataError::Shape(format!(
                    "{}: {} rows but {} effort values",
                    project_id,
                    rows.len(),
                    e.len()
                )));
            }
        }
        let mut features = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(DataError::Shape(format!(
                    "{project_id}: row {i} has {} values, schema has {width}",
                    row.len()
                )));
            }
            for v in &row {
                if !v.is_finite() {
                    return Err(DataError::Shape(format!(
                        "{project_id}: row {i} contains a non-finite feature"
                    )));
                }
            }
            features.extend_from_slice(&row);
        }
        for (i, l) in labels.iter().enumerate() {
            match schema.task {
                Task::Classification if *l != 0.0 && *l != 1.0 => {
                    return Err(DataError::InvalidLabel {
                        path: project_id.clone(),
                        row: i,
                        value: *l,
                    });
                }
                _ if !l.is_finite() => {
                    return Err(DataError::Shape(format!(
                        "{project_id}: row {i} has a non-finite label"
                    )));
                }
                _ => {}
            }
        }
        if let Some(e) = &effort {
            for (i, v) in e.iter().enumerate() {
                if !v.is_finite() || *v < 0.0 {
                    return Err(DataError::NegativeEffort {
                        path: project_id.clone(),
                        row: i,
                        value: *v,
                    });
                }
            }
        }
        Ok(ProjectTable {
            project_id,
            schema,
            features,
            labels,
            effort,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        &self.features[i * w..(i + 1) * w]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Row labels as booleans; only meaningful for classification tables.
    pub fn bool_labels(&self) -> Vec<bool> {
        self.labels.iter().map(|l| *l == 1.0).collect()
    }

    pub fn effort(&self) -> Option<&[f64]> {
        self.effort.as_deref()
    }

    pub fn feature_column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[j]).collect()
    }

    /// New table with the given rows, in the given order.
    pub fn subset_rows(&self, idx: &[usize]) -> ProjectTable {
        let rows = idx.iter().map(|&i| self.row(i).to_vec()).collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        let effort = self
            .effort
            .as_ref()
            .map(|e| idx.iter().map(|&i| e[i]).collect());
        ProjectTable::new(self.project_id.clone(), self.schema.clone(), rows, labels, effort)
            .expect("subset of a valid table is valid")
    }

    /// New table keeping only the given feature columns. The label and effort
    /// vectors are carried over unchanged.
    pub fn select_features(&self, keep: &[usize]) -> ProjectTable {
        let names = keep
            .iter()
            .map(|&j| self.schema.feature_names[j].clone())
            .collect();
        let schema = Arc::new(
            FeatureSchema::new(
                self.schema.task,
                names,
                self.schema.label_name.clone(),
                self.schema.effort_name.clone(),
            )
            .expect("projected schema is valid"),
        );
        let rows = (0..self.n_rows())
            .map(|i| keep.iter().map(|&j| self.row(i)[j]).collect())
            .collect();
        ProjectTable::new(
            self.project_id.clone(),
            schema,
            rows,
            self.labels.clone(),
            self.effort.clone(),
        )
        .expect("projection of a valid table is valid")
    }

    /// Pools several tables with identical schemas into one.
    pub fn pool(project_id: &str, tables: &[&ProjectTable]) -> Result<ProjectTable, DataError> {
        let first = tables
            .first()
            .ok_or_else(|| DataError::Shape("cannot pool zero tables".into()))?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let all_have_effort = tables.iter().all(|t| t.effort.is_some());
        let mut effort = all_have_effort.then(Vec::new);
        for t in tables {
            if t.schema.feature_names != first.schema.feature_names
                || t.schema.task != first.schema.task
            {
                return Err(DataError::SchemaMismatch(
                    first.project_id.clone(),
                    t.project_id.clone(),
                ));
            }
            for i in 0..t.n_rows() {
                rows.push(t.row(i).to_vec());
                labels.push(t.labels[i]);
                if let (Some(pool), Some(e)) = (effort.as_mut(), t.effort.as_ref()) {
                    pool.push(e[i]);
                }
            }
        }
        ProjectTable::new(project_id, first.schema.clone(), rows, labels, effort)
    }
}

/// Per-feature medians of one project, used to place it in the cluster tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryVector {
    pub project_id: String,
    pub values: Vec<f64>,
}

/// Collapses a project to its per-feature medians. Label and effort columns
/// take no part in the summary.
pub fn summarize(table: &ProjectTable) -> Result<SummaryVector, DataError> {
    if table.n_rows() == 0 {
        return Err(DataError::EmptyTable);
    }
    let values = (0..table.n_features())
        .map(|j| median(&table.feature_column(j)).expect("non-empty column"))
        .collect();
    Ok(SummaryVector {
        project_id: table.project_id.clone(),
        values,
    })
}

/// Partitions `0..n_projects` into (train, test) with 10% held out, the test
/// count rounded half up. Both halves come back sorted.
pub fn split_projects(n_projects: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if n_projects < 10 {
        return Err(DataError::TooFewProjects(n_projects));
    }
    let mut idx: Vec<usize> = (0..n_projects).collect();
    idx.shuffle(&mut StdRng::seed_from_u64(seed));
    let n_test = (n_projects + 5) / 10;
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Partitions a table's row indices 2:1 into (train, test).
///
/// Classification rows are stratified by label whenever both classes have at
/// least 3 instances, taking two thirds of each class for training; otherwise
/// the split is a plain shuffle with `floor(2n/3)` training rows.
pub fn split_row_indices(
    table: &ProjectTable,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    let n = table.n_rows();
    if n < 3 {
        return Err(DataError::TooFewRows {
            project: table.project_id.clone(),
            rows: n,
        });
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let strata: Vec<Vec<usize>> = if table.schema.task == Task::Classification {
        let neg: Vec<usize> = (0..n).filter(|&i| table.labels[i] == 0.0).collect();
        let pos: Vec<usize> = (0..n).filter(|&i| table.labels[i] == 1.0).collect();
        if neg.len() >= 3 && pos.len() >= 3 {
            vec![neg, pos]
        } else {
            vec![(0..n).collect()]
        }
    } else {
        vec![(0..n).collect()]
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        let cut = stratum.len() * 2 / 3;
        train.extend_from_slice(&stratum[..cut]);
        test.extend_from_slice(&stratum[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// 2:1 row split as two new tables; see [`split_row_indices`].
pub fn split_rows(table: &ProjectTable, seed: u64) -> Result<(ProjectTable, ProjectTable), DataError> {
    let (train, test) = split_row_indices(table, seed)?;
    Ok((table.subset_rows(&train), table.subset_rows(&test)))
}

/// Chronological 2:1 row split: the first `floor(2n/3)` rows train, the rest
/// test. Useful when rows are time ordered, as health instance tables are.
pub fn split_rows_chronological(
    table: &ProjectTable,
) -> Result<(ProjectTable, ProjectTable), DataError> {
    let n = table.n_rows();
    if n < 3 {
        return Err(DataError::TooFewRows {
            project: table.project_id.clone(),
            rows: n,
        });
    }
    let cut = n * 2 / 3;
    let train: Vec<usize> = (0..cut).collect();
    let test: Vec<usize> = (cut..n).collect();
    Ok((table.subset_rows(&train), table.subset_rows(&test)))
}

/// Repository-level attributes checked before a project may join a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectMeta {
    pub project_id: String,
    pub pull_requests: u64,
    pub commits: u64,
    pub duration_weeks: u64,
    pub issues: u64,
    pub contributors: u64,
    pub defective_commits: u64,
    pub is_fork: bool,
    pub is_software: bool,
}

/// One failed admission rule, named after the kind of project it screens out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanityFailure {
    pub rule: String,
    pub requirement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanityReport {
    pub project_id: String,
    pub failures: Vec<SanityFailure>,
}

impl SanityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Screens a project against the eight admission rules. Every rule is checked
/// so the report names all the reasons a project was rejected, not just the
/// first one.
pub fn sanity_check(meta: &ProjectMeta) -> SanityReport {
    let rules: [(&str, &str, bool); 8] = [
        (
            "Collaboration",
            "must have at least one pull request",
            meta.pull_requests < 1,
        ),
        ("Commits", "must have more than 20 commits", meta.commits <= 20),
        (
            "Duration",
            "must span at least 50 weeks of activity",
            meta.duration_weeks < 50,
        ),
        ("Issues", "must contain more than ten issues", meta.issues <= 10),
        (
            "Personal",
            "must have at least ten contributors",
            meta.contributors < 10,
        ),
        (
            "Software Development",
            "must be a software project",
            !meta.is_software,
        ),
        (
            "Defective Commits",
            "must have at least ten defective commits",
            meta.defective_commits < 10,
        ),
        (
            "Forked Project",
            "must not be a fork of another project",
            meta.is_fork,
        ),
    ];
    let failures = rules
        .into_iter()
        .filter(|(_, _, failed)| *failed)
        .map(|(rule, requirement, _)| SanityFailure {
            rule: rule.to_string(),
            requirement: requirement.to_string(),
        })
        .collect();
    SanityReport {
        project_id: meta.project_id.clone(),
        failures,
    }
}

/// A project's monthly health indicators, sorted by month.
#[derive(Debug, Clone)]
pub struct HealthSeries {
    pub project_id: String,
    pub months: Vec<i64>,
    values: Vec<f64>,
}

impl HealthSeries {
    pub fn new(
        project_id: impl Into<String>,
        months: Vec<i64>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, DataError> {
        let project_id = project_id.into();
        if months.len() != rows.len() {
            return Err(DataError::Shape(format!(
                "{project_id}: {} months but {} rows",
                months.len(),
                rows.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * HEALTH_METRICS.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != HEALTH_METRICS.len() {
                return Err(DataError::Shape(format!(
                    "{project_id}: month row {i} has {} values, expected {}",
                    row.len(),
                    HEALTH_METRICS.len()
                )));
            }
            values.extend_from_slice(&row);
        }
        Ok(HealthSeries {
            project_id,
            months,
            values,
        })
    }

    pub fn n_months(&self) -> usize {
        self.months.len()
    }

    pub fn month_row(&self, t: usize) -> &[f64] {
        let w = HEALTH_METRICS.len();
        &self.values[t * w..(t + 1) * w]
    }
}

/// Rolls a monthly series into a regression table: row `t` holds all 13
/// indicators at month `t` and the goal's value `horizon` months later, giving
/// `T - horizon` rows.
pub fn build_health_instances(
    series: &HealthSeries,
    horizon: usize,
    goal: &str,
) -> Result<ProjectTable, DataError> {
    let schema = FeatureSchema::health(goal)?;
    let goal_idx = HEALTH_METRICS
        .iter()
        .position(|m| *m == goal)
        .expect("goal validated by schema");
    let t_total = series.n_months();
    if t_total <= horizon {
        return Err(DataError::SeriesTooShort {
            project: series.project_id.clone(),
            months: t_total,
            horizon,
        });
    }
    let mut rows = Vec::with_capacity(t_total - horizon);
    let mut labels = Vec::with_capacity(t_total - horizon);
    for t in 0..t_total - horizon {
        rows.push(series.month_row(t).to_vec());
        labels.push(series.month_row(t + horizon)[goal_idx]);
    }
    ProjectTable::new(series.project_id.clone(), schema, rows, labels, None)
}

fn project_id_from_path(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

fn header_positions(
    headers: &csv::StringRecord,
    required: impl Iterator<Item = String>,
    path: &str,
) -> Result<BTreeMap<String, usize>, DataError> {
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    let mut positions = BTreeMap::new();
    for want in required {
        let mut found = None;
        for (i, name) in names.iter().enumerate() {
            if *name == want {
                if found.is_some() {
                    return Err(DataError::DuplicateColumn {
                        path: path.to_string(),
                        column: want,
                    });
                }
                found = Some(i);
            }
        }
        match found {
            Some(i) => {
                positions.insert(want, i);
            }
            None => {
                return Err(DataError::MissingColumn {
                    path: path.to_string(),
                    column: want,
                })
            }
        }
    }
    Ok(positions)
}

fn parse_cell(field: &str, path: &str, row: usize, column: &str) -> Result<f64, DataError> {
    let trimmed = field.trim();
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::NonNumericCell {
            path: path.to_string(),
            row,
            column: column.to_string(),
            cell: trimmed.to_string(),
        }),
    }
}

/// Loads one project CSV against a schema. The header must contain every
/// schema column (any order, extras ignored); every required cell must parse
/// as a finite number. Rows are numbered from 1 in error messages.
pub fn load_project_table(
    path: &Path,
    schema: &Arc<FeatureSchema>,
) -> Result<ProjectTable, DataError> {
    let path_str = path.to_string_lossy().into_owned();
    let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::Csv {
        path: path_str.clone(),
        source: Box::new(e),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: Box::new(e),
        })?
        .clone();
    let mut required: Vec<String> = schema.feature_names.clone();
    required.push(schema.label_name.clone());
    if let Some(e) = &schema.effort_name {
        if !required.contains(e) {
            required.push(e.clone());
        }
    }
    let positions = header_positions(&headers, required.into_iter(), &path_str)?;
    let feature_pos: Vec<usize> = schema
        .feature_names
        .iter()
        .map(|f| positions[f.as_str()])
        .collect();
    let label_pos = positions[schema.label_name.as_str()];
    let effort_pos = schema.effort_name.as_ref().map(|e| positions[e.as_str()]);

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut effort = effort_pos.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: Box::new(e),
        })?;
        let row_no = i + 1;
        let mut row = Vec::with_capacity(feature_pos.len());
        for (j, &pos) in feature_pos.iter().enumerate() {
            let field = record.get(pos).unwrap_or("");
            row.push(parse_cell(field, &path_str, row_no, &schema.feature_names[j])?);
        }
        let label = parse_cell(
            record.get(label_pos).unwrap_or(""),
            &path_str,
            row_no,
            &schema.label_name,
        )?;
        if schema.task == Task::Classification && label != 0.0 && label != 1.0 {
            return Err(DataError::InvalidLabel {
                path: path_str.clone(),
                row: row_no,
                value: label,
            });
        }
        if let (Some(pos), Some(vec)) = (effort_pos, effort.as_mut()) {
            let name = schema.effort_name.as_deref().unwrap_or("effort");
            let v = parse_cell(record.get(pos).unwrap_or(""), &path_str, row_no, name)?;
            if v < 0.0 {
                return Err(DataError::NegativeEffort {
                    path: path_str.clone(),
                    row: row_no,
                    value: v,
                });
            }
            vec.push(v);
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyFile { path: path_str });
    }
    ProjectTable::new(project_id_from_path(path), schema.clone(), rows, labels, effort)
}

/// Loads a monthly health CSV: a `month` column plus the 13 indicators.
/// Rows come back sorted by month; duplicate months are rejected.
pub fn load_health_series(path: &Path) -> Result<HealthSeries, DataError> {
    let path_str = path.to_string_lossy().into_owned();
    let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::Csv {
        path: path_str.clone(),
        source: Box::new(e),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: Box::new(e),
        })?
        .clone();
    let required = std::iter::once("month".to_string())
        .chain(HEALTH_METRICS.iter().map(|m| m.to_string()));
    let positions = header_positions(&headers, required, &path_str)?;
    let month_pos = positions["month"];
    let metric_pos: Vec<usize> = HEALTH_METRICS.iter().map(|m| positions[*m]).collect();

    let mut entries: Vec<(i64, Vec<f64>)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: Box::new(e),
        })?;
        let row_no = i + 1;
        let month = parse_cell(record.get(month_pos).unwrap_or(""), &path_str, row_no, "month")?
            as i64;
        let mut row = Vec::with_capacity(metric_pos.len());
        for (j, &pos) in metric_pos.iter().enumerate() {
            row.push(parse_cell(
                record.get(pos).unwrap_or(""),
                &path_str,
                row_no,
                HEALTH_METRICS[j],
            )?);
        }
        if entries.iter().any(|(m, _)| *m == month) {
            return Err(DataError::DuplicateMonth {
                path: path_str.clone(),
                row: row_no,
                month,
            });
        }
        entries.push((month, row));
    }
    if entries.is_empty() {
        return Err(DataError::EmptyFile { path: path_str });
    }
    entries.sort_by_key(|(m, _)| *m);
    let (months, rows) = entries.into_iter().unzip();
    HealthSeries::new(project_id_from_path(path), months, rows)
}

/// Lists the project CSVs of a corpus directory in name order, skipping the
/// `meta.csv` sidecar.
pub fn list_corpus_files(dir: &Path) -> Result<Vec<std::path::PathBuf>, DataError> {
    let entries = std::fs::read_dir(dir).map_err(|e| DataError::Io {
        path: dir.to_string_lossy().into_owned(),
        source: e,
    })?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().map(|x| x == "csv").unwrap_or(false)
                && p.file_name().map(|n| n != "meta.csv").unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(DataError::EmptyCorpus(dir.to_string_lossy().into_owned()));
    }
    Ok(files)
}

/// Builds the defect schema for a corpus: the canonical one when the first
/// file's header covers it, otherwise every non-label header column becomes a
/// feature in header order.
pub fn infer_defect_schema(
    first_file: &Path,
    label: &str,
    effort: &str,
) -> Result<Arc<FeatureSchema>, DataError> {
    let path_str = first_file.to_string_lossy().into_owned();
    let mut reader = csv::Reader::from_path(first_file).map_err(|e| DataError::Csv {
        path: path_str.clone(),
        source: Box::new(e),
    })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: Box::new(e),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let canonical = FeatureSchema::defect();
    let covers_canonical = label == canonical.label_name
        && canonical
            .feature_names
            .iter()
            .all(|f| headers.iter().any(|h| h == f))
        && headers.iter().any(|h| h == label);
    if covers_canonical && effort == "la" {
        return Ok(canonical);
    }
    let features: Vec<String> = headers.iter().filter(|h| *h != label).cloned().collect();
    if !headers.iter().any(|h| h == label) {
        return Err(DataError::MissingColumn {
            path: path_str,
            column: label.to_string(),
        });
    }
    if !headers.iter().any(|h| h == effort) {
        return Err(DataError::MissingColumn {
            path: path_str,
            column: effort.to_string(),
        });
    }
    Ok(Arc::new(FeatureSchema::new(
        Task::Classification,
        features,
        label,
        Some(effort.to_string()),
    )?))
}

/// Loads `meta.csv`: one row of [`ProjectMeta`] per project.
pub fn load_meta(path: &Path) -> Result<Vec<ProjectMeta>, DataError> {
    let path_str = path.to_string_lossy().into_owned();
    let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::Csv {
        path: path_str.clone(),
        source: Box::new(e),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: Box::new(e),
        })?
        .clone();
    let cols = [
        "project",
        "pull_requests",
        "commits",
        "duration_weeks",
        "issues",
        "contributors",
        "defective_commits",
        "is_fork",
        "is_software",
    ];
    let positions = header_positions(&headers, cols.iter().map(|c| c.to_string()), &path_str)?;
    let parse_bool = |field: &str, row: usize, column: &str| -> Result<bool, DataError> {
        match field.trim() {
            "true" | "1" => Ok(true),
            "false" | "0" => Ok(false),
            other => Err(DataError::NonNumericCell {
                path: path_str.clone(),
                row,
                column: column.to_string(),
                cell: other.to_string(),
            }),
        }
    };
    let mut metas = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: Box::new(e),
        })?;
        let row_no = i + 1;
        let get = |c: &str| record.get(positions[c]).unwrap_or("").to_string();
        let count = |c: &str| -> Result<u64, DataError> {
            Ok(parse_cell(&get(c), &path_str, row_no, c)?.max(0.0) as u64)
        };
        metas.push(ProjectMeta {
            project_id: get("project").trim().to_string(),
            pull_requests: count("pull_requests")?,
            commits: count("commits")?,
            duration_weeks: count("duration_weeks")?,
            issues: count("issues")?,
            contributors: count("contributors")?,
            defective_commits: count("defective_commits")?,
            is_fork: parse_bool(&get("is_fork"), row_no, "is_fork")?,
            is_software: parse_bool(&get("is_software"), row_no, "is_software")?,
        });
    }
    if metas.is_empty() {
        return Err(DataError::EmptyFile { path: path_str });
    }
    Ok(metas)
}
