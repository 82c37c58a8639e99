//! Synthetic corpora with known structure, used by tests, benches, and the
//! acceptance suite: grouped defect corpora whose summaries cluster exactly
//! into their groups, corpora with a planted best-transfer project per group,
//! and monthly health series.
//!
//! Group separation works by giving every group a binary location code over
//! the trailing features. Codes differ in at least [`MIN_CODE_DISTANCE`]
//! bits, so group centers sit far apart in normalized summary space, while
//! within-group jitter stays tiny. The two leading features carry the actual
//! label signal and are identical in distribution across all projects, which
//! keeps them out of the clustering geometry.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::data::{
    DataError, FeatureSchema, HealthSeries, ProjectMeta, ProjectTable, Task,
    HEALTH_METRICS,
};
use crate::util::derive_seed_indexed;

/// Location features per project.
pub const LOCATION_BITS: usize = 19;
/// Minimum Hamming distance between any two group codes.
pub const MIN_CODE_DISTANCE: usize = 8;

fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Greedy binary codes of length [`LOCATION_BITS`] with pairwise Hamming
/// distance at least [`MIN_CODE_DISTANCE`]. The first two codes are the
/// all-zeros and all-ones words, so every bit position varies across the
/// code set and no summary dimension collapses under normalization.
pub fn location_codes(count: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut codes: Vec<Vec<u8>> = Vec::with_capacity(count);
    if count >= 1 {
        codes.push(vec![0; LOCATION_BITS]);
    }
    if count >= 2 {
        codes.push(vec![1; LOCATION_BITS]);
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut attempts = 0usize;
    while codes.len() < count {
        let candidate: Vec<u8> = (0..LOCATION_BITS).map(|_| rng.gen_range(0..2u8)).collect();
        if codes.iter().all(|c| hamming(c, &candidate) >= MIN_CODE_DISTANCE) {
            codes.push(candidate);
        }
        attempts += 1;
        assert!(
            attempts < 2_000_000,
            "could not place {count} codes at distance {MIN_CODE_DISTANCE}"
        );
    }
    codes
}

fn grouped_schema() -> Arc<FeatureSchema> {
    let mut names = vec!["s0".to_string(), "s1".to_string()];
    names.extend((0..LOCATION_BITS).map(|j| format!("loc{j}")));
    Arc::new(
        FeatureSchema::new(Task::Classification, names, "buggy", Some("effort".to_string()))
            .expect("grouped schema is valid"),
    )
}

/// One synthetic defect project. The signal feature `s0` runs over the same
/// grid in every project, labels follow `s0 > cutoff` (with optional label
/// noise), and the location features sit on the group code plus a
/// per-project jitter that is constant across rows.
fn grouped_project(
    id: &str,
    code: &[u8],
    cutoff: f64,
    rows: usize,
    noise: f64,
    rng: &mut StdRng,
) -> ProjectTable {
    let offsets: Vec<f64> = (0..LOCATION_BITS)
        .map(|_| rng.gen_range(-0.01..0.01))
        .collect();
    let mut data = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    let mut effort = Vec::with_capacity(rows);
    for i in 0..rows {
        let s0 = (i as f64 + 0.5) / rows as f64;
        let s1 = ((i * 7 + 3) % rows) as f64 / rows as f64 + 0.5 / rows as f64;
        let mut row = Vec::with_capacity(2 + LOCATION_BITS);
        row.push(s0);
        row.push(s1);
        for (j, &bit) in code.iter().enumerate() {
            row.push(bit as f64 + offsets[j]);
        }
        data.push(row);
        let mut label = s0 > cutoff;
        if noise > 0.0 && rng.gen_range(0.0..1.0) < noise {
            label = !label;
        }
        labels.push(f64::from(label));
        effort.push(1.0 + ((i * 13) % rows) as f64 / 4.0);
    }
    ProjectTable::new(id, grouped_schema(), data, labels, Some(effort))
        .expect("generated project is valid")
}

/// A corpus of `n_projects` split into consecutive groups of `group_size`
/// (the last group may be smaller). Summaries cluster exactly one leaf entry
/// per group under the default tree parameters.
pub fn sweep_corpus(
    n_projects: usize,
    group_size: usize,
    rows_per_project: usize,
    seed: u64,
) -> Vec<ProjectTable> {
    assert!(group_size >= 1 && group_size <= 25, "group size {group_size} out of range");
    let n_groups = n_projects.div_ceil(group_size);
    let codes = location_codes(n_groups, derive_seed_indexed(seed, "codes", 0));
    let cutoffs = [0.3, 0.4, 0.5, 0.6, 0.7];
    let mut rng = StdRng::seed_from_u64(derive_seed_indexed(seed, "projects", 0));
    (0..n_projects)
        .map(|i| {
            let group = i / group_size;
            grouped_project(
                &format!("p{i:04}"),
                &codes[group],
                cutoffs[i % cutoffs.len()],
                rows_per_project,
                0.0,
                &mut rng,
            )
        })
        .collect()
}

pub struct PlantedCorpus {
    pub tables: Vec<ProjectTable>,
    /// The project expected to win each group's leaf tournament, in group
    /// order.
    pub planted: Vec<String>,
}

/// A corpus where each group holds `mates` projects with label cutoffs
/// spread evenly around the center plus noisy labels, and one clean project
/// whose cutoff sits exactly at the center. The clean center project
/// transfers best to every group mate.
pub fn planted_corpus(
    n_groups: usize,
    mates: usize,
    rows_per_project: usize,
    seed: u64,
) -> PlantedCorpus {
    assert!(mates >= 2 && mates % 2 == 0, "mates must be even and at least 2");
    assert!(mates + 1 <= 25, "group of {} projects is too large", mates + 1);
    let codes = location_codes(n_groups, derive_seed_indexed(seed, "codes", 0));
    let mut rng = StdRng::seed_from_u64(derive_seed_indexed(seed, "projects", 0));
    let spread = 0.15;
    let mut tables = Vec::new();
    let mut planted = Vec::new();
    for g in 0..n_groups {
        for j in 0..mates {
            let offset = spread * (2.0 * j as f64 - (mates as f64 - 1.0)) / (mates as f64 - 1.0);
            tables.push(grouped_project(
                &format!("g{g:02}mate{j}"),
                &codes[g],
                0.5 + offset,
                rows_per_project,
                0.08,
                &mut rng,
            ));
        }
        let id = format!("g{g:02}center");
        tables.push(grouped_project(&id, &codes[g], 0.5, rows_per_project, 0.0, &mut rng));
        planted.push(id);
    }
    PlantedCorpus { tables, planted }
}

/// A monthly health series with mildly trending, non-negative indicators.
pub fn health_series(project_id: &str, months: usize, seed: u64) -> HealthSeries {
    let mut rng = StdRng::seed_from_u64(seed);
    let w = HEALTH_METRICS.len();
    let mut level: Vec<f64> = (0..w).map(|_| rng.gen_range(5.0..60.0)).collect();
    let trend: Vec<f64> = (0..w).map(|_| rng.gen_range(-1.5..2.5)).collect();
    let mut rows = Vec::with_capacity(months);
    for _ in 0..months {
        rows.push(level.iter().map(|v| (v * 4.0).round() / 4.0).collect());
        for (v, t) in level.iter_mut().zip(&trend) {
            *v = (*v + t + rng.gen_range(-3.0..3.0)).max(0.0);
        }
    }
    HealthSeries::new(project_id, (1..=months as i64).collect(), rows)
        .expect("generated series is valid")
}

/// Health corpora for end-to-end runs: one instance table per project.
pub fn health_corpus(
    n_projects: usize,
    months: usize,
    horizon: usize,
    goal: &str,
    seed: u64,
) -> Result<Vec<ProjectTable>, DataError> {
    (0..n_projects)
        .map(|i| {
            let series = health_series(
                &format!("h{i:03}"),
                months,
                derive_seed_indexed(seed, "series", i as u64),
            );
            crate::data::build_health_instances(&series, horizon, goal)
        })
        .collect()
}

/// Metadata that passes every admission rule.
pub fn healthy_meta(project_id: &str) -> ProjectMeta {
    ProjectMeta {
        project_id: project_id.to_string(),
        pull_requests: 12,
        commits: 400,
        duration_weeks: 120,
        issues: 60,
        contributors: 15,
        defective_commits: 40,
        is_fork: false,
        is_software: true,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.to_string_lossy().into_owned(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> DataError {
    DataError::Csv {
        path: path.to_string_lossy().into_owned(),
        source: Box::new(source),
    }
}

/// Writes one project table as `{project_id}.csv` with feature, label, and
/// (when distinct) effort columns.
pub fn write_project_csv(dir: &Path, table: &ProjectTable) -> Result<PathBuf, DataError> {
    let path = dir.join(format!("{}.csv", table.project_id));
    let mut writer = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let schema = &table.schema;
    let mut header: Vec<String> = schema.feature_names.clone();
    header.push(schema.label_name.clone());
    let effort_extra = match &schema.effort_name {
        Some(e) if !schema.feature_names.contains(e) => {
            header.push(e.clone());
            true
        }
        _ => false,
    };
    writer.write_record(&header).map_err(|e| csv_err(&path, e))?;
    for i in 0..table.n_rows() {
        let mut record: Vec<String> = table.row(i).iter().map(|v| v.to_string()).collect();
        record.push(table.labels()[i].to_string());
        if effort_extra {
            record.push(table.effort().expect("effort present")[i].to_string());
        }
        writer.write_record(&record).map_err(|e| csv_err(&path, e))?;
    }
    writer.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Writes a whole corpus of tables into `dir`, one CSV per project.
pub fn write_defect_corpus(dir: &Path, tables: &[ProjectTable]) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for t in tables {
        write_project_csv(dir, t)?;
    }
    Ok(())
}

/// Writes one monthly series as `{project_id}.csv` with a month column and
/// the 13 indicators.
pub fn write_health_csv(dir: &Path, series: &HealthSeries) -> Result<PathBuf, DataError> {
    let path = dir.join(format!("{}.csv", series.project_id));
    let mut writer = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    let mut header = vec!["month".to_string()];
    header.extend(HEALTH_METRICS.iter().map(|m| m.to_string()));
    writer.write_record(&header).map_err(|e| csv_err(&path, e))?;
    for (t, month) in series.months.iter().enumerate() {
        let mut record = vec![month.to_string()];
        record.extend(series.month_row(t).iter().map(|v| v.to_string()));
        writer.write_record(&record).map_err(|e| csv_err(&path, e))?;
    }
    writer.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Writes `meta.csv` for the given projects.
pub fn write_meta_csv(dir: &Path, metas: &[ProjectMeta]) -> Result<PathBuf, DataError> {
    let path = dir.join("meta.csv");
    let mut writer = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    writer
        .write_record([
            "project",
            "pull_requests",
            "commits",
            "duration_weeks",
            "issues",
            "contributors",
            "defective_commits",
            "is_fork",
            "is_software",
        ])
        .map_err(|e| csv_err(&path, e))?;
    for m in metas {
        writer
            .write_record([
                m.project_id.clone(),
                m.pull_requests.to_string(),
                m.commits.to_string(),
                m.duration_weeks.to_string(),
                m.issues.to_string(),
                m.contributors.to_string(),
                m.defective_commits.to_string(),
                m.is_fork.to_string(),
                m.is_software.to_string(),
            ])
            .map_err(|e| csv_err(&path, e))?;
    }
    writer.flush().map_err(|e| io_err(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{build_tree, DEFAULT_BRANCHING, DEFAULT_THRESHOLD};
    use crate::data::{load_project_table, summarize, DEFAULT_HORIZON};

    #[test]
    fn codes_keep_their_distance_and_vary_every_bit() {
        let codes = location_codes(30, 5);
        assert_eq!(codes.len(), 30);
        for i in 0..codes.len() {
            for j in i + 1..codes.len() {
                assert!(
                    hamming(&codes[i], &codes[j]) >= MIN_CODE_DISTANCE,
                    "codes {i} and {j} too close"
                );
            }
        }
        for bit in 0..LOCATION_BITS {
            assert!(codes.iter().any(|c| c[bit] == 0));
            assert!(codes.iter().any(|c| c[bit] == 1));
        }
    }

    #[test]
    fn sweep_corpus_clusters_one_leaf_per_group() {
        let tables = sweep_corpus(45, 9, 30, 11);
        assert_eq!(tables.len(), 45);
        let summaries: Vec<_> = tables.iter().map(|t| summarize(t).unwrap()).collect();
        let tree = build_tree(&summaries, DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
        let leaves = tree.clusters_at_level(tree.depth()).unwrap();
        assert_eq!(leaves.len(), 5);
        for leaf in &leaves {
            assert_eq!(leaf.members.len(), 9);
            let group = leaf.members[0][1..].parse::<usize>().unwrap() / 9;
            for m in &leaf.members {
                assert_eq!(m[1..].parse::<usize>().unwrap() / 9, group, "{m} in wrong leaf");
            }
        }
    }

    #[test]
    fn sweep_projects_have_both_classes_and_positive_effort() {
        let tables = sweep_corpus(18, 6, 30, 3);
        for t in &tables {
            let pos = t.labels().iter().filter(|&&l| l == 1.0).count();
            assert!(pos >= 2 && pos <= t.n_rows() - 2, "{}: {pos} positives", t.project_id);
            assert!(t.effort().unwrap().iter().all(|&e| e > 0.0));
        }
    }

    #[test]
    fn planted_corpus_shapes_and_grouping() {
        let corpus = planted_corpus(4, 4, 48, 9);
        assert_eq!(corpus.tables.len(), 20);
        assert_eq!(corpus.planted.len(), 4);
        let summaries: Vec<_> = corpus.tables.iter().map(|t| summarize(t).unwrap()).collect();
        let tree = build_tree(&summaries, DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
        let leaves = tree.clusters_at_level(tree.depth()).unwrap();
        assert_eq!(leaves.len(), 4);
        for leaf in &leaves {
            assert_eq!(leaf.members.len(), 5);
            let planted: Vec<_> = leaf
                .members
                .iter()
                .filter(|m| m.ends_with("center"))
                .collect();
            assert_eq!(planted.len(), 1);
        }
    }

    #[test]
    fn health_corpus_builds_instance_tables() {
        let tables = health_corpus(3, 24, DEFAULT_HORIZON, "MC", 7).unwrap();
        assert_eq!(tables.len(), 3);
        for t in &tables {
            assert_eq!(t.n_rows(), 24 - DEFAULT_HORIZON);
            assert_eq!(t.n_features(), 13);
            assert!(t.labels().iter().all(|&l| l >= 0.0));
        }
    }

    #[test]
    fn written_project_csv_loads_back_identically() {
        let dir = tempfile::tempdir().unwrap();
        let tables = sweep_corpus(2, 2, 20, 1);
        let path = write_project_csv(dir.path(), &tables[0]).unwrap();
        let loaded = load_project_table(&path, &tables[0].schema).unwrap();
        assert_eq!(loaded.project_id, tables[0].project_id);
        assert_eq!(loaded.n_rows(), tables[0].n_rows());
        for i in 0..loaded.n_rows() {
            assert_eq!(loaded.row(i), tables[0].row(i));
            assert_eq!(loaded.labels()[i], tables[0].labels()[i]);
            assert_eq!(loaded.effort().unwrap()[i], tables[0].effort().unwrap()[i]);
        }
    }

    #[test]
    fn written_meta_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let metas = vec![healthy_meta("a"), healthy_meta("b")];
        let path = write_meta_csv(dir.path(), &metas).unwrap();
        let loaded = crate::data::load_meta(&path).unwrap();
        assert_eq!(loaded, metas);
        assert!(crate::data::sanity_check(&loaded[0]).passed());
    }

    #[test]
    fn written_health_csv_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let series = health_series("h0", 18, 2);
        let path = write_health_csv(dir.path(), &series).unwrap();
        let loaded = crate::data::load_health_series(&path).unwrap();
        assert_eq!(loaded.project_id, "h0");
        assert_eq!(loaded.n_months(), 18);
        for t in 0..18 {
            assert_eq!(loaded.month_row(t), series.month_row(t));
        }
    }
}
