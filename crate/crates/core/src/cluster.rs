//! Clustering-feature tree over project summaries.
//!
//! Projects enter as per-feature median vectors, are min-max normalized per
//! dimension, and are inserted one at a time into a height-balanced CF tree:
//! a point joins its closest leaf entry when the merged entry's radius stays
//! within the threshold, otherwise it opens a new entry, and any node grown
//! past the branching factor splits around its farthest pair of entries.
//! Levels of the finished tree are what the rest of the pipeline consumes:
//! level 0 is the whole corpus, level `depth` is the leaf clusters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SummaryVector;
use crate::util::euclidean;

/// Format tag written into serialized trees so stale files are rejected.
pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("expected a vector of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("level {level} is out of range for a tree of depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("project '{0}' appears twice in the input")]
    DuplicateProject(String),
    #[error("cannot build a tree from zero summaries")]
    EmptyInput,
    #[error("tree deserialization failed: {0}")]
    Format(String),
}

/// Clustering feature of a set of points: count, vector sum, and summed
/// squared norms. Two features merge by component-wise addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfEntry {
    pub n: u64,
    pub linear_sum: Vec<f64>,
    pub square_sum: f64,
}

impl CfEntry {
    pub fn from_point(p: &[f64]) -> Self {
        CfEntry {
            n: 1,
            linear_sum: p.to_vec(),
            square_sum: p.iter().map(|v| v * v).sum(),
        }
    }

    pub fn merge(&self, other: &CfEntry) -> Result<CfEntry, ClusterError> {
        if self.linear_sum.len() != other.linear_sum.len() {
            return Err(ClusterError::DimensionMismatch {
                expected: self.linear_sum.len(),
                got: other.linear_sum.len(),
            });
        }
        Ok(CfEntry {
            n: self.n + other.n,
            linear_sum: self
                .linear_sum
                .iter()
                .zip(&other.linear_sum)
                .map(|(a, b)| a + b)
                .collect(),
            square_sum: self.square_sum + other.square_sum,
        })
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.linear_sum.iter().map(|v| v / n).collect()
    }

    /// Root mean squared distance of the member points from their centroid,
    /// `sqrt(max(0, SS/n - |LS/n|^2))`. The clamp absorbs the tiny negative
    /// values floating-point cancellation can produce for tight clusters.
    pub fn radius(&self) -> f64 {
        let n = self.n as f64;
        let centroid_sq: f64 = self.linear_sum.iter().map(|v| (v / n) * (v / n)).sum();
        (self.square_sum / n - centroid_sq).max(0.0).sqrt()
    }

    fn centroid_distance(&self, p: &[f64]) -> f64 {
        euclidean(&self.centroid(), p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfNodeEntry {
    pub cf: CfEntry,
    /// Subtree below this entry; `None` in leaf nodes.
    pub child: Option<Box<CfNode>>,
    /// Project ids absorbed by this entry; populated only in leaf nodes.
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfNode {
    pub leaf: bool,
    pub entries: Vec<CfNodeEntry>,
}

impl CfNode {
    fn new_leaf() -> Self {
        CfNode {
            leaf: true,
            entries: Vec::new(),
        }
    }

    fn cf_sum(&self) -> CfEntry {
        let mut it = self.entries.iter();
        let first = it.next().expect("cf_sum of a non-empty node").cf.clone();
        it.fold(first, |acc, e| acc.merge(&e.cf).expect("uniform dims"))
    }

    fn closest_entry(&self, p: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, e) in self.entries.iter().enumerate() {
            let d = e.cf.centroid_distance(p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// One cluster at some level: the entry-index path that reaches it and the
/// project ids below it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub prefix: Vec<usize>,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub format_version: u32,
    pub branching_factor: usize,
    pub threshold: f64,
    /// Per-dimension (min, max) of the raw summaries, captured at build time
    /// and reused to place new projects in the same normalized space.
    pub bounds: Vec<(f64, f64)>,
    pub root: CfNode,
    /// Project id -> entry-index path from the root to its leaf entry.
    pub member_index: BTreeMap<String, Vec<usize>>,
}

/// Default fan-out of a tree node.
pub const DEFAULT_BRANCHING: usize = 20;
/// Default upper bound on a leaf entry's radius in normalized space.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Builds a CF tree over the given summaries with sequential insertion.
///
/// Dimensions are min-max normalized over the batch before any insertion, so
/// the threshold is a radius in `[0,1]`-scaled space. Insertion order is the
/// order of `summaries`.
pub fn build_tree(
    summaries: &[SummaryVector],
    branching_factor: usize,
    threshold: f64,
) -> Result<ClusterTree, ClusterError> {
    if summaries.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if branching_factor < 2 {
        return Err(ClusterError::InvalidParameter(format!(
            "branching factor must be at least 2, got {branching_factor}"
        )));
    }
    if !threshold.is_finite() || threshold < 0.0 {
        return Err(ClusterError::InvalidParameter(format!(
            "threshold must be a non-negative number, got {threshold}"
        )));
    }
    let dim = summaries[0].values.len();
    if dim == 0 {
        return Err(ClusterError::InvalidParameter(
            "summaries must have at least one dimension".into(),
        ));
    }
    for s in summaries {
        if s.values.len() != dim {
            return Err(ClusterError::DimensionMismatch {
                expected: dim,
                got: s.values.len(),
            });
        }
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for s in summaries {
            if !seen.insert(s.project_id.as_str()) {
                return Err(ClusterError::DuplicateProject(s.project_id.clone()));
            }
        }
    }
    let bounds: Vec<(f64, f64)> = (0..dim)
        .map(|j| {
            let lo = summaries.iter().map(|s| s.values[j]).fold(f64::INFINITY, f64::min);
            let hi = summaries
                .iter()
                .map(|s| s.values[j])
                .fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();

    let mut tree = ClusterTree {
        format_version: TREE_FORMAT_VERSION,
        branching_factor,
        threshold,
        bounds,
        root: CfNode::new_leaf(),
        member_index: BTreeMap::new(),
    };
    for s in summaries {
        let p = tree.normalize_unclamped(&s.values);
        if let Some(sibling) = insert(&mut tree.root, &p, &s.project_id, branching_factor, threshold)
        {
            let old = std::mem::replace(&mut tree.root, CfNode::new_leaf());
            tree.root = CfNode {
                leaf: false,
                entries: vec![
                    CfNodeEntry {
                        cf: old.cf_sum(),
                        child: Some(Box::new(old)),
                        members: Vec::new(),
                    },
                    sibling,
                ],
            };
        }
    }
    tree.rebuild_member_index();
    Ok(tree)
}

/// Inserts one point. Returns a sibling entry when the node split.
fn insert(
    node: &mut CfNode,
    p: &[f64],
    id: &str,
    branching: usize,
    threshold: f64,
) -> Option<CfNodeEntry> {
    if node.leaf {
        if node.entries.is_empty() {
            node.entries.push(CfNodeEntry {
                cf: CfEntry::from_point(p),
                child: None,
                members: vec![id.to_string()],
            });
            return None;
        }
        let closest = node.closest_entry(p);
        let merged = node.entries[closest]
            .cf
            .merge(&CfEntry::from_point(p))
            .expect("uniform dims");
        if merged.radius() <= threshold {
            node.entries[closest].cf = merged;
            node.entries[closest].members.push(id.to_string());
            return None;
        }
        node.entries.push(CfNodeEntry {
            cf: CfEntry::from_point(p),
            child: None,
            members: vec![id.to_string()],
        });
    } else {
        let closest = node.closest_entry(p);
        let child = node.entries[closest].child.as_mut().expect("internal entry");
        let split = insert(child, p, id, branching, threshold);
        node.entries[closest].cf = node.entries[closest]
            .child
            .as_ref()
            .expect("internal entry")
            .cf_sum();
        if let Some(sibling) = split {
            node.entries.push(sibling);
        }
    }
    if node.entries.len() > branching {
        Some(split_node(node))
    } else {
        None
    }
}

/// Splits an overfull node around its farthest pair of entry centroids.
/// Remaining entries join the nearer seed, ties going to the lower-indexed
/// one, so the outcome is deterministic.
fn split_node(node: &mut CfNode) -> CfNodeEntry {
    let centroids: Vec<Vec<f64>> = node.entries.iter().map(|e| e.cf.centroid()).collect();
    let (mut seed_a, mut seed_b, mut best) = (0, 1, f64::NEG_INFINITY);
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            let d = euclidean(&centroids[i], &centroids[j]);
            if d > best {
                best = d;
                seed_a = i;
                seed_b = j;
            }
        }
    }
    let mut keep = Vec::new();
    let mut moved = Vec::new();
    for (i, entry) in node.entries.drain(..).enumerate() {
        if i == seed_a {
            keep.push(entry);
        } else if i == seed_b {
            moved.push(entry);
        } else {
            let da = euclidean(&centroids[i], &centroids[seed_a]);
            let db = euclidean(&centroids[i], &centroids[seed_b]);
            if db < da {
                moved.push(entry);
            } else {
                keep.push(entry);
            }
        }
    }
    let sibling = CfNode {
        leaf: node.leaf,
        entries: moved,
    };
    node.entries = keep;
    CfNodeEntry {
        cf: sibling.cf_sum(),
        child: Some(Box::new(sibling)),
        members: Vec::new(),
    }
}

impl ClusterTree {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn normalize_unclamped(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }

    /// Normalizes a raw vector with the stored bounds, clamping out-of-range
    /// values into `[0,1]`.
    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>, ClusterError> {
        if raw.len() != self.dim() {
            return Err(ClusterError::DimensionMismatch {
                expected: self.dim(),
                got: raw.len(),
            });
        }
        Ok(self
            .normalize_unclamped(raw)
            .iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect())
    }

    /// Number of cluster levels below the root cluster. A tree whose root is
    /// a single leaf node has depth 1; leaf clusters always live at level
    /// `depth` and level 0 is the whole corpus.
    pub fn depth(&self) -> usize {
        let mut levels = 1;
        let mut node = &self.root;
        while !node.leaf {
            node = node.entries[0].child.as_ref().expect("internal entry");
            levels += 1;
        }
        levels
    }

    fn rebuild_member_index(&mut self) {
        fn walk(node: &CfNode, path: &mut Vec<usize>, index: &mut BTreeMap<String, Vec<usize>>) {
            for (i, entry) in node.entries.iter().enumerate() {
                path.push(i);
                match &entry.child {
                    Some(child) => walk(child, path, index),
                    None => {
                        for m in &entry.members {
                            index.insert(m.clone(), path.clone());
                        }
                    }
                }
                path.pop();
            }
        }
        let mut index = BTreeMap::new();
        let mut path = Vec::new();
        walk(&self.root, &mut path, &mut index);
        self.member_index = index;
    }

    fn collect_members(node: &CfNode, entry_idx: usize, out: &mut Vec<String>) {
        let entry = &node.entries[entry_idx];
        match &entry.child {
            Some(child) => {
                for i in 0..child.entries.len() {
                    Self::collect_members(child, i, out);
                }
            }
            None => out.extend(entry.members.iter().cloned()),
        }
    }

    /// Clusters at one level of the tree, in depth-first entry order. The
    /// clusters of any level partition the full project set: level 0 is one
    /// cluster holding everything, level `depth` is the leaf clusters.
    pub fn clusters_at_level(&self, level: usize) -> Result<Vec<Cluster>, ClusterError> {
        let depth = self.depth();
        if level > depth {
            return Err(ClusterError::LevelOutOfRange { level, depth });
        }
        if level == 0 {
            let mut members = Vec::new();
            for i in 0..self.root.entries.len() {
                Self::collect_members(&self.root, i, &mut members);
            }
            return Ok(vec![Cluster {
                prefix: Vec::new(),
                members,
            }]);
        }
        // Entries of nodes at node depth `level - 1` are the level's clusters.
        fn walk(
            node: &CfNode,
            remaining: usize,
            path: &mut Vec<usize>,
            out: &mut Vec<Cluster>,
        ) {
            if remaining == 0 {
                for (i, _) in node.entries.iter().enumerate() {
                    let mut members = Vec::new();
                    ClusterTree::collect_members(node, i, &mut members);
                    path.push(i);
                    out.push(Cluster {
                        prefix: path.clone(),
                        members,
                    });
                    path.pop();
                }
            } else {
                for (i, entry) in node.entries.iter().enumerate() {
                    path.push(i);
                    walk(
                        entry.child.as_ref().expect("balanced tree"),
                        remaining - 1,
                        path,
                        out,
                    );
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        let mut path = Vec::new();
        walk(&self.root, level - 1, &mut path, &mut out);
        Ok(out)
    }

    /// Routes a raw summary vector down the tree, following the nearest child
    /// centroid (ties to the lower entry index). Out-of-bounds values are
    /// clamped into the normalized space first. The result is the entry-index
    /// path from the root to a leaf entry.
    pub fn descend(&self, raw: &[f64]) -> Result<Vec<usize>, ClusterError> {
        let p = self.normalize(raw)?;
        let mut path = Vec::new();
        let mut node = &self.root;
        loop {
            let idx = node.closest_entry(&p);
            path.push(idx);
            match &node.entries[idx].child {
                Some(child) => node = child,
                None => return Ok(path),
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<ClusterTree, ClusterError> {
        let tree: ClusterTree =
            serde_json::from_str(text).map_err(|e| ClusterError::Format(e.to_string()))?;
        if tree.format_version != TREE_FORMAT_VERSION {
            return Err(ClusterError::Format(format!(
                "unsupported tree format version {} (expected {})",
                tree.format_version, TREE_FORMAT_VERSION
            )));
        }
        Ok(tree)
    }

    /// Checks that every internal entry's feature equals the sum of its
    /// child's entries, within `tol`. Used by tests; cheap enough to run on
    /// any tree.
    pub fn cf_consistent(&self, tol: f64) -> bool {
        fn check(node: &CfNode, tol: f64) -> bool {
            for entry in &node.entries {
                if let Some(child) = &entry.child {
                    let sum = child.cf_sum();
                    let close = entry.cf.n == sum.n
                        && (entry.cf.square_sum - sum.square_sum).abs() <= tol
                        && entry
                            .cf
                            .linear_sum
                            .iter()
                            .zip(&sum.linear_sum)
                            .all(|(a, b)| (a - b).abs() <= tol);
                    if !close || !check(child, tol) {
                        return false;
                    }
                }
            }
            true
        }
        check(&self.root, tol)
    }

    /// Largest leaf-entry radius in the tree, in normalized space.
    pub fn max_leaf_radius(&self) -> f64 {
        fn walk(node: &CfNode, max: &mut f64) {
            for entry in &node.entries {
                match &entry.child {
                    Some(child) => walk(child, max),
                    None => *max = max.max(entry.cf.radius()),
                }
            }
        }
        let mut max: f64 = 0.0;
        walk(&self.root, &mut max);
        max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    fn sv(id: &str, values: Vec<f64>) -> SummaryVector {
        SummaryVector {
            project_id: id.to_string(),
            values,
        }
    }

    /// Two tight groups sitting at opposite corners of an 8-dimensional cube.
    /// In normalized space the group centers are ~sqrt(8) apart, so even the
    /// worst insertion order (a whole group before the first point of the
    /// other) keeps the merged radius above the 0.5 threshold: absorbing one
    /// far point into k tight ones gives radius ~ D*sqrt(k)/(k+1), and with
    /// D ~ 2.5 and k <= 10 that is at least 0.72.
    fn two_groups(seed: u64) -> Vec<SummaryVector> {
        let mut rng = StdRng::seed_from_u64(seed);
        let dim = 8;
        let mut out = Vec::new();
        for g in 0..2 {
            for i in 0..10 {
                let values = (0..dim)
                    .map(|_| g as f64 * 10.0 + rng.gen_range(-0.2..0.2))
                    .collect();
                out.push(sv(&format!("g{g}p{i}"), values));
            }
        }
        out
    }

    #[test]
    fn cf_merge_is_componentwise_addition() {
        let a = CfEntry::from_point(&[0.0, 0.0]);
        let b = CfEntry::from_point(&[1.0, 1.0]);
        let m = a.merge(&b).unwrap();
        assert_eq!(m.n, 2);
        assert_eq!(m.linear_sum, vec![1.0, 1.0]);
        assert_eq!(m.square_sum, 2.0);
        assert!((m.radius() - (0.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_point_entry_has_zero_radius() {
        assert_eq!(CfEntry::from_point(&[3.0, 4.0]).radius(), 0.0);
    }

    #[test]
    fn merge_rejects_mismatched_dimensions() {
        let a = CfEntry::from_point(&[0.0]);
        let b = CfEntry::from_point(&[0.0, 1.0]);
        assert!(matches!(
            a.merge(&b),
            Err(ClusterError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn well_separated_groups_form_two_leaf_clusters() {
        let tree = build_tree(&two_groups(1), DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(tree.depth(), 1);
        let leaves = tree.clusters_at_level(1).unwrap();
        assert_eq!(leaves.len(), 2);
        for leaf in &leaves {
            let prefixes: std::collections::BTreeSet<char> = leaf
                .members
                .iter()
                .map(|m| m.chars().nth(1).unwrap())
                .collect();
            assert_eq!(prefixes.len(), 1, "a leaf mixed the two groups");
        }
    }

    #[test]
    fn leaf_partition_is_stable_across_insertion_orders() {
        let mut base = two_groups(2);
        let reference = {
            let tree = build_tree(&base, DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
            let mut leaves: Vec<Vec<String>> = tree
                .clusters_at_level(1)
                .unwrap()
                .into_iter()
                .map(|c| {
                    let mut m = c.members;
                    m.sort();
                    m
                })
                .collect();
            leaves.sort();
            leaves
        };
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..10 {
            base.shuffle(&mut rng);
            let tree = build_tree(&base, DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
            let mut leaves: Vec<Vec<String>> = tree
                .clusters_at_level(tree.depth())
                .unwrap()
                .into_iter()
                .map(|c| {
                    let mut m = c.members;
                    m.sort();
                    m
                })
                .collect();
            leaves.sort();
            assert_eq!(leaves, reference);
        }
    }

    #[test]
    fn every_level_partitions_the_project_set() {
        let mut rng = StdRng::seed_from_u64(5);
        // one tight group per axis corner, far enough apart that no pair of
        // groups fits inside the absorb radius, so branching 3 must split
        let summaries: Vec<SummaryVector> = (0..40)
            .map(|i| {
                let group = i / 4;
                sv(
                    &format!("p{i:02}"),
                    (0..10)
                        .map(|d| {
                            let base = if d == group { 10.0 } else { 0.0 };
                            base + rng.gen_range(-0.1..0.1)
                        })
                        .collect(),
                )
            })
            .collect();
        let tree = build_tree(&summaries, 3, DEFAULT_THRESHOLD).unwrap();
        assert!(tree.depth() >= 2, "expected splits at branching 3");
        assert!(tree.cf_consistent(1e-9));
        let all: std::collections::BTreeSet<String> =
            summaries.iter().map(|s| s.project_id.clone()).collect();
        for level in 0..=tree.depth() {
            let clusters = tree.clusters_at_level(level).unwrap();
            let mut seen = std::collections::BTreeSet::new();
            for c in &clusters {
                for m in &c.members {
                    assert!(seen.insert(m.clone()), "duplicate member at level {level}");
                }
            }
            assert_eq!(seen, all, "level {level} does not cover the corpus");
        }
        assert!(tree.max_leaf_radius() <= DEFAULT_THRESHOLD);
    }

    #[test]
    fn level_zero_is_one_cluster_and_overflow_errors() {
        let tree = build_tree(&two_groups(3), DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
        let top = tree.clusters_at_level(0).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].members.len(), 20);
        let depth = tree.depth();
        assert!(matches!(
            tree.clusters_at_level(depth + 1),
            Err(ClusterError::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn member_index_paths_agree_with_descend() {
        let summaries = two_groups(4);
        let tree = build_tree(&summaries, DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
        for s in &summaries {
            let indexed = &tree.member_index[&s.project_id];
            let descended = tree.descend(&s.values).unwrap();
            assert_eq!(indexed, &descended);
        }
    }

    #[test]
    fn descend_clamps_out_of_bounds_vectors() {
        let tree = build_tree(&two_groups(6), DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
        let way_low = vec![-1e6; 8];
        let way_high = vec![1e6; 8];
        let low_path = tree.descend(&way_low).unwrap();
        let high_path = tree.descend(&way_high).unwrap();
        // clamped extremes land in the group sitting at that corner
        assert_ne!(low_path, high_path);
        assert!(matches!(
            tree.descend(&[0.0; 3]),
            Err(ClusterError::DimensionMismatch { expected: 8, got: 3 })
        ));
    }

    #[test]
    fn descend_breaks_centroid_ties_toward_the_lower_entry() {
        // two single-point entries equidistant from the probe
        let summaries = vec![sv("a", vec![0.0, 0.0]), sv("b", vec![10.0, 10.0])];
        let tree = build_tree(&summaries, DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.clusters_at_level(1).unwrap().len(), 2);
        let path = tree.descend(&[5.0, 5.0]).unwrap();
        assert_eq!(path, vec![0]);
    }

    #[test]
    fn singleton_corpus_builds_a_depth_one_tree() {
        let tree = build_tree(&[sv("only", vec![1.0, 2.0])], 20, 0.5).unwrap();
        assert_eq!(tree.depth(), 1);
        let leaves = tree.clusters_at_level(1).unwrap();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].members, vec!["only".to_string()]);
    }

    #[test]
    fn build_rejects_bad_inputs() {
        assert!(matches!(build_tree(&[], 20, 0.5), Err(ClusterError::EmptyInput)));
        let s = vec![sv("a", vec![0.0]), sv("a", vec![1.0])];
        assert!(matches!(
            build_tree(&s, 20, 0.5),
            Err(ClusterError::DuplicateProject(_))
        ));
        let s = vec![sv("a", vec![0.0])];
        assert!(build_tree(&s, 1, 0.5).is_err());
        assert!(build_tree(&s, 20, -0.1).is_err());
    }

    #[test]
    fn json_round_trip_preserves_the_tree() {
        let tree = build_tree(&two_groups(8), DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
        let text = tree.to_json();
        let back = ClusterTree::from_json(&text).unwrap();
        assert_eq!(tree, back);
    }

    #[test]
    fn stale_format_versions_are_rejected() {
        let mut tree = build_tree(&two_groups(9), DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
        tree.format_version = 999;
        let text = serde_json::to_string(&tree).unwrap();
        assert!(matches!(ClusterTree::from_json(&text), Err(ClusterError::Format(_))));
    }
}
