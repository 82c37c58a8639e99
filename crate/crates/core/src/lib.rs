//! Hierarchical bellwether selection for cross-project prediction.
//!
//! The pipeline summarizes each project into one vector of per-feature
//! medians, clusters the summaries into a CF tree, runs a round-robin
//! tournament in every leaf cluster, and promotes cluster winners up the
//! hierarchy until a single corpus-level bellwether remains. New projects
//! are routed down the same tree to pick up a transfer model at any level,
//! and the [`rig`] module wraps the whole thing in a repeated-holdout
//! experiment with rank tables and budget accounting.

pub mod bellwether;
pub mod cluster;
pub mod data;
pub mod eval;
pub mod learn;
pub mod prep;
pub mod rig;
pub mod stats;
pub mod synth;
pub mod util;

pub use bellwether::{
    general, tournament, BellwetherMap, ComparisonBudget, GeneralResult, ModelCache,
    PipelineConfig, TrainedModel,
};
pub use cluster::{build_tree, ClusterTree};
pub use data::{summarize, FeatureSchema, ProjectTable, SummaryVector, Task};
pub use eval::{GoalKind, GoalVector};
pub use rig::{run_rig, RigConfig, RigOutcome};
