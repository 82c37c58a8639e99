//! Shared fixtures for the criterion benches.

use general_core::data::ProjectTable;
use general_core::synth::sweep_corpus;

pub fn bench_corpus(n_projects: usize, rows: usize) -> Vec<ProjectTable> {
    sweep_corpus(n_projects, 5, rows, 42)
}
