use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use general_bench::bench_corpus;
use general_core::bellwether::{tournament, ModelCache, PipelineConfig};
use general_core::cluster::{build_tree, DEFAULT_BRANCHING, DEFAULT_THRESHOLD};
use general_core::data::summarize;
use general_core::learn::{fit_forest, ForestParams, SplitCriterion};

fn quick_pipeline() -> PipelineConfig {
    let mut config = PipelineConfig::defect();
    config.forest.n_trees = 20;
    config
}

fn bench_tree_build(c: &mut Criterion) {
    let corpus = bench_corpus(100, 50);
    let summaries: Vec<_> = corpus.iter().map(|t| summarize(t).unwrap()).collect();
    c.bench_function("cf_tree_build_100", |b| {
        b.iter(|| build_tree(&summaries, DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap())
    });
}

fn bench_forest_fit(c: &mut Criterion) {
    let corpus = bench_corpus(1, 200);
    let params = ForestParams {
        n_trees: 50,
        ..ForestParams::default()
    };
    c.bench_function("forest_fit_200_rows", |b| {
        b.iter(|| fit_forest(&corpus[0], &params, SplitCriterion::Gini, 7).unwrap())
    });
}

fn bench_leaf_tournament(c: &mut Criterion) {
    let corpus = bench_corpus(8, 50);
    let tables: Vec<_> = corpus.iter().collect();
    let config = quick_pipeline();
    c.bench_function("leaf_tournament_8", |b| {
        b.iter_batched(
            || ModelCache::new(config.clone(), 11),
            |mut cache| tournament(&tables, &mut cache).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_general(c: &mut Criterion) {
    let corpus = bench_corpus(30, 40);
    let summaries: Vec<_> = corpus.iter().map(|t| summarize(t).unwrap()).collect();
    let tree = build_tree(&summaries, DEFAULT_BRANCHING, DEFAULT_THRESHOLD).unwrap();
    let map: BTreeMap<_, _> = corpus
        .iter()
        .map(|t| (t.project_id.clone(), t.clone()))
        .collect();
    let config = quick_pipeline();
    c.bench_function("general_30", |b| {
        b.iter(|| general_core::bellwether::general(&tree, &map, &config, 13).unwrap())
    });
}

criterion_group!(
    benches,
    bench_tree_build,
    bench_forest_fit,
    bench_leaf_tournament,
    bench_general
);
criterion_main!(benches);
