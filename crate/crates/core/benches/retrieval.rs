//! Sequential vs rayon execution for the hot loops, plus the three
//! retrieval strategies side by side.
//!
//! `cargo bench -p debbie-core` runs both modes from one build; with
//! `--no-default-features` the parallel arm falls back to sequential.

use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use debbie_core::clustering::{build_index_with, IndexOptions};
use debbie_core::corpus::Stance;
use debbie_core::exec::Exec;
use debbie_core::retrieval::{Retriever, Strategy};
use debbie_core::similarity::{LexicalScorer, Scorer};
use debbie_core::synth::{generate_corpus, SyntheticCorpus, SyntheticSpec};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn corpus(per_stance: usize) -> SyntheticCorpus {
    let spec = SyntheticSpec {
        topics: vec!["death_penalty".into()],
        per_stance,
        vocabulary: 4000,
        ..SyntheticSpec::default()
    };
    generate_corpus(&spec).expect("synthetic corpus")
}

fn pair_scoring(c: &mut Criterion) {
    let synth = corpus(600);
    let pool = synth.corpus.pool_for("death_penalty", Stance::Pro).unwrap();
    let texts = pool.texts();
    let mut group = c.benchmark_group("score_matrix");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new(name, texts.len()), |b| {
            b.iter(|| LexicalScorer.score_matrix(black_box(&texts), exec).unwrap())
        });
    }
    group.finish();
}

fn index_build(c: &mut Criterion) {
    let synth = corpus(400);
    let pool = synth.corpus.pool_for("death_penalty", Stance::Pro).unwrap();
    let mut group = c.benchmark_group("build_index");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = IndexOptions { exec, ..IndexOptions::default() };
        group.bench_function(BenchmarkId::new(name, pool.records.len()), |b| {
            b.iter(|| build_index_with(black_box(&pool), &LexicalScorer, &opts).unwrap())
        });
    }
    group.finish();
}

fn baseline_scan(c: &mut Criterion) {
    let synth = corpus(2000);
    let pool = synth.corpus.pool_for("death_penalty", Stance::Con).unwrap();
    let index = build_index_with(&pool, &LexicalScorer, &IndexOptions::default()).unwrap();
    let query = &synth.probes[0].text;
    let used = BTreeSet::new();
    let mut group = c.benchmark_group("baseline_scan");
    for (name, exec) in MODES {
        let retriever = Retriever::new(&LexicalScorer).with_exec(exec);
        group.bench_function(BenchmarkId::new(name, index.len()), |b| {
            b.iter(|| retriever.baseline(black_box(query), index.record_texts().iter(), &used).unwrap())
        });
    }
    group.finish();
}

fn strategies(c: &mut Criterion) {
    let synth = corpus(2000);
    let pool = synth.corpus.pool_for("death_penalty", Stance::Con).unwrap();
    let index = build_index_with(&pool, &LexicalScorer, &IndexOptions::default()).unwrap();
    let query = &synth.probes[1].text;
    let used = BTreeSet::new();
    let retriever = Retriever::new(&LexicalScorer).with_exec(Exec::Sequential);
    let mut group = c.benchmark_group("strategy");
    for strategy in Strategy::ALL {
        group.bench_function(strategy.as_str(), |b| {
            b.iter(|| retriever.retrieve(strategy, black_box(query), &index, &used, 7).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pair_scoring, index_build, baseline_scan, strategies);
criterion_main!(benches);
