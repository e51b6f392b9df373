//! Response-time comparison of the three retrieval strategies.
//!
//! Every probe is run against its (topic, stance) index by each method, with
//! a fresh used-set per run. Rows report mean wall-clock seconds and mean
//! scorer invocations. Comparison counts are deterministic for a given seed
//! and scorer; wall-clock is indicative only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{ClusterIndex, IndexSet};
use crate::corpus::Stance;
use crate::exec::Exec;
use crate::retrieval::{GraphThresholds, RetrievalError, Retriever, Strategy};
use crate::similarity::{Scorer, ScorerKind};

/// Repetitions per probe when none are given.
pub const DEFAULT_REPETITIONS: usize = 5;
/// Minimum probes per (topic, stance) row.
pub const MIN_PROBES: usize = 3;

/// One benchmark query, run against the pool of `(topic, stance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub topic: String,
    pub stance: Stance,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Strategy>,
    pub repetitions: usize,
    pub seed: u64,
    pub thresholds: GraphThresholds,
    /// Timing runs default to sequential scoring so methods are compared on
    /// work done rather than on how well they parallelise.
    pub exec: Exec,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: Strategy::ALL.to_vec(),
            repetitions: DEFAULT_REPETITIONS,
            seed: 7,
            thresholds: GraphThresholds::default(),
            exec: Exec::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub topic: String,
    pub stance: Stance,
    pub method: Strategy,
    pub mean_elapsed_secs: f64,
    pub mean_comparisons: f64,
    pub probe_count: usize,
    /// All comparison counts, probe-major then repetition.
    pub comparisons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub k: BTreeMap<String, usize>,
    pub thresholds: GraphThresholds,
    pub scorer: ScorerKind,
    pub seed: u64,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub config: ConfigEcho,
}

impl BenchReport {
    pub fn row(&self, topic: &str, stance: Stance, method: Strategy) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.topic == topic && r.stance == stance && r.method == method)
    }

    /// Distinct (topic, stance) pairs in row order.
    pub fn groups(&self) -> Vec<(String, Stance)> {
        let mut out: Vec<(String, Stance)> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|(t, s)| *t == r.topic && *s == r.stance) {
                out.push((r.topic.clone(), r.stance));
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no index for topic {topic:?} stance {stance}")]
    MissingIndex { topic: String, stance: Stance },
    #[error("no probes given")]
    NoProbes,
    #[error("no methods given")]
    NoMethods,
    #[error("{topic:?}/{stance} has {count} probes, at least {MIN_PROBES} are required")]
    TooFewProbes { topic: String, stance: Stance, count: usize },
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Table row order: death penalty, gun control, gay marriage, then any
/// other topic alphabetically; "for" before "against".
fn row_key(topic: &str, stance: Stance) -> (usize, String, Stance) {
    let rank = ["death_penalty", "gun_control", "gay_marriage"].iter().position(|t| *t == topic).unwrap_or(3);
    (rank, topic.to_string(), stance)
}

fn run_seed(seed: u64, probe: usize, rep: usize) -> u64 {
    seed ^ ((probe as u64) << 32 | rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn run_bench(
    indexes: &IndexSet,
    probes: &[Probe],
    scorer: &dyn Scorer,
    config: &BenchConfig,
) -> Result<BenchReport, BenchError> {
    if probes.is_empty() {
        return Err(BenchError::NoProbes);
    }
    if config.methods.is_empty() {
        return Err(BenchError::NoMethods);
    }
    if config.repetitions == 0 {
        return Err(BenchError::NoRepetitions);
    }
    let retriever = Retriever::new(scorer).with_thresholds(config.thresholds)?.with_exec(config.exec);

    let mut groups: BTreeMap<(usize, String, Stance), Vec<&Probe>> = BTreeMap::new();
    for p in probes {
        groups.entry(row_key(&p.topic, p.stance)).or_default().push(p);
    }
    let mut methods: Vec<Strategy> = config.methods.clone();
    methods.sort();
    methods.dedup();

    let mut rows = Vec::new();
    let mut k = BTreeMap::new();
    for ((_, topic, stance), group) in groups {
        let index: &ClusterIndex =
            indexes.get(&topic, stance).ok_or_else(|| BenchError::MissingIndex { topic: topic.clone(), stance })?;
        if group.len() < MIN_PROBES {
            return Err(BenchError::TooFewProbes { topic, stance, count: group.len() });
        }
        k.insert(format!("{topic}/{stance}"), index.k());
        let unused = BTreeSet::new();
        for &method in &methods {
            let mut elapsed = 0.0;
            let mut comparisons = Vec::with_capacity(group.len() * config.repetitions);
            for (pi, probe) in group.iter().enumerate() {
                for rep in 0..config.repetitions {
                    let r = retriever.retrieve(method, &probe.text, index, &unused, run_seed(config.seed, pi, rep))?;
                    elapsed += r.result.elapsed.as_secs_f64();
                    comparisons.push(r.result.comparisons);
                }
            }
            let runs = comparisons.len() as f64;
            rows.push(BenchRow {
                topic: topic.clone(),
                stance,
                method,
                mean_elapsed_secs: elapsed / runs,
                mean_comparisons: comparisons.iter().sum::<usize>() as f64 / runs,
                probe_count: group.len(),
                comparisons,
            });
        }
    }
    Ok(BenchReport {
        rows,
        config: ConfigEcho {
            k,
            thresholds: config.thresholds,
            scorer: scorer.kind(),
            seed: config.seed,
            repetitions: config.repetitions,
        },
    })
}

/// Probes for a pool without hand-written ones: the heads of `count`
/// clusters spread evenly over the cluster ids, topped up with other
/// members when there are fewer clusters than probes.
pub fn default_probes(index: &ClusterIndex, count: usize) -> Vec<Probe> {
    let k = index.k();
    let mut ids: Vec<&str> = Vec::new();
    for p in 0..count.min(k) {
        ids.push(&index.clusters()[p * k / count.min(k)].head_id);
    }
    for id in index.record_texts().keys() {
        if ids.len() >= count {
            break;
        }
        if !ids.contains(&id.as_str()) {
            ids.push(id);
        }
    }
    ids.into_iter()
        .map(|id| Probe {
            topic: index.topic().to_string(),
            stance: index.stance(),
            text: index.text(id).expect("id from index").to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?} (expected table or csv)")),
        }
    }
}

#[derive(Clone, Copy)]
enum Metric {
    Seconds,
    Comparisons,
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::Seconds => "seconds",
            Metric::Comparisons => "comparisons",
        }
    }

    fn value(self, row: &BenchRow) -> f64 {
        match self {
            Metric::Seconds => row.mean_elapsed_secs,
            Metric::Comparisons => row.mean_comparisons,
        }
    }
}

/// Renders the report as two tables (seconds, then comparisons) with
/// columns topic, stance, baseline, cluster, graph.
pub fn emit_report(report: &BenchReport, format: ReportFormat) -> String {
    let groups = report.groups();
    let cell = |metric: Metric, topic: &str, stance: Stance, method: Strategy| {
        report.row(topic, stance, method).map(|r| metric.value(r))
    };
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["metric", "topic", "stance", "baseline", "cluster", "graph"]).expect("in-memory write");
            for metric in [Metric::Seconds, Metric::Comparisons] {
                for (topic, stance) in &groups {
                    let mut record = vec![metric.name().to_string(), topic.clone(), stance.label().to_string()];
                    for m in Strategy::ALL {
                        record.push(cell(metric, topic, *stance, m).map(|v| v.to_string()).unwrap_or_default());
                    }
                    w.write_record(&record).expect("in-memory write");
                }
            }
            String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
        }
        ReportFormat::Table => {
            let c = &report.config;
            let mut out = String::new();
            let _ = writeln!(
                out,
                "# scorer={} thresholds={} seed={} repetitions={}",
                c.scorer, c.thresholds, c.seed, c.repetitions
            );
            let width = groups.iter().map(|(t, _)| t.len()).max().unwrap_or(5).max(5);
            for (metric, title, precision) in [
                (Metric::Seconds, "Average response time (seconds)", 6),
                (Metric::Comparisons, "Average comparisons (scorer calls)", 1),
            ] {
                let _ = writeln!(out, "\n{title}");
                let _ = writeln!(
                    out,
                    "{:<width$} | {:<7} | {:>12} | {:>12} | {:>12}",
                    "topic", "stance", "baseline", "cluster", "graph"
                );
                let _ = writeln!(out, "{}", "-".repeat(width + 52));
                for (topic, stance) in &groups {
                    let fmt = |m| {
                        cell(metric, topic, *stance, m)
                            .map(|v| format!("{v:.precision$}"))
                            .unwrap_or_else(|| "-".into())
                    };
                    let _ = writeln!(
                        out,
                        "{:<width$} | {:<7} | {:>12} | {:>12} | {:>12}",
                        topic,
                        stance.label(),
                        fmt(Strategy::Baseline),
                        fmt(Strategy::Cluster),
                        fmt(Strategy::Graph)
                    );
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::IndexOptions;
    use crate::similarity::LexicalScorer;
    use crate::synth::{generate_corpus, SyntheticSpec};

    fn setup(topics: &[&str], per_stance: usize) -> (IndexSet, Vec<Probe>) {
        let spec = SyntheticSpec {
            topics: topics.iter().map(|s| s.to_string()).collect(),
            per_stance,
            vocabulary: 600,
            clusters: 5,
            ..Default::default()
        };
        let synth = generate_corpus(&spec).unwrap();
        let set = IndexSet::build(&synth.corpus, &LexicalScorer, &IndexOptions { k: 5, ..Default::default() }).unwrap();
        (set, synth.probes)
    }

    #[test]
    fn six_rows_for_one_topic() {
        let (set, probes) = setup(&["death_penalty"], 40);
        let report =
            run_bench(&set, &probes, &LexicalScorer, &BenchConfig { repetitions: 2, ..Default::default() }).unwrap();
        assert_eq!(report.rows.len(), 6);
        for (topic, stance) in report.groups() {
            for m in Strategy::ALL {
                let row = report.row(&topic, stance, m).unwrap();
                assert_eq!(row.probe_count, 3);
                assert_eq!(row.comparisons.len(), 6);
            }
            assert_eq!(report.row(&topic, stance, Strategy::Baseline).unwrap().mean_comparisons, 40.0);
        }
    }

    #[test]
    fn rows_follow_table_order() {
        let (set, probes) = setup(&["gay_marriage", "abortion", "gun_control", "death_penalty"], 10);
        let report =
            run_bench(&set, &probes, &LexicalScorer, &BenchConfig { repetitions: 1, ..Default::default() }).unwrap();
        let order: Vec<(String, &str)> = report.groups().into_iter().map(|(t, s)| (t, s.label())).collect();
        let expected: Vec<(String, &str)> = ["death_penalty", "gun_control", "gay_marriage", "abortion"]
            .iter()
            .flat_map(|t| [(t.to_string(), "for"), (t.to_string(), "against")])
            .collect();
        assert_eq!(order, expected);
        let table = emit_report(&report, ReportFormat::Table);
        let dp = table.find("death_penalty | for").unwrap();
        let gc = table.find("gun_control").unwrap();
        assert!(dp < gc);
    }

    #[test]
    fn table_and_csv_shapes() {
        let (set, probes) = setup(&["death_penalty"], 20);
        let report =
            run_bench(&set, &probes, &LexicalScorer, &BenchConfig { repetitions: 1, ..Default::default() }).unwrap();
        let table = emit_report(&report, ReportFormat::Table);
        assert_eq!(table.lines().filter(|l| l.starts_with("death_penalty")).count(), 4);

        let csv_text = emit_report(&report, ReportFormat::Csv);
        let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 4);
        for rec in rows {
            let metric = &rec[0];
            let stance: Stance = rec[2].parse().unwrap();
            for (col, m) in Strategy::ALL.iter().enumerate() {
                let parsed: f64 = rec[3 + col].parse().unwrap();
                let row = report.row(&rec[1], stance, *m).unwrap();
                let expected = if metric == "seconds" { row.mean_elapsed_secs } else { row.mean_comparisons };
                assert_eq!(parsed, expected);
            }
        }
    }

    #[test]
    fn errors() {
        let (set, probes) = setup(&["death_penalty"], 10);
        let cfg = BenchConfig::default();
        assert!(matches!(run_bench(&set, &[], &LexicalScorer, &cfg), Err(BenchError::NoProbes)));
        let stray = vec![Probe { topic: "other".into(), stance: Stance::Pro, text: "x".into() }; 3];
        assert!(matches!(run_bench(&set, &stray, &LexicalScorer, &cfg), Err(BenchError::MissingIndex { .. })));
        assert!(matches!(
            run_bench(&set, &probes[..2], &LexicalScorer, &cfg),
            Err(BenchError::TooFewProbes { count: 2, .. })
        ));
    }

    #[test]
    fn comparison_counts_are_deterministic() {
        let (set, probes) = setup(&["death_penalty"], 30);
        let cfg = BenchConfig { repetitions: 3, ..Default::default() };
        let a = run_bench(&set, &probes, &LexicalScorer, &cfg).unwrap();
        let b = run_bench(&set, &probes, &LexicalScorer, &cfg).unwrap();
        let counts = |r: &BenchReport| r.rows.iter().map(|x| x.comparisons.clone()).collect::<Vec<_>>();
        assert_eq!(counts(&a), counts(&b));
    }

    #[test]
    fn default_probes_hit_distinct_heads() {
        let (set, _) = setup(&["death_penalty"], 30);
        let index = set.get("death_penalty", Stance::Pro).unwrap();
        let probes = default_probes(index, 3);
        assert_eq!(probes.len(), 3);
        let distinct: BTreeSet<&str> = probes.iter().map(|p| p.text.as_str()).collect();
        assert_eq!(distinct.len(), 3);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        /// With k >= 2, at least 4k records and no more planted groups than
        /// clusters, the cluster method beats the scan and the graph walk
        /// costs at most k extra head visits over it.
        #[test]
        fn method_ordering_on_planted_pools(k in 2usize..8, per_k in 4usize..10, planted in 2usize..8, seed in 0u64..1000) {
            let spec = SyntheticSpec {
                topics: vec!["death_penalty".into()],
                per_stance: k * per_k,
                vocabulary: 800,
                clusters: planted.min(k),
                seed,
                ..Default::default()
            };
            let synth = generate_corpus(&spec).unwrap();
            let set = IndexSet::build(&synth.corpus, &LexicalScorer, &IndexOptions { k, ..Default::default() }).unwrap();
            let cfg = BenchConfig { repetitions: 2, seed, ..Default::default() };
            let report = run_bench(&set, &synth.probes, &LexicalScorer, &cfg).unwrap();
            for (topic, stance) in report.groups() {
                let m = |s| report.row(&topic, stance, s).unwrap().mean_comparisons;
                proptest::prop_assert!(m(Strategy::Cluster) < m(Strategy::Baseline));
                proptest::prop_assert!(m(Strategy::Graph) <= m(Strategy::Cluster) + k as f64);
            }
        }
    }

    /// More planted groups than clusters: equal cross-group distances chain
    /// into one large cluster, and routing to it costs as much as the scan.
    #[test]
    fn unbalanced_clusters_can_cost_as_much_as_the_scan() {
        let spec = SyntheticSpec {
            topics: vec!["death_penalty".into()],
            per_stance: 8,
            vocabulary: 800,
            clusters: 4,
            seed: 11,
            ..Default::default()
        };
        let synth = generate_corpus(&spec).unwrap();
        let set = IndexSet::build(&synth.corpus, &LexicalScorer, &IndexOptions { k: 2, ..Default::default() }).unwrap();
        let sizes: Vec<usize> =
            set.get("death_penalty", Stance::Pro).unwrap().clusters().iter().map(|c| c.member_ids.len()).collect();
        assert_eq!(sizes, [6, 2]);
        let report = run_bench(&set, &synth.probes, &LexicalScorer, &BenchConfig::default()).unwrap();
        let row = |m| report.row("death_penalty", Stance::Pro, m).unwrap().mean_comparisons;
        assert_eq!(row(Strategy::Cluster), row(Strategy::Baseline));
    }
}
