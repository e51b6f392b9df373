//! The three retrieval strategies.
//!
//! * **baseline** scores the query against every unused record.
//! * **cluster** scores every cluster head, then the members of the best
//!   head's cluster.
//! * **graph** walks the head graph from a start head, accepting a head
//!   outright above the accept threshold and pruning heads through head-edge
//!   similarities, then scores the members of the chosen cluster.
//!
//! Every strategy skips ids in the caller's `used` set and reports how many
//! scorer invocations it made.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::ClusterIndex;
use crate::exec::Exec;
use crate::similarity::{ScoreError, Scorer, SimilarityScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Baseline,
    Cluster,
    Graph,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Baseline, Strategy::Cluster, Strategy::Graph];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Cluster => "cluster",
            Strategy::Graph => "graph",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "baseline" => Ok(Strategy::Baseline),
            "cluster" => Ok(Strategy::Cluster),
            "graph" => Ok(Strategy::Graph),
            other => Err(format!("unknown strategy {other:?} (expected baseline, cluster or graph)")),
        }
    }
}

/// Graph traversal thresholds. Must satisfy `0 <= low <= high <= accept <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphThresholds {
    pub accept: f64,
    pub high: f64,
    pub low: f64,
}

impl Default for GraphThresholds {
    fn default() -> Self {
        GraphThresholds { accept: 0.9, high: 0.8, low: 0.5 }
    }
}

impl GraphThresholds {
    pub fn new(accept: f64, high: f64, low: f64) -> Result<Self, RetrievalError> {
        let t = GraphThresholds { accept, high, low };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        let ok = 0.0 <= self.low && self.low <= self.high && self.high <= self.accept && self.accept <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(RetrievalError::InvalidThresholds(*self))
        }
    }
}

impl fmt::Display for GraphThresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.accept, self.high, self.low)
    }
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("every record in the pool has already been used")]
    Exhausted,
    #[error("the pool is empty")]
    EmptyPool,
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("thresholds must satisfy 0 <= low <= high <= accept <= 1, got accept={}, high={}, low={}", .0.accept, .0.high, .0.low)]
    InvalidThresholds(GraphThresholds),
    #[error("start cluster {0} is not a live cluster of this index")]
    BadStart(usize),
}

/// How the graph walk picks its first head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartHead {
    /// Uniform over the live clusters, from a seeded generator.
    Random(u64),
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecord {
    pub record_id: String,
    pub score: SimilarityScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub record_id: String,
    pub score: SimilarityScore,
    /// Candidates of the final pool, best first (ties by ascending id).
    pub ranked_list: Vec<RankedRecord>,
    pub cluster_id: Option<usize>,
    /// Scorer invocations made by this call.
    pub comparisons: usize,
    #[serde(with = "duration_ms")]
    pub elapsed: Duration,
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1000.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    ThresholdAccept,
    ExhaustedBest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EliminationRule {
    /// Visited head was above `high`; removed heads whose edge is below `low`.
    HighSimilarity,
    /// Visited head was below `low`; removed heads whose edge is above `high`.
    LowSimilarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub cluster_id: usize,
    pub head_id: String,
    pub edge: f64,
    pub rule: EliminationRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphVisit {
    pub cluster_id: usize,
    pub head_id: String,
    pub similarity: f64,
    pub eliminated: Vec<Elimination>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSearchTrace {
    pub visits: Vec<GraphVisit>,
    pub termination: Termination,
    pub chosen_cluster: usize,
}

impl GraphSearchTrace {
    pub fn visit_order(&self) -> Vec<usize> {
        self.visits.iter().map(|v| v.cluster_id).collect()
    }

    pub fn eliminated(&self) -> Vec<usize> {
        self.visits.iter().flat_map(|v| v.eliminated.iter().map(|e| e.cluster_id)).collect()
    }
}

/// A result plus, for the graph strategy, its search trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub result: RetrievalResult,
    pub trace: Option<GraphSearchTrace>,
}

/// Runs the strategies against one scorer.
#[derive(Clone, Copy)]
pub struct Retriever<'a> {
    scorer: &'a dyn Scorer,
    thresholds: GraphThresholds,
    exec: Exec,
}

impl<'a> Retriever<'a> {
    pub fn new(scorer: &'a dyn Scorer) -> Self {
        Retriever { scorer, thresholds: GraphThresholds::default(), exec: Exec::default() }
    }

    pub fn with_thresholds(mut self, thresholds: GraphThresholds) -> Result<Self, RetrievalError> {
        thresholds.validate()?;
        self.thresholds = thresholds;
        Ok(self)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn thresholds(&self) -> GraphThresholds {
        self.thresholds
    }

    /// Dispatches on `strategy`; `seed` drives the graph start head.
    pub fn retrieve(
        &self,
        strategy: Strategy,
        query: &str,
        index: &ClusterIndex,
        used: &BTreeSet<String>,
        seed: u64,
    ) -> Result<Retrieval, RetrievalError> {
        match strategy {
            Strategy::Baseline => {
                Ok(Retrieval { result: self.baseline(query, index.record_texts().iter(), used)?, trace: None })
            }
            Strategy::Cluster => Ok(Retrieval { result: self.cluster(query, index, used)?, trace: None }),
            Strategy::Graph => {
                let (result, trace) = self.graph(query, index, used, StartHead::Random(seed))?;
                Ok(Retrieval { result, trace: Some(trace) })
            }
        }
    }

    /// Scores every unused record; returns the global best.
    pub fn baseline<'t, I>(
        &self,
        query: &str,
        records: I,
        used: &BTreeSet<String>,
    ) -> Result<RetrievalResult, RetrievalError>
    where
        I: IntoIterator<Item = (&'t String, &'t String)>,
    {
        let started = Instant::now();
        let mut total = 0;
        let candidates: Vec<(&str, &str)> = records
            .into_iter()
            .inspect(|_| total += 1)
            .filter(|(id, _)| !used.contains(*id))
            .map(|(id, text)| (id.as_str(), text.as_str()))
            .collect();
        if total == 0 {
            return Err(RetrievalError::EmptyPool);
        }
        if candidates.is_empty() {
            return Err(RetrievalError::Exhausted);
        }
        let (ranked_list, comparisons) = self.rank(query, candidates)?;
        Ok(finish(ranked_list, None, comparisons, started))
    }

    /// Routes to the best-scoring head's cluster; falls back to the
    /// next-best head when a cluster has no unused members left.
    pub fn cluster(
        &self,
        query: &str,
        index: &ClusterIndex,
        used: &BTreeSet<String>,
    ) -> Result<RetrievalResult, RetrievalError> {
        let started = Instant::now();
        if index.is_empty() {
            return Err(RetrievalError::EmptyPool);
        }
        if !has_unused(index, used) {
            return Err(RetrievalError::Exhausted);
        }
        let heads: Vec<&str> = (0..index.k()).map(|c| index.head_text(c)).collect();
        let head_scores = self.scorer.score_many(query, &heads, self.exec)?;
        let mut comparisons = heads.len();

        let mut order: Vec<usize> = (0..index.k()).collect();
        order.sort_by(|&a, &b| head_scores[b].value().total_cmp(&head_scores[a].value()).then(a.cmp(&b)));
        for cluster_id in order {
            let candidates = unused_members(index, cluster_id, used);
            if candidates.is_empty() {
                continue;
            }
            let (ranked_list, n) = self.rank(query, candidates)?;
            comparisons += n;
            return Ok(finish(ranked_list, Some(cluster_id), comparisons, started));
        }
        unreachable!("has_unused guarantees a live cluster")
    }

    /// Threshold-pruned walk over the head graph.
    ///
    /// Only clusters that still have unused members take part in the walk.
    pub fn graph(
        &self,
        query: &str,
        index: &ClusterIndex,
        used: &BTreeSet<String>,
        start: StartHead,
    ) -> Result<(RetrievalResult, GraphSearchTrace), RetrievalError> {
        let started = Instant::now();
        if index.is_empty() {
            return Err(RetrievalError::EmptyPool);
        }
        let live: Vec<usize> = (0..index.k()).filter(|&c| !unused_members(index, c, used).is_empty()).collect();
        if live.is_empty() {
            return Err(RetrievalError::Exhausted);
        }
        let first = match start {
            StartHead::Fixed(c) if live.contains(&c) => c,
            StartHead::Fixed(c) => return Err(RetrievalError::BadStart(c)),
            StartHead::Random(seed) => live[ChaCha8Rng::seed_from_u64(seed).random_range(0..live.len())],
        };

        let t = self.thresholds;
        let mut candidates: BTreeSet<usize> = live.into_iter().collect();
        let mut visits: Vec<GraphVisit> = Vec::new();
        let mut current = first;
        let (chosen, termination) = loop {
            candidates.remove(&current);
            let s = self.scorer.score(query, index.head_text(current))?.value();
            let mut visit = GraphVisit {
                cluster_id: current,
                head_id: index.clusters()[current].head_id.clone(),
                similarity: s,
                eliminated: Vec::new(),
            };
            if s >= t.accept {
                visits.push(visit);
                break (current, Termination::ThresholdAccept);
            }
            let rule = if s > t.high {
                Some(EliminationRule::HighSimilarity)
            } else if s < t.low {
                Some(EliminationRule::LowSimilarity)
            } else {
                None
            };
            if let Some(rule) = rule {
                for &g in &candidates {
                    let edge = index.head_similarity(current, g);
                    let prune = match rule {
                        EliminationRule::HighSimilarity => edge < t.low,
                        EliminationRule::LowSimilarity => edge > t.high,
                    };
                    if prune {
                        visit.eliminated.push(Elimination {
                            cluster_id: g,
                            head_id: index.clusters()[g].head_id.clone(),
                            edge,
                            rule,
                        });
                    }
                }
                for e in &visit.eliminated {
                    candidates.remove(&e.cluster_id);
                }
            }
            visits.push(visit);

            let next = candidates.iter().copied().fold(None, |best: Option<usize>, g| match best {
                Some(b) if index.head_similarity(current, g) <= index.head_similarity(current, b) => Some(b),
                _ => Some(g),
            });
            match next {
                Some(g) => current = g,
                None => {
                    let best = visits
                        .iter()
                        .fold(None, |best: Option<&GraphVisit>, v| match best {
                            Some(b)
                                if v.similarity < b.similarity
                                    || (v.similarity == b.similarity && v.cluster_id > b.cluster_id) =>
                            {
                                Some(b)
                            }
                            _ => Some(v),
                        })
                        .expect("at least one visit");
                    break (best.cluster_id, Termination::ExhaustedBest);
                }
            }
        };

        let candidates = unused_members(index, chosen, used);
        let (ranked_list, n) = self.rank(query, candidates)?;
        let result = finish(ranked_list, Some(chosen), visits.len() + n, started);
        Ok((result, GraphSearchTrace { visits, termination, chosen_cluster: chosen }))
    }

    /// Scores `candidates` (ascending id) and sorts best first.
    fn rank(&self, query: &str, candidates: Vec<(&str, &str)>) -> Result<(Vec<RankedRecord>, usize), RetrievalError> {
        let texts: Vec<&str> = candidates.iter().map(|(_, t)| *t).collect();
        let scores = self.scorer.score_many(query, &texts, self.exec)?;
        let mut ranked: Vec<RankedRecord> = candidates
            .iter()
            .zip(scores)
            .map(|((id, _), score)| RankedRecord { record_id: id.to_string(), score })
            .collect();
        // stable: equal scores keep ascending id order
        ranked.sort_by(|a, b| b.score.value().total_cmp(&a.score.value()));
        Ok((ranked, texts.len()))
    }
}

fn finish(
    ranked_list: Vec<RankedRecord>,
    cluster_id: Option<usize>,
    comparisons: usize,
    started: Instant,
) -> RetrievalResult {
    let top = &ranked_list[0];
    RetrievalResult {
        record_id: top.record_id.clone(),
        score: top.score,
        cluster_id,
        comparisons,
        ranked_list,
        elapsed: started.elapsed(),
    }
}

fn unused_members<'i>(index: &'i ClusterIndex, cluster_id: usize, used: &BTreeSet<String>) -> Vec<(&'i str, &'i str)> {
    index.clusters()[cluster_id]
        .member_ids
        .iter()
        .filter(|id| !used.contains(*id))
        .map(|id| (id.as_str(), index.text(id).expect("member has text")))
        .collect()
}

fn has_unused(index: &ClusterIndex, used: &BTreeSet<String>) -> bool {
    index.record_texts().keys().any(|id| !used.contains(id))
}

/// Exhaustive search over `records` with the default executor.
pub fn retrieve_baseline<'t, I>(
    query: &str,
    records: I,
    used: &BTreeSet<String>,
    scorer: &dyn Scorer,
) -> Result<RetrievalResult, RetrievalError>
where
    I: IntoIterator<Item = (&'t String, &'t String)>,
{
    Retriever::new(scorer).baseline(query, records, used)
}

pub fn retrieve_cluster(
    query: &str,
    index: &ClusterIndex,
    used: &BTreeSet<String>,
    scorer: &dyn Scorer,
) -> Result<RetrievalResult, RetrievalError> {
    Retriever::new(scorer).cluster(query, index, used)
}

pub fn retrieve_graph(
    query: &str,
    index: &ClusterIndex,
    used: &BTreeSet<String>,
    scorer: &dyn Scorer,
    thresholds: GraphThresholds,
    start: StartHead,
) -> Result<(RetrievalResult, GraphSearchTrace), RetrievalError> {
    Retriever::new(scorer).with_thresholds(thresholds)?.graph(query, index, used, start)
}

/// Checks every elimination in `trace` against its rule, the recorded
/// visit similarity and the index's head edges. Returns the first
/// violation, if any.
pub fn check_trace(trace: &GraphSearchTrace, index: &ClusterIndex, t: GraphThresholds) -> Result<(), String> {
    let mut visited = HashSet::new();
    let mut eliminated = HashSet::new();
    for v in &trace.visits {
        if !visited.insert(v.cluster_id) || eliminated.contains(&v.cluster_id) {
            return Err(format!("cluster {} visited twice or after elimination", v.cluster_id));
        }
        for e in &v.eliminated {
            let edge = index.head_similarity(v.cluster_id, e.cluster_id);
            let ok = edge == e.edge
                && match e.rule {
                    EliminationRule::HighSimilarity => v.similarity > t.high && edge < t.low,
                    EliminationRule::LowSimilarity => v.similarity < t.low && edge > t.high,
                };
            if !ok {
                return Err(format!("elimination of {} from {} breaks its rule", e.cluster_id, v.cluster_id));
            }
            eliminated.insert(e.cluster_id);
        }
    }
    if visited.len() > index.k() {
        return Err("more visits than heads".into());
    }
    Ok(())
}
