use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{agglomerative_cluster, build_distance_matrix, select_head, ClusterError, Linkage};
use crate::corpus::{Stance, StancePool};
use crate::exec::Exec;
use crate::similarity::{Memoized, Scorer, ScorerKind};

/// Default number of clusters per stance pool.
pub const DEFAULT_K: usize = 15;

const FORMAT_VERSION: u32 = 1;
const INDEX_SUFFIX: &str = ".index.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: usize,
    pub head_id: String,
    /// Ascending record ids.
    pub member_ids: Vec<String>,
}

/// Similarity between the heads of clusters `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadEdge {
    pub a: usize,
    pub b: usize,
    pub head_a: String,
    pub head_b: String,
    pub score: f64,
}

/// Clusters over one stance pool plus the complete head graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IndexFile")]
pub struct ClusterIndex {
    format: u32,
    topic: String,
    stance: Stance,
    k_requested: usize,
    linkage: Linkage,
    scorer: ScorerKind,
    clusters: Vec<Cluster>,
    head_edges: Vec<HeadEdge>,
    record_texts: BTreeMap<String, String>,
    #[serde(skip)]
    edge_matrix: Vec<f64>,
}

#[derive(Deserialize)]
struct IndexFile {
    format: u32,
    topic: String,
    stance: Stance,
    k_requested: usize,
    linkage: Linkage,
    scorer: ScorerKind,
    clusters: Vec<Cluster>,
    head_edges: Vec<HeadEdge>,
    record_texts: BTreeMap<String, String>,
}

impl TryFrom<IndexFile> for ClusterIndex {
    type Error = String;

    fn try_from(f: IndexFile) -> Result<Self, String> {
        if f.format != FORMAT_VERSION {
            return Err(format!("unsupported index format {}", f.format));
        }
        let k = f.clusters.len();
        if k == 0 {
            return Err("index has no clusters".into());
        }
        let mut seen = BTreeSet::new();
        for (i, c) in f.clusters.iter().enumerate() {
            if c.cluster_id != i {
                return Err(format!("cluster {i} has id {}", c.cluster_id));
            }
            if !c.member_ids.contains(&c.head_id) {
                return Err(format!("cluster {i}: head {} is not a member", c.head_id));
            }
            for m in &c.member_ids {
                if !f.record_texts.contains_key(m) {
                    return Err(format!("cluster {i}: member {m} has no text"));
                }
                if !seen.insert(m.clone()) {
                    return Err(format!("record {m} is in more than one cluster"));
                }
            }
        }
        if seen.len() != f.record_texts.len() {
            return Err("clusters do not cover every record".into());
        }
        if f.head_edges.len() != k * (k - 1) / 2 {
            return Err(format!("expected {} head edges, found {}", k * (k - 1) / 2, f.head_edges.len()));
        }
        let mut index = ClusterIndex {
            format: f.format,
            topic: f.topic,
            stance: f.stance,
            k_requested: f.k_requested,
            linkage: f.linkage,
            scorer: f.scorer,
            clusters: f.clusters,
            head_edges: f.head_edges,
            record_texts: f.record_texts,
            edge_matrix: Vec::new(),
        };
        index.fill_edge_matrix()?;
        Ok(index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexOptions {
    pub k: usize,
    pub linkage: Linkage,
    pub exec: Exec,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions { k: DEFAULT_K, linkage: Linkage::Average, exec: Exec::default() }
    }
}

/// Clusters `pool` into `min(k, |pool|)` clusters with average linkage.
pub fn build_index(pool: &StancePool, scorer: &dyn Scorer, k: usize) -> Result<ClusterIndex, ClusterError> {
    build_index_with(pool, scorer, &IndexOptions { k, ..IndexOptions::default() })
}

pub fn build_index_with(
    pool: &StancePool,
    scorer: &dyn Scorer,
    options: &IndexOptions,
) -> Result<ClusterIndex, ClusterError> {
    if pool.is_empty() {
        return Err(ClusterError::EmptyPool);
    }
    if options.k == 0 {
        return Err(ClusterError::InvalidK { k: 0, n: pool.len() });
    }
    if scorer.kind() == ScorerKind::Remote {
        build(pool, &Memoized::new(scorer), options)
    } else {
        build(pool, scorer, options)
    }
}

fn build(pool: &StancePool, scorer: &dyn Scorer, options: &IndexOptions) -> Result<ClusterIndex, ClusterError> {
    let k = options.k.min(pool.len());
    let distances = build_distance_matrix(pool, scorer, options.exec)?;
    let parts = agglomerative_cluster(&distances, k, options.linkage)?;

    let clusters: Vec<Cluster> = parts
        .iter()
        .enumerate()
        .map(|(cluster_id, members)| Cluster {
            cluster_id,
            head_id: pool.records[select_head(members, &distances)].id.clone(),
            member_ids: members.iter().map(|&m| pool.records[m].id.clone()).collect(),
        })
        .collect();

    let record_texts: BTreeMap<String, String> = pool.records.iter().map(|r| (r.id.clone(), r.text.clone())).collect();
    let head_texts: Vec<&str> = clusters.iter().map(|c| record_texts[&c.head_id].as_str()).collect();
    let head_sim = scorer.score_matrix(&head_texts, options.exec)?;
    let mut head_edges = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            head_edges.push(HeadEdge {
                a,
                b,
                head_a: clusters[a].head_id.clone(),
                head_b: clusters[b].head_id.clone(),
                score: head_sim.get(a, b),
            });
        }
    }

    let mut index = ClusterIndex {
        format: FORMAT_VERSION,
        topic: pool.topic.clone(),
        stance: pool.stance,
        k_requested: options.k,
        linkage: options.linkage,
        scorer: scorer.kind(),
        clusters,
        head_edges,
        record_texts,
        edge_matrix: Vec::new(),
    };
    index.fill_edge_matrix().expect("freshly built edges are consistent");
    Ok(index)
}

impl ClusterIndex {
    /// Assembles an index from explicit `(head_id, member_ids)` groups,
    /// scoring the head graph with `scorer`. Groups keep their given order
    /// as cluster ids.
    pub fn assemble(
        topic: &str,
        stance: Stance,
        record_texts: BTreeMap<String, String>,
        groups: Vec<(String, Vec<String>)>,
        scorer: &dyn Scorer,
    ) -> Result<ClusterIndex, ClusterError> {
        let bad = |reason: String| ClusterError::BadIndex { path: "<assembled>".into(), reason };
        let clusters: Vec<Cluster> = groups
            .into_iter()
            .enumerate()
            .map(|(cluster_id, (head_id, mut member_ids))| {
                member_ids.sort();
                Cluster { cluster_id, head_id, member_ids }
            })
            .collect();
        let mut head_edges = Vec::new();
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let ta = record_texts.get(&clusters[a].head_id).ok_or_else(|| bad("head without text".into()))?;
                let tb = record_texts.get(&clusters[b].head_id).ok_or_else(|| bad("head without text".into()))?;
                head_edges.push(HeadEdge {
                    a,
                    b,
                    head_a: clusters[a].head_id.clone(),
                    head_b: clusters[b].head_id.clone(),
                    score: scorer.score(ta, tb)?.value(),
                });
            }
        }
        let k = clusters.len();
        ClusterIndex::try_from(IndexFile {
            format: FORMAT_VERSION,
            topic: topic.to_string(),
            stance,
            k_requested: k,
            linkage: Linkage::Average,
            scorer: scorer.kind(),
            clusters,
            head_edges,
            record_texts,
        })
        .map_err(bad)
    }

    fn fill_edge_matrix(&mut self) -> Result<(), String> {
        let k = self.clusters.len();
        let mut m = vec![f64::NAN; k * k];
        for i in 0..k {
            m[i * k + i] = 1.0;
        }
        for e in &self.head_edges {
            if e.a >= e.b || e.b >= k {
                return Err(format!("bad head edge ({}, {})", e.a, e.b));
            }
            if !(0.0..=1.0).contains(&e.score) {
                return Err(format!("head edge ({}, {}) score {} outside [0, 1]", e.a, e.b, e.score));
            }
            if !m[e.a * k + e.b].is_nan() {
                return Err(format!("duplicate head edge ({}, {})", e.a, e.b));
            }
            m[e.a * k + e.b] = e.score;
            m[e.b * k + e.a] = e.score;
        }
        self.edge_matrix = m;
        Ok(())
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn stance(&self) -> Stance {
        self.stance
    }

    pub fn k_requested(&self) -> usize {
        self.k_requested
    }

    pub fn linkage(&self) -> Linkage {
        self.linkage
    }

    pub fn scorer_kind(&self) -> ScorerKind {
        self.scorer
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn head_edges(&self) -> &[HeadEdge] {
        &self.head_edges
    }

    /// Similarity between the heads of two clusters (1.0 on the diagonal).
    pub fn head_similarity(&self, a: usize, b: usize) -> f64 {
        self.edge_matrix[a * self.clusters.len() + b]
    }

    pub fn record_texts(&self) -> &BTreeMap<String, String> {
        &self.record_texts
    }

    pub fn text(&self, id: &str) -> Option<&str> {
        self.record_texts.get(id).map(String::as_str)
    }

    pub fn head_text(&self, cluster_id: usize) -> &str {
        &self.record_texts[&self.clusters[cluster_id].head_id]
    }

    /// Number of records in the pool.
    pub fn len(&self) -> usize {
        self.record_texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record_texts.is_empty()
    }

    pub fn cluster_of(&self, record_id: &str) -> Option<usize> {
        self.clusters.iter().position(|c| c.member_ids.binary_search_by(|m| m.as_str().cmp(record_id)).is_ok())
    }

    /// Canonical serialisation: pretty JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("index serialises");
        out.push(b'\n');
        out
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, String> {
        serde_json::from_slice(bytes).map_err(|e| e.to_string())
    }

    pub fn file_name(topic: &str, stance: Stance) -> String {
        format!("{topic}__{stance}{INDEX_SUFFIX}")
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, ClusterError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(Self::file_name(&self.topic, self.stance));
        std::fs::write(&path, self.to_canonical_json())?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, ClusterError> {
        let bytes = std::fs::read(path)?;
        Self::from_json(&bytes).map_err(|reason| ClusterError::BadIndex { path: path.display().to_string(), reason })
    }

    pub fn summary(&self) -> IndexSummary {
        IndexSummary {
            topic: self.topic.clone(),
            stance: self.stance,
            pool_size: self.len(),
            k: self.k(),
            clusters: self
                .clusters
                .iter()
                .map(|c| ClusterSummary {
                    cluster_id: c.cluster_id,
                    size: c.member_ids.len(),
                    head_id: c.head_id.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: usize,
    pub size: usize,
    pub head_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub topic: String,
    pub stance: Stance,
    pub pool_size: usize,
    pub k: usize,
    pub clusters: Vec<ClusterSummary>,
}

/// All loaded indexes, keyed by (topic, stance).
#[derive(Debug, Clone, Default)]
pub struct IndexSet {
    indexes: BTreeMap<(String, Stance), Arc<ClusterIndex>>,
}

impl IndexSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds one index per non-empty (topic, stance) pool of `corpus`.
    pub fn build(
        corpus: &crate::corpus::Corpus,
        scorer: &dyn Scorer,
        options: &IndexOptions,
    ) -> Result<Self, ClusterError> {
        let mut set = IndexSet::new();
        for pool in corpus.pools() {
            set.insert(build_index_with(&pool, scorer, options)?);
        }
        Ok(set)
    }

    pub fn insert(&mut self, index: ClusterIndex) {
        self.indexes.insert((index.topic.clone(), index.stance), Arc::new(index));
    }

    pub fn get(&self, topic: &str, stance: Stance) -> Option<&Arc<ClusterIndex>> {
        self.indexes.get(&(topic.to_string(), stance))
    }

    pub fn topics(&self) -> BTreeSet<String> {
        self.indexes.keys().map(|(t, _)| t.clone()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<ClusterIndex>> {
        self.indexes.values()
    }

    pub fn len(&self) -> usize {
        self.indexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indexes.is_empty()
    }

    /// Loads every `*.index.json` in `dir`. An empty directory is an error.
    pub fn load_dir(dir: &Path) -> Result<Self, ClusterError> {
        let mut set = IndexSet::new();
        let entries = std::fs::read_dir(dir)
            .map_err(|e| std::io::Error::new(e.kind(), format!("reading index directory {}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(INDEX_SUFFIX)))
            .collect();
        paths.sort();
        for path in paths {
            set.insert(ClusterIndex::load(&path)?);
        }
        if set.is_empty() {
            return Err(ClusterError::NoIndexes(dir.display().to_string()));
        }
        Ok(set)
    }

    /// Writes every index plus `summary.json` into `dir`.
    pub fn save_dir(&self, dir: &Path) -> Result<Vec<PathBuf>, ClusterError> {
        let mut written = Vec::new();
        for index in self.iter() {
            written.push(index.save(dir)?);
        }
        let summaries: Vec<IndexSummary> = self.iter().map(|i| i.summary()).collect();
        let mut bytes = serde_json::to_vec_pretty(&summaries).expect("summary serialises");
        bytes.push(b'\n');
        let path = dir.join("summary.json");
        std::fs::write(&path, bytes)?;
        written.push(path);
        Ok(written)
    }
}
