//! Sentence similarity scoring.
//!
//! Everything downstream (distance matrices, head election, routing) goes
//! through the [`Scorer`] trait. Three implementations ship:
//!
//! * [`LexicalScorer`]: Jaccard overlap of normalised token sets, the default.
//! * [`TableScorer`]: exact scores looked up from a pair table, for fixtures.
//! * [`RemoteScorer`]: one HTTP GET per pair against an external STS service.

mod lexical;
mod remote;
mod table;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;

pub use lexical::{jaccard, tokenize, LexicalScorer};
pub use remote::{RemoteScorer, DEFAULT_MAX_IN_FLIGHT};
pub use table::{TableEntry, TableScorer};

/// A similarity value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ZERO: SimilarityScore = SimilarityScore(0.0);
    pub const ONE: SimilarityScore = SimilarityScore(1.0);

    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(SimilarityScore(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for SimilarityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("similarity service request failed: {0}")]
    Transport(String),
    #[error("similarity service replied {body:?}, expected a number in [0, 1]")]
    BadReply { body: String },
    #[error("no table entry for ({a:?}, {b:?})")]
    MissingTableEntry { a: String, b: String },
    #[error("scoring pair ({i}, {j}) failed: {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<ScoreError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Lexical,
    Remote,
    Table,
}

impl ScorerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScorerKind::Lexical => "lexical",
            ScorerKind::Remote => "remote",
            ScorerKind::Table => "table",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lexical" => Ok(ScorerKind::Lexical),
            "remote" => Ok(ScorerKind::Remote),
            "table" => Ok(ScorerKind::Table),
            other => Err(format!("unknown scorer kind {other:?} (expected lexical, remote or table)")),
        }
    }
}

/// A symmetric similarity function over sentences.
///
/// Implementations must be symmetric and return values in `[0, 1]`.
/// The batch methods have generic defaults; implementations may override
/// them to share per-sentence work, but the values must equal the per-pair
/// [`Scorer::score`] results exactly.
pub trait Scorer: Send + Sync {
    fn kind(&self) -> ScorerKind;

    fn score(&self, a: &str, b: &str) -> Result<SimilarityScore, ScoreError>;

    /// Scores `query` against every candidate, in candidate order.
    fn score_many(&self, query: &str, candidates: &[&str], exec: Exec) -> Result<Vec<SimilarityScore>, ScoreError> {
        exec.map(candidates.len(), |i| self.score(query, candidates[i])).into_iter().collect()
    }

    /// Full pairwise matrix. Evaluates each unordered pair once; the
    /// diagonal is fixed at 1.0.
    fn score_matrix(&self, sentences: &[&str], exec: Exec) -> Result<SimilarityMatrix, ScoreError> {
        let n = sentences.len();
        let rows = exec.map(n, |i| {
            (i + 1..n)
                .map(|j| {
                    self.score(sentences[i], sentences[j]).map_err(|e| ScoreError::Pair { i, j, source: Box::new(e) })
                })
                .collect::<Result<Vec<_>, _>>()
        });
        SimilarityMatrix::from_upper_rows(n, rows)
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn kind(&self) -> ScorerKind {
        (**self).kind()
    }
    fn score(&self, a: &str, b: &str) -> Result<SimilarityScore, ScoreError> {
        (**self).score(a, b)
    }
    fn score_many(&self, q: &str, c: &[&str], exec: Exec) -> Result<Vec<SimilarityScore>, ScoreError> {
        (**self).score_many(q, c, exec)
    }
    fn score_matrix(&self, s: &[&str], exec: Exec) -> Result<SimilarityMatrix, ScoreError> {
        (**self).score_matrix(s, exec)
    }
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn kind(&self) -> ScorerKind {
        (**self).kind()
    }
    fn score(&self, a: &str, b: &str) -> Result<SimilarityScore, ScoreError> {
        (**self).score(a, b)
    }
    fn score_many(&self, q: &str, c: &[&str], exec: Exec) -> Result<Vec<SimilarityScore>, ScoreError> {
        (**self).score_many(q, c, exec)
    }
    fn score_matrix(&self, s: &[&str], exec: Exec) -> Result<SimilarityMatrix, ScoreError> {
        (**self).score_matrix(s, exec)
    }
}

/// Dense symmetric `n × n` matrix of similarities (or distances).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn filled(n: usize, value: f64) -> Self {
        SimilarityMatrix { n, data: vec![value; n * n] }
    }

    /// Assembles a matrix from strict-upper-triangle rows, mirroring them
    /// and putting 1.0 on the diagonal. The first failing row wins.
    pub(crate) fn from_upper_rows(
        n: usize,
        rows: Vec<Result<Vec<SimilarityScore>, ScoreError>>,
    ) -> Result<Self, ScoreError> {
        let mut m = SimilarityMatrix::filled(n, 1.0);
        for (i, row) in rows.into_iter().enumerate() {
            for (offset, s) in row?.into_iter().enumerate() {
                let j = i + 1 + offset;
                m.set(i, j, s.value());
                m.set(j, i, s.value());
            }
        }
        Ok(m)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SimilarityMatrix { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        SimilarityMatrix { n: self.n, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Pairwise similarity matrix of `sentences` under `scorer`.
pub fn score_matrix(scorer: &dyn Scorer, sentences: &[&str]) -> Result<SimilarityMatrix, ScoreError> {
    scorer.score_matrix(sentences, Exec::default())
}

/// Caches scores by unordered pair for the lifetime of the wrapper. Used
/// around the remote scorer while building an index.
pub struct Memoized<S> {
    inner: S,
    cache: Mutex<HashMap<(String, String), SimilarityScore>>,
}

impl<S: Scorer> Memoized<S> {
    pub fn new(inner: S) -> Self {
        Memoized { inner, cache: Mutex::new(HashMap::new()) }
    }
}

fn unordered_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl<S: Scorer> Scorer for Memoized<S> {
    fn kind(&self) -> ScorerKind {
        self.inner.kind()
    }

    fn score(&self, a: &str, b: &str) -> Result<SimilarityScore, ScoreError> {
        let key = unordered_key(a, b);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let s = self.inner.score(a, b)?;
        self.cache.lock().unwrap().insert(key, s);
        Ok(s)
    }
}

/// Which scorer to construct.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ScorerConfig {
    #[default]
    Lexical,
    Remote {
        endpoint: String,
        max_in_flight: usize,
    },
    Table {
        path: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum ScorerConfigError {
    #[error("the remote scorer requires an endpoint URL")]
    MissingEndpoint,
    #[error("the table scorer requires a table file")]
    MissingTable,
    #[error("invalid endpoint URL {0:?}: {1}")]
    BadEndpoint(String, String),
    #[error("loading score table {path:?}: {reason}")]
    Table { path: PathBuf, reason: String },
}

impl ScorerConfig {
    pub fn from_parts(
        kind: ScorerKind,
        endpoint: Option<String>,
        table: Option<PathBuf>,
        max_in_flight: Option<usize>,
    ) -> Result<Self, ScorerConfigError> {
        match kind {
            ScorerKind::Lexical => Ok(ScorerConfig::Lexical),
            ScorerKind::Remote => Ok(ScorerConfig::Remote {
                endpoint: endpoint.ok_or(ScorerConfigError::MissingEndpoint)?,
                max_in_flight: max_in_flight.unwrap_or(DEFAULT_MAX_IN_FLIGHT),
            }),
            ScorerKind::Table => Ok(ScorerConfig::Table { path: table.ok_or(ScorerConfigError::MissingTable)? }),
        }
    }

    pub fn kind(&self) -> ScorerKind {
        match self {
            ScorerConfig::Lexical => ScorerKind::Lexical,
            ScorerConfig::Remote { .. } => ScorerKind::Remote,
            ScorerConfig::Table { .. } => ScorerKind::Table,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Scorer>, ScorerConfigError> {
        Ok(match self {
            ScorerConfig::Lexical => Arc::new(LexicalScorer),
            ScorerConfig::Remote { endpoint, max_in_flight } => Arc::new(RemoteScorer::new(endpoint, *max_in_flight)?),
            ScorerConfig::Table { path } => Arc::new(
                TableScorer::load(path)
                    .map_err(|e| ScorerConfigError::Table { path: path.clone(), reason: e.to_string() })?,
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        calls: AtomicUsize,
    }

    impl Scorer for Counting {
        fn kind(&self) -> ScorerKind {
            ScorerKind::Lexical
        }
        fn score(&self, a: &str, b: &str) -> Result<SimilarityScore, ScoreError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            LexicalScorer.score(a, b)
        }
    }

    #[test]
    fn matrix_edge_cases() {
        let m = score_matrix(&LexicalScorer, &["solo"]).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        let m = score_matrix(&LexicalScorer, &["guns kill", "marriage equality"]).unwrap();
        assert_eq!(m, SimilarityMatrix::from_fn(2, |i, j| if i == j { 1.0 } else { 0.0 }));
    }

    #[test]
    fn matrix_matches_per_pair_calls_and_counts() {
        let s = [
            "the death penalty is wrong",
            "the death penalty is immoral",
            "guns do not kill people",
            "people kill people with guns",
        ];
        let counting = Counting { calls: AtomicUsize::new(0) };
        let m = counting.score_matrix(&s, Exec::default()).unwrap();
        assert_eq!(counting.calls.load(Ordering::SeqCst), s.len() * (s.len() - 1) / 2);
        for i in 0..s.len() {
            for j in 0..s.len() {
                let expected = if i == j { 1.0 } else { LexicalScorer.score(s[i], s[j]).unwrap().value() };
                assert_eq!(m.get(i, j), expected);
            }
        }
    }

    #[test]
    fn matrix_error_names_pair() {
        let table = TableScorer::from_entries([("a", "b", 0.5)]).unwrap();
        let err = table.score_matrix(&["a", "b", "c"], Exec::Sequential).unwrap_err();
        assert!(matches!(err, ScoreError::Pair { i: 0, j: 2, .. }), "{err}");
    }

    #[test]
    fn memoized_hits_cache_for_either_order() {
        let memo = Memoized::new(Counting { calls: AtomicUsize::new(0) });
        memo.score("a b", "b c").unwrap();
        memo.score("b c", "a b").unwrap();
        assert_eq!(memo.inner.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn config_invariants() {
        assert!(matches!(
            ScorerConfig::from_parts(ScorerKind::Remote, None, None, None),
            Err(ScorerConfigError::MissingEndpoint)
        ));
        assert!(matches!(
            ScorerConfig::from_parts(ScorerKind::Table, None, None, None),
            Err(ScorerConfigError::MissingTable)
        ));
        assert_eq!(ScorerConfig::from_parts(ScorerKind::Lexical, None, None, None).unwrap(), ScorerConfig::Lexical);
        assert!("cosine".parse::<ScorerKind>().is_err());
    }
}
