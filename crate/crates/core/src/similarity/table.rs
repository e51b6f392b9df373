use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{unordered_key, ScoreError, Scorer, ScorerKind, SimilarityScore};

/// One line of a score table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub a: String,
    pub b: String,
    pub score: f64,
}

/// Looks scores up from a fixed table keyed by unordered sentence pair.
///
/// Identical sentences score 1.0 unless the table says otherwise. Any other
/// missing pair is an error, or `fallback` when one is set.
#[derive(Debug, Clone, Default)]
pub struct TableScorer {
    table: HashMap<(String, String), SimilarityScore>,
    fallback: Option<SimilarityScore>,
}

impl TableScorer {
    pub fn from_entries<I, A, B>(entries: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = (A, B, f64)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut table = HashMap::new();
        for (a, b, score) in entries {
            let (a, b) = (a.as_ref(), b.as_ref());
            let s = SimilarityScore::new(score)
                .ok_or_else(|| format!("score {score} for ({a:?}, {b:?}) is outside [0, 1]"))?;
            table.insert(unordered_key(a, b), s);
        }
        Ok(TableScorer { table, fallback: None })
    }

    /// Score returned for pairs absent from the table.
    pub fn with_fallback(mut self, value: f64) -> Self {
        self.fallback = SimilarityScore::new(value);
        self
    }

    pub fn insert(&mut self, a: &str, b: &str, value: f64) {
        let s = SimilarityScore::new(value).expect("table score in [0, 1]");
        self.table.insert(unordered_key(a, b), s);
    }

    /// Reads a JSON-lines table of `{"a": ..., "b": ..., "score": ...}`.
    pub fn load(path: &Path) -> Result<Self, String> {
        let file = std::fs::File::open(path).map_err(|e| e.to_string())?;
        let mut entries = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TableEntry = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
            entries.push((e.a, e.b, e.score));
        }
        Self::from_entries(entries)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Scorer for TableScorer {
    fn kind(&self) -> ScorerKind {
        ScorerKind::Table
    }

    fn score(&self, a: &str, b: &str) -> Result<SimilarityScore, ScoreError> {
        if let Some(s) = self.table.get(&unordered_key(a, b)) {
            return Ok(*s);
        }
        if a == b {
            return Ok(SimilarityScore::ONE);
        }
        self.fallback.ok_or_else(|| ScoreError::MissingTableEntry { a: a.into(), b: b.into() })
    }
}
