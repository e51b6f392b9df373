//! Stance-labelled argument corpora.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"id":"dp-001","topic":"death_penalty","stance":"con","text":"...","aq":0.98}
//! ```
//!
//! Stances are accepted as `pro`/`con` or `for`/`against` (any case) and
//! written back as `pro`/`con`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default argument-quality cut-off. Records must score strictly above it.
pub const DEFAULT_AQ_THRESHOLD: f64 = 0.55;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stance {
    Pro,
    Con,
}

impl Stance {
    pub fn opposite(self) -> Stance {
        match self {
            Stance::Pro => Stance::Con,
            Stance::Con => Stance::Pro,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Pro => "pro",
            Stance::Con => "con",
        }
    }

    /// The "for"/"against" wording used in chat and report output.
    pub fn label(self) -> &'static str {
        match self {
            Stance::Pro => "for",
            Stance::Con => "against",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown stance {0:?} (expected pro, con, for or against)")]
pub struct ParseStanceError(pub String);

impl FromStr for Stance {
    type Err = ParseStanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pro" | "for" => Ok(Stance::Pro),
            "con" | "against" => Ok(Stance::Con),
            _ => Err(ParseStanceError(s.to_string())),
        }
    }
}

impl Serialize for Stance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Stance {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// One stance-bearing argument sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentRecord {
    pub id: String,
    pub topic: String,
    pub stance: Stance,
    pub text: String,
    pub aq: f64,
}

impl ArgumentRecord {
    fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.topic.trim().is_empty() {
            return Err("topic is empty".into());
        }
        if self.text.trim().is_empty() {
            return Err("text is empty".into());
        }
        if !(0.0..=1.0).contains(&self.aq) {
            return Err(format!("aq {} is outside [0.0, 1.0]", self.aq));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("topic {0:?} is not in the corpus")]
    TopicAbsent(String),
    #[error("topic {topic:?} has no {stance} records")]
    StanceEmpty { topic: String, stance: Stance },
    #[error("aq threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An ordered collection of argument records with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<ArgumentRecord>,
    topics: BTreeSet<String>,
}

impl Corpus {
    /// Builds a corpus from records, rejecting invalid or duplicate entries.
    /// Error line numbers are 1-based positions in `records`.
    pub fn from_records(records: Vec<ArgumentRecord>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            record.validate().map_err(|reason| CorpusError::Malformed { line: i + 1, reason })?;
            if !seen.insert(record.id.as_str()) {
                return Err(CorpusError::DuplicateId { line: i + 1, id: record.id.clone() });
            }
        }
        Ok(Self::from_valid(records))
    }

    fn from_valid(records: Vec<ArgumentRecord>) -> Self {
        let topics = records.iter().map(|r| r.topic.clone()).collect();
        Corpus { records, topics }
    }

    pub fn records(&self) -> &[ArgumentRecord] {
        &self.records
    }

    pub fn topics(&self) -> &BTreeSet<String> {
        &self.topics
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ArgumentRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Keeps the records whose `aq` is strictly greater than `threshold`.
    pub fn filter_by_quality(&self, threshold: f64) -> Result<Corpus, CorpusError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(CorpusError::InvalidThreshold(threshold));
        }
        let kept = self.records.iter().filter(|r| r.aq > threshold).cloned().collect();
        Ok(Corpus::from_valid(kept))
    }

    /// The records for one (topic, stance), sorted by ascending id.
    pub fn pool_for(&self, topic: &str, stance: Stance) -> Result<StancePool, CorpusError> {
        if !self.topics.contains(topic) {
            return Err(CorpusError::TopicAbsent(topic.to_string()));
        }
        let mut records: Vec<ArgumentRecord> =
            self.records.iter().filter(|r| r.topic == topic && r.stance == stance).cloned().collect();
        if records.is_empty() {
            return Err(CorpusError::StanceEmpty { topic: topic.to_string(), stance });
        }
        records.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(StancePool { topic: topic.to_string(), stance, records })
    }

    /// Every non-empty (topic, stance) pool, topics ascending, pro before con.
    pub fn pools(&self) -> Vec<StancePool> {
        let mut out = Vec::new();
        for topic in &self.topics {
            for stance in [Stance::Pro, Stance::Con] {
                if let Ok(pool) = self.pool_for(topic, stance) {
                    out.push(pool);
                }
            }
        }
        out
    }

    /// Record counts per (topic, stance).
    pub fn counts(&self) -> BTreeMap<(String, Stance), usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry((r.topic.clone(), r.stance)).or_insert(0) += 1;
        }
        counts
    }

    /// Writes one canonical JSON line per record.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for record in &self.records {
            serde_json::to_writer(&mut out, record).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Parses a line-delimited corpus. Blank lines are skipped; an empty source
/// yields an empty corpus.
pub fn load_corpus<R: BufRead>(source: R) -> Result<Corpus, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ArgumentRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed { line: line_no, reason: e.to_string() })?;
        record.validate().map_err(|reason| CorpusError::Malformed { line: line_no, reason })?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id: record.id });
        }
        records.push(record);
    }
    Ok(Corpus::from_valid(records))
}

pub fn load_corpus_file(path: &std::path::Path) -> Result<Corpus, CorpusError> {
    let file = std::fs::File::open(path)?;
    load_corpus(std::io::BufReader::new(file))
}

/// All records for one (topic, stance), sorted by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct StancePool {
    pub topic: String,
    pub stance: Stance,
    pub records: Vec<ArgumentRecord>,
}

impl StancePool {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.text.as_str()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, topic: &str, stance: Stance, aq: f64) -> ArgumentRecord {
        ArgumentRecord { id: id.into(), topic: topic.into(), stance, text: format!("argument {id}"), aq }
    }

    const DP_LINE: &str = r#"{"id":"dp-001","topic":"death_penalty","stance":"con","text":"The death penalty is also discriminatory in its application what i mean is that through out the world the death penalty is disproportionately used against disadvantaged people","aq":0.98}"#;

    #[test]
    fn loads_single_record() {
        let corpus = load_corpus(DP_LINE.as_bytes()).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.records()[0].aq, 0.98);
        assert_eq!(corpus.records()[0].stance, Stance::Con);
        assert_eq!(corpus.topics().len(), 1);
    }

    #[test]
    fn empty_source_is_empty_corpus() {
        let corpus = load_corpus("".as_bytes()).unwrap();
        assert!(corpus.is_empty());
        assert!(corpus.topics().is_empty());
    }

    #[test]
    fn rejects_out_of_range_aq_with_line_number() {
        let src = format!("{DP_LINE}\n{}\n", r#"{"id":"x","topic":"t","stance":"pro","text":"hi","aq":1.5}"#);
        let err = load_corpus(src.as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }), "{msg}");
        assert!(msg.contains("1.5") && msg.contains("[0.0, 1.0]"), "{msg}");
    }

    #[test]
    fn rejects_bad_lines() {
        let cases = [
            r#"{"id":"x","topic":"t","stance":"maybe","text":"hi","aq":0.5}"#,
            r#"{"id":"x","topic":"t","stance":"pro","aq":0.5}"#,
            r#"{"id":"x","topic":"t","stance":"pro","text":"   ","aq":0.5}"#,
            r#"not json"#,
        ];
        for case in cases {
            assert!(matches!(load_corpus(case.as_bytes()), Err(CorpusError::Malformed { line: 1, .. })));
        }
        let dup = format!("{DP_LINE}\n{DP_LINE}\n");
        assert!(matches!(load_corpus(dup.as_bytes()), Err(CorpusError::DuplicateId { line: 2, .. })));
    }

    #[test]
    fn stance_aliases_are_canonicalised() {
        let src = r#"{"id":"a","topic":"t","stance":"For","text":"x","aq":0.7}
{"id":"b","topic":"t","stance":"AGAINST","text":"y","aq":0.7}"#;
        let corpus = load_corpus(src.as_bytes()).unwrap();
        assert_eq!(corpus.records()[0].stance, Stance::Pro);
        assert_eq!(corpus.records()[1].stance, Stance::Con);
        let mut out = Vec::new();
        corpus.write_to(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains(r#""stance":"pro""#) && text.contains(r#""stance":"con""#));
    }

    #[test]
    fn quality_filter_is_strict() {
        let corpus = Corpus::from_records(vec![
            rec("a", "dp", Stance::Pro, 0.98),
            rec("b", "dp", Stance::Pro, 0.55),
            rec("c", "dp", Stance::Pro, 0.40),
        ])
        .unwrap();
        let kept = corpus.filter_by_quality(0.55).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.records()[0].id, "a");
        assert_eq!(corpus.filter_by_quality(0.0).unwrap(), corpus);
        assert!(corpus.filter_by_quality(1.0).unwrap().is_empty());
        assert!(corpus.filter_by_quality(1.2).is_err());
    }

    #[test]
    fn pool_for_counts_and_errors() {
        let corpus = Corpus::from_records(vec![
            rec("dp-5", "death_penalty", Stance::Con, 0.9),
            rec("dp-1", "death_penalty", Stance::Pro, 0.9),
            rec("dp-3", "death_penalty", Stance::Con, 0.9),
            rec("dp-2", "death_penalty", Stance::Pro, 0.9),
            rec("dp-4", "death_penalty", Stance::Con, 0.9),
            rec("gc-1", "gun_control", Stance::Pro, 0.9),
        ])
        .unwrap();
        let pool = corpus.pool_for("death_penalty", Stance::Con).unwrap();
        assert_eq!(pool.len(), 3);
        let ids: Vec<_> = pool.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["dp-3", "dp-4", "dp-5"]);
        assert!(matches!(corpus.pool_for("gay_marriage", Stance::Pro), Err(CorpusError::TopicAbsent(_))));
        assert!(matches!(corpus.pool_for("gun_control", Stance::Con), Err(CorpusError::StanceEmpty { .. })));
    }

    fn arb_corpus() -> impl Strategy<Value = Corpus> {
        prop::collection::vec((0usize..3, any::<bool>(), 0u32..=1000), 0..40).prop_map(|rows| {
            let records = rows
                .into_iter()
                .enumerate()
                .map(|(i, (t, pro, aq))| ArgumentRecord {
                    id: format!("r{i:03}"),
                    topic: format!("topic{t}"),
                    stance: if pro { Stance::Pro } else { Stance::Con },
                    text: format!("text {i}"),
                    aq: aq as f64 / 1000.0,
                })
                .collect();
            Corpus::from_records(records).unwrap()
        })
    }

    proptest! {
        #[test]
        fn filter_idempotent_and_composes(c in arb_corpus(), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
            let once = c.filter_by_quality(t1).unwrap();
            prop_assert_eq!(&once.filter_by_quality(t1).unwrap(), &once);
            let chained = once.filter_by_quality(t2).unwrap();
            prop_assert_eq!(&chained, &c.filter_by_quality(t1.max(t2)).unwrap());
            prop_assert!(once.records().iter().all(|r| r.aq > t1));
        }

        #[test]
        fn pools_partition_corpus(c in arb_corpus()) {
            let mut ids: Vec<String> = c
                .pools()
                .into_iter()
                .flat_map(|p| p.records.into_iter().map(|r| r.id))
                .collect();
            let total = ids.len();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), total);
            prop_assert_eq!(total, c.len());
        }
    }
}
