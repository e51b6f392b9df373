//! Synthetic argument corpora with planted cluster structure.
//!
//! Every record of a planted cluster carries the cluster's core words plus a
//! few random filler words, so lexical similarity is high inside a planted
//! cluster and near zero across clusters. Each (topic, stance) pool draws
//! from its own vocabulary.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bench::Probe;
use crate::corpus::{ArgumentRecord, Corpus, Stance};

/// Topic names used when a spec asks for a topic count.
pub const DEFAULT_TOPICS: [&str; 3] = ["death_penalty", "gun_control", "gay_marriage"];

const SYLLABLES: [&str; 20] = [
    "ba", "ke", "lo", "mi", "nu", "ra", "se", "ti", "vo", "zu", "da", "fe", "gi", "ho", "ju", "ka", "le", "mo", "ne",
    "pi",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub topics: Vec<String>,
    pub per_stance: usize,
    /// Words available to each pool.
    pub vocabulary: usize,
    /// Planted clusters per pool.
    pub clusters: usize,
    pub core_words: usize,
    pub filler_words: usize,
    pub probes_per_pool: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            topics: DEFAULT_TOPICS.iter().map(|s| s.to_string()).collect(),
            per_stance: 100,
            vocabulary: 2000,
            clusters: 15,
            core_words: 6,
            filler_words: 3,
            probes_per_pool: 3,
            seed: 7,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.topics.is_empty() {
            return bad("at least one topic is required");
        }
        if self.per_stance == 0 || self.clusters == 0 || self.core_words == 0 {
            return bad("per_stance, clusters and core_words must be at least 1");
        }
        if self.clusters > self.per_stance {
            return bad("more planted clusters than records per stance");
        }
        let fillers = self.vocabulary.saturating_sub(self.clusters * self.core_words);
        if fillers < self.filler_words.max(1) * 4 {
            return bad("vocabulary too small for the cores plus filler words");
        }
        Ok(())
    }
}

/// `synthetic:topics=3,per_stance=2000,vocab=4000,clusters=15,core=6,filler=3,probes=3,seed=7`
/// Unlisted keys keep their defaults. `topics` takes a count or a
/// `+`-separated list of names.
impl FromStr for SyntheticSpec {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s
            .strip_prefix("synthetic")
            .ok_or_else(|| SynthError::Invalid(format!("{s:?} does not start with \"synthetic\"")))?;
        let body = body.strip_prefix(':').unwrap_or(body);
        let mut spec = SyntheticSpec::default();
        for part in body.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) =
                part.split_once('=').ok_or_else(|| SynthError::Invalid(format!("expected key=value, got {part:?}")))?;
            let num = || {
                value
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| SynthError::Invalid(format!("{key}: {value:?} is not a count")))
            };
            match key.trim() {
                "topics" => {
                    spec.topics = match value.trim().parse::<usize>() {
                        Ok(n) => topic_names(n),
                        Err(_) => value.split('+').map(|t| t.trim().to_string()).collect(),
                    }
                }
                "per_stance" => spec.per_stance = num()?,
                "vocab" | "vocabulary" => spec.vocabulary = num()?,
                "clusters" => spec.clusters = num()?,
                "core" => spec.core_words = num()?,
                "filler" => spec.filler_words = num()?,
                "probes" => spec.probes_per_pool = num()?,
                "seed" => {
                    spec.seed = value.trim().parse().map_err(|_| SynthError::Invalid(format!("seed: {value:?}")))?
                }
                other => return Err(SynthError::Invalid(format!("unknown key {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn topic_names(n: usize) -> Vec<String> {
    (0..n).map(|i| DEFAULT_TOPICS.get(i).map(|s| s.to_string()).unwrap_or_else(|| format!("topic_{}", i + 1))).collect()
}

/// A generated corpus, probes that each target a distinct planted cluster,
/// and the planted cluster of every record.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub probes: Vec<Probe>,
    pub planted: BTreeMap<String, usize>,
}

fn word(n: usize) -> String {
    let mut digits = Vec::new();
    let mut rest = n;
    while rest > 0 || digits.len() < 3 {
        digits.push(rest % SYLLABLES.len());
        rest /= SYLLABLES.len();
    }
    digits.iter().rev().map(|&d| SYLLABLES[d]).collect()
}

struct PoolWords {
    base: usize,
    cores: usize,
    fillers: usize,
}

impl PoolWords {
    fn core(&self, cluster: usize, core_words: usize) -> Vec<String> {
        (0..core_words).map(|w| word(self.base + cluster * core_words + w)).collect()
    }

    fn fillers(&self, rng: &mut ChaCha8Rng, count: usize) -> Vec<String> {
        sample(rng, self.fillers, count.min(self.fillers))
            .into_iter()
            .map(|w| word(self.base + self.cores + w))
            .collect()
    }
}

fn sentence(mut words: Vec<String>, rng: &mut ChaCha8Rng) -> String {
    // Fisher-Yates on the word order keeps texts from looking templated.
    for i in (1..words.len()).rev() {
        let j = rng.random_range(0..=i);
        words.swap(i, j);
    }
    let mut text = words.join(" ");
    if let Some(first) = text.get(0..1) {
        let upper = first.to_uppercase();
        text.replace_range(0..1, &upper);
    }
    text.push('.');
    text
}

pub fn generate_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::new();
    let mut probes = Vec::new();
    let mut planted = BTreeMap::new();
    let cores = spec.clusters * spec.core_words;

    for (t, topic) in spec.topics.iter().enumerate() {
        for (s, stance) in [Stance::Pro, Stance::Con].into_iter().enumerate() {
            let words = PoolWords { base: (t * 2 + s) * spec.vocabulary, cores, fillers: spec.vocabulary - cores };
            for i in 0..spec.per_stance {
                let cluster = i % spec.clusters;
                let mut w = words.core(cluster, spec.core_words);
                w.extend(words.fillers(&mut rng, spec.filler_words));
                let id = format!("{topic}-{stance}-{i:05}");
                planted.insert(id.clone(), cluster);
                records.push(ArgumentRecord {
                    id,
                    topic: topic.clone(),
                    stance,
                    text: sentence(w, &mut rng),
                    aq: rng.random_range(551..=1000) as f64 / 1000.0,
                });
            }
            for p in 0..spec.probes_per_pool {
                let cluster = p * spec.clusters / spec.probes_per_pool.max(1);
                let mut w = words.core(cluster, spec.core_words);
                w.extend(words.fillers(&mut rng, spec.filler_words));
                probes.push(Probe { topic: topic.clone(), stance, text: sentence(w, &mut rng) });
            }
        }
    }
    let corpus = Corpus::from_records(records).map_err(|e| SynthError::Invalid(e.to_string()))?;
    Ok(SyntheticCorpus { corpus, probes, planted })
}
