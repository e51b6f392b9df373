//! Wire types. Field names are the contract the web chat UI consumes.

use std::collections::BTreeMap;

use debbie_core::clustering::IndexSet;
use debbie_core::corpus::Stance;
use debbie_core::dialogue::{Session, SessionState, Turn};
use debbie_core::retrieval::{Retrieval, Strategy};
use serde::{Deserialize, Serialize};

/// One entry per topic; stances without an index are left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub topic: String,
    pub stances: Vec<Stance>,
    /// Keyed by stance ("pro"/"con").
    pub pool_sizes: BTreeMap<String, usize>,
    pub k: BTreeMap<String, usize>,
}

pub fn topic_entries(indexes: &IndexSet) -> Vec<TopicEntry> {
    let mut entries: BTreeMap<&str, TopicEntry> = BTreeMap::new();
    for index in indexes.iter() {
        let entry = entries.entry(index.topic()).or_insert_with(|| TopicEntry {
            topic: index.topic().to_string(),
            stances: Vec::new(),
            pool_sizes: BTreeMap::new(),
            k: BTreeMap::new(),
        });
        let stance = index.stance();
        entry.stances.push(stance);
        entry.pool_sizes.insert(stance.as_str().to_string(), index.len());
        entry.k.insert(stance.as_str().to_string(), index.k());
    }
    entries.into_values().collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub topic: String,
    pub stance: Stance,
    #[serde(default)]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub topic: String,
    pub user_stance: Stance,
    pub bot_stance: Stance,
    pub strategy: Strategy,
    pub seed: u64,
    pub turn_count: usize,
    pub state: SessionState,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        SessionView {
            session_id: s.session_id.clone(),
            topic: s.topic.clone(),
            user_stance: s.user_stance,
            bot_stance: s.bot_stance,
            strategy: s.strategy,
            seed: s.seed,
            turn_count: s.turn_count(),
            state: s.state,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDetail {
    #[serde(flatten)]
    pub session: SessionView,
    pub transcript: Vec<Turn>,
}

impl From<&Session> for SessionDetail {
    fn from(s: &Session) -> Self {
        SessionDetail { session: s.into(), transcript: s.transcript.clone() }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct PostMessage {
    pub text: String,
}

/// A bot reply plus the retrieval instrumentation for the UI strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageReply {
    pub reply: String,
    pub record_id: String,
    pub score: f64,
    pub cluster_id: Option<usize>,
    pub comparisons: usize,
    pub elapsed_ms: f64,
    pub strategy: Strategy,
    pub turn_count: usize,
    pub state: SessionState,
}

impl MessageReply {
    pub fn new(text: String, retrieval: &Retrieval, session: &Session) -> Self {
        let r = &retrieval.result;
        MessageReply {
            reply: text,
            record_id: r.record_id.clone(),
            score: r.score.value(),
            cluster_id: r.cluster_id,
            comparisons: r.comparisons,
            elapsed_ms: r.elapsed.as_secs_f64() * 1e3,
            strategy: session.strategy,
            turn_count: session.turn_count(),
            state: session.state,
        }
    }
}
