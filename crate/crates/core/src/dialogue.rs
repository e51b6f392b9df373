//! Chat sessions: the bot always argues the stance opposite the user's and
//! never repeats a response within a session.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{ClusterIndex, IndexSet};
use crate::corpus::Stance;
use crate::exec::Exec;
use crate::retrieval::{GraphThresholds, Retrieval, RetrievalError, Retriever, Strategy};
use crate::similarity::Scorer;

/// Sent once the counter-stance pool has been used up.
pub const EXHAUSTED_MESSAGE: &str = "I've run out of arguments — you win this round.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    User,
    Bot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SessionState {
    Active,
    Exhausted,
    Closed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub topic: String,
    pub user_stance: Stance,
    pub bot_stance: Stance,
    pub strategy: Strategy,
    pub seed: u64,
    pub used_ids: BTreeSet<String>,
    pub transcript: Vec<Turn>,
    pub state: SessionState,
}

impl Session {
    /// Completed user/bot exchanges.
    pub fn turn_count(&self) -> usize {
        self.transcript.iter().filter(|t| t.speaker == Speaker::Bot).count()
    }

    pub fn bot_record_ids(&self) -> Vec<&str> {
        self.transcript.iter().filter_map(|t| t.record_id.as_deref()).collect()
    }

    /// Seed for the graph start head of the next turn.
    fn turn_seed(&self) -> u64 {
        self.seed ^ (self.turn_count() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}

#[derive(Debug)]
pub enum Reply {
    Argument {
        text: String,
        record_id: String,
        retrieval: Retrieval,
    },
    /// The pool is used up; the session is now [`SessionState::Exhausted`].
    Exhausted {
        message: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("no {stance} arguments for topic {topic:?}; available topics: {}", .available.join(", "))]
    UnknownTopic { topic: String, stance: Stance, available: Vec<String> },
    #[error("session {0} is closed")]
    Closed(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("persisting transcript: {0}")]
    Persist(#[from] std::io::Error),
}

/// Shared, immutable retrieval state for any number of sessions.
pub struct Engine {
    indexes: IndexSet,
    scorer: Arc<dyn Scorer>,
    thresholds: GraphThresholds,
    exec: Exec,
    store: Option<TranscriptStore>,
}

impl Engine {
    pub fn new(indexes: IndexSet, scorer: Arc<dyn Scorer>) -> Self {
        Engine { indexes, scorer, thresholds: GraphThresholds::default(), exec: Exec::default(), store: None }
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

    /// Persist transcripts under `dir`.
    pub fn with_store(mut self, store: TranscriptStore) -> Self {
        self.store = Some(store);
        self
    }

    pub fn indexes(&self) -> &IndexSet {
        &self.indexes
    }

    pub fn scorer(&self) -> &Arc<dyn Scorer> {
        &self.scorer
    }

    pub fn store(&self) -> Option<&TranscriptStore> {
        self.store.as_ref()
    }

    pub fn thresholds(&self) -> GraphThresholds {
        self.thresholds
    }

    fn counter_index(&self, topic: &str, user_stance: Stance) -> Result<&Arc<ClusterIndex>, DialogueError> {
        self.indexes.get(topic, user_stance.opposite()).ok_or_else(|| DialogueError::UnknownTopic {
            topic: topic.to_string(),
            stance: user_stance.opposite(),
            available: self.indexes.topics().into_iter().collect(),
        })
    }

    pub fn start_session(
        &self,
        topic: &str,
        user_stance: Stance,
        strategy: Strategy,
        seed: u64,
    ) -> Result<Session, DialogueError> {
        self.counter_index(topic, user_stance)?;
        let session = Session {
            session_id: uuid::Uuid::new_v4().simple().to_string(),
            topic: topic.to_string(),
            user_stance,
            bot_stance: user_stance.opposite(),
            strategy,
            seed,
            used_ids: BTreeSet::new(),
            transcript: Vec::new(),
            state: SessionState::Active,
        };
        if let Some(store) = &self.store {
            store.append(&session.session_id, &[TranscriptLine::header(&session)])?;
        }
        Ok(session)
    }

    /// Answers `user_text` with the best unused counter-argument.
    ///
    /// A failed retrieval leaves the session untouched. When the pool is
    /// used up the session moves to `Exhausted` and nothing is appended.
    pub fn respond(&self, session: &mut Session, user_text: &str) -> Result<Reply, DialogueError> {
        match session.state {
            SessionState::Closed => return Err(DialogueError::Closed(session.session_id.clone())),
            SessionState::Exhausted => return Ok(Reply::Exhausted { message: EXHAUSTED_MESSAGE }),
            SessionState::Active => {}
        }
        let index = self.counter_index(&session.topic, session.user_stance)?;
        let retriever = Retriever::new(self.scorer.as_ref()).with_thresholds(self.thresholds)?.with_exec(self.exec);
        let retrieval =
            match retriever.retrieve(session.strategy, user_text, index, &session.used_ids, session.turn_seed()) {
                Ok(r) => r,
                Err(RetrievalError::Exhausted) => {
                    if let Some(store) = &self.store {
                        store.append(&session.session_id, &[TranscriptLine::Exhausted { timestamp: Utc::now() }])?;
                    }
                    session.state = SessionState::Exhausted;
                    return Ok(Reply::Exhausted { message: EXHAUSTED_MESSAGE });
                }
                Err(e) => return Err(e.into()),
            };

        let record_id = retrieval.result.record_id.clone();
        let text = index.text(&record_id).expect("retrieved id is in the index").to_string();
        let now = Utc::now();
        let user_turn = Turn { speaker: Speaker::User, text: user_text.to_string(), record_id: None, timestamp: now };
        let bot_turn =
            Turn { speaker: Speaker::Bot, text: text.clone(), record_id: Some(record_id.clone()), timestamp: now };
        if let Some(store) = &self.store {
            store.append(
                &session.session_id,
                &[TranscriptLine::Turn(user_turn.clone()), TranscriptLine::Turn(bot_turn.clone())],
            )?;
        }
        session.transcript.push(user_turn);
        session.transcript.push(bot_turn);
        session.used_ids.insert(record_id.clone());
        Ok(Reply::Argument { text, record_id, retrieval })
    }

    /// Closes the session and returns its transcript. Closing twice is fine.
    pub fn end_session(&self, session: &mut Session) -> Result<Vec<Turn>, DialogueError> {
        if session.state != SessionState::Closed {
            if let Some(store) = &self.store {
                store.append(&session.session_id, &[TranscriptLine::Closed { timestamp: Utc::now() }])?;
            }
            session.state = SessionState::Closed;
        }
        Ok(session.transcript.clone())
    }
}

/// One line of a persisted transcript file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptLine {
    Session {
        session_id: String,
        topic: String,
        user_stance: Stance,
        bot_stance: Stance,
        strategy: Strategy,
        seed: u64,
        started_at: DateTime<Utc>,
    },
    Turn(Turn),
    Exhausted {
        timestamp: DateTime<Utc>,
    },
    Closed {
        timestamp: DateTime<Utc>,
    },
}

impl TranscriptLine {
    fn header(s: &Session) -> Self {
        TranscriptLine::Session {
            session_id: s.session_id.clone(),
            topic: s.topic.clone(),
            user_stance: s.user_stance,
            bot_stance: s.bot_stance,
            strategy: s.strategy,
            seed: s.seed,
            started_at: Utc::now(),
        }
    }
}

/// Line-delimited transcript files, one per session: `<dir>/<session_id>.jsonl`.
#[derive(Debug, Clone)]
pub struct TranscriptStore {
    dir: PathBuf,
}

impl TranscriptStore {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(TranscriptStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    pub fn append(&self, session_id: &str, lines: &[TranscriptLine]) -> std::io::Result<()> {
        let mut buf = Vec::new();
        for line in lines {
            serde_json::to_writer(&mut buf, line).map_err(std::io::Error::other)?;
            buf.push(b'\n');
        }
        let mut file = OpenOptions::new().create(true).append(true).open(self.path_for(session_id))?;
        file.write_all(&buf)?;
        file.flush()
    }

    /// Rebuilds a session from its file.
    pub fn load(&self, path: &Path) -> std::io::Result<Session> {
        let file = std::fs::File::open(path)?;
        let invalid =
            |msg: String| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {msg}", path.display()));
        let mut session: Option<Session> = None;
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TranscriptLine =
                serde_json::from_str(&line).map_err(|e| invalid(format!("line {}: {e}", i + 1)))?;
            match (parsed, session.as_mut()) {
                (TranscriptLine::Session { session_id, topic, user_stance, bot_stance, strategy, seed, .. }, None) => {
                    session = Some(Session {
                        session_id,
                        topic,
                        user_stance,
                        bot_stance,
                        strategy,
                        seed,
                        used_ids: BTreeSet::new(),
                        transcript: Vec::new(),
                        state: SessionState::Active,
                    });
                }
                (TranscriptLine::Turn(turn), Some(s)) => {
                    if let Some(id) = &turn.record_id {
                        s.used_ids.insert(id.clone());
                    }
                    s.transcript.push(turn);
                }
                (TranscriptLine::Exhausted { .. }, Some(s)) => s.state = SessionState::Exhausted,
                (TranscriptLine::Closed { .. }, Some(s)) => s.state = SessionState::Closed,
                _ => return Err(invalid(format!("line {}: unexpected record", i + 1))),
            }
        }
        session.ok_or_else(|| invalid("no session header".into()))
    }

    /// Every persisted session, in file-name order.
    pub fn load_all(&self) -> std::io::Result<Vec<Session>> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        paths.iter().map(|p| self.load(p)).collect()
    }
}
