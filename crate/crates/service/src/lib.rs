//! HTTP chat API over the retrieval engine.
//!
//! Sessions live in memory; each one sits behind its own async mutex so
//! turns on one session run one at a time in arrival order while different
//! sessions proceed concurrently. Indexes are shared read-only. Retrieval
//! itself is blocking (a remote scorer does network I/O), so it runs on the
//! blocking pool.

pub mod api;
pub mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{header, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::{Json, Router};
use debbie_core::clustering::{ClusterError, IndexSet};
use debbie_core::dialogue::{Engine, Reply, Session, SessionState, TranscriptStore};
use debbie_core::retrieval::{GraphThresholds, Strategy};
use debbie_core::similarity::{ScorerConfig, ScorerConfigError};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::{Mutex, RwLock};
use tower_http::cors::{Any, CorsLayer};

use crate::api::{CreateSession, MessageReply, PostMessage, SessionDetail, SessionView, TopicEntry};
use crate::error::ApiError;

/// Seeds handed out by the service stay below 2^53 so JavaScript clients
/// can echo them back without rounding.
const MAX_CLIENT_SEED: u64 = (1 << 53) - 1;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub index_dir: PathBuf,
    /// `None` keeps transcripts in memory only.
    pub transcript_dir: Option<PathBuf>,
    pub bind: String,
    pub scorer: ScorerConfig,
    pub thresholds: GraphThresholds,
    pub log_requests: bool,
}

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("no index files in {dir}; build them first with `debbie cluster --corpus <corpus.jsonl> --output {dir}`")]
    NoIndexes { dir: String },
    #[error("loading indexes: {0}")]
    Index(ClusterError),
    #[error(transparent)]
    Scorer(#[from] ScorerConfigError),
    #[error("invalid thresholds: {0}")]
    Thresholds(String),
    #[error("restoring transcripts from {dir}: {source}")]
    Transcripts { dir: String, source: std::io::Error },
    #[error("binding {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
}

type SessionSlot = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    sessions: Arc<RwLock<HashMap<String, SessionSlot>>>,
    log_requests: bool,
}

impl AppState {
    pub fn new(engine: Engine, log_requests: bool) -> Self {
        AppState { engine: Arc::new(engine), sessions: Arc::default(), log_requests }
    }

    /// Loads indexes and restores persisted sessions.
    pub fn load(config: &ServiceConfig) -> Result<Self, StartupError> {
        let indexes = IndexSet::load_dir(&config.index_dir).map_err(|e| match e {
            ClusterError::NoIndexes(dir) => StartupError::NoIndexes { dir },
            ClusterError::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => {
                StartupError::NoIndexes { dir: config.index_dir.display().to_string() }
            }
            other => StartupError::Index(other),
        })?;
        let scorer = config.scorer.build()?;
        for index in indexes.iter() {
            if index.scorer_kind() != config.scorer.kind() {
                eprintln!(
                    "warning: index {}/{} was built with the {} scorer but the service uses {}",
                    index.topic(),
                    index.stance(),
                    index.scorer_kind(),
                    config.scorer.kind()
                );
            }
        }
        let mut engine = Engine::new(indexes, scorer)
            .with_thresholds(config.thresholds)
            .map_err(|e| StartupError::Thresholds(e.to_string()))?;
        let mut restored = Vec::new();
        if let Some(dir) = &config.transcript_dir {
            let transcripts = |source| StartupError::Transcripts { dir: dir.display().to_string(), source };
            let store = TranscriptStore::new(dir).map_err(transcripts)?;
            restored = store.load_all().map_err(transcripts)?;
            engine = engine.with_store(store);
        }
        let state = AppState::new(engine, config.log_requests);
        {
            let mut sessions = state.sessions.try_write().expect("fresh state is unshared");
            for s in restored {
                sessions.insert(s.session_id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(state)
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub async fn session_count(&self) -> usize {
        self.sessions.read().await.len()
    }

    async fn slot(&self, id: &str) -> Result<SessionSlot, ApiError> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| ApiError::unknown_session(id))
    }
}

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST, Method::DELETE])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/topics", get(list_topics))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/messages", post(post_message))
        .layer(middleware::from_fn_with_state(state.clone(), log_request))
        .layer(cors)
        .with_state(state)
}

/// Binds, serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), StartupError> {
    let state = AppState::load(&config)?;
    let bind_error = |source| StartupError::Bind { addr: config.bind.clone(), source };
    let listener = tokio::net::TcpListener::bind(&config.bind).await.map_err(bind_error)?;
    let addr: SocketAddr = listener.local_addr().map_err(bind_error)?;
    println!(
        "{}",
        serde_json::json!({
            "event": "listening",
            "addr": addr.to_string(),
            "indexes": state.engine.indexes().len(),
            "sessions_restored": state.session_count().await,
        })
    );
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(bind_error)
}

/// One JSON line per request on stdout.
async fn log_request(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if !state.log_requests {
        return next.run(req).await;
    }
    let started = Instant::now();
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let response = next.run(req).await;
    println!(
        "{}",
        serde_json::json!({
            "ts": chrono::Utc::now().to_rfc3339(),
            "method": method.as_str(),
            "path": path,
            "status": response.status().as_u16(),
            "elapsed_ms": started.elapsed().as_secs_f64() * 1e3,
        })
    );
    response
}

fn parse_body<T: serde::de::DeserializeOwned>(body: Result<Json<Value>, JsonRejection>) -> Result<T, ApiError> {
    let Json(value) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    serde_json::from_value(value).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn list_topics(State(state): State<AppState>) -> Json<Vec<TopicEntry>> {
    Json(api::topic_entries(state.engine.indexes()))
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<Value>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let req: CreateSession = parse_body(body)?;
    let strategy = req.strategy.unwrap_or(Strategy::Graph);
    let seed = req.seed.unwrap_or_else(|| rand::random::<u64>() & MAX_CLIENT_SEED);
    let engine = state.engine.clone();
    let session = tokio::task::spawn_blocking(move || engine.start_session(&req.topic, req.stance, strategy, seed))
        .await
        .expect("start_session does not panic")?;
    let view = SessionView::from(&session);
    state.sessions.write().await.insert(session.session_id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionDetail>, ApiError> {
    let slot = state.slot(&id).await?;
    let session = slot.lock().await;
    Ok(Json(SessionDetail::from(&*session)))
}

async fn post_message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<Value>, JsonRejection>,
) -> Result<Json<MessageReply>, ApiError> {
    let slot = state.slot(&id).await?;
    let msg: PostMessage = parse_body(body)?;
    if msg.text.trim().is_empty() {
        return Err(ApiError::bad_request("text must not be empty"));
    }
    // tokio's mutex is FIFO, so queued turns run in arrival order
    let mut session = slot.lock_owned().await;
    if session.state == SessionState::Exhausted {
        return Err(ApiError::exhausted(&id));
    }
    let engine = state.engine.clone();
    let (session, reply) = tokio::task::spawn_blocking(move || {
        let reply = engine.respond(&mut session, &msg.text);
        (session, reply)
    })
    .await
    .expect("respond does not panic");
    match reply? {
        Reply::Argument { text, retrieval, .. } => Ok(Json(MessageReply::new(text, &retrieval, &session))),
        Reply::Exhausted { .. } => Err(ApiError::exhausted(&id)),
    }
}

async fn delete_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionDetail>, ApiError> {
    let slot = state.slot(&id).await?;
    let mut session = slot.lock_owned().await;
    let engine = state.engine.clone();
    let (session, closed) = tokio::task::spawn_blocking(move || {
        let closed = engine.end_session(&mut session);
        (session, closed)
    })
    .await
    .expect("end_session does not panic");
    closed?;
    Ok(Json(SessionDetail::from(&*session)))
}
