use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use debbie_core::dialogue::{DialogueError, SessionState, EXHAUSTED_MESSAGE};
use debbie_core::retrieval::RetrievalError;
use serde_json::{json, Value};

/// An error response: status plus a JSON body with at least `error`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, body: json!({ "error": message.into() }) }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no session {id}"))
    }

    pub fn exhausted(session_id: &str) -> Self {
        ApiError {
            status: StatusCode::CONFLICT,
            body: json!({
                "error": "session exhausted",
                "message": EXHAUSTED_MESSAGE,
                "session_id": session_id,
                "state": SessionState::Exhausted,
            }),
        }
    }
}

impl From<DialogueError> for ApiError {
    fn from(e: DialogueError) -> Self {
        match e {
            DialogueError::UnknownTopic { ref available, .. } => {
                ApiError { status: StatusCode::NOT_FOUND, body: json!({ "error": e.to_string(), "topics": available }) }
            }
            DialogueError::Closed(ref id) => ApiError {
                status: StatusCode::CONFLICT,
                body: json!({ "error": e.to_string(), "session_id": id, "state": SessionState::Closed }),
            },
            DialogueError::Retrieval(RetrievalError::Score(ref s)) => {
                Self::new(StatusCode::BAD_GATEWAY, format!("similarity scorer failed: {s}"))
            }
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
