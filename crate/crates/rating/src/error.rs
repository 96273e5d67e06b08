use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use crate::model::SCHEMA_VERSION;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown item {0}")]
    UnknownItem(String),
    #[error("rater {0} is not enrolled in this session")]
    UnknownRater(String),
    #[error("score {0} outside 0-3")]
    ScoreOutOfRange(u8),
    #[error("{0} is not the adjudicator of this session")]
    NotAdjudicator(String),
    #[error("item not open for consensus: {0}")]
    NotDisputed(String),
    #[error("{} items not finalized", .0.len())]
    Unfinalized(Vec<String>),
    #[error("missing mask: {0}")]
    MissingMask(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("corrupt event log: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Core(#[from] dsa_territory::Error),
    #[error("event log {path}: {source}")]
    Log {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        use ServiceError::*;
        match self {
            UnknownSession(_) | UnknownItem(_) => StatusCode::NOT_FOUND,
            UnknownRater(_) | NotAdjudicator(_) => StatusCode::FORBIDDEN,
            ScoreOutOfRange(_) | BadRequest(_) | MissingMask(_) => StatusCode::UNPROCESSABLE_ENTITY,
            NotDisputed(_) | Unfinalized(_) => StatusCode::CONFLICT,
            Corrupt(_) | Core(_) | Log { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let mut body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": self.to_string(),
        });
        if let ServiceError::Unfinalized(items) = &self {
            body["unfinalized"] = json!(items);
        }
        (self.status(), Json(body)).into_response()
    }
}
