use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use crate::session::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("invalid session request: {0}")]
    Invalid(String),
    #[error("no such session")]
    NotFound,
    #[error("decision for round {got}, but round {expected} is open")]
    StaleRound { expected: u32, got: u32 },
    #[error("{0}")]
    NotOpen(String),
    #[error("{0}")]
    Validation(String),
    #[error("session has finished")]
    Gone,
    #[error("session is shutting down")]
    Closed,
}

impl SessionError {
    pub fn status(&self) -> StatusCode {
        match self {
            SessionError::Invalid(_) => StatusCode::BAD_REQUEST,
            SessionError::NotFound => StatusCode::NOT_FOUND,
            SessionError::StaleRound { .. } | SessionError::NotOpen(_) => StatusCode::CONFLICT,
            SessionError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Gone => StatusCode::GONE,
            SessionError::Closed => StatusCode::SERVICE_UNAVAILABLE,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Invalid(_) => "invalid",
            SessionError::NotFound => "not_found",
            SessionError::StaleRound { .. } => "stale_round",
            SessionError::NotOpen(_) => "not_open",
            SessionError::Validation(_) => "validation",
            SessionError::Gone => "gone",
            SessionError::Closed => "closed",
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    schema_version: u32,
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: String,
}

impl IntoResponse for SessionError {
    fn into_response(self) -> Response {
        let body = ErrorBody { schema_version: SCHEMA_VERSION, error: ErrorDetail { code: self.code(), message: self.to_string() } };
        (self.status(), Json(body)).into_response()
    }
}
