//! JSON over HTTP.

use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use sisgame_core::model::TraceWriter;

use crate::actor::SessionManager;
use crate::error::SessionError;
use crate::session::{ClientView, SessionSpec, Submission, SCHEMA_VERSION};

/// Longest a state request may block.
pub const MAX_WAIT_MS: u64 = 30_000;

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub schema_version: u32,
    pub session_id: String,
    pub view: ClientView,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ack {
    pub schema_version: u32,
    pub accepted: bool,
    pub view: ClientView,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateQuery {
    /// Return once the view version exceeds this.
    pub since: Option<u64>,
    pub wait_ms: Option<u64>,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, SessionError> {
    payload.map(|Json(v)| v).map_err(|e| match e {
        JsonRejection::JsonDataError(e) => SessionError::Validation(e.body_text()),
        other => SessionError::Invalid(other.body_text()),
    })
}

async fn create(
    State(m): State<SessionManager>,
    payload: Result<Json<SessionSpec>, JsonRejection>,
) -> Result<impl IntoResponse, SessionError> {
    let spec = body(payload).map_err(|e| match e {
        // a bad treatment or unknown key is a malformed request here
        SessionError::Validation(msg) => SessionError::Invalid(msg),
        other => other,
    })?;
    let (session_id, view) = m.create(spec)?;
    Ok((StatusCode::CREATED, Json(Created { schema_version: SCHEMA_VERSION, session_id, view })))
}

async fn submit(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    payload: Result<Json<Submission>, JsonRejection>,
) -> Result<Json<Ack>, SessionError> {
    let handle = m.get(&id)?;
    let sub = body(payload)?;
    let view = handle.submit(sub).await?;
    Ok(Json(Ack { schema_version: SCHEMA_VERSION, accepted: true, view }))
}

async fn state(
    State(m): State<SessionManager>,
    Path(id): Path<String>,
    Query(q): Query<StateQuery>,
) -> Result<Json<ClientView>, SessionError> {
    let handle = m.get(&id)?;
    let view = match q.since {
        Some(since) => {
            let wait = Duration::from_millis(q.wait_ms.unwrap_or(MAX_WAIT_MS).min(MAX_WAIT_MS));
            handle.wait_view(since, wait).await
        }
        None => handle.view(),
    };
    Ok(Json(view))
}

async fn history(State(m): State<SessionManager>, Path(id): Path<String>) -> Result<impl IntoResponse, SessionError> {
    let rows = m.get(&id)?.trace().await?;
    let mut w = TraceWriter::new(Vec::new());
    for row in &rows {
        w.write(row).map_err(|e| SessionError::Invalid(e.to_string()))?;
    }
    let mut bytes = w.finish().map_err(|e| SessionError::Invalid(e.to_string()))?;
    if rows.is_empty() {
        bytes = TRACE_HEADER.as_bytes().to_vec();
    }
    Ok(([(header::CONTENT_TYPE, "text/csv")], bytes))
}

const TRACE_HEADER: &str = "run_id,group_id,treatment,round,agent,activity,traced,alerted,exposed,quarantined,infected,payoff\n";

pub fn router(manager: SessionManager) -> Router {
    Router::new()
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/{id}/decisions", post(submit))
        .route("/v1/sessions/{id}/state", get(state))
        .route("/v1/sessions/{id}/history.csv", get(history))
        .with_state(manager)
}
