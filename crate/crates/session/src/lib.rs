//! A live game session: one human seat, the rest played by simulated agents,
//! exposed as a small HTTP/JSON service.
//!
//! [`SessionCore`] is the timer-driven state machine and takes explicit
//! timestamps; [`SessionManager`] gives each session its own task; [`router`]
//! maps the endpoints onto it.

mod actor;
mod error;
mod http;
mod replay;
mod session;

pub use actor::{Clock, SessionHandle, SessionManager};
pub use error::SessionError;
pub use http::{router, Ack, Created, StateQuery, MAX_WAIT_MS};
pub use replay::replay;
pub use session::{
    Capabilities, ClientView, Defaults, FinishReason, HumanRound, Millis, OwnRound, OwnView, PayoffBreakdown, Phase,
    SessionCore, SessionSpec, Submission, Timers, INITIAL_LAG_ACTIVITY, SCHEMA_VERSION,
};

/// Serve `router` on `addr` until the task is cancelled.
pub async fn serve(addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "session service listening");
    axum::serve(listener, router(SessionManager::new())).await
}
