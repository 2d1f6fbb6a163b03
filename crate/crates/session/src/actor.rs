//! Session ownership: one task per session serialises submissions and timer
//! expiries; views are published on a watch channel.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use tokio::sync::{mpsc, oneshot, watch};
use tokio::time::Instant;

use sisgame_core::model::TraceRow;

use crate::error::SessionError;
use crate::session::{ClientView, HumanRound, Millis, SessionCore, SessionSpec, Submission};

/// Wall-clock milliseconds, advanced by the tokio timer so that paused test
/// runtimes see a consistent clock.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    origin: Instant,
    origin_ms: Millis,
}

impl Clock {
    pub fn new() -> Self {
        let origin_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as Millis);
        Clock { origin: Instant::now(), origin_ms }
    }

    pub fn now(&self) -> Millis {
        self.origin_ms + self.origin.elapsed().as_millis() as Millis
    }

    fn instant_at(&self, ms: Millis) -> Instant {
        self.origin + Duration::from_millis(ms.saturating_sub(self.origin_ms))
    }
}

impl Default for Clock {
    fn default() -> Self {
        Clock::new()
    }
}

enum Command {
    Submit(Submission, oneshot::Sender<Result<ClientView, SessionError>>),
    Trace(oneshot::Sender<Vec<TraceRow>>),
    Log(oneshot::Sender<Vec<HumanRound>>),
}

#[derive(Clone)]
pub struct SessionHandle {
    tx: mpsc::Sender<Command>,
    views: watch::Receiver<ClientView>,
}

impl SessionHandle {
    pub fn view(&self) -> ClientView {
        self.views.borrow().clone()
    }

    /// Wait until the view's version exceeds `since` or `timeout` passes.
    pub async fn wait_view(&self, since: u64, timeout: Duration) -> ClientView {
        let mut rx = self.views.clone();
        let _ = tokio::time::timeout(timeout, rx.wait_for(|v| v.version > since)).await;
        let view = rx.borrow().clone();
        view
    }

    pub async fn submit(&self, sub: Submission) -> Result<ClientView, SessionError> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(Command::Submit(sub, tx)).await.map_err(|_| SessionError::Closed)?;
        rx.await.map_err(|_| SessionError::Closed)?
    }

    pub async fn trace(&self) -> Result<Vec<TraceRow>, SessionError> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(Command::Trace(tx)).await.map_err(|_| SessionError::Closed)?;
        rx.await.map_err(|_| SessionError::Closed)
    }

    pub async fn human_log(&self) -> Result<Vec<HumanRound>, SessionError> {
        let (tx, rx) = oneshot::channel();
        self.tx.send(Command::Log(tx)).await.map_err(|_| SessionError::Closed)?;
        rx.await.map_err(|_| SessionError::Closed)
    }
}

async fn run(mut core: SessionCore, clock: Clock, mut rx: mpsc::Receiver<Command>, views: watch::Sender<ClientView>) {
    loop {
        let wake = core.deadline().map(|d| clock.instant_at(d));
        let expiry = async {
            match wake {
                Some(at) => tokio::time::sleep_until(at).await,
                None => std::future::pending().await,
            }
        };
        tokio::select! {
            cmd = rx.recv() => {
                let Some(cmd) = cmd else { break };
                match cmd {
                    Command::Submit(sub, reply) => {
                        let res = core.submit(sub, clock.now()).map(|()| core.view());
                        let _ = reply.send(res);
                    }
                    Command::Trace(reply) => {
                        core.advance(clock.now());
                        let _ = reply.send(core.trace_rows());
                    }
                    Command::Log(reply) => {
                        let _ = reply.send(core.human_log().to_vec());
                    }
                }
            }
            () = expiry => {
                let now = clock.now().max(core.deadline().unwrap_or(0));
                core.advance(now);
            }
        }
        views.send_if_modified(|v| {
            let next = core.view();
            let changed = next.version != v.version;
            *v = next;
            changed
        });
    }
}

/// All live sessions of a server.
#[derive(Clone, Default)]
pub struct SessionManager {
    sessions: Arc<Mutex<HashMap<String, SessionHandle>>>,
    clock: Clock,
}

impl SessionManager {
    pub fn new() -> Self {
        SessionManager::default()
    }

    /// Must be called inside a tokio runtime.
    pub fn create(&self, spec: SessionSpec) -> Result<(String, ClientView), SessionError> {
        let core = SessionCore::new(spec, self.clock.now())?;
        let view = core.view();
        let id = uuid::Uuid::new_v4().simple().to_string();
        let (tx, rx) = mpsc::channel(32);
        let (vtx, vrx) = watch::channel(view.clone());
        tokio::spawn(run(core, self.clock, rx, vtx));
        tracing::info!(session = %id, "session created");
        self.sessions.lock().expect("session map").insert(id.clone(), SessionHandle { tx, views: vrx });
        Ok((id, view))
    }

    pub fn get(&self, id: &str) -> Result<SessionHandle, SessionError> {
        self.sessions.lock().expect("session map").get(id).cloned().ok_or(SessionError::NotFound)
    }
}
