use std::future::Future;
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::State;
use axum::http::header;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;

use super::session::now_ms;
use super::{FuzzError, FuzzSession};

const SHELL: &str = r#"<!doctype html>
<html lang="en">
<head>
<meta charset="utf-8">
<meta name="viewport" content="width=device-width, initial-scale=1">
<title>manifest fuzz harness</title>
<link rel="manifest" href="/manifest.json">
</head>
<body>
<h1>manifest fuzz harness</h1>
<p>Current mutant: <a href="/status">/status</a></p>
</body>
</html>
"#;

/// The body of `GET /status`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Status {
    pub mutant_id: String,
    pub index: usize,
    pub total: usize,
    /// Unix milliseconds at which the current mutant became active.
    pub advanced_at: u64,
}

struct Shared {
    session: Mutex<FuzzSession>,
    ids: Vec<String>,
    bodies: Vec<String>,
    interval: Duration,
    /// (index, advanced_at). Only the rotation task writes it.
    current: RwLock<(usize, u64)>,
}

impl Shared {
    fn new(session: FuzzSession) -> Result<Self, FuzzError> {
        if session.mutants.is_empty() {
            return Err(FuzzError::EmptySession);
        }
        Ok(Self {
            ids: session.mutants.iter().map(|m| m.mutant_id.clone()).collect(),
            bodies: session.mutants.iter().map(|m| m.rendered.clone()).collect(),
            interval: Duration::from_secs(session.interval_seconds.max(1)),
            session: Mutex::new(session),
            current: RwLock::new((0, now_ms())),
        })
    }

    fn status(&self) -> Status {
        let (index, advanced_at) = *self.current.read().unwrap();
        Status { mutant_id: self.ids[index].clone(), index, total: self.ids.len(), advanced_at }
    }
}

async fn shell() -> Html<&'static str> {
    Html(SHELL)
}

async fn manifest(State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    // hold the read guard so the logged id is the one served
    let current = shared.current.read().unwrap();
    let index = current.0;
    if let Err(e) = shared.session.lock().unwrap().record_serve(&shared.ids[index]) {
        log::error!("cannot persist serve event: {e}");
    }
    drop(current);
    (
        [(header::CONTENT_TYPE, "application/manifest+json"), (header::CACHE_CONTROL, "no-store")],
        shared.bodies[index].clone(),
    )
}

async fn status(State(shared): State<Arc<Shared>>) -> Json<Status> {
    Json(shared.status())
}

async fn rotate(shared: Arc<Shared>) {
    loop {
        tokio::time::sleep(shared.interval).await;
        let mut current = shared.current.write().unwrap();
        let next = (current.0 + 1) % shared.ids.len();
        *current = (next, now_ms());
        log::info!("serving mutant {} ({next})", shared.ids[next]);
    }
}

async fn run(shared: Arc<Shared>, listener: TcpListener, stop: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::from_std(listener)?;
    let rotation = tokio::spawn(rotate(shared.clone()));
    let app = Router::new()
        .route("/", get(shell))
        .route("/manifest.json", get(manifest))
        .route("/status", get(status))
        .with_state(shared);
    let result = axum::serve(listener, app).with_graceful_shutdown(stop).await;
    rotation.abort();
    result
}

fn bind(address: &str) -> Result<TcpListener, FuzzError> {
    let listener = TcpListener::bind(address)
        .map_err(|source| FuzzError::BindFailure { address: address.to_string(), source })?;
    listener.set_nonblocking(true)?;
    Ok(listener)
}

fn runtime() -> std::io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()
}

/// Serve `session` on `bind_address` until interrupted, then return it with
/// its serve log.
pub fn serve_session(session: FuzzSession, bind_address: &str) -> Result<FuzzSession, FuzzError> {
    let shared = Arc::new(Shared::new(session)?);
    let listener = bind(bind_address)?;
    log::info!("fuzz harness listening on http://{}/", listener.local_addr()?);
    runtime()?.block_on(run(shared.clone(), listener, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    let session = shared.session.lock().unwrap().clone();
    Ok(session)
}

/// A harness running on a background thread.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

/// Start the harness on its own thread and runtime. Port 0 picks a free port.
pub fn spawn_server(session: FuzzSession, bind_address: &str) -> Result<ServerHandle, FuzzError> {
    let shared = Arc::new(Shared::new(session)?);
    let listener = bind(bind_address)?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let task_shared = shared.clone();
    let thread = std::thread::spawn(move || {
        runtime()?.block_on(run(task_shared, listener, async {
            let _ = rx.await;
        }))
    });
    Ok(ServerHandle { addr, shared, stop: Some(tx), thread: Some(thread) })
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/", self.addr)
    }

    pub fn status(&self) -> Status {
        self.shared.status()
    }

    /// A snapshot of the session including the serve log so far.
    pub fn session(&self) -> FuzzSession {
        self.shared.session.lock().unwrap().clone()
    }

    pub fn stop(mut self) -> FuzzSession {
        self.shutdown();
        self.session()
    }

    fn shutdown(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            match t.join() {
                Ok(Err(e)) => log::error!("fuzz harness stopped with an error: {e}"),
                Err(_) => log::error!("fuzz harness thread panicked"),
                Ok(Ok(())) => {}
            }
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}
