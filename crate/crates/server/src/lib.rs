//! Websocket front end for preflex sessions.
//!
//! Each connection owns its sessions. Adaptations run on the blocking pool
//! and stream `progress` frames; dropping the connection cancels them. See
//! `PROTOCOL.md` at the repository root for the message schema.

mod connection;
pub mod protocol;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::ws::WebSocketUpgrade;
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinHandle;

use preflex_core::scene::{load_scene, Scene};
use preflex_core::session::SessionConfig;
use preflex_core::fixtures;

pub use protocol::PROTOCOL_VERSION;

/// Environment variable holding the default bind address.
pub const BIND_ENV: &str = "PREFLEX_BIND";
pub const DEFAULT_BIND: &str = "127.0.0.1:8765";

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("invalid bind address `{0}`")]
    Address(String),
    #[error("cannot load scene {path}: {source}")]
    Scene { path: PathBuf, source: preflex_core::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    /// Extra `*.json` scenes, addressed by file stem.
    pub scene_dir: Option<PathBuf>,
    /// Where transcripts of finished or closed sessions are written.
    pub transcript_dir: Option<PathBuf>,
    pub session: SessionConfig,
}

impl ServerConfig {
    /// Bind address from `PREFLEX_BIND`, falling back to the default.
    pub fn from_env() -> Result<Self, ServerError> {
        let raw = std::env::var(BIND_ENV).unwrap_or_else(|_| DEFAULT_BIND.to_string());
        let bind = raw.parse().map_err(|_| ServerError::Address(raw))?;
        Ok(ServerConfig {
            bind,
            scene_dir: None,
            transcript_dir: None,
            session: SessionConfig::default(),
        })
    }
}

#[derive(Debug, Default)]
pub struct ServerStats {
    connections: AtomicUsize,
    adapts_completed: AtomicUsize,
    adapts_cancelled: AtomicUsize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StatsSnapshot {
    pub connections: usize,
    pub adapts_completed: usize,
    pub adapts_cancelled: usize,
}

impl ServerStats {
    pub(crate) fn record_completed(&self) {
        self.adapts_completed.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn record_cancelled(&self) {
        self.adapts_cancelled.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            connections: self.connections.load(Ordering::Relaxed),
            adapts_completed: self.adapts_completed.load(Ordering::Relaxed),
            adapts_cancelled: self.adapts_cancelled.load(Ordering::Relaxed),
        }
    }
}

pub(crate) struct AppState {
    config: ServerConfig,
    scenes: BTreeMap<String, Arc<Scene>>,
    stats: ServerStats,
    next_connection: AtomicU64,
    shutdown: watch::Receiver<bool>,
}

impl AppState {
    fn scene(&self, name: &str) -> Option<Arc<Scene>> {
        self.scenes.get(name).cloned()
    }
}

/// Bundled fixtures plus every `*.json` file in `dir`.
pub fn load_scenes(dir: Option<&std::path::Path>) -> Result<BTreeMap<String, Arc<Scene>>, ServerError> {
    let mut scenes: BTreeMap<String, Arc<Scene>> = fixtures::NAMES
        .iter()
        .map(|&n| (n.to_string(), Arc::new(fixtures::by_name(n).expect("bundled"))))
        .collect();
    if let Some(dir) = dir {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        entries.sort();
        for path in entries {
            let text = std::fs::read_to_string(&path)?;
            let scene = load_scene(&text).map_err(|source| ServerError::Scene { path: path.clone(), source })?;
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            scenes.insert(stem, Arc::new(scene));
        }
    }
    Ok(scenes)
}

pub struct ServerHandle {
    addr: SocketAddr,
    state: Arc<AppState>,
    shutdown: watch::Sender<bool>,
    task: JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.state.stats.snapshot()
    }

    /// Closes every connection (cancelling adaptations and flushing
    /// transcripts) and stops accepting new ones.
    pub async fn shutdown(self) -> std::io::Result<()> {
        let _ = self.shutdown.send(true);
        self.task.await.unwrap_or(Ok(()))
    }

    /// Runs until the listener fails.
    pub async fn wait(self) -> std::io::Result<()> {
        self.task.await.unwrap_or(Ok(()))
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> Response {
    let id = state.next_connection.fetch_add(1, Ordering::Relaxed) + 1;
    state.stats.connections.fetch_add(1, Ordering::Relaxed);
    let shutdown = state.shutdown.clone();
    ws.on_upgrade(move |socket| connection::Connection::run(socket, state, id, shutdown))
}

fn router(state: Arc<AppState>) -> Router {
    Router::new().route("/ws", get(ws_handler)).with_state(state)
}

/// Loads scenes, binds and starts serving in the background.
pub async fn serve(config: ServerConfig) -> Result<ServerHandle, ServerError> {
    let scenes = load_scenes(config.scene_dir.as_deref())?;
    if let Some(dir) = &config.transcript_dir {
        std::fs::create_dir_all(dir)?;
    }
    let listener = TcpListener::bind(config.bind)
        .await
        .map_err(|source| ServerError::Bind { addr: config.bind, source })?;
    let addr = listener.local_addr()?;
    let (tx, rx) = watch::channel(false);
    let state = Arc::new(AppState {
        config,
        scenes,
        stats: ServerStats::default(),
        next_connection: AtomicU64::new(0),
        shutdown: rx.clone(),
    });
    let app = router(state.clone());
    let mut stop = rx;
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = stop.wait_for(|v| *v).await;
            })
            .await
    });
    tracing::info!("preflex server listening on ws://{addr}/ws");
    Ok(ServerHandle { addr, state, shutdown: tx, task })
}
