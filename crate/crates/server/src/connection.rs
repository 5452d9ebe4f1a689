//! One websocket connection: its own session registry, a writer task, and at
//! most one solver run per session.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket};
use futures::{SinkExt, StreamExt};
use tokio::sync::{mpsc, watch};
use tokio::task::JoinSet;

use preflex_core::objectives::ObjectiveId;
use preflex_core::scene::SceneDocument;
use preflex_core::session::{AdaptDiagnostics, Mode, Session, SessionConfig};
use preflex_core::solver::GenerationReport;
use preflex_core::Error;

use crate::protocol::{
    Adapted, ClientMessage, ErrorKind, Phase, ServerMessage, SessionOptions, PROTOCOL_VERSION,
};
use crate::AppState;

struct Slot {
    session: Session,
    /// Cancel flag of the running adaptation, if any.
    running: Option<Arc<AtomicBool>>,
}

enum Outcome {
    Started {
        session_id: String,
        scene: SceneDocument,
        result: Result<Session, Error>,
    },
    Adapted {
        session_id: String,
        pairs: Vec<[ObjectiveId; 2]>,
        result: Result<(Session, AdaptDiagnostics), Error>,
    },
}

pub(crate) struct Connection {
    id: u64,
    state: Arc<AppState>,
    out: mpsc::UnboundedSender<ServerMessage>,
    sessions: HashMap<String, Slot>,
    /// Sessions whose initial front is still being computed.
    starting: HashMap<String, Arc<AtomicBool>>,
    next_session: u64,
    tasks: JoinSet<Outcome>,
}

fn classify(err: &Error) -> ErrorKind {
    match err {
        Error::MoveRejected(_)
        | Error::UnknownWidget(_)
        | Error::UnsupportedMode(_)
        | Error::Precondition(_)
        | Error::KeyMismatch { .. }
        | Error::Domain(_) => ErrorKind::Protocol,
        Error::Parse { .. } | Error::Json(_) => ErrorKind::Schema,
        _ => ErrorKind::Internal,
    }
}

/// Observer that streams progress frames and stops once `cancel` is set.
fn progress_observer(
    out: mpsc::UnboundedSender<ServerMessage>,
    session_id: String,
    phase: Phase,
    cancel: Arc<AtomicBool>,
) -> impl FnMut(&GenerationReport<'_>) -> ControlFlow<()> {
    move |r| {
        if cancel.load(Ordering::Relaxed) {
            return ControlFlow::Break(());
        }
        let _ = out.send(ServerMessage::Progress {
            session_id: session_id.clone(),
            phase,
            generation: r.generation,
            total_generations: r.total_generations,
            best_ranks: r.best_ranks.0.clone(),
            best_count: r.best_count,
        });
        ControlFlow::Continue(())
    }
}

impl Connection {
    pub(crate) async fn run(
        socket: WebSocket,
        state: Arc<AppState>,
        id: u64,
        mut shutdown: watch::Receiver<bool>,
    ) {
        let (mut sink, mut stream) = socket.split();
        let (out, mut rx) = mpsc::unbounded_channel::<ServerMessage>();
        let writer = tokio::spawn(async move {
            while let Some(msg) = rx.recv().await {
                if sink.send(Message::Text(msg.to_json().into())).await.is_err() {
                    break;
                }
            }
            let _ = sink.close().await;
        });

        let mut conn = Connection {
            id,
            state,
            out,
            sessions: HashMap::new(),
            starting: HashMap::new(),
            next_session: 1,
            tasks: JoinSet::new(),
        };
        loop {
            tokio::select! {
                frame = stream.next() => match frame {
                    Some(Ok(Message::Text(text))) => conn.handle_text(text.as_str()),
                    Some(Ok(Message::Binary(_))) => {
                        conn.send(ServerMessage::error(ErrorKind::Schema, "binary frames are not supported", None));
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => {}
                },
                Some(done) = conn.tasks.join_next(), if !conn.tasks.is_empty() => match done {
                    Ok(outcome) => conn.complete(outcome),
                    Err(e) => tracing::error!("solver task failed: {e}"),
                },
                _ = shutdown.changed() => break,
            }
        }
        conn.close();
        drop(conn);
        let _ = writer.await;
    }

    fn send(&self, msg: ServerMessage) {
        let _ = self.out.send(msg);
    }

    fn handle_text(&mut self, text: &str) {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => self.send(ServerMessage::error(ErrorKind::Schema, e.to_string(), None)),
        }
    }

    fn handle(&mut self, msg: ClientMessage) {
        match msg {
            ClientMessage::Hello { .. } => self.send(ServerMessage::Hello {
                version: PROTOCOL_VERSION,
                server: format!("preflex {}", env!("CARGO_PKG_VERSION")),
            }),
            ClientMessage::SceneData { scene } => match self.state.scene(&scene) {
                Some(s) => self.send(ServerMessage::SceneData { name: scene, scene: s.to_document() }),
                None => self.send(ServerMessage::error(ErrorKind::Protocol, format!("unknown scene `{scene}`"), None)),
            },
            ClientMessage::StartSession { scene, mode, seed, options } => {
                self.start_session(scene, mode, seed, options.unwrap_or_default())
            }
            ClientMessage::SubmitMoves { session_id, moves } => {
                let Some(slot) = self.idle_slot(&session_id) else { return };
                let reply = match slot.session.submit_moves(&moves) {
                    Ok(()) => ServerMessage::state(&session_id, &slot.session, None),
                    Err(e) => ServerMessage::error(classify(&e), e.to_string(), Some(&session_id)),
                };
                self.send(reply);
            }
            ClientMessage::Adapt { session_id, pairs } => self.start_adapt(session_id, pairs),
            ClientMessage::Finish { session_id } => {
                if self.idle_slot(&session_id).is_none() {
                    return;
                }
                let slot = self.sessions.remove(&session_id).expect("checked above");
                self.flush(&session_id, &slot.session);
                let (_, report) = slot.session.finish();
                self.send(ServerMessage::Finish { session_id, report });
            }
        }
    }

    /// Looks up a session that has no solver run in flight, replying with
    /// `unknown_session` or `busy` otherwise.
    fn idle_slot(&mut self, session_id: &str) -> Option<&mut Slot> {
        let error = match self.sessions.get(session_id) {
            None => Some((ErrorKind::UnknownSession, format!("no session `{session_id}` on this connection"))),
            Some(slot) if slot.running.is_some() => {
                Some((ErrorKind::Busy, "an adaptation is already running for this session".to_string()))
            }
            Some(_) => None,
        };
        if let Some((kind, message)) = error {
            self.send(ServerMessage::error(kind, message, Some(session_id)));
            return None;
        }
        self.sessions.get_mut(session_id)
    }

    fn start_session(&mut self, scene_name: String, mode: Mode, seed: u64, options: SessionOptions) {
        let Some(scene) = self.state.scene(&scene_name) else {
            return self.send(ServerMessage::error(ErrorKind::Protocol, format!("unknown scene `{scene_name}`"), None));
        };
        let mut config: SessionConfig = self.state.config.session.clone();
        if let Some(n) = options.population_size {
            config.solver.population_size = n;
        }
        if let Some(g) = options.generations {
            config.solver.generations = g;
        }
        if let Some(t) = options.tau_lower {
            config.tau_lower = t;
        }
        if let Some(t) = options.tau_upper {
            config.tau_upper = t;
        }
        let session_id = format!("s{}", self.next_session);
        self.next_session += 1;
        let cancel = Arc::new(AtomicBool::new(false));
        self.starting.insert(session_id.clone(), cancel.clone());
        let mut observer = progress_observer(self.out.clone(), session_id.clone(), Phase::Start, cancel);
        self.tasks.spawn_blocking(move || {
            let document = scene.to_document();
            let result = Session::start_observed(scene, scene_name, mode, seed, config, &mut observer);
            Outcome::Started { session_id, scene: document, result }
        });
    }

    fn start_adapt(&mut self, session_id: String, pairs: Vec<[ObjectiveId; 2]>) {
        let out = self.out.clone();
        let state = self.state.clone();
        let Some(slot) = self.idle_slot(&session_id) else { return };
        // Preconditions are checked here so they come back without a trip
        // through the worker pool.
        let precondition = if !slot.session.mode().is_optimizer() {
            Some("adapt is not available in manual mode")
        } else if slot.session.pending_adjustments() == 0 {
            Some("submit between one and three moves before adapting")
        } else {
            None
        };
        if let Some(message) = precondition {
            return self.send(ServerMessage::error(ErrorKind::Protocol, message, Some(&session_id)));
        }
        let cancel = Arc::new(AtomicBool::new(false));
        slot.running = Some(cancel.clone());
        let mut session = slot.session.clone();
        let mut observer = progress_observer(out, session_id.clone(), Phase::Adapt, cancel);
        self.tasks.spawn_blocking(move || {
            let result = session.adapt(&mut observer).cloned();
            match &result {
                Ok(_) => state.stats.record_completed(),
                Err(Error::Cancelled) => state.stats.record_cancelled(),
                Err(_) => {}
            }
            Outcome::Adapted { session_id, pairs, result: result.map(|d| (session, d)) }
        });
    }

    fn complete(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Started { session_id, scene, result } => {
                self.starting.remove(&session_id);
                match result {
                    Ok(session) => {
                        self.send(ServerMessage::state(&session_id, &session, Some(scene)));
                        self.sessions.insert(session_id, Slot { session, running: None });
                    }
                    Err(e) => self.send(ServerMessage::error(classify(&e), e.to_string(), None)),
                }
            }
            Outcome::Adapted { session_id, pairs, result } => {
                let Some(slot) = self.sessions.get_mut(&session_id) else { return };
                slot.running = None;
                let reply = match result {
                    Ok((session, diagnostics)) => {
                        slot.session = session;
                        ServerMessage::Adapted(Adapted::new(&session_id, &slot.session, &diagnostics, &pairs))
                    }
                    Err(e) => ServerMessage::error(classify(&e), e.to_string(), Some(&session_id)),
                };
                self.send(reply);
            }
        }
    }

    fn flush(&self, session_id: &str, session: &Session) {
        let Some(dir) = &self.state.config.transcript_dir else { return };
        let path = dir.join(format!("conn{}-{session_id}.json", self.id));
        if let Err(e) = std::fs::write(&path, session.transcript().to_json()) {
            tracing::warn!("could not write transcript {}: {e}", path.display());
        }
    }

    /// Cancels every solver run and writes transcripts of the last committed
    /// state of every open session.
    fn close(&mut self) {
        let running = self.sessions.values().filter_map(|s| s.running.as_ref());
        for cancel in running.chain(self.starting.values()) {
            cancel.store(true, Ordering::Relaxed);
        }
        for (id, slot) in &self.sessions {
            self.flush(id, &slot.session);
        }
        // Workers notice the flag at their next generation and exit.
        self.tasks.detach_all();
    }
}
