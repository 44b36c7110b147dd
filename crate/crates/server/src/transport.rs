//! WebSocket transport. Each session runs in its own task that owns the
//! [`LiveSession`]; connections only ever talk to it through that task's
//! command queue, so session state is never touched concurrently.
//!
//! Routes: `GET /ws/{session_id}` upgrades to a WebSocket whose first client
//! frame must be `join`; `GET /health` answers `ok`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;

use crate::live::LiveSession;
use crate::protocol::{decode_client, encode, ClientMessage, Label, ServerMessage};
use crate::{ServerError, SessionConfig};

const TICK: Duration = Duration::from_millis(100);

enum Command {
    Join { token: String, conn: u64, out: mpsc::UnboundedSender<String>, reply: oneshot::Sender<Result<usize, ServerError>> },
    Message { seat: usize, conn: u64, msg: ClientMessage },
    Gone { seat: usize, conn: u64 },
}

/// A session that has been registered and started.
pub struct Created {
    pub session_id: String,
    /// (seat label, join token) for every human seat.
    pub tokens: Vec<(Label, String)>,
    /// Resolves to the written log path once the session has ended.
    pub finished: JoinHandle<Result<PathBuf, ServerError>>,
}

/// All sessions this process serves.
#[derive(Default)]
pub struct Registry {
    sessions: Mutex<HashMap<String, mpsc::UnboundedSender<Command>>>,
    next_conn: AtomicU64,
}

impl Registry {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    /// Registers the session and starts its task. Must be called inside a
    /// tokio runtime.
    pub fn create_session(&self, cfg: SessionConfig) -> Result<Created, ServerError> {
        let mut sessions = self.sessions.lock().expect("registry lock");
        if sessions.contains_key(&cfg.session_id) {
            return Err(ServerError::DuplicateSession(cfg.session_id));
        }
        let started = Instant::now();
        let live = LiveSession::new(cfg, 0)?;
        let session_id = live.config().session_id.clone();
        let tokens = live
            .tokens()
            .iter()
            .enumerate()
            .filter_map(|(seat, t)| t.clone().map(|t| (live.label(seat).to_string(), t)))
            .collect();
        let (tx, rx) = mpsc::unbounded_channel();
        sessions.insert(session_id.clone(), tx);
        let finished = tokio::spawn(run_session(live, rx, started));
        Ok(Created { session_id, tokens, finished })
    }

    fn queue(&self, session_id: &str) -> Option<mpsc::UnboundedSender<Command>> {
        self.sessions.lock().expect("registry lock").get(session_id).cloned()
    }
}

fn elapsed_ms(started: Instant) -> u64 {
    started.elapsed().as_millis() as u64
}

async fn run_session(
    mut live: LiveSession,
    mut rx: mpsc::UnboundedReceiver<Command>,
    started: Instant,
) -> Result<PathBuf, ServerError> {
    let mut conns: HashMap<usize, (u64, mpsc::UnboundedSender<String>)> = HashMap::new();
    let mut ticker = tokio::time::interval(TICK);
    loop {
        for (seat, msg) in live.drain_outbox() {
            if let Some((_, out)) = conns.get(&seat) {
                let _ = out.send(encode(&msg));
            }
        }
        if live.is_ended() {
            break;
        }
        let now = elapsed_ms(started);
        tokio::select! {
            cmd = rx.recv() => match cmd {
                // Every sender is gone: the registry itself was dropped.
                None => return Err(ServerError::SessionClosed(live.config().session_id.clone())),
                Some(Command::Join { token, conn, out, reply }) => {
                    match live.join(&token, now) {
                        Ok(seat) => {
                            conns.insert(seat, (conn, out));
                            let _ = reply.send(Ok(seat));
                        }
                        Err(e) => {
                            let _ = reply.send(Err(e));
                        }
                    }
                }
                Some(Command::Message { seat, conn, msg }) => {
                    if conns.get(&seat).is_some_and(|(c, _)| *c == conn) {
                        live.handle(seat, msg, now)?;
                    }
                }
                Some(Command::Gone { seat, conn }) => {
                    if conns.get(&seat).is_some_and(|(c, _)| *c == conn) {
                        conns.remove(&seat);
                        live.disconnect(seat, now)?;
                    }
                }
            },
            _ = ticker.tick() => live.tick(now)?,
        }
    }
    let path = live.config().log_path();
    let write = std::fs::create_dir_all(&live.config().log_dir)
        .map_err(Into::into)
        .and_then(|_| live.log().write_to(&path));
    write.map_err(|source| ServerError::Log { path: path.clone(), source })?;
    tracing::info!(session = %live.config().session_id, log = %path.display(), "session ended");
    Ok(path)
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/ws/{session_id}", get(upgrade))
        .with_state(registry)
}

async fn upgrade(
    ws: WebSocketUpgrade,
    Path(session_id): Path<String>,
    State(registry): State<Arc<Registry>>,
) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, session_id, registry))
}

async fn send_error(socket: &mut WebSocket, message: String) {
    let _ = socket.send(Message::Text(encode(&ServerMessage::Error { message }).into())).await;
}

async fn connection(mut socket: WebSocket, session_id: String, registry: Arc<Registry>) {
    let Some(queue) = registry.queue(&session_id) else {
        send_error(&mut socket, ServerError::UnknownSession(session_id).to_string()).await;
        return;
    };
    // The first text frame must be a join.
    let token = loop {
        match socket.recv().await {
            Some(Ok(Message::Text(text))) => match decode_client(text.as_str()) {
                Ok(ClientMessage::Join { token }) => break token,
                Ok(_) => send_error(&mut socket, "join first".into()).await,
                Err(e) => send_error(&mut socket, e).await,
            },
            Some(Ok(_)) => continue,
            _ => return,
        }
    };
    let conn = registry.next_conn.fetch_add(1, Ordering::Relaxed);
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
    let (reply_tx, reply_rx) = oneshot::channel();
    let join = Command::Join { token, conn, out: out_tx.clone(), reply: reply_tx };
    let seat = match queue.send(join) {
        Err(_) => Err(ServerError::SessionClosed(session_id.clone())),
        Ok(()) => reply_rx.await.unwrap_or_else(|_| Err(ServerError::SessionClosed(session_id.clone()))),
    };
    let seat = match seat {
        Ok(seat) => seat,
        Err(e) => {
            send_error(&mut socket, e.to_string()).await;
            return;
        }
    };

    // The session task holds the only strong sender, so the socket closes
    // when the session ends or the seat is taken over by another connection.
    let errors = out_tx.downgrade();
    drop(out_tx);
    let (mut sink, mut stream) = socket.split();
    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(Ok(frame)) = stream.next().await {
        match frame {
            Message::Text(text) => match decode_client(text.as_str()) {
                Ok(msg) => {
                    if queue.send(Command::Message { seat, conn, msg }).is_err() {
                        break;
                    }
                }
                Err(message) => {
                    if let Some(out) = errors.upgrade() {
                        let _ = out.send(encode(&ServerMessage::Error { message }));
                    }
                }
            },
            Message::Close(_) => break,
            _ => {}
        }
    }
    let _ = queue.send(Command::Gone { seat, conn });
    let _ = writer.await;
}
