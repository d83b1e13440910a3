//! Live service: a pipeline thread paced on absolute PRI ticks, and a
//! WebSocket endpoint at `/ws` speaking [`crate::protocol`].
//!
//! Each client has a bounded queue for text messages (frames, replies) and a
//! latest-wins slot for binary profiles. Frames are never dropped: in
//! realtime mode a client whose queue fills up is disconnected, otherwise
//! the pipeline waits for it. `GET /profile` returns the latest full
//! resolution profile as a stride-1 binary profile frame.

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;
use tokio::sync::{mpsc, oneshot, watch, Notify};

use crate::config::SystemConfig;
use crate::pipeline::{Pipeline, PipelineError};
use crate::protocol::{
    CommandError, ControlMessage, DecimatedProfile, ErrorCode, Hello, ServerMessage, Timestamps, SCHEMA_VERSION,
};

/// Concurrent clients accepted by one server.
pub const MAX_CLIENTS: usize = 8;
/// Text messages buffered per client.
pub const CLIENT_QUEUE: usize = 4096;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("binding {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

enum Inbound {
    Command { client: u64, msg: ControlMessage },
    Shutdown,
}

struct Client {
    id: u64,
    text: mpsc::Sender<String>,
    profile: watch::Sender<Option<Bytes>>,
    kick: Arc<Notify>,
}

struct Shared {
    clients: Mutex<Vec<Client>>,
    commands: mpsc::UnboundedSender<Inbound>,
    hello: Mutex<Hello>,
    latest_profile: Mutex<Option<Bytes>>,
    next_client: AtomicU64,
    realtime: bool,
}

impl Shared {
    fn reply(&self, client: u64, msg: ServerMessage) {
        let text = msg.to_json();
        let sender = self.clients.lock().unwrap().iter().find(|c| c.id == client).map(|c| c.text.clone());
        if let Some(tx) = sender {
            self.deliver(client, &tx, text);
        }
    }

    fn broadcast(&self, msg: &ServerMessage, profile: Option<Bytes>) {
        let text = msg.to_json();
        let targets: Vec<_> = self
            .clients
            .lock()
            .unwrap()
            .iter()
            .map(|c| (c.id, c.text.clone(), c.profile.clone()))
            .collect();
        for (id, tx, prof) in targets {
            if self.deliver(id, &tx, text.clone()) {
                if let Some(p) = &profile {
                    prof.send_replace(Some(p.clone()));
                }
            }
        }
    }

    /// Queue a text message; false if the client is gone or was dropped.
    fn deliver(&self, id: u64, tx: &mpsc::Sender<String>, text: String) -> bool {
        if self.realtime {
            match tx.try_send(text) {
                Ok(()) => true,
                Err(mpsc::error::TrySendError::Full(_)) => {
                    log::warn!("client {id} is not keeping up; disconnecting");
                    self.remove(id);
                    false
                }
                Err(mpsc::error::TrySendError::Closed(_)) => false,
            }
        } else {
            tx.blocking_send(text).is_ok()
        }
    }

    fn remove(&self, id: u64) {
        let mut clients = self.clients.lock().unwrap();
        if let Some(pos) = clients.iter().position(|c| c.id == id) {
            clients.remove(pos).kick.notify_one();
        }
    }
}

pub struct ServerHandle {
    pub local_addr: SocketAddr,
    shared: Arc<Shared>,
    stop_http: Option<oneshot::Sender<()>>,
    http: tokio::task::JoinHandle<Result<(), std::io::Error>>,
    pipeline: Option<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    /// Stop the pipeline, disconnect clients and wait for both to finish.
    pub async fn shutdown(mut self) -> Result<(), ServeError> {
        let _ = self.shared.commands.send(Inbound::Shutdown);
        for c in self.shared.clients.lock().unwrap().drain(..) {
            c.kick.notify_one();
        }
        if let Some(tx) = self.stop_http.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.pipeline.take() {
            tokio::task::spawn_blocking(move || thread.join()).await.ok();
        }
        match tokio::time::timeout(Duration::from_secs(5), &mut self.http).await {
            Ok(joined) => joined.map_err(std::io::Error::other)??,
            Err(_) => self.http.abort(),
        }
        Ok(())
    }
}

/// Bind `addr` and start serving. Must be called inside a tokio runtime.
pub async fn spawn(cfg: SystemConfig, addr: &str) -> Result<ServerHandle, ServeError> {
    let pipeline = Pipeline::new(&cfg)?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr: addr.to_string(), source })?;
    let local_addr = listener.local_addr()?;
    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let shared = Arc::new(Shared {
        clients: Mutex::new(Vec::new()),
        commands: cmd_tx,
        hello: Mutex::new(hello(&cfg, &pipeline)),
        latest_profile: Mutex::new(None),
        next_client: AtomicU64::new(0),
        realtime: cfg.realtime,
    });
    let thread_shared = shared.clone();
    let thread_cfg = cfg.clone();
    let pipeline_thread = std::thread::Builder::new()
        .name("pri-loop".into())
        .spawn(move || pri_loop(thread_cfg, pipeline, cmd_rx, thread_shared))?;
    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/profile", get(latest_profile))
        .route("/health", get(|| async { "ok" }))
        .with_state(shared.clone());
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let http = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop_rx.await;
            })
            .await
    });
    log::info!("serving on ws://{local_addr}/ws");
    Ok(ServerHandle { local_addr, shared, stop_http: Some(stop_tx), http, pipeline: Some(pipeline_thread) })
}

/// Serve until Ctrl-C.
pub async fn run_serve(cfg: SystemConfig, addr: &str) -> Result<(), ServeError> {
    let handle = spawn(cfg, addr).await?;
    tokio::signal::ctrl_c().await?;
    log::info!("shutting down");
    handle.shutdown().await
}

fn hello(cfg: &SystemConfig, p: &Pipeline) -> Hello {
    Hello {
        schema_version: SCHEMA_VERSION,
        n_lags: cfg.engine.n_lags(),
        range_bin_m: cfg.range_bin_m(),
        profile_stride: cfg.profile_stride,
        prf_hz: cfg.prf_hz,
        pack_size: p.processor().pack_size(),
        axis_mode: p.processor().axis(),
        selected_bin: p.processor().selected_bin(),
        running: p.running(),
        next_pulse: p.next_pulse(),
    }
}

fn sleep_until(deadline: Instant) {
    let now = Instant::now();
    if deadline > now {
        std::thread::sleep(deadline - now);
    }
}

fn micros(d: Duration) -> u64 {
    d.as_micros() as u64
}

fn pri_loop(cfg: SystemConfig, mut pipeline: Pipeline, mut commands: mpsc::UnboundedReceiver<Inbound>, shared: Arc<Shared>) {
    let pri = Duration::from_secs_f64(cfg.pri_s());
    let origin = Instant::now();
    // Ticks are absolute, `t0 + n * PRI`; t0 moves only when a stopped stream restarts.
    let mut t0 = origin;
    let mut tick: u32 = 0;
    let apply = |pipeline: &mut Pipeline, inbound: Inbound| -> bool {
        match inbound {
            Inbound::Shutdown => false,
            Inbound::Command { client, msg } => {
                let reply = match pipeline.apply(&msg.command) {
                    Ok(()) => ServerMessage::Ack {
                        id: msg.id,
                        cmd: msg.command.name().into(),
                        pulse_index: pipeline.next_pulse(),
                    },
                    Err(e) => ServerMessage::error(msg.id, e),
                };
                *shared.hello.lock().unwrap() = hello(&cfg, pipeline);
                shared.reply(client, reply);
                true
            }
        }
    };
    loop {
        loop {
            match commands.try_recv() {
                Ok(inbound) => {
                    if !apply(&mut pipeline, inbound) {
                        return;
                    }
                }
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }
        if !pipeline.running() {
            match commands.blocking_recv() {
                Some(inbound) => {
                    if !apply(&mut pipeline, inbound) {
                        return;
                    }
                }
                None => return,
            }
            if pipeline.running() {
                t0 = Instant::now();
                tick = 0;
            }
            continue;
        }
        let scheduled = if cfg.realtime {
            let deadline = t0 + pri * tick;
            tick += 1;
            sleep_until(deadline);
            deadline
        } else {
            Instant::now()
        };
        let started = Instant::now();
        match pipeline.step() {
            Ok((_, result)) => {
                let ts = Timestamps {
                    scheduled_us: micros(scheduled - origin),
                    started_us: micros(started - origin),
                    emitted_us: micros(origin.elapsed()),
                };
                let (frame, profile) = result.frame(cfg.profile_stride, ts);
                let full = DecimatedProfile::new(frame.pulse_index, &result.profile.magnitude, 1);
                *shared.latest_profile.lock().unwrap() = Some(Bytes::from(full.encode()));
                shared.broadcast(&ServerMessage::Frame(Box::new(frame)), Some(Bytes::from(profile.encode())));
            }
            Err(e) => {
                log::error!("pulse {}: {e}; stopping", pipeline.next_pulse());
                pipeline.halt();
                let err = CommandError::new(ErrorCode::Internal, format!("pulse {}: {e}", pipeline.next_pulse()));
                shared.broadcast(&ServerMessage::error(None, err), None);
            }
        }
        if pipeline.next_pulse().is_multiple_of(16) || !pipeline.running() {
            *shared.hello.lock().unwrap() = hello(&cfg, &pipeline);
        }
    }
}

async fn latest_profile(State(shared): State<Arc<Shared>>) -> Response {
    match shared.latest_profile.lock().unwrap().clone() {
        Some(bytes) => ([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response(),
        None => (StatusCode::NO_CONTENT, "").into_response(),
    }
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> Response {
    ws.on_upgrade(move |socket| client_session(socket, shared))
}

async fn client_session(socket: WebSocket, shared: Arc<Shared>) {
    let (mut sink, mut stream) = socket.split();
    let id = shared.next_client.fetch_add(1, Ordering::Relaxed);
    let (text_tx, mut text_rx) = mpsc::channel::<String>(CLIENT_QUEUE);
    let (profile_tx, mut profile_rx) = watch::channel::<Option<Bytes>>(None);
    let kick = Arc::new(Notify::new());
    let hello = shared.hello.lock().unwrap().clone();
    let admitted = {
        let mut clients = shared.clients.lock().unwrap();
        if clients.len() < MAX_CLIENTS {
            clients.push(Client { id, text: text_tx.clone(), profile: profile_tx, kick: kick.clone() });
            true
        } else {
            false
        }
    };
    if !admitted {
        let err = CommandError::new(ErrorCode::TooManyClients, format!("at most {MAX_CLIENTS} clients"));
        let _ = sink.send(Message::Text(ServerMessage::error(None, err).to_json().into())).await;
        let _ = sink.send(Message::Close(None)).await;
        return;
    }
    log::info!("client {id} connected");
    if sink.send(Message::Text(ServerMessage::Hello(hello).to_json().into())).await.is_err() {
        shared.remove(id);
        return;
    }
    let writer_kick = kick.clone();
    let mut writer = tokio::spawn(async move {
        loop {
            tokio::select! {
                biased;
                _ = writer_kick.notified() => break,
                msg = text_rx.recv() => match msg {
                    Some(text) => {
                        if sink.send(Message::Text(text.into())).await.is_err() {
                            break;
                        }
                    }
                    None => break,
                },
                changed = profile_rx.changed() => {
                    if changed.is_err() {
                        break;
                    }
                    let latest = profile_rx.borrow_and_update().clone();
                    if let Some(bytes) = latest {
                        if sink.send(Message::Binary(bytes)).await.is_err() {
                            break;
                        }
                    }
                }
            }
        }
        let _ = sink.send(Message::Close(None)).await;
    });
    let mut writer_done = false;
    loop {
        let msg = tokio::select! {
            msg = stream.next() => msg,
            _ = &mut writer => {
                writer_done = true;
                break;
            }
        };
        let Some(Ok(msg)) = msg else { break };
        match msg {
            Message::Text(text) => match ControlMessage::parse(text.as_str()) {
                Ok(msg) => {
                    if shared.commands.send(Inbound::Command { client: id, msg }).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = text_tx.send(ServerMessage::error(None, e).to_json()).await;
                }
            },
            Message::Binary(_) => {
                let e = CommandError::new(ErrorCode::Malformed, "commands are JSON text messages");
                let _ = text_tx.send(ServerMessage::error(None, e).to_json()).await;
            }
            Message::Close(_) => break,
            _ => {}
        }
    }
    shared.remove(id);
    kick.notify_one();
    if !writer_done {
        let _ = writer.await;
    }
    log::info!("client {id} disconnected");
}
