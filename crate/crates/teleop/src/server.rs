//! Websocket and HTTP front end. A fixed-rate loop owns the [`Bridge`]; each
//! tick it takes whatever arrived in the single-slot mailbox and broadcasts
//! the resulting frame to every connected client.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, oneshot};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tracing::{debug, info, warn};

use safer_core::world::WorldModel;
use safer_harness::{EpisodeResult, MethodId};

use crate::bridge::{Bridge, OperatorCommand, TelemetryFrame, TickInput};
use crate::tape::Tape;
use crate::TeleopError;

#[derive(Debug, Clone, Copy)]
pub struct TeleopConfig {
    pub rate_hz: f64,
    /// Frames a slow client may fall behind before it starts missing them.
    pub frame_buffer: usize,
}

impl Default for TeleopConfig {
    fn default() -> Self {
        Self {
            rate_hz: 10.0,
            frame_buffer: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Cmd(OperatorCommand),
    SetMethod { method: MethodId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(Box<TelemetryFrame>),
    Error { msg: String },
}

struct Shared {
    inbox: Mutex<TickInput>,
    frames: broadcast::Sender<Arc<str>>,
    /// World file with actors at their current positions.
    world: Mutex<WorldModel>,
    has_policy: bool,
}

impl Shared {
    fn accept(&self, text: &str) -> Result<(), String> {
        let msg: ClientMessage = serde_json::from_str(text).map_err(|e| format!("bad message: {e}"))?;
        let mut inbox = self.inbox.lock().expect("inbox poisoned");
        match msg {
            ClientMessage::Cmd(c) => inbox.command = Some(c.sanitized().map_err(|e| e.to_string())?),
            ClientMessage::SetMethod { method } => {
                if method.needs_policy() && !self.has_policy {
                    return Err(format!("method {method} needs a policy checkpoint"));
                }
                inbox.method = Some(method);
            }
        }
        Ok(())
    }
}

pub struct TeleopHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    ticker: JoinHandle<Result<(EpisodeResult, Tape), TeleopError>>,
    http: JoinHandle<()>,
}

impl TeleopHandle {
    /// Stops ticking and returns the session result and tape.
    pub async fn shutdown(mut self) -> Result<(EpisodeResult, Tape), TeleopError> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        let out = self.ticker.await.map_err(|e| TeleopError::Join(e.to_string()))?;
        self.http.abort();
        out
    }
}

fn encode(msg: &ServerMessage) -> Arc<str> {
    serde_json::to_string(msg).expect("server messages serialize").into()
}

pub async fn start_teleop(listener: TcpListener, bridge: Bridge, config: TeleopConfig) -> Result<TeleopHandle, TeleopError> {
    if !(config.rate_hz.is_finite() && config.rate_hz > 0.0) {
        return Err(TeleopError::Config(format!("rate {} Hz must be positive", config.rate_hz)));
    }
    let addr = listener.local_addr()?;
    let (frames, _) = broadcast::channel(config.frame_buffer.max(1));
    let shared = Arc::new(Shared {
        inbox: Mutex::new(TickInput::default()),
        frames,
        world: Mutex::new(bridge.world().clone()),
        has_policy: bridge.has_policy(),
    });

    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/world", get(world))
        .with_state(shared.clone());
    let http = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            warn!("teleop http server stopped: {e}");
        }
    });

    let (stop_tx, stop_rx) = oneshot::channel();
    let ticker = tokio::spawn(tick_loop(bridge, shared, config.rate_hz, stop_rx));
    info!(%addr, rate_hz = config.rate_hz, "teleop bridge listening");
    Ok(TeleopHandle {
        addr,
        stop: Some(stop_tx),
        ticker,
        http,
    })
}

/// Runs until `shutdown` resolves.
pub async fn serve_teleop(
    addr: SocketAddr,
    bridge: Bridge,
    config: TeleopConfig,
    shutdown: impl std::future::Future<Output = ()>,
) -> Result<(EpisodeResult, Tape), TeleopError> {
    let handle = start_teleop(TcpListener::bind(addr).await?, bridge, config).await?;
    shutdown.await;
    handle.shutdown().await
}

async fn tick_loop(
    mut bridge: Bridge,
    shared: Arc<Shared>,
    rate_hz: f64,
    mut stop: oneshot::Receiver<()>,
) -> Result<(EpisodeResult, Tape), TeleopError> {
    let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / rate_hz));
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            _ = &mut stop => break,
            _ = interval.tick() => {}
        }
        let input = std::mem::take(&mut *shared.inbox.lock().expect("inbox poisoned"));
        let msg = match bridge.tick(input) {
            Ok(frame) => ServerMessage::Frame(Box::new(frame)),
            Err(e) => ServerMessage::Error { msg: e.to_string() },
        };
        shared.world.lock().expect("world poisoned").clone_from(bridge.world());
        let _ = shared.frames.send(encode(&msg));
    }
    Ok(bridge.finish())
}

async fn world(State(shared): State<Arc<Shared>>) -> Json<WorldModel> {
    Json(shared.world.lock().expect("world poisoned").clone())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(shared): State<Arc<Shared>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, shared))
}

async fn client(socket: WebSocket, shared: Arc<Shared>) {
    let (mut tx, mut rx) = socket.split();
    let mut frames = shared.frames.subscribe();
    loop {
        tokio::select! {
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    if let Err(msg) = shared.accept(text.as_str()) {
                        let reply = encode(&ServerMessage::Error { msg });
                        if tx.send(Message::Text(reply.as_ref().into())).await.is_err() {
                            break;
                        }
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            out = frames.recv() => match out {
                Ok(text) => {
                    if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => debug!(skipped = n, "slow teleop client"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
}
