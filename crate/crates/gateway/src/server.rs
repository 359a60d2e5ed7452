//! Live operator service.
//!
//! A single task owns the [`CatchLoop`] and ticks it at the configured
//! rate. Connections push inputs into a bounded queue; the loop takes at
//! most one per tick, answers it with `ack` or `err`, logs the step and
//! fans telemetry out through a broadcast channel. Clients only ever see
//! serialized snapshots taken between ticks.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use base64::Engine;
use futures::{SinkExt, StreamExt};
use tokio::sync::{broadcast, mpsc, watch};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;

use huegrip_core::framegen::byte_hue_to_rgb;
use huegrip_core::gesturenet::GestureLabel;
use huegrip_core::session::{SessionSummary, StepRecord};
use huegrip_core::teleop::{CatchLoop, SharedClassifier};

use crate::config::GatewayConfig;
use crate::error::{GatewayError, Result};
use crate::protocol::{ClientMessage, ErrorCode, ServerMessage, Telemetry};
use crate::store::{SessionStore, SessionWriter};

type Outbox = mpsc::UnboundedSender<Arc<str>>;

struct Inbound {
    msg: ClientMessage,
    reply: Outbox,
}

#[derive(Clone)]
struct AppState {
    inputs: mpsc::Sender<Inbound>,
    telemetry: broadcast::Sender<Arc<str>>,
    events: mpsc::UnboundedSender<String>,
    hello: Arc<str>,
    next_client: Arc<AtomicU64>,
}

fn send(out: &Outbox, msg: &ServerMessage) {
    // A closed outbox means the client has gone; the loop carries on.
    let _ = out.send(msg.to_json().into());
}

fn every(tick_rate: f64, rate: f64) -> u64 {
    ((tick_rate / rate).round() as u64).max(1)
}

struct LoopOwner {
    lp: CatchLoop,
    writer: SessionWriter,
    telemetry: broadcast::Sender<Arc<str>>,
    tick_rate: f64,
    stream_every: u64,
    /// Frames ride on every `frame_stride`-th telemetry message.
    frame_stride: u64,
    last_gesture: Option<GestureLabel>,
}

impl LoopOwner {
    fn set_rates(&mut self, stream_rate: f64, frame_rate: f64) {
        self.stream_every = every(self.tick_rate, stream_rate);
        self.frame_stride = every(stream_rate, frame_rate);
    }

    fn stream_rate(&self) -> f64 {
        self.tick_rate / self.stream_every as f64
    }

    fn config_update(
        &mut self,
        safety_limit: Option<f64>,
        stream_rate: Option<f64>,
        frame_rate: Option<f64>,
    ) -> std::result::Result<(), String> {
        let positive = |v: Option<f64>, name: &str| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => Err(format!("{name} must be > 0")),
            _ => Ok(()),
        };
        positive(stream_rate, "stream_rate_hz")?;
        positive(frame_rate, "frame_rate_hz")?;
        if let Some(limit) = safety_limit {
            self.lp.set_safety_limit(limit).map_err(|e| e.to_string())?;
        }
        let stream = stream_rate.unwrap_or_else(|| self.stream_rate());
        let frame = frame_rate.unwrap_or(stream / self.frame_stride as f64);
        self.set_rates(stream, frame);
        Ok(())
    }

    fn tick(&mut self, inbound: Option<Inbound>, events: Vec<String>) -> Result<()> {
        let step = self.lp.step_index();
        let mut input = None;
        let mut pending = None;
        if let Some(inb) = inbound {
            let id = inb.msg.id();
            match inb.msg {
                ClientMessage::ConfigUpdate {
                    safety_limit,
                    stream_rate_hz,
                    frame_rate_hz,
                    ..
                } => {
                    let reply = match self.config_update(safety_limit, stream_rate_hz, frame_rate_hz) {
                        Ok(()) => ServerMessage::Ack {
                            id,
                            input: "config_update".into(),
                            step,
                            gesture: None,
                            command: None,
                        },
                        Err(e) => ServerMessage::err(id, ErrorCode::InvalidInput, e),
                    };
                    send(&inb.reply, &reply);
                }
                ref msg => {
                    let op = msg.operator_input().expect("operator message");
                    match self.lp.classify(&op) {
                        Ok(_) => {
                            input = Some(op);
                            pending = Some(inb);
                        }
                        Err(e) => send(&inb.reply, &ServerMessage::err(id, ErrorCode::InvalidInput, e.to_string())),
                    }
                }
            }
        }

        let phase_before = self.lp.state().phase;
        let mut rec = self.lp.step(input)?;
        rec.events.extend(events);
        self.writer.append(&rec)?;

        if let Some(inb) = pending {
            let id = inb.msg.id();
            let reply = match &rec.rejected {
                Some(reason) => ServerMessage::err(
                    id,
                    ErrorCode::Rejected,
                    format!("{reason}: {:?} in {phase_before:?}", rec.gesture.expect("classified")),
                ),
                None => ServerMessage::Ack {
                    id,
                    input: inb.msg.kind().into(),
                    step: rec.step,
                    gesture: rec.gesture,
                    command: Some(rec.command),
                },
            };
            send(&inb.reply, &reply);
        }
        if rec.gesture.is_some() {
            self.last_gesture = rec.gesture;
        }
        if rec.step.is_multiple_of(self.stream_every) {
            self.broadcast(&rec)?;
        }
        Ok(())
    }

    fn broadcast(&self, rec: &StepRecord) -> Result<()> {
        let with_frame = (rec.step / self.stream_every).is_multiple_of(self.frame_stride);
        let frame_b64 = if with_frame {
            let png = self.lp.render_frame()?.to_png()?;
            Some(base64::engine::general_purpose::STANDARD.encode(png))
        } else {
            None
        };
        let state = self.lp.state();
        let latched = state.last_force_estimate;
        let msg = ServerMessage::Telemetry(Telemetry {
            step: rec.step,
            t: rec.t,
            phase: rec.phase,
            hue: rec.hue,
            led_rgb: byte_hue_to_rgb(rec.hue, 255, 255),
            gesture: self.last_gesture,
            command: rec.command,
            force_estimate: latched.is_usable().then_some(latched),
            safety_limit: state.safety_limit,
            arm_pose: rec.arm_pose,
            pressures: rec.pressures,
            frame_b64,
        });
        // No subscribers is not an error.
        let _ = self.telemetry.send(msg.to_json().into());
        Ok(())
    }
}

async fn run_loop(
    mut owner: LoopOwner,
    mut inputs: mpsc::Receiver<Inbound>,
    mut events: mpsc::UnboundedReceiver<String>,
    mut shutdown: watch::Receiver<bool>,
    max_ticks: Option<u64>,
) -> Result<SessionSummary> {
    let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / owner.tick_rate));
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut failure = None;
    while max_ticks.is_none_or(|m| owner.lp.step_index() < m) {
        tokio::select! {
            biased;
            _ = shutdown.changed() => break,
            _ = interval.tick() => {}
        }
        let mut pending_events = Vec::new();
        while let Ok(e) = events.try_recv() {
            pending_events.push(e);
        }
        if let Err(e) = owner.tick(inputs.try_recv().ok(), pending_events) {
            log::error!("control loop stopped: {e}");
            failure = Some(e);
            break;
        }
    }
    inputs.close();
    while let Ok(inb) = inputs.try_recv() {
        send(&inb.reply, &ServerMessage::err(inb.msg.id(), ErrorCode::Unavailable, "control loop stopped"));
    }
    let summary = owner.writer.finish()?;
    match failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, app))
}

async fn client(socket: WebSocket, app: AppState) {
    let n = app.next_client.fetch_add(1, Ordering::Relaxed);
    log::info!("client {n} connected");
    let _ = app.events.send(format!("client {n} connected"));
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Arc<str>>();
    let mut telemetry = app.telemetry.subscribe();
    let _ = out_tx.send(app.hello.clone());

    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                m = out_rx.recv() => match m {
                    Some(m) => m,
                    None => break,
                },
                t = telemetry.recv() => match t {
                    Ok(t) => t,
                    Err(broadcast::error::RecvError::Lagged(k)) => {
                        log::warn!("client {n} lagged; skipped {k} telemetry messages");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(text.as_ref().into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    while let Some(msg) = stream.next().await {
        let text = match msg {
            Ok(Message::Text(t)) => t,
            Ok(Message::Binary(_)) => {
                send(&out_tx, &ServerMessage::err(None, ErrorCode::Malformed, "binary frames are not supported"));
                continue;
            }
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        let msg = match serde_json::from_str::<ClientMessage>(text.as_str()) {
            Ok(m) => m,
            Err(e) => {
                send(&out_tx, &ServerMessage::err(None, ErrorCode::Malformed, e.to_string()));
                continue;
            }
        };
        let id = msg.id();
        let inbound = Inbound {
            msg,
            reply: out_tx.clone(),
        };
        match app.inputs.try_send(inbound) {
            Ok(()) => {}
            Err(mpsc::error::TrySendError::Full(_)) => {
                send(&out_tx, &ServerMessage::err(id, ErrorCode::Busy, "input queue full"))
            }
            Err(mpsc::error::TrySendError::Closed(_)) => {
                send(&out_tx, &ServerMessage::err(id, ErrorCode::Unavailable, "control loop stopped"))
            }
        }
    }
    log::info!("client {n} disconnected");
    let _ = app.events.send(format!("client {n} disconnected"));
    drop(out_tx);
    // Pending replies still go out; the writer ends once the outbox drains.
    let _ = tokio::time::timeout(Duration::from_secs(1), writer).await;
}

pub struct ServerHandle {
    addr: SocketAddr,
    session_id: String,
    shutdown: watch::Sender<bool>,
    loop_task: JoinHandle<Result<SessionSummary>>,
    http_task: JoinHandle<()>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    /// Waits for the loop to end on its own (tick budget or failure).
    pub async fn wait(self) -> Result<SessionSummary> {
        let result = self.loop_task.await.map_err(|e| GatewayError::Io(std::io::Error::other(e)))?;
        self.http_task.abort();
        result
    }

    pub async fn shutdown(self) -> Result<SessionSummary> {
        let _ = self.shutdown.send(true);
        self.wait().await
    }
}

/// Binds the listener and starts the loop. With `max_ticks` the loop stops
/// by itself after that many ticks.
pub async fn start(
    config: GatewayConfig,
    classifier: SharedClassifier,
    store: SessionStore,
    max_ticks: Option<u64>,
) -> Result<ServerHandle> {
    config.validate()?;
    let listener = tokio::net::TcpListener::bind(&config.server.listen)
        .await
        .map_err(|source| GatewayError::Bind {
            addr: config.server.listen.clone(),
            source,
        })?;
    let addr = listener.local_addr()?;
    let lp = CatchLoop::new(config.scenario.clone(), Some(classifier))?;
    let writer = store.create(&config.scenario)?;
    let session_id = writer.id().to_string();
    let tick_rate = config.tick_rate_hz();

    let (telemetry, _) = broadcast::channel(256);
    let mut owner = LoopOwner {
        lp,
        writer,
        telemetry: telemetry.clone(),
        tick_rate,
        stream_every: 1,
        frame_stride: 1,
        last_gesture: None,
    };
    owner.set_rates(config.server.stream_rate_hz, config.server.frame_rate_hz);
    let hello = ServerMessage::Session {
        session_id: session_id.clone(),
        tick_rate_hz: tick_rate,
        stream_rate_hz: owner.stream_rate(),
        frame_rate_hz: owner.stream_rate() / owner.frame_stride as f64,
    };

    let (inputs_tx, inputs_rx) = mpsc::channel(config.server.input_queue);
    let (events_tx, events_rx) = mpsc::unbounded_channel();
    let (shutdown_tx, shutdown_rx) = watch::channel(false);
    let app = AppState {
        inputs: inputs_tx,
        telemetry,
        events: events_tx,
        hello: hello.to_json().into(),
        next_client: Arc::new(AtomicU64::new(1)),
    };
    let router = Router::new()
        .route("/ws", get(ws_handler))
        .route("/health", get(|| async { "ok" }))
        .with_state(app);
    let http_task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router).await {
            log::error!("http server stopped: {e}");
        }
    });
    let loop_task = tokio::spawn(run_loop(owner, inputs_rx, events_rx, shutdown_rx, max_ticks));
    log::info!("serving session {session_id} on ws://{addr}/ws at {tick_rate} Hz");
    Ok(ServerHandle {
        addr,
        session_id,
        shutdown: shutdown_tx,
        loop_task,
        http_task,
    })
}
