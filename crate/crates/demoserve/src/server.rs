//! WebSocket front end and the fixed-rate tick loop.
//!
//! The connection task and the tick loop share only the latest key state
//! (one atomic byte) and an event channel. The session itself lives in the
//! tick loop.

use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU8, Ordering};
use std::sync::Arc;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use log::{info, warn};
use thiserror::Error;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinSet;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::protocol::CloseFrame;
use tokio_tungstenite::tungstenite::Message;

use demomix_core::env2d::{EnvError, WorldConfig};
use demomix_core::keys::KeySet;
use demomix_core::replay::FormatError;

use crate::protocol::{ClientMessage, ControlCmd};
use crate::session::Session;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8400";
pub const DEFAULT_TICK_RATE: f64 = 20.0;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid serve config: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub env: WorldConfig,
    pub seed: u64,
    pub out: PathBuf,
    /// Experiences to record before the session stops by itself.
    pub target: usize,
    /// Ticks per second.
    pub tick_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeSummary {
    pub recorded: usize,
    pub episodes: u64,
    pub out: PathBuf,
}

#[derive(Debug)]
enum Event {
    Connected,
    Disconnected,
    Control(ControlCmd),
}

#[derive(Clone)]
struct Shared {
    keys: Arc<AtomicU8>,
    active: Arc<AtomicBool>,
    events: mpsc::UnboundedSender<Event>,
    frames: broadcast::Sender<String>,
}

pub struct DemoServer {
    listener: TcpListener,
    cfg: ServeConfig,
}

impl DemoServer {
    pub async fn bind(addr: &str, cfg: ServeConfig) -> Result<Self, ServeError> {
        if !(cfg.tick_rate.is_finite() && cfg.tick_rate > 0.0) {
            return Err(ServeError::Config(format!("tick rate must be > 0, got {}", cfg.tick_rate)));
        }
        if cfg.target == 0 {
            return Err(ServeError::Config("target must be >= 1".into()));
        }
        cfg.env.validate()?;
        let listener =
            TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr: addr.to_string(), source })?;
        Ok(Self { listener, cfg })
    }

    pub fn local_addr(&self) -> std::io::Result<std::net::SocketAddr> {
        self.listener.local_addr()
    }

    /// Records until the target count, a `finish` control, or `shutdown`
    /// resolves, then writes the buffer atomically to `cfg.out`.
    pub async fn run(self, shutdown: impl Future<Output = ()>) -> Result<ServeSummary, ServeError> {
        let Self { listener, cfg } = self;
        let mut session = Session::new(cfg.env, cfg.seed, cfg.target)?;
        let (events_tx, mut events) = mpsc::unbounded_channel();
        let (frames, _) = broadcast::channel(64);
        let shared = Shared {
            keys: Arc::new(AtomicU8::new(0)),
            active: Arc::new(AtomicBool::new(false)),
            events: events_tx,
            frames,
        };

        let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / cfg.tick_rate));
        ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
        let mut connections = JoinSet::new();
        let mut piloted = false;
        tokio::pin!(shutdown);

        info!("recording to {} (target {})", cfg.out.display(), cfg.target);
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        connections.spawn(handle_connection(stream, peer.to_string(), shared.clone()));
                    }
                    Err(e) => warn!("accept failed: {e}"),
                },
                Some(event) = events.recv() => match event {
                    Event::Connected => {
                        piloted = true;
                        let _ = shared.frames.send(session.snapshot().to_json());
                    }
                    Event::Disconnected => piloted = false,
                    Event::Control(ControlCmd::Reset) => {
                        session.reset_layout()?;
                        let _ = shared.frames.send(session.snapshot().to_json());
                    }
                    Event::Control(ControlCmd::Finish) => break,
                },
                _ = ticker.tick() => {
                    if !piloted {
                        continue;
                    }
                    let keys = KeySet::from_bits(shared.keys.load(Ordering::Acquire));
                    let frame = session.tick(keys)?;
                    let _ = shared.frames.send(frame.to_json());
                    if session.target_reached() {
                        break;
                    }
                }
            }
        }
        connections.abort_all();
        session.flush(&cfg.out)?;
        info!("wrote {} experiences over {} episodes to {}", session.recorded(), session.episode(), cfg.out.display());
        Ok(ServeSummary { recorded: session.recorded(), episodes: session.episode(), out: cfg.out })
    }
}

async fn handle_connection(stream: TcpStream, peer: String, shared: Shared) {
    let mut ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            warn!("{peer}: websocket handshake failed: {e}");
            return;
        }
    };
    if shared.active.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).is_err() {
        let reason = CloseFrame { code: CloseCode::Policy, reason: "another pilot is already connected".into() };
        let _ = ws.close(Some(reason)).await;
        return;
    }
    info!("{peer}: pilot connected");
    let mut frames = shared.frames.subscribe();
    shared.keys.store(0, Ordering::Release);
    let _ = shared.events.send(Event::Connected);

    let (mut sink, mut source) = ws.split();
    loop {
        tokio::select! {
            incoming = source.next() => match incoming {
                Some(Ok(Message::Text(text))) => match ClientMessage::parse(text.as_str()) {
                    Ok(ClientMessage::Keys { up, down, left, right }) => {
                        shared.keys.store(KeySet { up, down, left, right }.to_bits(), Ordering::Release);
                    }
                    Ok(ClientMessage::Control { cmd }) => {
                        let _ = shared.events.send(Event::Control(cmd));
                    }
                    Err(e) => warn!("{peer}: rejected message: {e}"),
                },
                Some(Ok(Message::Binary(_))) => warn!("{peer}: rejected binary message"),
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => {}
            },
            frame = frames.recv() => match frame {
                Ok(text) => {
                    if sink.send(Message::Text(text.into())).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => warn!("{peer}: dropped {n} frames"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
    shared.keys.store(0, Ordering::Release);
    let _ = shared.events.send(Event::Disconnected);
    shared.active.store(false, Ordering::Release);
    info!("{peer}: pilot disconnected, recording paused");
}

/// Binds, then records until Ctrl-C or the session ends on its own.
pub fn serve_blocking(addr: &str, cfg: ServeConfig) -> Result<ServeSummary, ServeError> {
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    runtime.block_on(async {
        let server = DemoServer::bind(addr, cfg).await?;
        info!("listening on ws://{}", server.local_addr()?);
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
