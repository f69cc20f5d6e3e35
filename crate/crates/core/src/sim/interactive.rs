//! Real-time steering: a TCP server speaking the newline-JSON UI channel.
//!
//! The sim loop owns all state. Each client gets a reader thread that feeds
//! a bounded event queue and a writer thread that drains a small snapshot
//! buffer; snapshots a slow client cannot keep up with are dropped.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::pipeline::Pipeline;
use super::scenario::Scenario;
use super::trace::ScenarioTrace;
use super::SimError;
use crate::geometry::HandCentroid;
use crate::intent::TranscriptInbox;
use crate::protocol::{ClientMessage, ServerMessage, SnapshotMessage};

pub const EVENT_QUEUE_CAPACITY: usize = 64;
const SNAPSHOT_BUFFER: usize = 4;
const FRAME_PERIOD: Duration = Duration::from_millis(100);
const POLL: Duration = Duration::from_millis(20);

/// Interactive pipeline state driven by UI messages rather than a script.
#[derive(Debug, Clone)]
pub struct InteractiveSession {
    name: String,
    initial_hand: HandCentroid,
    pipeline: Pipeline,
    hand: HandCentroid,
    inbox: TranscriptInbox,
    trace: ScenarioTrace,
    commands: Vec<crate::intent::Command>,
}

impl InteractiveSession {
    pub fn new(s: &Scenario) -> Result<Self, SimError> {
        let pipeline = Pipeline::new(s)?;
        let trace = ScenarioTrace {
            header: pipeline.header(&s.name),
            frames: Vec::new(),
            telemetry: Vec::new(),
            outcome: None,
        };
        let hand = s.initial_hand();
        Ok(Self {
            name: s.name.clone(),
            initial_hand: hand,
            pipeline,
            hand,
            inbox: TranscriptInbox::new(),
            trace,
            commands: Vec::new(),
        })
    }

    pub fn hand(&self) -> HandCentroid {
        self.hand
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn apply(&mut self, msg: ClientMessage) {
        match msg {
            ClientMessage::MoveHand { du, dv, dd } => {
                if !(du.is_finite() && dv.is_finite() && dd.is_finite()) {
                    return;
                }
                self.hand = HandCentroid::new(self.hand.u + du, self.hand.v + dv, (self.hand.d + dd).max(1.0));
            }
            ClientMessage::Transcript { text } => self.inbox.push(text),
            ClientMessage::Reset => {
                self.pipeline.reset();
                self.hand = self.initial_hand;
                self.inbox = TranscriptInbox::new();
                self.trace.frames.clear();
                self.trace.telemetry.clear();
                self.commands.clear();
            }
        }
    }

    /// Advances one frame and returns the snapshot to publish.
    pub fn step(&mut self) -> SnapshotMessage {
        let transcript = self.inbox.drain_joined();
        let out = self.pipeline.step(self.hand, transcript);
        self.hand = out.record.hand;
        self.commands.extend(out.record.command);
        self.trace.frames.push(out.record);
        self.trace.telemetry.extend(out.telemetry);
        self.pipeline.snapshot(self.hand)
    }

    /// The trace since the last reset, closed with an outcome.
    pub fn finish(mut self) -> ScenarioTrace {
        self.trace.header.scenario = self.name;
        self.trace.outcome = Some(self.pipeline.outcome(self.commands));
        self.trace
    }
}

pub struct InteractiveServer {
    listener: TcpListener,
    port: u16,
}

impl InteractiveServer {
    pub fn bind(host: &str, port: u16) -> Result<Self, SimError> {
        let listener = TcpListener::bind((host, port)).map_err(|e| SimError::PortUnavailable {
            port,
            message: e.to_string(),
        })?;
        Ok(Self { listener, port })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    /// Runs the real-time loop until `shutdown` is set and returns the trace.
    pub fn run(self, s: &Scenario, shutdown: Arc<AtomicBool>) -> Result<ScenarioTrace, SimError> {
        let mut session = InteractiveSession::new(s)?;
        self.listener.set_nonblocking(true).map_err(|e| SimError::PortUnavailable {
            port: self.port,
            message: e.to_string(),
        })?;
        let (event_tx, event_rx) = mpsc::sync_channel::<ClientMessage>(EVENT_QUEUE_CAPACITY);
        let (client_tx, client_rx) = mpsc::channel::<SyncSender<Arc<str>>>();
        let acceptor = {
            let shutdown = shutdown.clone();
            let listener = self.listener;
            thread::spawn(move || accept_loop(listener, event_tx, client_tx, shutdown))
        };

        let mut clients: Vec<SyncSender<Arc<str>>> = Vec::new();
        let mut next = Instant::now();
        while !shutdown.load(Ordering::SeqCst) {
            clients.extend(client_rx.try_iter());
            for msg in event_rx.try_iter() {
                session.apply(msg);
            }
            let line: Arc<str> = ServerMessage::Snapshot(session.step()).to_line().into();
            clients.retain(|c| match c.try_send(line.clone()) {
                Ok(()) | Err(TrySendError::Full(_)) => true,
                Err(TrySendError::Disconnected(_)) => false,
            });
            next += FRAME_PERIOD;
            let now = Instant::now();
            if next > now {
                thread::sleep(next - now);
            } else {
                next = now;
            }
        }
        drop(clients);
        let _ = acceptor.join();
        Ok(session.finish())
    }
}

fn accept_loop(
    listener: TcpListener,
    events: SyncSender<ClientMessage>,
    clients: mpsc::Sender<SyncSender<Arc<str>>>,
    shutdown: Arc<AtomicBool>,
) {
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("ui client connected from {peer}");
                if stream.set_nonblocking(false).is_err() {
                    continue;
                }
                let Ok(write_half) = stream.try_clone() else {
                    continue;
                };
                let (tx, rx) = mpsc::sync_channel(SNAPSHOT_BUFFER);
                if clients.send(tx).is_err() {
                    return;
                }
                thread::spawn(move || write_loop(write_half, rx));
                let events = events.clone();
                let shutdown = shutdown.clone();
                thread::spawn(move || read_loop(stream, events, shutdown));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn read_loop(stream: TcpStream, events: SyncSender<ClientMessage>, shutdown: Arc<AtomicBool>) {
    let _ = stream.set_read_timeout(Some(POLL * 5));
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    while !shutdown.load(Ordering::SeqCst) {
        match reader.read_line(&mut line) {
            Ok(0) => return,
            Ok(_) => {
                if line.ends_with('\n') {
                    match ClientMessage::parse_line(&line) {
                        Ok(msg) => {
                            if let Err(TrySendError::Full(_)) = events.try_send(msg) {
                                log::warn!("event queue full, dropping client message");
                            }
                        }
                        Err(e) => log::warn!("bad client message: {e}"),
                    }
                    line.clear();
                }
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
    }
}

fn write_loop(mut stream: TcpStream, rx: Receiver<Arc<str>>) {
    for line in rx {
        if stream.write_all(line.as_bytes()).is_err() {
            return;
        }
    }
}

/// Binds `127.0.0.1:port` and serves until `shutdown` is set.
pub fn serve_interactive(s: &Scenario, port: u16, shutdown: Arc<AtomicBool>) -> Result<ScenarioTrace, SimError> {
    InteractiveServer::bind("127.0.0.1", port)?.run(s, shutdown)
}
