//! Wire protocol: length-prefixed frames over a reliable byte stream.
//!
//! A frame is `length:u32le | msg_type:u8 | op_id:u64le | payload`, with
//! `length` counting payload bytes only. The message-type registry is
//! closed so transcripts can be validated mechanically. Transports are
//! either a TCP stream (with `TCP_NODELAY`, the protocol is round-trip
//! bound) or an in-memory pipe used by the in-process harness; both carry
//! the same bytes, so framing is exercised identically.
//!
//! `PING` doubles as the handshake carrier: each side sends its canonical
//! session configuration as a `PING` payload and verifies the peer's
//! version, session id, fixed-point layout and backend selection before
//! any protocol traffic flows.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{Receiver, Sender};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::ring::FixedPointConfig;

pub const PROTOCOL_VERSION: u64 = 1;
pub const MAX_PAYLOAD: usize = (1 << 31) - 1;

/// Closed registry of frame types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Ping = 1,
    SharePush = 2,
    Reshare = 3,
    BoolRound = 4,
    CrossReq = 5,
    CrossResp = 6,
    ResultPush = 7,
    Abort = 8,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Result<MsgType> {
        Ok(match v {
            1 => MsgType::Ping,
            2 => MsgType::SharePush,
            3 => MsgType::Reshare,
            4 => MsgType::BoolRound,
            5 => MsgType::CrossReq,
            6 => MsgType::CrossResp,
            7 => MsgType::ResultPush,
            8 => MsgType::Abort,
            _ => return Err(Error::Framing(format!("unregistered message type {v}"))),
        })
    }
}

/// One protocol message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub op_id: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MsgType, op_id: u64, payload: Vec<u8>) -> Frame {
        Frame {
            msg_type,
            op_id,
            payload,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(Error::Framing(format!(
                "payload of {} bytes exceeds limit",
                self.payload.len()
            )));
        }
        let mut out = Vec::with_capacity(13 + self.payload.len());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.push(self.msg_type as u8);
        out.extend_from_slice(&self.op_id.to_le_bytes());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }
}

/// Pack little-endian u64 words into bytes.
pub fn words_to_bytes(words: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(words.len() * 8);
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

/// Unpack bytes into u64 words; errors unless the length is a multiple of 8.
pub fn bytes_to_words(bytes: &[u8]) -> Result<Vec<u64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Framing(format!(
            "payload length {} not word aligned",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// In-memory byte pipe; one direction of a duplex pair.
pub struct MemPipe {
    tx: Sender<Vec<u8>>,
    rx: Receiver<Vec<u8>>,
    buf: VecDeque<u8>,
}

/// Create a connected duplex pair of in-memory pipes.
pub fn mem_pipe_pair() -> (MemPipe, MemPipe) {
    let (tx_a, rx_b) = std::sync::mpsc::channel();
    let (tx_b, rx_a) = std::sync::mpsc::channel();
    (
        MemPipe {
            tx: tx_a,
            rx: rx_a,
            buf: VecDeque::new(),
        },
        MemPipe {
            tx: tx_b,
            rx: rx_b,
            buf: VecDeque::new(),
        },
    )
}

impl Read for MemPipe {
    fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
        while self.buf.is_empty() {
            match self.rx.recv() {
                Ok(chunk) => self.buf.extend(chunk),
                Err(_) => {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::UnexpectedEof,
                        "pipe closed",
                    ))
                }
            }
        }
        let n = out.len().min(self.buf.len());
        for b in out.iter_mut().take(n) {
            *b = self.buf.pop_front().unwrap();
        }
        Ok(n)
    }
}

impl Write for MemPipe {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.tx
            .send(buf.to_vec())
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::BrokenPipe, "pipe closed"))?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

enum Transport {
    Tcp(TcpStream),
    Mem(MemPipe),
}

impl Transport {
    fn read_exact(&mut self, buf: &mut [u8]) -> std::io::Result<()> {
        match self {
            Transport::Tcp(s) => s.read_exact(buf),
            Transport::Mem(p) => p.read_exact(buf),
        }
    }

    fn write_all(&mut self, buf: &[u8]) -> std::io::Result<()> {
        match self {
            Transport::Tcp(s) => s.write_all(buf),
            Transport::Mem(p) => p.write_all(buf),
        }
    }
}

/// Byte-level record of one connection, split by direction.
#[derive(Debug, Default)]
pub struct Transcript {
    pub sent: Vec<u8>,
    pub received: Vec<u8>,
}

/// Traffic counters for one connection.
#[derive(Debug, Default, Clone, Copy)]
pub struct TrafficCounters {
    pub frames_sent: u64,
    pub bytes_sent: u64,
    pub frames_received: u64,
    pub bytes_received: u64,
}

/// A framed connection with selective receive.
///
/// `recv_expect` matches frames to waiting operations by
/// `(msg_type, op_id)`; frames for other operations are parked and handed
/// out when their consumer asks, preserving per-peer FIFO order within
/// each operation.
pub struct FrameConn {
    transport: Transport,
    parked: VecDeque<Frame>,
    pub counters: TrafficCounters,
    transcript: Option<Arc<Mutex<Transcript>>>,
    failed: bool,
}

impl FrameConn {
    pub fn from_tcp(stream: TcpStream) -> Result<FrameConn> {
        stream.set_nodelay(true)?;
        Ok(FrameConn::new(Transport::Tcp(stream)))
    }

    pub fn from_mem(pipe: MemPipe) -> FrameConn {
        FrameConn::new(Transport::Mem(pipe))
    }

    fn new(transport: Transport) -> FrameConn {
        FrameConn {
            transport,
            parked: VecDeque::new(),
            counters: TrafficCounters::default(),
            transcript: None,
            failed: false,
        }
    }

    /// Attach a transcript recorder shared with the test harness.
    pub fn record_into(&mut self, transcript: Arc<Mutex<Transcript>>) {
        self.transcript = Some(transcript);
    }

    pub fn send(&mut self, frame: &Frame) -> Result<()> {
        let bytes = frame.encode()?;
        self.transport.write_all(&bytes)?;
        if let Some(t) = &self.transcript {
            t.lock().unwrap().sent.extend_from_slice(&bytes);
        }
        self.counters.frames_sent += 1;
        self.counters.bytes_sent += bytes.len() as u64;
        Ok(())
    }

    fn read_frame(&mut self) -> Result<Frame> {
        if self.failed {
            return Err(Error::Protocol("session already failed".into()));
        }
        let mut header = [0u8; 13];
        if let Err(e) = self.transport.read_exact(&mut header) {
            self.failed = true;
            return Err(Error::Transport(e));
        }
        let len = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
        let msg_type = match MsgType::from_u8(header[4]) {
            Ok(t) => t,
            Err(e) => {
                self.failed = true;
                return Err(e);
            }
        };
        let op_id = u64::from_le_bytes(header[5..13].try_into().unwrap());
        let mut payload = vec![0u8; len];
        if let Err(e) = self.transport.read_exact(&mut payload) {
            // Truncated stream: mark the session failed.
            self.failed = true;
            return Err(Error::Framing(format!(
                "stream truncated inside a {len}-byte payload: {e}"
            )));
        }
        if let Some(t) = &self.transcript {
            let mut t = t.lock().unwrap();
            t.received.extend_from_slice(&header);
            t.received.extend_from_slice(&payload);
        }
        self.counters.frames_received += 1;
        self.counters.bytes_received += 13 + payload.len() as u64;
        Ok(Frame {
            msg_type,
            op_id,
            payload,
        })
    }

    /// Receive the next frame regardless of type (service loops).
    pub fn recv_any(&mut self) -> Result<Frame> {
        if let Some(f) = self.parked.pop_front() {
            return Ok(f);
        }
        self.read_frame()
    }

    /// Receive the next frame for `(msg_type, op_id)`, parking others.
    pub fn recv_expect(&mut self, msg_type: MsgType, op_id: u64) -> Result<Frame> {
        if let Some(pos) = self
            .parked
            .iter()
            .position(|f| f.msg_type == msg_type && f.op_id == op_id)
        {
            return Ok(self.parked.remove(pos).unwrap());
        }
        loop {
            let frame = self.read_frame()?;
            if frame.msg_type == MsgType::Abort {
                self.failed = true;
                return Err(Error::Protocol(format!(
                    "peer aborted: {}",
                    String::from_utf8_lossy(&frame.payload)
                )));
            }
            if frame.msg_type == msg_type && frame.op_id == op_id {
                return Ok(frame);
            }
            self.parked.push_back(frame);
        }
    }

    /// Best-effort abort notification.
    pub fn send_abort(&mut self, reason: &str) {
        let _ = self.send(&Frame::new(
            MsgType::Abort,
            0,
            reason.as_bytes().to_vec(),
        ));
    }
}

/// The five process roles of a deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    Server0,
    Server1,
    Helper,
    ImageProvider,
    ModelProvider,
}

impl NodeRole {
    pub fn tag(self) -> u64 {
        match self {
            NodeRole::Server0 => 0,
            NodeRole::Server1 => 1,
            NodeRole::Helper => 2,
            NodeRole::ImageProvider => 3,
            NodeRole::ModelProvider => 4,
        }
    }

    pub fn from_tag(v: u64) -> Result<NodeRole> {
        Ok(match v {
            0 => NodeRole::Server0,
            1 => NodeRole::Server1,
            2 => NodeRole::Helper,
            3 => NodeRole::ImageProvider,
            4 => NodeRole::ModelProvider,
            _ => return Err(Error::Handshake(format!("unknown role tag {v}"))),
        })
    }
}

impl std::fmt::Display for NodeRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NodeRole::Server0 => "server0",
            NodeRole::Server1 => "server1",
            NodeRole::Helper => "helper",
            NodeRole::ImageProvider => "image-provider",
            NodeRole::ModelProvider => "model-provider",
        };
        write!(f, "{s}")
    }
}

/// Correlated-randomness backend selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// Trusted dealer: responds with an additive split of the full
    /// structured mask product.
    Dealer,
    /// Helper node: responds with a split of the cross terms only; each
    /// party adds its local term.
    Helper,
}

impl BackendKind {
    pub fn tag(self) -> u64 {
        match self {
            BackendKind::Dealer => 0,
            BackendKind::Helper => 1,
        }
    }

    pub fn from_tag(v: u64) -> Result<BackendKind> {
        Ok(match v {
            0 => BackendKind::Dealer,
            1 => BackendKind::Helper,
            _ => return Err(Error::Handshake(format!("unknown backend tag {v}"))),
        })
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendKind::Dealer => write!(f, "dealer"),
            BackendKind::Helper => write!(f, "helper"),
        }
    }
}

/// Adder circuit used for sign extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdderKind {
    /// One AND round per carry stage.
    Ripple,
    /// Log-depth Kogge-Stone carry computation.
    Lookahead,
}

impl AdderKind {
    pub fn tag(self) -> u64 {
        match self {
            AdderKind::Ripple => 0,
            AdderKind::Lookahead => 1,
        }
    }

    pub fn from_tag(v: u64) -> Result<AdderKind> {
        Ok(match v {
            0 => AdderKind::Ripple,
            1 => AdderKind::Lookahead,
            _ => return Err(Error::Handshake(format!("unknown adder tag {v}"))),
        })
    }
}

/// Everything two nodes must agree on before exchanging protocol frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionConfig {
    pub session_id: u64,
    pub fixed: FixedPointConfig,
    pub backend: BackendKind,
    pub adder: AdderKind,
}

impl SessionConfig {
    fn canonical_words(&self, role: NodeRole) -> [u64; 7] {
        [
            PROTOCOL_VERSION,
            role.tag(),
            self.session_id,
            self.fixed.frac_bits as u64,
            self.fixed.indicator_gain,
            self.backend.tag(),
            self.adder.tag(),
        ]
    }
}

fn check_peer_hello(
    cfg: &SessionConfig,
    expect_role: NodeRole,
    frame: &Frame,
) -> Result<()> {
    let words = bytes_to_words(&frame.payload)?;
    if words.len() != 7 {
        return Err(Error::Handshake(format!(
            "hello payload has {} words, expected 7",
            words.len()
        )));
    }
    if words[0] != PROTOCOL_VERSION {
        return Err(Error::Handshake(format!(
            "protocol version mismatch: ours {PROTOCOL_VERSION}, peer {}",
            words[0]
        )));
    }
    let peer_role = NodeRole::from_tag(words[1])?;
    if peer_role != expect_role {
        return Err(Error::Handshake(format!(
            "expected peer role {expect_role}, got {peer_role}"
        )));
    }
    let ours = cfg.canonical_words(expect_role);
    for (idx, name) in [
        (2usize, "session id"),
        (3, "fractional bits"),
        (4, "indicator gain"),
        (5, "backend"),
        (6, "adder"),
    ] {
        if words[idx] != ours[idx] {
            return Err(Error::Handshake(format!(
                "{name} mismatch: ours {}, peer {}",
                ours[idx], words[idx]
            )));
        }
    }
    Ok(())
}

/// Handshake from the side that speaks first (the connecting node).
pub fn hello_initiate(
    conn: &mut FrameConn,
    cfg: &SessionConfig,
    my_role: NodeRole,
    expect_peer: NodeRole,
) -> Result<()> {
    let words = cfg.canonical_words(my_role);
    conn.send(&Frame::new(MsgType::Ping, 0, words_to_bytes(&words)))?;
    let reply = conn.recv_expect(MsgType::Ping, 0)?;
    check_peer_hello(cfg, expect_peer, &reply)
}

/// Handshake from the side that listens.
pub fn hello_accept(
    conn: &mut FrameConn,
    cfg: &SessionConfig,
    my_role: NodeRole,
    expect_peer: NodeRole,
) -> Result<()> {
    let hello = conn.recv_expect(MsgType::Ping, 0)?;
    // Reply before validating so the initiator sees a config mismatch as a
    // handshake error rather than a hung connection.
    let words = cfg.canonical_words(my_role);
    conn.send(&Frame::new(MsgType::Ping, 0, words_to_bytes(&words)))?;
    check_peer_hello(cfg, expect_peer, &hello)
}

pub fn tcp_connect(addr: impl ToSocketAddrs) -> Result<FrameConn> {
    let stream = TcpStream::connect(addr)?;
    FrameConn::from_tcp(stream)
}

pub fn tcp_accept(listener: &TcpListener) -> Result<FrameConn> {
    let (stream, _) = listener.accept()?;
    FrameConn::from_tcp(stream)
}

/// Decode a byte transcript back into frames; fails on any framing or
/// registry violation. Used by tests to validate recorded traffic.
pub fn scan_transcript(mut bytes: &[u8]) -> Result<Vec<Frame>> {
    let mut frames = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < 13 {
            return Err(Error::Framing("trailing partial header".into()));
        }
        let len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let msg_type = MsgType::from_u8(bytes[4])?;
        let op_id = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
        if bytes.len() < 13 + len {
            return Err(Error::Framing("trailing partial payload".into()));
        }
        frames.push(Frame {
            msg_type,
            op_id,
            payload: bytes[13..13 + len].to_vec(),
        });
        bytes = &bytes[13 + len..];
    }
    Ok(frames)
}
