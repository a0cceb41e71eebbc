//! Framed two-party channels with latency and bandwidth emulation.
//!
//! A frame is a 4-byte big-endian payload length, a 1-byte message type and
//! the payload. Shaping happens at the sender: a frame is released to the
//! wire once the emulated link has serialized it at the profile bandwidth
//! and the one-way delay has elapsed.

use std::collections::VecDeque;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

pub const FRAME_HEADER_BYTES: usize = 5;
pub const MAX_FRAME_PAYLOAD: usize = 1 << 28;
pub const NET_PROFILE_ENV: &str = "SPC_NET_PROFILE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    Record = 2,
    OtMsg = 3,
    GcStream = 4,
    Output = 5,
    Abort = 6,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => MsgType::Hello,
            2 => MsgType::Record,
            3 => MsgType::OtMsg,
            4 => MsgType::GcStream,
            5 => MsgType::Output,
            6 => MsgType::Abort,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: MsgType,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetProfile {
    pub name: String,
    /// 0 means unlimited.
    pub bandwidth_bits_per_s: u64,
    pub one_way_delay_ms: u64,
}

impl NetProfile {
    pub fn lan() -> Self {
        NetProfile { name: "lan".into(), bandwidth_bits_per_s: 0, one_way_delay_ms: 0 }
    }

    pub fn wan1() -> Self {
        NetProfile { name: "wan1".into(), bandwidth_bits_per_s: 1_000_000_000, one_way_delay_ms: 10 }
    }

    pub fn wan2() -> Self {
        NetProfile { name: "wan2".into(), bandwidth_bits_per_s: 100_000_000, one_way_delay_ms: 50 }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "lan" => Ok(Self::lan()),
            "wan1" => Ok(Self::wan1()),
            "wan2" => Ok(Self::wan2()),
            _ => Err(Error::invalid(format!("unknown network profile {name:?}"))),
        }
    }

    /// The preset named by `SPC_NET_PROFILE`, or lan when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(NET_PROFILE_ENV) {
            Ok(v) if !v.is_empty() => Self::by_name(&v),
            _ => Ok(Self::lan()),
        }
    }

    pub fn is_unshaped(&self) -> bool {
        self.bandwidth_bits_per_s == 0 && self.one_way_delay_ms == 0
    }

    fn serialization_time(&self, bytes: usize) -> Duration {
        if self.bandwidth_bits_per_s == 0 {
            return Duration::ZERO;
        }
        Duration::from_secs_f64(bytes as f64 * 8.0 / self.bandwidth_bits_per_s as f64)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SessionMetrics {
    /// Sum of sent frame payload sizes.
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub wall_time_ms: u64,
    /// Number of times a receive followed a send.
    pub round_trips: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// One entry per frame, in order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameRecord {
    pub direction: Direction,
    pub kind: MsgType,
    pub len: usize,
}

type Outgoing = (Instant, Vec<u8>);

enum Writer {
    Direct(BufWriter<Box<dyn Write + Send>>),
    Shaped {
        tx: Option<mpsc::Sender<Outgoing>>,
        handle: Option<JoinHandle<()>>,
        error: Arc<Mutex<Option<String>>>,
    },
}

pub struct Channel {
    reader: BufReader<Box<dyn Read + Send>>,
    writer: Writer,
    profile: NetProfile,
    started: Instant,
    metrics: SessionMetrics,
    last_sent: bool,
    log: Vec<FrameRecord>,
}

fn shaper(mut w: Box<dyn Write + Send>, profile: NetProfile, rx: mpsc::Receiver<Outgoing>, error: Arc<Mutex<Option<String>>>) {
    let delay = Duration::from_millis(profile.one_way_delay_ms);
    let mut link_free = Instant::now();
    for (queued, bytes) in rx {
        let start = link_free.max(queued);
        link_free = start + profile.serialization_time(bytes.len());
        let arrive = link_free + delay;
        let now = Instant::now();
        if arrive > now {
            std::thread::sleep(arrive - now);
        }
        if let Err(e) = w.write_all(&bytes).and_then(|_| w.flush()) {
            *error.lock().unwrap() = Some(e.to_string());
            return;
        }
    }
}

impl Channel {
    pub fn new(reader: Box<dyn Read + Send>, writer: Box<dyn Write + Send>, profile: NetProfile) -> Self {
        let writer = if profile.is_unshaped() {
            Writer::Direct(BufWriter::with_capacity(1 << 16, writer))
        } else {
            let (tx, rx) = mpsc::channel();
            let error = Arc::new(Mutex::new(None));
            let err2 = error.clone();
            let p = profile.clone();
            let handle = std::thread::spawn(move || shaper(writer, p, rx, err2));
            Writer::Shaped { tx: Some(tx), handle: Some(handle), error }
        };
        Channel {
            reader: BufReader::with_capacity(1 << 16, reader),
            writer,
            profile,
            started: Instant::now(),
            metrics: SessionMetrics::default(),
            last_sent: false,
            log: Vec::new(),
        }
    }

    pub fn profile(&self) -> &NetProfile {
        &self.profile
    }

    pub fn send(&mut self, kind: MsgType, payload: &[u8]) -> Result<()> {
        if payload.len() > MAX_FRAME_PAYLOAD {
            return Err(Error::Transport(format!("frame of {} bytes is too large", payload.len())));
        }
        let mut head = [0u8; FRAME_HEADER_BYTES];
        head[..4].copy_from_slice(&(payload.len() as u32).to_be_bytes());
        head[4] = kind as u8;
        match &mut self.writer {
            Writer::Direct(w) => {
                w.write_all(&head)
                    .and_then(|_| w.write_all(payload))
                    .and_then(|_| w.flush())
                    .map_err(|e| Error::Transport(e.to_string()))?;
            }
            Writer::Shaped { tx, error, .. } => {
                if let Some(e) = error.lock().unwrap().take() {
                    return Err(Error::Transport(e));
                }
                let mut bytes = Vec::with_capacity(FRAME_HEADER_BYTES + payload.len());
                bytes.extend_from_slice(&head);
                bytes.extend_from_slice(payload);
                tx.as_ref()
                    .ok_or_else(|| Error::Transport("channel is closed for sending".into()))?
                    .send((Instant::now(), bytes))
                    .map_err(|_| Error::Transport("link thread stopped".into()))?;
            }
        }
        self.metrics.bytes_sent += payload.len() as u64;
        self.last_sent = true;
        self.log.push(FrameRecord { direction: Direction::Sent, kind, len: payload.len() });
        Ok(())
    }

    /// Next frame. An ABORT frame from the peer becomes the error it carries.
    pub fn recv(&mut self) -> Result<Frame> {
        let frame = self.recv_raw()?;
        if frame.kind == MsgType::Abort {
            return Err(abort_error(&frame.payload));
        }
        Ok(frame)
    }

    pub fn recv_raw(&mut self) -> Result<Frame> {
        let mut head = [0u8; FRAME_HEADER_BYTES];
        self.reader.read_exact(&mut head).map_err(|e| Error::Transport(format!("receive: {e}")))?;
        let len = u32::from_be_bytes(head[..4].try_into().unwrap()) as usize;
        let kind = MsgType::from_u8(head[4]).ok_or_else(|| Error::protocol(format!("unknown frame type {}", head[4])))?;
        if len > MAX_FRAME_PAYLOAD {
            return Err(Error::protocol(format!("frame of {len} bytes is too large")));
        }
        let mut payload = vec![0u8; len];
        self.reader.read_exact(&mut payload).map_err(|e| Error::Transport(format!("receive: {e}")))?;
        self.metrics.bytes_received += len as u64;
        if self.last_sent {
            self.metrics.round_trips += 1;
            self.last_sent = false;
        }
        self.log.push(FrameRecord { direction: Direction::Received, kind, len });
        Ok(Frame { kind, payload })
    }

    /// Receives a frame and checks its type.
    pub fn expect(&mut self, kind: MsgType) -> Result<Vec<u8>> {
        let f = self.recv()?;
        if f.kind != kind {
            return Err(Error::protocol(format!("expected {kind:?}, got {:?}", f.kind)));
        }
        Ok(f.payload)
    }

    /// Best-effort ABORT notice to the peer, carrying the error class.
    pub fn abort(&mut self, err: &Error) {
        let class = match err {
            Error::Auth(_) => 1,
            Error::ParamsMismatch(_) => 2,
            Error::InvalidInput(_) | Error::Range(_) => 3,
            Error::AlreadyAuthorized(_) => 4,
            _ => 0,
        };
        let mut payload = vec![class];
        payload.extend_from_slice(err.to_string().as_bytes());
        let _ = self.send(MsgType::Abort, &payload);
        let _ = self.finish();
    }

    /// Flushes. On a shaped channel this also closes the sending half and
    /// blocks until every queued frame has left the emulated link.
    pub fn finish(&mut self) -> Result<()> {
        match &mut self.writer {
            Writer::Direct(w) => w.flush().map_err(|e| Error::Transport(e.to_string())),
            Writer::Shaped { tx, handle, error } => {
                tx.take();
                if let Some(h) = handle.take() {
                    let _ = h.join();
                }
                match error.lock().unwrap().take() {
                    Some(e) => Err(Error::Transport(e)),
                    None => Ok(()),
                }
            }
        }
    }

    pub fn metrics(&self) -> SessionMetrics {
        SessionMetrics { wall_time_ms: self.started.elapsed().as_millis() as u64, ..self.metrics }
    }

    /// Restarts the wall clock, e.g. right before a session begins.
    pub fn reset_clock(&mut self) {
        self.started = Instant::now();
    }

    pub fn frame_log(&self) -> &[FrameRecord] {
        &self.log
    }
}

impl Drop for Channel {
    fn drop(&mut self) {
        let _ = self.finish();
    }
}

fn abort_error(payload: &[u8]) -> Error {
    let msg = format!("peer aborted: {}", String::from_utf8_lossy(payload.get(1..).unwrap_or_default()));
    match payload.first() {
        Some(1) => Error::Auth(msg),
        Some(2) => Error::ParamsMismatch(msg),
        Some(3) => Error::InvalidInput(msg),
        Some(4) => Error::AlreadyAuthorized(msg),
        _ => Error::Protocol(msg),
    }
}

/// In-process byte pipe; the reading end blocks until data or hang-up.
struct PipeReader {
    rx: mpsc::Receiver<Vec<u8>>,
    buf: VecDeque<u8>,
}

struct PipeWriter {
    tx: mpsc::Sender<Vec<u8>>,
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
        while self.buf.is_empty() {
            match self.rx.recv() {
                Ok(chunk) => self.buf.extend(chunk),
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len());
        for (o, b) in out.iter_mut().zip(self.buf.drain(..n)) {
            *o = b;
        }
        Ok(n)
    }
}

impl Write for PipeWriter {
    fn write(&mut self, data: &[u8]) -> std::io::Result<usize> {
        self.tx
            .send(data.to_vec())
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::BrokenPipe, "peer hung up"))?;
        Ok(data.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn pipe() -> (PipeReader, PipeWriter) {
    let (tx, rx) = mpsc::channel();
    (PipeReader { rx, buf: VecDeque::new() }, PipeWriter { tx })
}

/// Two connected in-process channels.
pub fn memory_pair(profile: &NetProfile) -> (Channel, Channel) {
    let (r1, w1) = pipe();
    let (r2, w2) = pipe();
    (
        Channel::new(Box::new(r1), Box::new(w2), profile.clone()),
        Channel::new(Box::new(r2), Box::new(w1), profile.clone()),
    )
}

fn tcp_channel(stream: TcpStream, profile: NetProfile) -> Result<Channel> {
    stream.set_nodelay(true).map_err(|e| Error::Transport(e.to_string()))?;
    let r = stream.try_clone().map_err(|e| Error::Transport(e.to_string()))?;
    Ok(Channel::new(Box::new(r), Box::new(stream), profile))
}

/// Connects to `host:port`, retrying until `timeout` passes.
pub fn connect(endpoint: &str, profile: NetProfile, timeout: Duration) -> Result<Channel> {
    let deadline = Instant::now() + timeout;
    let addrs: Vec<_> = endpoint
        .to_socket_addrs()
        .map_err(|e| Error::Transport(format!("{endpoint}: {e}")))?
        .collect();
    loop {
        let mut last = None;
        for a in &addrs {
            match TcpStream::connect_timeout(a, Duration::from_secs(2)) {
                Ok(s) => return tcp_channel(s, profile),
                Err(e) => last = Some(e),
            }
        }
        if Instant::now() >= deadline {
            let why = last.map_or("no address".to_string(), |e| e.to_string());
            return Err(Error::Transport(format!("connect to {endpoint}: {why}")));
        }
        std::thread::sleep(Duration::from_millis(50));
    }
}

pub fn listen(endpoint: &str) -> Result<TcpListener> {
    TcpListener::bind(endpoint).map_err(|e| Error::Transport(format!("bind {endpoint}: {e}")))
}

pub fn accept(listener: &TcpListener, profile: NetProfile) -> Result<Channel> {
    let (s, _) = listener.accept().map_err(|e| Error::Transport(format!("accept: {e}")))?;
    tcp_channel(s, profile)
}
