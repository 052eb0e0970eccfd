//! The daemon's side of the protocol.

use std::net::ToSocketAddrs;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use jammin_core::{NoteEvent, Tick, TimeSig, ticks_to_beats};
use jammin_osc::{decode, encode, OscMessage, OscTransport, TransportError};
use thiserror::Error;

use crate::protocol::{self, add_notes_requests, ClipAddress, ClipInfo, Reply, Request};
use crate::sim::Simulator;

/// Default wait for a complete reply.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(3);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("no reply to {request} in time")]
    Timeout { request: String },
    #[error("DAW rejected {request}: {reason}")]
    Daw { request: String, reason: String },
    #[error("unexpected reply to {request}: {got}")]
    Unexpected { request: String, got: String },
    #[error("{request}: expected {expected} items, received {got}")]
    Incomplete { request: String, expected: usize, got: usize },
    #[error("transport: {0}")]
    Transport(String),
}

impl From<TransportError> for ProtocolError {
    fn from(e: TransportError) -> Self {
        ProtocolError::Transport(e.to_string())
    }
}

/// Sends one request and gathers replies until `is_last` accepts one.
pub trait Exchange: Send + Sync {
    fn exchange(
        &self,
        request: &OscMessage,
        is_last: &dyn Fn(&OscMessage) -> bool,
        timeout: Duration,
    ) -> Result<Vec<OscMessage>, ProtocolError>;
}

/// Exchanges over UDP. One exchange runs at a time; replies left over from
/// a timed-out exchange are discarded before the next request goes out.
pub struct UdpExchange {
    transport: OscTransport,
    inbox: Mutex<Receiver<OscMessage>>,
}

impl UdpExchange {
    pub fn open(
        local: impl ToSocketAddrs + std::fmt::Debug,
        daw: impl ToSocketAddrs + std::fmt::Debug,
    ) -> Result<Self, ProtocolError> {
        let mut transport = OscTransport::open(local, daw)?;
        let (tx, rx) = mpsc::channel();
        transport.start(move |m, _| {
            let _ = tx.send(m);
        })?;
        Ok(UdpExchange { transport, inbox: Mutex::new(rx) })
    }

    pub fn dropped(&self) -> u64 {
        self.transport.dropped()
    }

    pub fn close(&mut self) {
        self.transport.close();
    }
}

impl Exchange for UdpExchange {
    fn exchange(
        &self,
        request: &OscMessage,
        is_last: &dyn Fn(&OscMessage) -> bool,
        timeout: Duration,
    ) -> Result<Vec<OscMessage>, ProtocolError> {
        let inbox = self.inbox.lock().expect("inbox lock");
        while inbox.try_recv().is_ok() {}
        self.transport.send(request)?;
        let deadline = Instant::now() + timeout;
        let mut got = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match inbox.recv_timeout(left) {
                Ok(m) => {
                    let last = is_last(&m);
                    got.push(m);
                    if last {
                        return Ok(got);
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(ProtocolError::Timeout { request: request.addr.clone() })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(ProtocolError::Transport("receive loop stopped".into()))
                }
            }
        }
    }
}

/// Exchanges with a simulator in the same process, still passing every
/// message through the wire encoding.
#[derive(Clone)]
pub struct InProcessExchange {
    sim: Arc<Mutex<Simulator>>,
}

impl InProcessExchange {
    pub fn new(sim: Arc<Mutex<Simulator>>) -> Self {
        InProcessExchange { sim }
    }
}

fn through_wire(m: &OscMessage) -> Result<OscMessage, ProtocolError> {
    let bytes = encode(m).map_err(|e| ProtocolError::Transport(e.to_string()))?;
    let mut msgs = decode(&bytes).map_err(|e| ProtocolError::Transport(e.to_string()))?;
    Ok(msgs.remove(0))
}

impl Exchange for InProcessExchange {
    fn exchange(
        &self,
        request: &OscMessage,
        is_last: &dyn Fn(&OscMessage) -> bool,
        _timeout: Duration,
    ) -> Result<Vec<OscMessage>, ProtocolError> {
        let req = through_wire(request)?;
        let replies = self.sim.lock().expect("simulator lock").handle(&req);
        let mut got = Vec::new();
        for r in replies {
            let r = through_wire(&r)?;
            let last = is_last(&r);
            got.push(r);
            if last {
                return Ok(got);
            }
        }
        Err(ProtocolError::Timeout { request: request.addr.clone() })
    }
}

/// Everything the daemon asks of a DAW.
pub trait DawClient: Send + Sync {
    fn tempo(&self) -> Result<f64, ProtocolError>;
    fn time_sig(&self) -> Result<TimeSig, ProtocolError>;
    fn track_name(&self, track: u32) -> Result<String, ProtocolError>;
    fn scan(&self) -> Result<Vec<ClipInfo>, ProtocolError>;
    fn get_notes(&self, addr: ClipAddress) -> Result<Vec<NoteEvent>, ProtocolError>;
    /// Creates a clip of `length` in an empty slot; an occupied slot is left alone.
    fn create_clip(&self, addr: ClipAddress, length: Tick) -> Result<(), ProtocolError>;
    fn clear_notes(&self, addr: ClipAddress) -> Result<(), ProtocolError>;
    /// Appends notes, sent in chunks.
    fn add_notes(&self, addr: ClipAddress, notes: &[NoteEvent]) -> Result<(), ProtocolError>;
    fn set_color(&self, addr: ClipAddress, color: u8) -> Result<(), ProtocolError>;
}

/// A [`DawClient`] speaking OSC through an [`Exchange`].
pub struct OscClient<E> {
    exchange: E,
    timeout: Duration,
}

impl<E: Exchange> OscClient<E> {
    pub fn new(exchange: E) -> Self {
        OscClient { exchange, timeout: DEFAULT_TIMEOUT }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn exchange_ref(&self) -> &E {
        &self.exchange
    }

    /// Sends `req` and returns its parsed replies, the terminating one last.
    /// An error reply echoing this request becomes [`ProtocolError::Daw`].
    fn call(&self, req: &Request, terminator: &str) -> Result<Vec<Reply>, ProtocolError> {
        let msg = req.to_message();
        let address = msg.addr.clone();
        let is_last = |m: &OscMessage| {
            m.addr == terminator && (terminator != protocol::OK || echo_of(m) == Some(address.as_str()))
                || m.addr == protocol::ERROR && echo_of(m) == Some(address.as_str())
        };
        let raw = self.exchange.exchange(&msg, &is_last, self.timeout)?;
        let mut out = Vec::with_capacity(raw.len());
        for m in &raw {
            let reply = Reply::from_message(m).map_err(|_| ProtocolError::Unexpected {
                request: address.clone(),
                got: m.to_string(),
            })?;
            if let Reply::Error { echo, reason } = &reply {
                if *echo == address {
                    return Err(ProtocolError::Daw { request: address, reason: reason.clone() });
                }
            }
            out.push(reply);
        }
        Ok(out)
    }

    fn call_ok(&self, req: &Request) -> Result<(), ProtocolError> {
        self.call(req, protocol::OK).map(|_| ())
    }

    fn unexpected(req: &str, got: &[Reply]) -> ProtocolError {
        ProtocolError::Unexpected { request: req.to_string(), got: format!("{:?}", got.last()) }
    }
}

fn echo_of(m: &OscMessage) -> Option<&str> {
    m.args.first().and_then(|a| a.as_str())
}

impl<E: Exchange> DawClient for OscClient<E> {
    fn tempo(&self) -> Result<f64, ProtocolError> {
        let r = self.call(&Request::GetTempo, protocol::TEMPO)?;
        match r.last() {
            Some(Reply::Tempo(bpm)) => Ok(f64::from(*bpm)),
            _ => Err(Self::unexpected(protocol::GET_TEMPO, &r)),
        }
    }

    fn time_sig(&self) -> Result<TimeSig, ProtocolError> {
        let r = self.call(&Request::GetTimeSig, protocol::TIME_SIG)?;
        match r.last() {
            Some(Reply::TimeSig(n, d)) => TimeSig::new(*n as u32, *d as u32).map_err(|e| ProtocolError::Unexpected {
                request: protocol::GET_TIME_SIG.into(),
                got: e.to_string(),
            }),
            _ => Err(Self::unexpected(protocol::GET_TIME_SIG, &r)),
        }
    }

    fn track_name(&self, track: u32) -> Result<String, ProtocolError> {
        let r = self.call(&Request::GetTrackName(track), protocol::TRACK_NAME)?;
        match r.last() {
            Some(Reply::TrackName(t, name)) if *t == track as i32 => Ok(name.clone()),
            _ => Err(Self::unexpected(protocol::GET_TRACK_NAME, &r)),
        }
    }

    fn scan(&self) -> Result<Vec<ClipInfo>, ProtocolError> {
        let r = self.call(&Request::Scan, protocol::SCAN_DONE)?;
        let infos: Vec<ClipInfo> = r
            .iter()
            .filter_map(|x| match x {
                Reply::ClipInfo(i) => Some(i.clone()),
                _ => None,
            })
            .collect();
        match r.last() {
            Some(Reply::ScanDone(n)) if *n as usize == infos.len() => Ok(infos),
            Some(Reply::ScanDone(n)) => Err(ProtocolError::Incomplete {
                request: protocol::SCAN.into(),
                expected: *n as usize,
                got: infos.len(),
            }),
            _ => Err(Self::unexpected(protocol::SCAN, &r)),
        }
    }

    fn get_notes(&self, addr: ClipAddress) -> Result<Vec<NoteEvent>, ProtocolError> {
        let r = self.call(&Request::GetNotes(addr), protocol::NOTES_DONE)?;
        let mut chunks: Vec<(i32, &Vec<protocol::WireNote>)> = r
            .iter()
            .filter_map(|x| match x {
                Reply::Notes { addr: a, seq, notes } if *a == addr => Some((*seq, notes)),
                _ => None,
            })
            .collect();
        chunks.sort_by_key(|c| c.0);
        chunks.dedup_by_key(|c| c.0);
        let notes: Vec<NoteEvent> = chunks.iter().flat_map(|c| c.1.iter().map(|w| w.to_note())).collect();
        match r.last() {
            Some(Reply::NotesDone { addr: a, total }) if *a == addr && *total as usize == notes.len() => Ok(notes),
            Some(Reply::NotesDone { total, .. }) => Err(ProtocolError::Incomplete {
                request: protocol::GET_NOTES.into(),
                expected: *total as usize,
                got: notes.len(),
            }),
            _ => Err(Self::unexpected(protocol::GET_NOTES, &r)),
        }
    }

    fn create_clip(&self, addr: ClipAddress, length: Tick) -> Result<(), ProtocolError> {
        self.call_ok(&Request::CreateClip(addr, ticks_to_beats(length) as f32))
    }

    fn clear_notes(&self, addr: ClipAddress) -> Result<(), ProtocolError> {
        self.call_ok(&Request::ClearNotes(addr))
    }

    fn add_notes(&self, addr: ClipAddress, notes: &[NoteEvent]) -> Result<(), ProtocolError> {
        add_notes_requests(addr, notes).iter().try_for_each(|r| self.call_ok(r))
    }

    fn set_color(&self, addr: ClipAddress, color: u8) -> Result<(), ProtocolError> {
        self.call_ok(&Request::SetColor(addr, i32::from(color)))
    }
}
