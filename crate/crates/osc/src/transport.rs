use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use thiserror::Error;

use crate::codec::{decode, encode, OscError, OscMessage};

/// Largest UDP payload over IPv4.
pub const MAX_DATAGRAM: usize = 65_507;

// How often the receive thread checks for shutdown.
const POLL_INTERVAL: Duration = Duration::from_millis(50);

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("cannot resolve peer {0}")]
    Resolve(String),
    #[error("transport is closed")]
    Closed,
    #[error("transport has no default peer")]
    NoPeer,
    #[error("receive loop already started")]
    AlreadyStarted,
    #[error("encoded message is {0} bytes, over the datagram limit")]
    TooLarge(usize),
    #[error(transparent)]
    Encode(#[from] OscError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A cloneable handle that sends messages from the transport's socket.
#[derive(Clone)]
pub struct OscSender {
    socket: Arc<UdpSocket>,
    peer: Option<SocketAddr>,
    closed: Arc<AtomicBool>,
}

impl OscSender {
    /// Sends to the configured peer.
    pub fn send(&self, msg: &OscMessage) -> Result<(), TransportError> {
        self.send_to(msg, self.peer.ok_or(TransportError::NoPeer)?)
    }

    pub fn send_to(&self, msg: &OscMessage, to: SocketAddr) -> Result<(), TransportError> {
        if self.closed.load(Ordering::Acquire) {
            return Err(TransportError::Closed);
        }
        let bytes = encode(msg)?;
        if bytes.len() > MAX_DATAGRAM {
            return Err(TransportError::TooLarge(bytes.len()));
        }
        self.socket.send_to(&bytes, to)?;
        Ok(())
    }

    pub fn peer(&self) -> Option<SocketAddr> {
        self.peer
    }
}

/// A UDP socket speaking OSC, with an optional background receive loop.
///
/// The handler runs on the receive thread, one message at a time, in arrival
/// order. Datagrams that fail to decode are logged, counted and dropped.
pub struct OscTransport {
    sender: OscSender,
    dropped: Arc<AtomicU64>,
    receiver: Option<JoinHandle<()>>,
}

impl OscTransport {
    /// Binds `local` (use port 0 for an ephemeral port) and targets `peer`.
    pub fn open(
        local: impl ToSocketAddrs + std::fmt::Debug,
        peer: impl ToSocketAddrs + std::fmt::Debug,
    ) -> Result<Self, TransportError> {
        let peer_desc = format!("{peer:?}");
        let peer = peer
            .to_socket_addrs()
            .map_err(|_| TransportError::Resolve(peer_desc.clone()))?
            .next()
            .ok_or(TransportError::Resolve(peer_desc))?;
        Self::bind_with_peer(local, Some(peer))
    }

    /// Binds `local` without a default peer; replies go out with `send_to`.
    pub fn bind(local: impl ToSocketAddrs + std::fmt::Debug) -> Result<Self, TransportError> {
        Self::bind_with_peer(local, None)
    }

    fn bind_with_peer(
        local: impl ToSocketAddrs + std::fmt::Debug,
        peer: Option<SocketAddr>,
    ) -> Result<Self, TransportError> {
        let local_desc = format!("{local:?}");
        let socket = UdpSocket::bind(local).map_err(|source| TransportError::Bind { addr: local_desc, source })?;
        socket.set_read_timeout(Some(POLL_INTERVAL))?;
        Ok(OscTransport {
            sender: OscSender {
                socket: Arc::new(socket),
                peer,
                closed: Arc::new(AtomicBool::new(false)),
            },
            dropped: Arc::new(AtomicU64::new(0)),
            receiver: None,
        })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.sender.socket.local_addr()
    }

    pub fn sender(&self) -> OscSender {
        self.sender.clone()
    }

    pub fn send(&self, msg: &OscMessage) -> Result<(), TransportError> {
        self.sender.send(msg)
    }

    pub fn send_to(&self, msg: &OscMessage, to: SocketAddr) -> Result<(), TransportError> {
        self.sender.send_to(msg, to)
    }

    /// Number of datagrams dropped because they did not decode.
    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }

    /// Starts the receive loop. The handler gets each decoded message and the
    /// address it came from.
    pub fn start<F>(&mut self, mut handler: F) -> Result<(), TransportError>
    where
        F: FnMut(OscMessage, SocketAddr) + Send + 'static,
    {
        if self.receiver.is_some() {
            return Err(TransportError::AlreadyStarted);
        }
        if self.sender.closed.load(Ordering::Acquire) {
            return Err(TransportError::Closed);
        }
        let socket = Arc::clone(&self.sender.socket);
        let closed = Arc::clone(&self.sender.closed);
        let dropped = Arc::clone(&self.dropped);
        let handle = std::thread::Builder::new().name("osc-recv".into()).spawn(move || {
            let mut buf = vec![0u8; MAX_DATAGRAM];
            while !closed.load(Ordering::Acquire) {
                let (n, from) = match socket.recv_from(&mut buf) {
                    Ok(r) => r,
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
                    // ICMP port-unreachable from an earlier send surfaces here on some platforms.
                    Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => continue,
                    Err(e) => {
                        tracing::error!(error = %e, "osc receive failed, stopping loop");
                        break;
                    }
                };
                match decode(&buf[..n]) {
                    Ok(messages) => messages.into_iter().for_each(|m| handler(m, from)),
                    Err(e) => {
                        dropped.fetch_add(1, Ordering::Relaxed);
                        tracing::warn!(%from, bytes = n, error = %e, "dropping malformed datagram");
                    }
                }
            }
        })?;
        self.receiver = Some(handle);
        Ok(())
    }

    /// Stops the receive loop and refuses further sends.
    pub fn close(&mut self) {
        self.sender.closed.store(true, Ordering::Release);
        if let Some(h) = self.receiver.take() {
            let _ = h.join();
        }
    }
}

impl Drop for OscTransport {
    fn drop(&mut self) {
        self.close();
    }
}
