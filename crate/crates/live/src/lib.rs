//! The `/jammin/*` OSC address space spoken between the daemon and a DAW,
//! a client for it, and an in-memory simulated DAW that answers it.

pub mod client;
pub mod protocol;
pub mod sim;

pub use client::{DawClient, Exchange, InProcessExchange, OscClient, ProtocolError, UdpExchange};
pub use protocol::{ClipAddress, ClipInfo, ColorScheme, Reply, Request, WireNote, NOTES_PER_MESSAGE};
pub use sim::{Control, EventLog, LogEntry, Mutation, ScenarioError, SimClip, SimError, SimServer, SimSet, SimTrack, Simulator};
