//! Open Sound Control 1.0 for the jammin protocol.
//!
//! Only the `i`, `f`, `s` and `b` argument types are supported. Bundles are
//! accepted on receive and flattened into their messages; they are never sent.

mod codec;
mod transport;

pub use codec::{decode, decode_message, encode, OscError, OscMessage, OscValue, MAX_BLOB_LEN};
pub use transport::{OscSender, OscTransport, TransportError, MAX_DATAGRAM};
