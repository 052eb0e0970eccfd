use std::fmt;

use thiserror::Error;

/// Largest blob payload accepted in either direction.
pub const MAX_BLOB_LEN: usize = 65_000;

const BUNDLE_TAG: &[u8; 8] = b"#bundle\0";
// Bundles nest; past this depth the packet is rejected rather than recursed.
const MAX_BUNDLE_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OscError {
    #[error("invalid address {0:?}")]
    InvalidAddress(String),
    #[error("string argument contains NUL")]
    NulInString,
    #[error("blob of {0} bytes exceeds {MAX_BLOB_LEN}")]
    BlobTooLarge(usize),
    #[error("packet length {0} is not a multiple of 4")]
    Misaligned(usize),
    #[error("packet truncated")]
    Truncated,
    #[error("missing type tag string")]
    MissingTypeTags,
    #[error("unknown type tag {0:?}")]
    UnknownTypeTag(char),
    #[error("string is not valid UTF-8")]
    InvalidUtf8,
    #[error("bundle nested deeper than {MAX_BUNDLE_DEPTH}")]
    BundleTooDeep,
    #[error("trailing bytes after message")]
    TrailingBytes,
}

/// One OSC argument.
///
/// Floats compare by bit pattern so that every decoded message equals the
/// message it was encoded from, NaN payloads included.
#[derive(Debug, Clone)]
pub enum OscValue {
    Int(i32),
    Float(f32),
    Str(String),
    Blob(Vec<u8>),
}

impl OscValue {
    pub fn tag(&self) -> char {
        match self {
            OscValue::Int(_) => 'i',
            OscValue::Float(_) => 'f',
            OscValue::Str(_) => 's',
            OscValue::Blob(_) => 'b',
        }
    }

    pub fn as_int(&self) -> Option<i32> {
        match *self {
            OscValue::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f32> {
        match *self {
            OscValue::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            OscValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl PartialEq for OscValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (OscValue::Int(a), OscValue::Int(b)) => a == b,
            (OscValue::Float(a), OscValue::Float(b)) => a.to_bits() == b.to_bits(),
            (OscValue::Str(a), OscValue::Str(b)) => a == b,
            (OscValue::Blob(a), OscValue::Blob(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for OscValue {}

impl From<i32> for OscValue {
    fn from(v: i32) -> Self {
        OscValue::Int(v)
    }
}

impl From<f32> for OscValue {
    fn from(v: f32) -> Self {
        OscValue::Float(v)
    }
}

impl From<&str> for OscValue {
    fn from(v: &str) -> Self {
        OscValue::Str(v.to_string())
    }
}

impl From<String> for OscValue {
    fn from(v: String) -> Self {
        OscValue::Str(v)
    }
}

impl From<Vec<u8>> for OscValue {
    fn from(v: Vec<u8>) -> Self {
        OscValue::Blob(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OscMessage {
    pub addr: String,
    pub args: Vec<OscValue>,
}

impl OscMessage {
    pub fn new(addr: impl Into<String>, args: Vec<OscValue>) -> Self {
        OscMessage { addr: addr.into(), args }
    }

    /// The type tag string, e.g. `",iis"`.
    pub fn type_tags(&self) -> String {
        std::iter::once(',').chain(self.args.iter().map(OscValue::tag)).collect()
    }
}

impl fmt::Display for OscMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.addr)?;
        for a in &self.args {
            match a {
                OscValue::Int(v) => write!(f, " {v}")?,
                OscValue::Float(v) => write!(f, " {v:?}")?,
                OscValue::Str(s) => write!(f, " {s:?}")?,
                OscValue::Blob(b) => write!(f, " <{} bytes>", b.len())?,
            }
        }
        Ok(())
    }
}

fn valid_address(addr: &str) -> bool {
    addr.starts_with('/') && addr.bytes().all(|b| (b'!'..=b'~').contains(&b))
}

fn pad_to_4(buf: &mut Vec<u8>) {
    while !buf.len().is_multiple_of(4) {
        buf.push(0);
    }
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(s.as_bytes());
    buf.push(0);
    pad_to_4(buf);
}

/// Encodes a message in OSC 1.0 wire form.
pub fn encode(msg: &OscMessage) -> Result<Vec<u8>, OscError> {
    if !valid_address(&msg.addr) {
        return Err(OscError::InvalidAddress(msg.addr.clone()));
    }
    let mut buf = Vec::with_capacity(msg.addr.len() + 8 + msg.args.len() * 8);
    write_str(&mut buf, &msg.addr);
    write_str(&mut buf, &msg.type_tags());
    for arg in &msg.args {
        match arg {
            OscValue::Int(v) => buf.extend_from_slice(&v.to_be_bytes()),
            OscValue::Float(v) => buf.extend_from_slice(&v.to_be_bytes()),
            OscValue::Str(s) => {
                if s.contains('\0') {
                    return Err(OscError::NulInString);
                }
                write_str(&mut buf, s);
            }
            OscValue::Blob(b) => {
                if b.len() > MAX_BLOB_LEN {
                    return Err(OscError::BlobTooLarge(b.len()));
                }
                buf.extend_from_slice(&(b.len() as u32).to_be_bytes());
                buf.extend_from_slice(b);
                pad_to_4(&mut buf);
            }
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], OscError> {
        let end = self.pos.checked_add(n).ok_or(OscError::Truncated)?;
        let out = self.data.get(self.pos..end).ok_or(OscError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn word(&mut self) -> Result<[u8; 4], OscError> {
        Ok(self.take(4)?.try_into().expect("four bytes"))
    }

    fn string(&mut self) -> Result<&'a str, OscError> {
        let rest = &self.data[self.pos..];
        let nul = rest.iter().position(|&b| b == 0).ok_or(OscError::Truncated)?;
        let padded = (nul + 4) & !3;
        let raw = self.take(padded)?;
        std::str::from_utf8(&raw[..nul]).map_err(|_| OscError::InvalidUtf8)
    }

    fn done(&self) -> bool {
        self.pos == self.data.len()
    }
}

/// Decodes a single message (not a bundle).
pub fn decode_message(packet: &[u8]) -> Result<OscMessage, OscError> {
    if !packet.len().is_multiple_of(4) {
        return Err(OscError::Misaligned(packet.len()));
    }
    let mut r = Reader { data: packet, pos: 0 };
    let addr = r.string()?;
    if !valid_address(addr) {
        return Err(OscError::InvalidAddress(addr.to_string()));
    }
    if r.done() {
        return Err(OscError::MissingTypeTags);
    }
    let tags = r.string()?;
    let tags = tags.strip_prefix(',').ok_or(OscError::MissingTypeTags)?;
    let mut args = Vec::with_capacity(tags.len());
    for tag in tags.chars() {
        let value = match tag {
            'i' => OscValue::Int(i32::from_be_bytes(r.word()?)),
            'f' => OscValue::Float(f32::from_be_bytes(r.word()?)),
            's' => OscValue::Str(r.string()?.to_string()),
            'b' => {
                let len = u32::from_be_bytes(r.word()?) as usize;
                if len > MAX_BLOB_LEN {
                    return Err(OscError::BlobTooLarge(len));
                }
                let bytes = r.take(len)?.to_vec();
                r.take((4 - len % 4) % 4)?;
                OscValue::Blob(bytes)
            }
            other => return Err(OscError::UnknownTypeTag(other)),
        };
        args.push(value);
    }
    if !r.done() {
        return Err(OscError::TrailingBytes);
    }
    Ok(OscMessage { addr: addr.to_string(), args })
}

fn decode_into(packet: &[u8], depth: usize, out: &mut Vec<OscMessage>) -> Result<(), OscError> {
    if !packet.len().is_multiple_of(4) {
        return Err(OscError::Misaligned(packet.len()));
    }
    if !packet.starts_with(BUNDLE_TAG) {
        out.push(decode_message(packet)?);
        return Ok(());
    }
    if depth >= MAX_BUNDLE_DEPTH {
        return Err(OscError::BundleTooDeep);
    }
    let mut r = Reader { data: packet, pos: 0 };
    r.take(16)?; // tag + timetag
    while !r.done() {
        let len = u32::from_be_bytes(r.word()?) as usize;
        decode_into(r.take(len)?, depth + 1, out)?;
    }
    Ok(())
}

/// Decodes a packet into its messages. A plain message yields one element; a
/// bundle yields its messages depth-first in order, timetags ignored.
pub fn decode(packet: &[u8]) -> Result<Vec<OscMessage>, OscError> {
    let mut out = Vec::new();
    decode_into(packet, 0, &mut out)?;
    Ok(out)
}
