//! Addresses, argument layouts and message builders.
//!
//! Every request has a fixed reply shape; see `PROTOCOL.md` at the
//! repository root for the table. All times on the wire are float beats.

use std::fmt;

use jammin_core::{beats_to_ticks, ticks_to_beats, NoteEvent, Tick};
use jammin_osc::{OscMessage, OscValue};
use serde::{Deserialize, Serialize};

pub const GET_TEMPO: &str = "/jammin/song/get/tempo";
pub const TEMPO: &str = "/jammin/song/tempo";
pub const GET_TIME_SIG: &str = "/jammin/song/get/time_sig";
pub const TIME_SIG: &str = "/jammin/song/time_sig";
pub const GET_TRACK_NAME: &str = "/jammin/track/get/name";
pub const TRACK_NAME: &str = "/jammin/track/name";
pub const SCAN: &str = "/jammin/scan";
pub const CLIP_INFO: &str = "/jammin/clip/info";
pub const SCAN_DONE: &str = "/jammin/scan/done";
pub const GET_NOTES: &str = "/jammin/clip/get/notes";
pub const NOTES: &str = "/jammin/clip/notes";
pub const NOTES_DONE: &str = "/jammin/clip/notes/done";
pub const CREATE_CLIP: &str = "/jammin/clip/create";
pub const CLEAR_NOTES: &str = "/jammin/clip/clear_notes";
pub const ADD_NOTES: &str = "/jammin/clip/add/notes";
pub const SET_COLOR: &str = "/jammin/clip/set/color";
pub const OK: &str = "/jammin/ok";
pub const ERROR: &str = "/jammin/error";

/// Note groups carried by one notes or add/notes message.
pub const NOTES_PER_MESSAGE: usize = 16;
/// Highest clip color index.
pub const MAX_COLOR: i32 = 69;

/// A clip slot: track column and clip (scene) row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClipAddress {
    pub track: u32,
    pub clip: u32,
}

impl ClipAddress {
    pub fn new(track: u32, clip: u32) -> Self {
        ClipAddress { track, clip }
    }
}

impl fmt::Display for ClipAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.track, self.clip)
    }
}

/// Clip colors used to show job status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColorScheme {
    pub generating: u8,
    pub done: u8,
    pub error: u8,
}

impl Default for ColorScheme {
    fn default() -> Self {
        ColorScheme { generating: 9, done: 18, error: 68 }
    }
}

/// One note as it travels on the wire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireNote {
    pub pitch: i32,
    pub start_beats: f32,
    pub duration_beats: f32,
    pub velocity: i32,
}

impl WireNote {
    pub fn from_note(n: &NoteEvent) -> Self {
        WireNote {
            pitch: i32::from(n.pitch()),
            start_beats: ticks_to_beats(n.start()) as f32,
            duration_beats: ticks_to_beats(n.duration()) as f32,
            velocity: i32::from(n.velocity()),
        }
    }

    /// Converts to ticks, clamping pitch and velocity into range. Negative or
    /// non-finite times become zero.
    pub fn to_note(self) -> NoteEvent {
        let ticks = |b: f32| beats_to_ticks(f64::from(b)).unwrap_or(Tick(0));
        NoteEvent::clamped(
            i64::from(self.pitch),
            ticks(self.start_beats),
            ticks(self.duration_beats),
            i64::from(self.velocity),
        )
    }

    fn push_args(&self, args: &mut Vec<OscValue>) {
        args.extend([
            OscValue::Int(self.pitch),
            OscValue::Float(self.start_beats),
            OscValue::Float(self.duration_beats),
            OscValue::Int(self.velocity),
        ]);
    }
}

/// What one `/jammin/clip/info` reply describes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipInfo {
    pub addr: ClipAddress,
    pub name: String,
    pub has_notes: bool,
    pub color: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    GetTempo,
    GetTimeSig,
    GetTrackName(u32),
    Scan,
    GetNotes(ClipAddress),
    CreateClip(ClipAddress, f32),
    ClearNotes(ClipAddress),
    AddNotes { addr: ClipAddress, seq: i32, notes: Vec<WireNote> },
    SetColor(ClipAddress, i32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Tempo(f32),
    TimeSig(i32, i32),
    TrackName(i32, String),
    ClipInfo(ClipInfo),
    ScanDone(i32),
    Notes { addr: ClipAddress, seq: i32, notes: Vec<WireNote> },
    NotesDone { addr: ClipAddress, total: i32 },
    Ok(String),
    Error { echo: String, reason: String },
}

/// Why a message could not be read as a request or reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Malformed {
    UnknownAddress,
    BadArguments,
    BadSlot,
}

fn slot_args(addr: ClipAddress) -> [OscValue; 2] {
    [OscValue::Int(addr.track as i32), OscValue::Int(addr.clip as i32)]
}

struct Args<'a>(&'a [OscValue]);

impl Args<'_> {
    fn int(&self, i: usize) -> Result<i32, Malformed> {
        self.0.get(i).and_then(OscValue::as_int).ok_or(Malformed::BadArguments)
    }

    fn float(&self, i: usize) -> Result<f32, Malformed> {
        self.0.get(i).and_then(OscValue::as_float).ok_or(Malformed::BadArguments)
    }

    fn string(&self, i: usize) -> Result<String, Malformed> {
        self.0.get(i).and_then(OscValue::as_str).map(str::to_string).ok_or(Malformed::BadArguments)
    }

    fn index(&self, i: usize) -> Result<u32, Malformed> {
        u32::try_from(self.int(i)?).map_err(|_| Malformed::BadSlot)
    }

    fn slot(&self) -> Result<ClipAddress, Malformed> {
        let (t, c) = (self.int(0)?, self.int(1)?);
        match (u32::try_from(t), u32::try_from(c)) {
            (Ok(track), Ok(clip)) => Ok(ClipAddress { track, clip }),
            _ => Err(Malformed::BadSlot),
        }
    }

    fn exactly(&self, n: usize) -> Result<(), Malformed> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(Malformed::BadArguments)
        }
    }

    /// Note groups starting at argument `from`.
    fn notes(&self, from: usize) -> Result<Vec<WireNote>, Malformed> {
        let rest = self.0.len().checked_sub(from).ok_or(Malformed::BadArguments)?;
        if rest % 4 != 0 || rest / 4 > NOTES_PER_MESSAGE {
            return Err(Malformed::BadArguments);
        }
        (0..rest / 4)
            .map(|g| {
                let at = from + g * 4;
                Ok(WireNote {
                    pitch: self.int(at)?,
                    start_beats: self.float(at + 1)?,
                    duration_beats: self.float(at + 2)?,
                    velocity: self.int(at + 3)?,
                })
            })
            .collect()
    }
}

impl Request {
    pub fn address(&self) -> &'static str {
        match self {
            Request::GetTempo => GET_TEMPO,
            Request::GetTimeSig => GET_TIME_SIG,
            Request::GetTrackName(_) => GET_TRACK_NAME,
            Request::Scan => SCAN,
            Request::GetNotes(_) => GET_NOTES,
            Request::CreateClip(..) => CREATE_CLIP,
            Request::ClearNotes(_) => CLEAR_NOTES,
            Request::AddNotes { .. } => ADD_NOTES,
            Request::SetColor(..) => SET_COLOR,
        }
    }

    pub fn to_message(&self) -> OscMessage {
        let args = match self {
            Request::GetTempo | Request::GetTimeSig | Request::Scan => vec![],
            Request::GetTrackName(t) => vec![OscValue::Int(*t as i32)],
            Request::GetNotes(a) | Request::ClearNotes(a) => slot_args(*a).to_vec(),
            Request::CreateClip(a, len) => {
                let mut v = slot_args(*a).to_vec();
                v.push(OscValue::Float(*len));
                v
            }
            Request::AddNotes { addr, seq, notes } => {
                let mut v = slot_args(*addr).to_vec();
                v.push(OscValue::Int(*seq));
                notes.iter().for_each(|n| n.push_args(&mut v));
                v
            }
            Request::SetColor(a, c) => {
                let mut v = slot_args(*a).to_vec();
                v.push(OscValue::Int(*c));
                v
            }
        };
        OscMessage::new(self.address(), args)
    }

    pub fn from_message(m: &OscMessage) -> Result<Request, Malformed> {
        let a = Args(&m.args);
        Ok(match m.addr.as_str() {
            GET_TEMPO => a.exactly(0).map(|_| Request::GetTempo)?,
            GET_TIME_SIG => a.exactly(0).map(|_| Request::GetTimeSig)?,
            SCAN => a.exactly(0).map(|_| Request::Scan)?,
            GET_TRACK_NAME => {
                a.exactly(1)?;
                Request::GetTrackName(a.index(0)?)
            }
            GET_NOTES => {
                a.exactly(2)?;
                Request::GetNotes(a.slot()?)
            }
            CLEAR_NOTES => {
                a.exactly(2)?;
                Request::ClearNotes(a.slot()?)
            }
            CREATE_CLIP => {
                a.exactly(3)?;
                Request::CreateClip(a.slot()?, a.float(2)?)
            }
            ADD_NOTES => {
                let notes = a.notes(3)?;
                Request::AddNotes { addr: a.slot()?, seq: a.int(2)?, notes }
            }
            SET_COLOR => {
                a.exactly(3)?;
                Request::SetColor(a.slot()?, a.int(2)?)
            }
            _ => return Err(Malformed::UnknownAddress),
        })
    }
}

impl Reply {
    pub fn to_message(&self) -> OscMessage {
        match self {
            Reply::Tempo(bpm) => OscMessage::new(TEMPO, vec![OscValue::Float(*bpm)]),
            Reply::TimeSig(n, d) => OscMessage::new(TIME_SIG, vec![OscValue::Int(*n), OscValue::Int(*d)]),
            Reply::TrackName(t, name) => OscMessage::new(TRACK_NAME, vec![OscValue::Int(*t), name.as_str().into()]),
            Reply::ClipInfo(info) => {
                let mut v = slot_args(info.addr).to_vec();
                v.extend([
                    OscValue::Str(info.name.clone()),
                    OscValue::Int(i32::from(info.has_notes)),
                    OscValue::Int(info.color),
                ]);
                OscMessage::new(CLIP_INFO, v)
            }
            Reply::ScanDone(n) => OscMessage::new(SCAN_DONE, vec![OscValue::Int(*n)]),
            Reply::Notes { addr, seq, notes } => {
                let mut v = slot_args(*addr).to_vec();
                v.push(OscValue::Int(*seq));
                notes.iter().for_each(|n| n.push_args(&mut v));
                OscMessage::new(NOTES, v)
            }
            Reply::NotesDone { addr, total } => {
                let mut v = slot_args(*addr).to_vec();
                v.push(OscValue::Int(*total));
                OscMessage::new(NOTES_DONE, v)
            }
            Reply::Ok(echo) => OscMessage::new(OK, vec![echo.as_str().into()]),
            Reply::Error { echo, reason } => {
                OscMessage::new(ERROR, vec![echo.as_str().into(), reason.as_str().into()])
            }
        }
    }

    pub fn from_message(m: &OscMessage) -> Result<Reply, Malformed> {
        let a = Args(&m.args);
        Ok(match m.addr.as_str() {
            TEMPO => {
                a.exactly(1)?;
                Reply::Tempo(a.float(0)?)
            }
            TIME_SIG => {
                a.exactly(2)?;
                Reply::TimeSig(a.int(0)?, a.int(1)?)
            }
            TRACK_NAME => {
                a.exactly(2)?;
                Reply::TrackName(a.int(0)?, a.string(1)?)
            }
            CLIP_INFO => {
                a.exactly(5)?;
                Reply::ClipInfo(ClipInfo {
                    addr: a.slot()?,
                    name: a.string(2)?,
                    has_notes: a.int(3)? != 0,
                    color: a.int(4)?,
                })
            }
            SCAN_DONE => {
                a.exactly(1)?;
                Reply::ScanDone(a.int(0)?)
            }
            NOTES => {
                let notes = a.notes(3)?;
                Reply::Notes { addr: a.slot()?, seq: a.int(2)?, notes }
            }
            NOTES_DONE => {
                a.exactly(3)?;
                Reply::NotesDone { addr: a.slot()?, total: a.int(2)? }
            }
            OK => {
                a.exactly(1)?;
                Reply::Ok(a.string(0)?)
            }
            ERROR => {
                a.exactly(2)?;
                Reply::Error { echo: a.string(0)?, reason: a.string(1)? }
            }
            _ => return Err(Malformed::UnknownAddress),
        })
    }
}

/// Splits notes into add/notes requests of at most [`NOTES_PER_MESSAGE`] groups.
pub fn add_notes_requests(addr: ClipAddress, notes: &[NoteEvent]) -> Vec<Request> {
    notes
        .chunks(NOTES_PER_MESSAGE)
        .enumerate()
        .map(|(seq, chunk)| Request::AddNotes {
            addr,
            seq: seq as i32,
            notes: chunk.iter().map(WireNote::from_note).collect(),
        })
        .collect()
}

/// The full reply to get/notes: notes messages of at most
/// [`NOTES_PER_MESSAGE`] groups, then notes/done.
pub fn notes_replies(addr: ClipAddress, notes: &[NoteEvent]) -> Vec<Reply> {
    let mut out: Vec<Reply> = notes
        .chunks(NOTES_PER_MESSAGE)
        .enumerate()
        .map(|(seq, chunk)| Reply::Notes {
            addr,
            seq: seq as i32,
            notes: chunk.iter().map(WireNote::from_note).collect(),
        })
        .collect();
    out.push(Reply::NotesDone { addr, total: notes.len() as i32 });
    out
}
