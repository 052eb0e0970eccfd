//! A simulated DAW: a grid of tracks and MIDI clips that answers the
//! protocol, loads scenarios from JSON and logs every change it makes.

use std::fmt;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use jammin_core::{beats_to_ticks, ticks_to_beats, ClipNotes, NoteEvent, Tick, TimeSig};
use jammin_osc::{OscMessage, OscTransport, TransportError};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::protocol::{notes_replies, ClipAddress, ClipInfo, Malformed, Reply, Request, MAX_COLOR};

/// Color given to clips the simulator creates.
pub const DEFAULT_CLIP_COLOR: u8 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("no such track")]
    NoSuchTrack,
    #[error("no such clip slot")]
    NoSuchSlot,
    #[error("no clip in slot")]
    EmptySlot,
    #[error("color out of range")]
    ColorOutOfRange,
    #[error("bad arguments")]
    BadArguments,
    #[error("unknown address")]
    UnknownAddress,
    #[error("bad control command: {0}")]
    BadCommand(String),
}

/// A scenario file problem, located by JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pointer}: {message}")]
pub struct ScenarioError {
    pub pointer: String,
    pub message: String,
}

fn scenario_err(pointer: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError { pointer: if pointer.is_empty() { "/".into() } else { pointer.into() }, message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimClip {
    pub name: String,
    pub color: u8,
    pub notes: ClipNotes,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTrack {
    pub name: String,
    pub clips: Vec<Option<SimClip>>,
}

/// The whole simulated set. Every track has the same number of clip slots.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSet {
    pub tempo_bpm: f64,
    pub time_sig: TimeSig,
    pub tracks: Vec<SimTrack>,
}

impl SimSet {
    /// A set of empty tracks with `slots` clip slots each.
    pub fn empty(tempo_bpm: f64, time_sig: TimeSig, track_names: &[&str], slots: usize) -> Self {
        SimSet {
            tempo_bpm,
            time_sig,
            tracks: track_names
                .iter()
                .map(|n| SimTrack { name: n.to_string(), clips: vec![None; slots] })
                .collect(),
        }
    }

    pub fn track(&self, track: u32) -> Result<&SimTrack, SimError> {
        self.tracks.get(track as usize).ok_or(SimError::NoSuchTrack)
    }

    pub fn slot(&self, addr: ClipAddress) -> Result<Option<&SimClip>, SimError> {
        let t = self.track(addr.track)?;
        t.clips.get(addr.clip as usize).map(Option::as_ref).ok_or(SimError::NoSuchSlot)
    }

    fn slot_mut(&mut self, addr: ClipAddress) -> Result<&mut Option<SimClip>, SimError> {
        let t = self.tracks.get_mut(addr.track as usize).ok_or(SimError::NoSuchTrack)?;
        t.clips.get_mut(addr.clip as usize).ok_or(SimError::NoSuchSlot)
    }

    pub fn clip(&self, addr: ClipAddress) -> Result<&SimClip, SimError> {
        self.slot(addr)?.ok_or(SimError::EmptySlot)
    }

    fn clip_mut(&mut self, addr: ClipAddress) -> Result<&mut SimClip, SimError> {
        self.slot_mut(addr)?.as_mut().ok_or(SimError::EmptySlot)
    }

    /// Occupied slots in track-major order.
    pub fn clips(&self) -> impl Iterator<Item = (ClipAddress, &SimClip)> {
        self.tracks.iter().enumerate().flat_map(|(t, track)| {
            track.clips.iter().enumerate().filter_map(move |(c, slot)| {
                slot.as_ref().map(|clip| (ClipAddress::new(t as u32, c as u32), clip))
            })
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SimSet, ScenarioError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| scenario_err("", format!("cannot read {}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<SimSet, ScenarioError> {
        let v: Value = serde_json::from_str(text).map_err(|e| scenario_err("", format!("invalid JSON: {e}")))?;
        parse_set(&v)
    }

    /// The scenario form of this set. Loading it gives back an equal set.
    pub fn to_json(&self) -> Value {
        let tracks: Vec<Value> = self
            .tracks
            .iter()
            .map(|t| {
                let clips: Vec<Value> = t
                    .clips
                    .iter()
                    .map(|slot| match slot {
                        None => Value::Null,
                        Some(c) => json!({
                            "name": c.name,
                            "color": c.color,
                            "length_beats": ticks_to_beats(c.notes.length()),
                            "notes": c.notes.notes().iter().map(|n| json!([
                                n.pitch(),
                                ticks_to_beats(n.start()),
                                ticks_to_beats(n.duration()),
                                n.velocity(),
                            ])).collect::<Vec<_>>(),
                        }),
                    })
                    .collect();
                json!({ "name": t.name, "clips": clips })
            })
            .collect();
        json!({
            "tempo": self.tempo_bpm,
            "time_sig": [self.time_sig.numerator(), self.time_sig.denominator()],
            "tracks": tracks,
        })
    }

    /// Pretty-printed scenario JSON; identical sets give identical bytes.
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("serializable");
        s.push('\n');
        s
    }
}

fn expect_object<'a>(v: &'a Value, ptr: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>, ScenarioError> {
    let obj = v.as_object().ok_or_else(|| scenario_err(ptr, "expected an object"))?;
    if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(scenario_err(&format!("{ptr}/{k}"), "unknown field"));
    }
    Ok(obj)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, ptr: &str) -> Result<&'a Value, ScenarioError> {
    obj.get(key).ok_or_else(|| scenario_err(&format!("{ptr}/{key}"), "missing field"))
}

fn int_in(v: &Value, ptr: &str, lo: i64, hi: i64) -> Result<i64, ScenarioError> {
    let n = v
        .as_i64()
        .or_else(|| v.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
        .ok_or_else(|| scenario_err(ptr, "expected an integer"))?;
    if !(lo..=hi).contains(&n) {
        return Err(scenario_err(ptr, format!("{n} outside {lo}..={hi}")));
    }
    Ok(n)
}

fn beats(v: &Value, ptr: &str) -> Result<Tick, ScenarioError> {
    let b = v.as_f64().ok_or_else(|| scenario_err(ptr, "expected a number of beats"))?;
    beats_to_ticks(b).map_err(|_| scenario_err(ptr, "beats must be non-negative"))
}

fn parse_set(v: &Value) -> Result<SimSet, ScenarioError> {
    let root = expect_object(v, "", &["tempo", "time_sig", "tracks"])?;
    let tempo = field(root, "tempo", "")?
        .as_f64()
        .filter(|t| t.is_finite() && *t > 0.0)
        .ok_or_else(|| scenario_err("/tempo", "expected a positive number"))?;
    let ts_v = field(root, "time_sig", "")?;
    let ts = match ts_v.as_array().map(Vec::as_slice) {
        Some([n, d]) => {
            let n = int_in(n, "/time_sig/0", 1, 64)? as u32;
            let d = int_in(d, "/time_sig/1", 1, 32)? as u32;
            TimeSig::new(n, d).map_err(|e| scenario_err("/time_sig", e.to_string()))?
        }
        _ => return Err(scenario_err("/time_sig", "expected [numerator, denominator]")),
    };
    let tracks_v = field(root, "tracks", "")?.as_array().ok_or_else(|| scenario_err("/tracks", "expected an array"))?;
    let mut tracks = Vec::with_capacity(tracks_v.len());
    for (ti, tv) in tracks_v.iter().enumerate() {
        let tp = format!("/tracks/{ti}");
        let t = expect_object(tv, &tp, &["name", "clips"])?;
        let name = field(t, "name", &tp)?
            .as_str()
            .ok_or_else(|| scenario_err(&format!("{tp}/name"), "expected a string"))?
            .to_string();
        let clips_v = field(t, "clips", &tp)?
            .as_array()
            .ok_or_else(|| scenario_err(&format!("{tp}/clips"), "expected an array"))?;
        if let Some(first) = tracks.first() {
            let SimTrack { clips, .. } = first;
            if clips.len() != clips_v.len() {
                return Err(scenario_err(
                    &format!("{tp}/clips"),
                    format!("expected {} slots like /tracks/0, found {}", clips.len(), clips_v.len()),
                ));
            }
        }
        let clips = clips_v
            .iter()
            .enumerate()
            .map(|(ci, cv)| parse_clip(cv, &format!("{tp}/clips/{ci}"), ts))
            .collect::<Result<Vec<_>, _>>()?;
        tracks.push(SimTrack { name, clips });
    }
    Ok(SimSet { tempo_bpm: tempo, time_sig: ts, tracks })
}

fn parse_clip(v: &Value, ptr: &str, ts: TimeSig) -> Result<Option<SimClip>, ScenarioError> {
    if v.is_null() {
        return Ok(None);
    }
    let c = expect_object(v, ptr, &["name", "color", "length_beats", "notes"])?;
    let name = match c.get("name") {
        None => String::new(),
        Some(n) => n.as_str().ok_or_else(|| scenario_err(&format!("{ptr}/name"), "expected a string"))?.to_string(),
    };
    let color = match c.get("color") {
        None => DEFAULT_CLIP_COLOR,
        Some(n) => int_in(n, &format!("{ptr}/color"), 0, i64::from(MAX_COLOR))? as u8,
    };
    let mut notes = Vec::new();
    if let Some(nv) = c.get("notes") {
        let arr = nv.as_array().ok_or_else(|| scenario_err(&format!("{ptr}/notes"), "expected an array"))?;
        for (ni, n) in arr.iter().enumerate() {
            let np = format!("{ptr}/notes/{ni}");
            let Some([p, s, d, vel]) = n.as_array().map(Vec::as_slice) else {
                return Err(scenario_err(&np, "expected [pitch, start_beats, duration_beats, velocity]"));
            };
            let pitch = int_in(p, &format!("{np}/0"), 0, 127)?;
            let start = beats(s, &format!("{np}/1"))?;
            let dur = beats(d, &format!("{np}/2"))?;
            let velocity = int_in(vel, &format!("{np}/3"), 1, 127)?;
            let note = NoteEvent::new(pitch, start, dur, velocity).map_err(|e| scenario_err(&format!("{np}/2"), e.to_string()))?;
            notes.push(note);
        }
    }
    let mut clip = jammin_core::normalize_clip(notes, ts);
    if let Some(lv) = c.get("length_beats") {
        let lp = format!("{ptr}/length_beats");
        let length = beats(lv, &lp)?;
        clip = ClipNotes::new(clip.into_notes(), length, ts).map_err(|e| scenario_err(&lp, e.to_string()))?;
    }
    Ok(Some(SimClip { name, color, notes: clip }))
}

/// A state change the simulator made.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    CreateClip { addr: ClipAddress, length: Tick },
    ClearNotes { addr: ClipAddress },
    AddNotes { addr: ClipAddress, notes: Vec<NoteEvent> },
    SetColor { addr: ClipAddress, color: u8 },
    Rename { addr: ClipAddress, name: String },
}

impl Mutation {
    pub fn apply(&self, set: &mut SimSet) -> Result<(), SimError> {
        let ts = set.time_sig;
        match self {
            Mutation::CreateClip { addr, length } => {
                let slot = set.slot_mut(*addr)?;
                if slot.is_none() {
                    *slot = Some(SimClip {
                        name: String::new(),
                        color: DEFAULT_CLIP_COLOR,
                        notes: ClipNotes::empty(ts).with_min_length(*length),
                    });
                }
            }
            Mutation::ClearNotes { addr } => {
                let clip = set.clip_mut(*addr)?;
                let length = clip.notes.length();
                clip.notes = ClipNotes::empty(ts).with_min_length(length);
            }
            Mutation::AddNotes { addr, notes } => {
                let clip = set.clip_mut(*addr)?;
                clip.notes = clip.notes.clone().extended(notes.iter().copied());
            }
            Mutation::SetColor { addr, color } => set.clip_mut(*addr)?.color = *color,
            Mutation::Rename { addr, name } => {
                let slot = set.slot_mut(*addr)?;
                match slot {
                    Some(c) => c.name = name.clone(),
                    None => {
                        *slot = Some(SimClip { name: name.clone(), color: DEFAULT_CLIP_COLOR, notes: ClipNotes::empty(ts) })
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub seq: u64,
    /// The request as text, or `control: ...` for injected events.
    pub request: String,
    /// Reply addresses, space separated.
    pub replies: String,
    pub mutation: Option<Mutation>,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {} -> {}", self.seq, self.request, self.replies)?;
        if let Some(m) = &self.mutation {
            write!(f, " [{m:?}]")?;
        }
        Ok(())
    }
}

/// Append-only record of everything the simulator handled.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    entries: Vec<LogEntry>,
}

impl EventLog {
    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    fn push(&mut self, request: String, replies: String, mutation: Option<Mutation>) {
        let seq = self.entries.last().map_or(1, |e| e.seq + 1);
        self.entries.push(LogEntry { seq, request, replies, mutation });
    }

    pub fn mutations(&self) -> impl Iterator<Item = &Mutation> {
        self.entries.iter().filter_map(|e| e.mutation.as_ref())
    }

    /// Rebuilds the final state by applying every logged mutation to `initial`.
    pub fn replay(&self, initial: &SimSet) -> Result<SimSet, SimError> {
        let mut set = initial.clone();
        for m in self.mutations() {
            m.apply(&mut set)?;
        }
        Ok(set)
    }
}

/// A command typed on the simulator's control channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Control {
    Rename { addr: ClipAddress, name: String },
    Show,
    Log,
    Quit,
}

impl Control {
    /// Parses `rename T C NAME`, `show`, `log` or `quit`.
    pub fn parse(line: &str) -> Result<Control, SimError> {
        let line = line.trim();
        let (cmd, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match cmd {
            "rename" => {
                let mut parts = rest.trim_start().splitn(3, char::is_whitespace);
                let bad = || SimError::BadCommand("usage: rename TRACK CLIP NAME".into());
                let track = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
                let clip = parts.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
                let name = parts.next().map(str::trim).unwrap_or("");
                let name = name.strip_prefix('"').and_then(|n| n.strip_suffix('"')).unwrap_or(name);
                Ok(Control::Rename { addr: ClipAddress::new(track, clip), name: name.to_string() })
            }
            "show" => Ok(Control::Show),
            "log" => Ok(Control::Log),
            "quit" | "exit" => Ok(Control::Quit),
            other => Err(SimError::BadCommand(format!("unknown command {other:?}"))),
        }
    }
}

/// The simulated DAW: a set plus its event log.
#[derive(Debug, Clone)]
pub struct Simulator {
    set: SimSet,
    log: EventLog,
}

impl Simulator {
    pub fn new(set: SimSet) -> Self {
        Simulator { set, log: EventLog::default() }
    }

    pub fn set(&self) -> &SimSet {
        &self.set
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// Answers one protocol request.
    pub fn handle(&mut self, msg: &OscMessage) -> Vec<OscMessage> {
        let (replies, mutation) = match Request::from_message(msg) {
            Ok(req) => self.handle_request(&req, &msg.addr),
            Err(e) => {
                let err = match e {
                    Malformed::UnknownAddress => SimError::UnknownAddress,
                    Malformed::BadArguments => SimError::BadArguments,
                    Malformed::BadSlot => SimError::NoSuchSlot,
                };
                (vec![error_reply(&msg.addr, &err)], None)
            }
        };
        let messages: Vec<OscMessage> = replies.iter().map(Reply::to_message).collect();
        let summary = summarize(&messages);
        self.log.push(msg.to_string(), summary, mutation);
        messages
    }

    fn handle_request(&mut self, req: &Request, echo: &str) -> (Vec<Reply>, Option<Mutation>) {
        match self.try_request(req, echo) {
            Ok(r) => r,
            Err(e) => (vec![error_reply(echo, &e)], None),
        }
    }

    fn try_request(&mut self, req: &Request, echo: &str) -> Result<(Vec<Reply>, Option<Mutation>), SimError> {
        let ok = || vec![Reply::Ok(echo.to_string())];
        let set = &self.set;
        let mutation = match req {
            Request::GetTempo => return Ok((vec![Reply::Tempo(set.tempo_bpm as f32)], None)),
            Request::GetTimeSig => {
                let ts = set.time_sig;
                return Ok((vec![Reply::TimeSig(ts.numerator() as i32, ts.denominator() as i32)], None));
            }
            Request::GetTrackName(t) => {
                let name = set.track(*t)?.name.clone();
                return Ok((vec![Reply::TrackName(*t as i32, name)], None));
            }
            Request::Scan => {
                let mut replies: Vec<Reply> = set
                    .clips()
                    .map(|(addr, c)| {
                        Reply::ClipInfo(ClipInfo {
                            addr,
                            name: c.name.clone(),
                            has_notes: !c.notes.is_empty(),
                            color: i32::from(c.color),
                        })
                    })
                    .collect();
                replies.push(Reply::ScanDone(replies.len() as i32));
                return Ok((replies, None));
            }
            Request::GetNotes(addr) => return Ok((notes_replies(*addr, set.clip(*addr)?.notes.notes()), None)),
            Request::CreateClip(addr, length_beats) => {
                if set.slot(*addr)?.is_some() {
                    return Ok((ok(), None));
                }
                let length = beats_to_ticks(f64::from(*length_beats)).map_err(|_| SimError::BadArguments)?;
                Mutation::CreateClip { addr: *addr, length }
            }
            Request::ClearNotes(addr) => Mutation::ClearNotes { addr: *addr },
            Request::AddNotes { addr, notes, .. } => {
                Mutation::AddNotes { addr: *addr, notes: notes.iter().map(|n| n.to_note()).collect() }
            }
            Request::SetColor(addr, color) => {
                set.clip(*addr)?;
                let color = u8::try_from(*color).ok().filter(|c| i32::from(*c) <= MAX_COLOR).ok_or(SimError::ColorOutOfRange)?;
                Mutation::SetColor { addr: *addr, color }
            }
        };
        mutation.apply(&mut self.set)?;
        Ok((ok(), Some(mutation)))
    }

    /// A user typing a clip name. Empty slots gain an empty clip.
    pub fn inject_rename(&mut self, addr: ClipAddress, name: &str) -> Result<(), SimError> {
        let m = Mutation::Rename { addr, name: name.to_string() };
        m.apply(&mut self.set)?;
        self.log.push(format!("control: rename {} {} {name:?}", addr.track, addr.clip), "-".into(), Some(m));
        Ok(())
    }

    /// Runs a control command, returning the text to show the user.
    pub fn control(&mut self, cmd: &Control) -> Result<String, SimError> {
        match cmd {
            Control::Rename { addr, name } => {
                self.inject_rename(*addr, name)?;
                Ok(format!("renamed {addr} to {name:?}"))
            }
            Control::Show => Ok(self.set.to_json_string()),
            Control::Log => Ok(self.log.entries().iter().map(|e| format!("{e}\n")).collect()),
            Control::Quit => Ok(String::new()),
        }
    }
}

fn error_reply(echo: &str, e: &SimError) -> Reply {
    Reply::Error { echo: echo.to_string(), reason: e.to_string() }
}

fn summarize(messages: &[OscMessage]) -> String {
    match messages {
        [one] => one.to_string(),
        many => format!("{} replies ending {}", many.len(), many.last().map_or("", |m| m.addr.as_str())),
    }
}

/// A simulator answering the protocol over UDP.
pub struct SimServer {
    sim: Arc<Mutex<Simulator>>,
    transport: OscTransport,
}

impl SimServer {
    pub fn start(sim: Simulator, local: impl ToSocketAddrs + fmt::Debug) -> Result<SimServer, TransportError> {
        let sim = Arc::new(Mutex::new(sim));
        let mut transport = OscTransport::bind(local)?;
        let sender = transport.sender();
        let shared = Arc::clone(&sim);
        transport.start(move |msg, from| {
            let replies = shared.lock().expect("simulator lock").handle(&msg);
            for r in replies {
                if let Err(e) = sender.send_to(&r, from) {
                    tracing::warn!(error = %e, "simulator reply not sent");
                }
            }
        })?;
        Ok(SimServer { sim, transport })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.transport.local_addr().expect("bound socket")
    }

    /// Locks the simulator for direct inspection or control.
    pub fn sim(&self) -> MutexGuard<'_, Simulator> {
        self.sim.lock().expect("simulator lock")
    }

    pub fn shared(&self) -> Arc<Mutex<Simulator>> {
        Arc::clone(&self.sim)
    }

    pub fn dropped(&self) -> u64 {
        self.transport.dropped()
    }

    pub fn stop(mut self) -> Simulator {
        self.transport.close();
        let sim = self.sim.lock().expect("simulator lock").clone();
        sim
    }
}
