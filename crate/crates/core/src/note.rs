//! Integer-tick note model.
//!
//! All musical time is kept as [`Tick`]s at [`PPQ`] pulses per quarter note.
//! Floating-point beats only appear at the wire boundary, through
//! [`beats_to_ticks`] and [`ticks_to_beats`].

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pulses per quarter note.
pub const PPQ: u64 = 480;

/// Track-name fragments that mark a drum track.
pub const DRUM_TRACK_MARKERS: &[&str] = &["drum", "drums", "kit", "perc", "808", "beat"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoteError {
    #[error("beat position must be a finite non-negative number, got {0}")]
    NegativeBeats(f64),
    #[error("pitch {0} outside 0..=127")]
    Pitch(i64),
    #[error("velocity {0} outside 1..=127")]
    Velocity(i64),
    #[error("note duration must be at least one tick")]
    ZeroDuration,
    #[error("invalid time signature {0}/{1}")]
    TimeSig(u32, u32),
    #[error("clip length {length} is not a positive multiple of the bar length {bar}")]
    ClipLength { length: u64, bar: u64 },
    #[error("note at tick {start} starts at or after the clip end {length}")]
    NoteOutsideClip { start: u64, length: u64 },
}

/// A point or span in time, in 1/480 of a quarter note.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);

    pub const fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Add for Tick {
    type Output = Tick;
    fn add(self, rhs: Tick) -> Tick {
        Tick(self.0 + rhs.0)
    }
}

impl AddAssign for Tick {
    fn add_assign(&mut self, rhs: Tick) {
        self.0 += rhs.0;
    }
}

impl Sub for Tick {
    type Output = Tick;
    fn sub(self, rhs: Tick) -> Tick {
        Tick(self.0 - rhs.0)
    }
}

impl Mul<u64> for Tick {
    type Output = Tick;
    fn mul(self, rhs: u64) -> Tick {
        Tick(self.0 * rhs)
    }
}

/// Converts a float beat position to ticks, rounding half away from zero.
pub fn beats_to_ticks(beats: f64) -> Result<Tick, NoteError> {
    if !beats.is_finite() || beats < 0.0 {
        return Err(NoteError::NegativeBeats(beats));
    }
    Ok(Tick((beats * PPQ as f64).round() as u64))
}

pub fn ticks_to_beats(t: Tick) -> f64 {
    t.0 as f64 / PPQ as f64
}

/// A single MIDI note. Construct through [`NoteEvent::new`] or
/// [`NoteEvent::clamped`]; both uphold the range invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NoteEvent {
    // Field order gives the (start, pitch, ...) sort order of a clip.
    start: Tick,
    pitch: u8,
    duration: Tick,
    velocity: u8,
}

impl NoteEvent {
    pub fn new(pitch: i64, start: Tick, duration: Tick, velocity: i64) -> Result<Self, NoteError> {
        if !(0..=127).contains(&pitch) {
            return Err(NoteError::Pitch(pitch));
        }
        if !(1..=127).contains(&velocity) {
            return Err(NoteError::Velocity(velocity));
        }
        if duration.0 == 0 {
            return Err(NoteError::ZeroDuration);
        }
        Ok(NoteEvent {
            start,
            pitch: pitch as u8,
            duration,
            velocity: velocity as u8,
        })
    }

    /// Builds a note, forcing pitch, velocity and duration into range.
    pub fn clamped(pitch: i64, start: Tick, duration: Tick, velocity: i64) -> Self {
        NoteEvent {
            start,
            pitch: pitch.clamp(0, 127) as u8,
            duration: Tick(duration.0.max(1)),
            velocity: velocity.clamp(1, 127) as u8,
        }
    }

    pub fn pitch(&self) -> u8 {
        self.pitch
    }

    pub fn start(&self) -> Tick {
        self.start
    }

    pub fn duration(&self) -> Tick {
        self.duration
    }

    pub fn velocity(&self) -> u8 {
        self.velocity
    }

    pub fn end(&self) -> Tick {
        self.start + self.duration
    }

    pub fn with_velocity(self, velocity: i64) -> Self {
        NoteEvent::clamped(self.pitch as i64, self.start, self.duration, velocity)
    }

    pub fn shifted(self, offset: Tick) -> Self {
        NoteEvent {
            start: self.start + offset,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u32, u32)", into = "(u32, u32)")]
pub struct TimeSig {
    numerator: u32,
    denominator: u32,
}

impl TimeSig {
    pub const COMMON: TimeSig = TimeSig {
        numerator: 4,
        denominator: 4,
    };

    pub fn new(numerator: u32, denominator: u32) -> Result<Self, NoteError> {
        if numerator == 0 || numerator > 64 || ![1, 2, 4, 8, 16, 32].contains(&denominator) {
            return Err(NoteError::TimeSig(numerator, denominator));
        }
        Ok(TimeSig {
            numerator,
            denominator,
        })
    }

    pub fn numerator(&self) -> u32 {
        self.numerator
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    pub fn bar_ticks(&self) -> Tick {
        Tick(self.numerator as u64 * 4 * PPQ / self.denominator as u64)
    }
}

impl Default for TimeSig {
    fn default() -> Self {
        TimeSig::COMMON
    }
}

impl fmt::Display for TimeSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

impl std::str::FromStr for TimeSig {
    type Err = NoteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, d) = s.trim().split_once('/').ok_or(NoteError::TimeSig(0, 0))?;
        let n = n.trim().parse().map_err(|_| NoteError::TimeSig(0, 0))?;
        let d = d.trim().parse().map_err(|_| NoteError::TimeSig(n, 0))?;
        TimeSig::new(n, d)
    }
}

impl TryFrom<(u32, u32)> for TimeSig {
    type Error = NoteError;
    fn try_from((n, d): (u32, u32)) -> Result<Self, Self::Error> {
        TimeSig::new(n, d)
    }
}

impl From<TimeSig> for (u32, u32) {
    fn from(ts: TimeSig) -> Self {
        (ts.numerator, ts.denominator)
    }
}

/// The content of one MIDI clip: sorted notes plus a whole-bar length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClipNotes {
    notes: Vec<NoteEvent>,
    length: Tick,
    time_sig: TimeSig,
}

impl ClipNotes {
    /// Builds a clip with an explicit length, validating every invariant.
    pub fn new(
        mut notes: Vec<NoteEvent>,
        length: Tick,
        time_sig: TimeSig,
    ) -> Result<Self, NoteError> {
        let bar = time_sig.bar_ticks();
        if length.0 == 0 || !length.0.is_multiple_of(bar.0) {
            return Err(NoteError::ClipLength {
                length: length.0,
                bar: bar.0,
            });
        }
        if let Some(n) = notes.iter().find(|n| n.start >= length) {
            return Err(NoteError::NoteOutsideClip {
                start: n.start.0,
                length: length.0,
            });
        }
        notes.sort();
        Ok(ClipNotes {
            notes,
            length,
            time_sig,
        })
    }

    pub fn empty(time_sig: TimeSig) -> Self {
        ClipNotes {
            notes: Vec::new(),
            length: time_sig.bar_ticks(),
            time_sig,
        }
    }

    pub fn notes(&self) -> &[NoteEvent] {
        &self.notes
    }

    pub fn into_notes(self) -> Vec<NoteEvent> {
        self.notes
    }

    pub fn length(&self) -> Tick {
        self.length
    }

    pub fn time_sig(&self) -> TimeSig {
        self.time_sig
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    /// Grows the clip to at least `min_length`, rounded up to a whole bar.
    pub fn with_min_length(mut self, min_length: Tick) -> Self {
        let target = round_up_to_bar(min_length, self.time_sig);
        if target > self.length {
            self.length = target;
        }
        self
    }

    /// Appends notes, growing the clip so every note fits.
    pub fn extended(self, more: impl IntoIterator<Item = NoteEvent>) -> Self {
        let length = self.length;
        let ts = self.time_sig;
        let mut notes = self.notes;
        notes.extend(more);
        normalize_clip(notes, ts).with_min_length(length)
    }
}

fn round_up_to_bar(t: Tick, ts: TimeSig) -> Tick {
    let bar = ts.bar_ticks().0;
    Tick(t.0.div_ceil(bar).max(1) * bar)
}

/// Sorts notes and picks the clip length: the latest note end rounded up to a
/// whole bar, never less than one bar.
pub fn normalize_clip(notes: impl IntoIterator<Item = NoteEvent>, time_sig: TimeSig) -> ClipNotes {
    let mut notes: Vec<NoteEvent> = notes.into_iter().collect();
    notes.sort();
    let last_end = notes.iter().map(NoteEvent::end).max().unwrap_or(Tick::ZERO);
    ClipNotes {
        length: round_up_to_bar(last_end, time_sig),
        notes,
        time_sig,
    }
}

/// Musical context of the track a clip lives on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackContext {
    track_name: String,
    tempo_bpm: f64,
    time_sig: TimeSig,
    is_drum: bool,
}

impl TrackContext {
    pub fn new(track_name: impl Into<String>, tempo_bpm: f64, time_sig: TimeSig) -> Self {
        let track_name = track_name.into();
        let lower = track_name.to_lowercase();
        let is_drum = DRUM_TRACK_MARKERS.iter().any(|m| lower.contains(m));
        let tempo_bpm = if tempo_bpm.is_finite() && tempo_bpm > 0.0 {
            tempo_bpm
        } else {
            120.0
        };
        TrackContext {
            track_name,
            tempo_bpm,
            time_sig,
            is_drum,
        }
    }

    pub fn track_name(&self) -> &str {
        &self.track_name
    }

    pub fn tempo_bpm(&self) -> f64 {
        self.tempo_bpm
    }

    pub fn time_sig(&self) -> TimeSig {
        self.time_sig
    }

    pub fn is_drum(&self) -> bool {
        self.is_drum
    }
}
