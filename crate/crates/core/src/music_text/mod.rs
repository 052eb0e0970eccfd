//! Text music formats a language model can answer in, and their parsers.
//!
//! Three formats are understood: a subset of ABC notation ([`abc`]), bar-based
//! chord symbol charts ([`chords`]) and drum tablature ([`drumtab`]). The
//! grammars are documented in `docs/FORMATS.md` at the repository root.

pub mod abc;
pub mod chords;
pub mod drumtab;
mod extract;
mod render;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::note::{ClipNotes, NoteError, TimeSig};

pub use abc::{parse_abc, AbcHeader, KeySig, Mode};
pub use chords::{chord_symbol_to_pitches, parse_chords, ChordPitches};
pub use drumtab::parse_drumtab;
pub use extract::extract_music_block;
pub use render::{quantize, render_abc, RENDER_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatTag {
    Abc,
    #[serde(rename = "chords")]
    ChordSymbols,
    #[serde(rename = "drumtab")]
    DrumTab,
}

impl FormatTag {
    pub const ALL: [FormatTag; 3] = [FormatTag::Abc, FormatTag::ChordSymbols, FormatTag::DrumTab];

    /// Short name used for fence tags, fixture directories and the CLI.
    pub fn as_str(self) -> &'static str {
        match self {
            FormatTag::Abc => "abc",
            FormatTag::ChordSymbols => "chords",
            FormatTag::DrumTab => "drumtab",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            FormatTag::Abc => "ABC notation",
            FormatTag::ChordSymbols => "chord symbols",
            FormatTag::DrumTab => "drum tablature",
        }
    }
}

impl fmt::Display for FormatTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatTag {
    type Err = MusicTextError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abc" => Ok(FormatTag::Abc),
            "chords" | "chord" => Ok(FormatTag::ChordSymbols),
            "drumtab" | "drums" => Ok(FormatTag::DrumTab),
            other => Err(MusicTextError::UnknownFormat(other.to_string())),
        }
    }
}

/// A music block pulled out of a model reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MusicText {
    format: FormatTag,
    body: String,
}

impl MusicText {
    pub fn new(format: FormatTag, body: impl Into<String>) -> Result<Self, MusicTextError> {
        let body = body.into().trim().to_string();
        if body.is_empty() {
            return Err(MusicTextError::EmptyBody);
        }
        Ok(MusicText { format, body })
    }

    pub fn format(&self) -> FormatTag {
        self.format
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MusicTextError {
    #[error("unknown music format {0:?}")]
    UnknownFormat(String),
    #[error("music block is empty")]
    EmptyBody,
    #[error("ABC tune has no K: (key) header before the music")]
    MissingKey,
    #[error("bad ABC header {field}:{value}")]
    BadHeader { field: char, value: String },
    #[error("unsupported key {0:?}: only major and minor keys are understood")]
    UnsupportedKey(String),
    #[error("unexpected {token:?} at line {line}, column {column}")]
    UnknownToken {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("unsupported tuplet {token:?} at line {line}: only (3 triplets are understood")]
    UnsupportedTuplet { line: usize, token: String },
    #[error("voices (V:) are not supported")]
    Voices,
    #[error("note at line {line} falls outside the MIDI pitch range")]
    PitchRange { line: usize },
    #[error("note at tick {start} with duration {duration} is off the 30-tick grid; quantize first")]
    QuantizationRequired { start: u64, duration: u64 },
    #[error("bad chord symbol {token:?}: {reason}")]
    BadChord { token: String, reason: &'static str },
    #[error("'%' in bar {bar} has no previous bar to repeat")]
    RepeatWithoutBar { bar: usize },
    #[error("'%' must be the only token in bar {bar}")]
    RepeatNotAlone { bar: usize },
    #[error("'/' in bar {bar} has no chord to extend")]
    NothingToExtend { bar: usize },
    #[error("bar {bar} has {slots} slots, which do not divide the {bar_ticks}-tick bar evenly")]
    UnevenBar { bar: usize, slots: usize, bar_ticks: u64 },
    #[error("unknown drum label {0:?}")]
    UnknownDrumLabel(String),
    #[error("unknown drum pattern character {ch:?} on line {label}")]
    UnknownDrumChar { label: String, ch: char },
    #[error("drum line {label} is not of the form LABEL|pattern|pattern|")]
    MalformedDrumLine { label: String },
    #[error("bar {segment} has {expected} steps on one line but {found} on line {label}")]
    SegmentMismatch {
        segment: usize,
        expected: usize,
        found: usize,
        label: String,
    },
    #[error("bar {segment} has {steps} steps, which do not divide the {bar_ticks}-tick bar evenly")]
    IndivisibleSteps { segment: usize, steps: usize, bar_ticks: u64 },
    #[error("reply contains no recognizable ABC, chord symbol or drum tablature block")]
    UnparseableReply,
    #[error("expected a {expected} block but the reply contains a {found} block")]
    FormatMismatch { expected: FormatTag, found: FormatTag },
    #[error(transparent)]
    Note(#[from] NoteError),
}

/// Parses a block body in the given format. ABC carries its own meter, the
/// other formats use `time_sig`.
pub fn parse_as(format: FormatTag, body: &str, time_sig: TimeSig) -> Result<ClipNotes, MusicTextError> {
    match format {
        FormatTag::Abc => parse_abc(body).map(|(clip, _)| clip),
        FormatTag::ChordSymbols => parse_chords(body, time_sig),
        FormatTag::DrumTab => parse_drumtab(body, time_sig),
    }
}
