//! Core musical types shared by the jammin daemon, simulator and CLI.
//!
//! [`note`] holds the integer-tick note model, [`music_text`] the parsers for
//! the text formats a language model answers in (ABC, chord symbols, drum
//! tablature) and [`smf`] a minimal Standard MIDI File writer.

pub mod music_text;
pub mod note;
pub mod smf;

pub use music_text::{FormatTag, MusicText, MusicTextError};
pub use note::{
    beats_to_ticks, normalize_clip, ticks_to_beats, ClipNotes, NoteError, NoteEvent, Tick,
    TimeSig, TrackContext, PPQ,
};
