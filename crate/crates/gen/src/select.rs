//! Choosing which text format a clip is generated in.

use std::sync::OnceLock;

use jammin_core::{FormatTag, TrackContext};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, Prompt, Purpose};
use crate::prompt::build_choose_prompt;

/// Clip-name words that ask for drums.
pub const DRUM_WORDS: &[&str] = &["drum", "drums", "beat", "groove", "percussion", "fill"];
/// Clip-name words that ask for chord symbols.
pub const CHORD_WORDS: &[&str] = &["chord", "chords", "progression", "harmony", "pad", "pads"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    #[default]
    Keyword,
    Model,
}

/// A format decision and, when the model could not decide, why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub format: FormatTag,
    pub fallback: Option<String>,
}

fn has_word(name: &str, words: &[&str]) -> bool {
    name.split(|c: char| !c.is_alphanumeric())
        .any(|w| words.iter().any(|k| w.eq_ignore_ascii_case(k)))
}

/// Picks a format from the clip and track names alone.
///
/// Drum tracks always get drum tab; otherwise drum words beat chord words,
/// and everything else is ABC.
pub fn select_by_keyword(clip_name: &str, track: &TrackContext) -> FormatTag {
    if track.is_drum() || has_word(clip_name, DRUM_WORDS) {
        FormatTag::DrumTab
    } else if has_word(clip_name, CHORD_WORDS) {
        FormatTag::ChordSymbols
    } else {
        FormatTag::Abc
    }
}

fn format_in_reply(reply: &str) -> Option<FormatTag> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)abc|chord|drum").expect("valid regex"));
    let m = re.find(reply)?;
    Some(match m.as_str().to_ascii_lowercase().as_str() {
        "abc" => FormatTag::Abc,
        "chord" => FormatTag::ChordSymbols,
        _ => FormatTag::DrumTab,
    })
}

/// Asks the backend to choose a format, falling back to
/// [`select_by_keyword`] when the reply names none or the call fails.
pub fn select_by_model(clip_name: &str, track: &TrackContext, backend: &dyn Backend) -> Selection {
    let prompt = Prompt {
        messages: build_choose_prompt(clip_name, track),
        purpose: Purpose::Choose,
        clip_name: clip_name.to_string(),
    };
    let fallback = |reason: String| {
        let format = select_by_keyword(clip_name, track);
        tracing::info!(clip = clip_name, %format, reason = %reason, "format choice fell back to keywords");
        Selection { format, fallback: Some(reason) }
    };
    match backend.complete(&prompt) {
        Ok(reply) => match format_in_reply(&reply) {
            Some(format) => Selection { format, fallback: None },
            None => fallback(format!("reply named no format: {:?}", reply.chars().take(80).collect::<String>())),
        },
        Err(e) => fallback(format!("backend error: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use jammin_core::TimeSig;

    fn track(name: &str) -> TrackContext {
        TrackContext::new(name, 120.0, TimeSig::COMMON)
    }

    #[test]
    fn keyword_precedence() {
        assert_eq!(select_by_keyword("jazzy chords", &track("Keys")), FormatTag::ChordSymbols);
        assert_eq!(select_by_keyword("funky bassline", &track("Bass")), FormatTag::Abc);
        assert_eq!(select_by_keyword("anything", &track("Drum Rack")), FormatTag::DrumTab);
        assert_eq!(select_by_keyword("chordal drum groove", &track("Keys")), FormatTag::DrumTab);
    }

    #[test]
    fn words_match_whole_words_only() {
        assert_eq!(select_by_keyword("chordal melody", &track("Keys")), FormatTag::Abc);
        assert_eq!(select_by_keyword("drumming", &track("Keys")), FormatTag::Abc);
        assert_eq!(select_by_keyword("warm PAD", &track("Keys")), FormatTag::ChordSymbols);
        assert_eq!(select_by_keyword("ii-V-I progression!", &track("Keys")), FormatTag::ChordSymbols);
        assert_eq!(select_by_keyword("drum-fill", &track("Keys")), FormatTag::DrumTab);
    }

    #[test]
    fn reply_parsing() {
        assert_eq!(format_in_reply("I choose: drumtab"), Some(FormatTag::DrumTab));
        assert_eq!(format_in_reply("Chord symbols fit best"), Some(FormatTag::ChordSymbols));
        assert_eq!(format_in_reply("ABC, not chords"), Some(FormatTag::Abc));
        assert_eq!(format_in_reply("sheet music"), None);
    }
}
