//! Prompt construction from the versioned templates under `prompts/`.

use std::sync::OnceLock;

use jammin_core::music_text::drumtab::DRUM_LABELS;
use jammin_core::{FormatTag, TrackContext};
use regex::Regex;
use serde::{Deserialize, Serialize};

/// Template set compiled into the binary.
pub const PROMPT_VERSION: &str = "v1";

mod templates {
    pub const SYSTEM_GENERATE: &str = include_str!("../prompts/v1/system_generate.txt");
    pub const SYSTEM_EDIT: &str = include_str!("../prompts/v1/system_edit.txt");
    pub const SYSTEM_CHOOSE: &str = include_str!("../prompts/v1/system_choose.txt");
    pub const USER_GENERATE: &str = include_str!("../prompts/v1/user_generate.txt");
    pub const USER_EDIT: &str = include_str!("../prompts/v1/user_edit.txt");
    pub const USER_CHOOSE: &str = include_str!("../prompts/v1/user_choose.txt");
    pub const CORRECTIVE: &str = include_str!("../prompts/v1/corrective.txt");
    pub const GRAMMAR_ABC: &str = include_str!("../prompts/v1/grammar_abc.txt");
    pub const GRAMMAR_CHORDS: &str = include_str!("../prompts/v1/grammar_chords.txt");
    pub const GRAMMAR_DRUMTAB: &str = include_str!("../prompts/v1/grammar_drumtab.txt");
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

/// Everything a generation or edit prompt is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GenRequest {
    pub clip_name: String,
    pub track: TrackContext,
    pub format: FormatTag,
    pub bars_hint: Option<u32>,
    /// The clip's current content rendered as ABC; present only for edits.
    pub existing: Option<String>,
}

impl GenRequest {
    pub fn generate(clip_name: impl Into<String>, track: TrackContext, format: FormatTag) -> Self {
        let clip_name = clip_name.into();
        GenRequest { bars_hint: bars_hint(&clip_name), clip_name, track, format, existing: None }
    }

    /// An edit request. Edits always answer in ABC, the format `existing` is in.
    pub fn edit(clip_name: impl Into<String>, track: TrackContext, existing: impl Into<String>) -> Self {
        let clip_name = clip_name.into();
        GenRequest {
            bars_hint: bars_hint(&clip_name),
            clip_name,
            track,
            format: FormatTag::Abc,
            existing: Some(existing.into()),
        }
    }

    pub fn is_edit(&self) -> bool {
        self.existing.is_some()
    }
}

/// Bar count written in a clip name, as in "4 bar bassline" or "8bars".
pub fn bars_hint(clip_name: &str) -> Option<u32> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)(\d+)\s*bars?\b").expect("valid regex"));
    re.captures(clip_name)
        .and_then(|c| c[1].parse::<u32>().ok())
        .filter(|&n| n > 0)
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out.trim_end().to_string()
}

fn drum_legend() -> String {
    DRUM_LABELS
        .iter()
        .map(|(label, pitch, what)| format!("  {label} = {what} (note {pitch})"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn grammar(format: FormatTag) -> String {
    match format {
        FormatTag::Abc => templates::GRAMMAR_ABC.trim_end().to_string(),
        FormatTag::ChordSymbols => templates::GRAMMAR_CHORDS.trim_end().to_string(),
        FormatTag::DrumTab => fill(templates::GRAMMAR_DRUMTAB, &[("legend", &drum_legend())]),
    }
}

fn tempo_text(bpm: f64) -> String {
    if bpm.fract() == 0.0 {
        format!("{bpm:.0}")
    } else {
        format!("{bpm}")
    }
}

fn context_vars(req: &GenRequest) -> [(&'static str, String); 5] {
    let bars_line = match req.bars_hint {
        Some(n) => format!("Length: {n} bar{}\n", if n == 1 { "" } else { "s" }),
        None => String::new(),
    };
    [
        ("clip_name", req.clip_name.clone()),
        ("track_name", req.track.track_name().to_string()),
        ("tempo", tempo_text(req.track.tempo_bpm())),
        ("time_sig", req.track.time_sig().to_string()),
        ("bars_line", bars_line),
    ]
}

fn as_refs<'a>(vars: &'a [(&'static str, String)]) -> Vec<(&'a str, &'a str)> {
    vars.iter().map(|(k, v)| (*k, v.as_str())).collect()
}

/// System and user messages asking for new content in `req.format`.
pub fn build_generate_prompt(req: &GenRequest) -> Vec<ChatMessage> {
    debug_assert!(req.existing.is_none(), "generate prompt built for an edit request");
    let grammar = grammar(req.format);
    let system = fill(
        templates::SYSTEM_GENERATE,
        &[("tag", req.format.as_str()), ("format_name", req.format.display_name()), ("grammar", &grammar)],
    );
    let vars = context_vars(req);
    vec![
        ChatMessage::new(Role::System, system),
        ChatMessage::new(Role::User, fill(templates::USER_GENERATE, &as_refs(&vars))),
    ]
}

/// System and user messages asking to alter `req.existing`.
///
/// # Panics
///
/// Panics if the request carries no existing content.
pub fn build_edit_prompt(req: &GenRequest) -> Vec<ChatMessage> {
    let existing = req.existing.as_deref().expect("edit prompt needs existing content");
    let system = fill(templates::SYSTEM_EDIT, &[("grammar", &grammar(FormatTag::Abc))]);
    let mut vars = context_vars(req).to_vec();
    vars.push(("existing", existing.trim_end().to_string()));
    vec![
        ChatMessage::new(Role::System, system),
        ChatMessage::new(Role::User, fill(templates::USER_EDIT, &as_refs(&vars))),
    ]
}

/// Messages asking the model which format suits a clip.
pub fn build_choose_prompt(clip_name: &str, track: &TrackContext) -> Vec<ChatMessage> {
    vec![
        ChatMessage::new(Role::System, templates::SYSTEM_CHOOSE.trim_end()),
        ChatMessage::new(
            Role::User,
            fill(templates::USER_CHOOSE, &[("clip_name", clip_name), ("track_name", track.track_name())]),
        ),
    ]
}

pub(crate) fn corrective_message(format: FormatTag, error: &str) -> ChatMessage {
    ChatMessage::new(
        Role::User,
        fill(
            templates::CORRECTIVE,
            &[("error", error), ("tag", format.as_str()), ("format_name", format.display_name())],
        ),
    )
}
