//! The reparse-retry loop around a backend call.

use jammin_core::music_text::{extract_music_block, parse_as};
use jammin_core::{normalize_clip, ClipNotes, MusicText, MusicTextError, Tick};
use thiserror::Error;

use crate::backend::{Backend, BackendError, Prompt, Purpose};
use crate::prompt::{build_edit_prompt, build_generate_prompt, corrective_message, ChatMessage, GenRequest, Role};

/// Backend calls per request, the first included.
pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("no usable reply after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: MusicTextError },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOutcome {
    pub clip: ClipNotes,
    /// Backend calls made, 1 to [`MAX_ATTEMPTS`].
    pub attempts: u32,
    /// Parse errors of the rejected replies, in order.
    pub rejected: Vec<MusicTextError>,
}

/// Runs `req` against `backend`, feeding each reply through `parser`.
///
/// A reply that yields no music, music in another format, or music `parser`
/// rejects is answered with a corrective message and the request is retried,
/// up to [`MAX_ATTEMPTS`] calls in total. The accepted notes are normalized
/// to the track's meter and stretched to `bars_hint` bars when given.
pub fn generate_with_retry(
    req: &GenRequest,
    backend: &dyn Backend,
    parser: &dyn Fn(&MusicText) -> Result<ClipNotes, MusicTextError>,
) -> Result<GenOutcome, GenError> {
    let mut messages: Vec<ChatMessage> =
        if req.is_edit() { build_edit_prompt(req) } else { build_generate_prompt(req) };
    let purpose = if req.is_edit() { Purpose::Edit } else { Purpose::Generate(req.format) };
    let mut rejected = Vec::new();
    for attempt in 1..=MAX_ATTEMPTS {
        let prompt = Prompt { messages: messages.clone(), purpose, clip_name: req.clip_name.clone() };
        let reply = backend.complete(&prompt)?;
        let parsed = extract_music_block(&reply).and_then(|text| {
            if text.format() != req.format {
                return Err(MusicTextError::FormatMismatch { expected: req.format, found: text.format() });
            }
            parser(&text)
        });
        match parsed {
            Ok(clip) => {
                let ts = req.track.time_sig();
                let mut clip = normalize_clip(clip.into_notes(), ts);
                if let Some(bars) = req.bars_hint {
                    clip = clip.with_min_length(Tick(ts.bar_ticks().get() * u64::from(bars)));
                }
                return Ok(GenOutcome { clip, attempts: attempt, rejected });
            }
            Err(e) => {
                tracing::warn!(clip = %req.clip_name, attempt, error = %e, "reply rejected");
                messages.push(ChatMessage::new(Role::Assistant, reply));
                messages.push(corrective_message(req.format, &e.to_string()));
                rejected.push(e);
            }
        }
    }
    let last = rejected.last().cloned().expect("at least one rejected reply");
    Err(GenError::Exhausted { attempts: MAX_ATTEMPTS, last })
}

/// [`generate_with_retry`] with the parser for `req.format` in the track's meter.
pub fn generate(req: &GenRequest, backend: &dyn Backend) -> Result<GenOutcome, GenError> {
    let ts = req.track.time_sig();
    generate_with_retry(req, backend, &|text: &MusicText| parse_as(text.format(), text.body(), ts))
}
