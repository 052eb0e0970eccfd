//! Everything between a clip name and parsed notes: picking a text format,
//! building prompts, talking to a language model backend and re-asking when
//! the reply does not parse.

pub mod backend;
pub mod prompt;
pub mod retry;
pub mod select;

pub use backend::{
    slugify, Backend, BackendConfig, BackendError, HttpBackend, MockBackend, Prompt, Purpose, ScriptedBackend,
};
pub use prompt::{
    bars_hint, build_choose_prompt, build_edit_prompt, build_generate_prompt, ChatMessage, GenRequest, Role,
    PROMPT_VERSION,
};
pub use retry::{generate, generate_with_retry, GenError, GenOutcome, MAX_ATTEMPTS};
pub use select::{select_by_keyword, select_by_model, Selection, SelectionMode, CHORD_WORDS, DRUM_WORDS};
