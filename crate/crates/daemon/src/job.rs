//! One generate or edit job against one clip.

use std::fmt;
use std::sync::Arc;

use jammin_core::music_text::{quantize, render_abc, RENDER_GRID};
use jammin_core::{normalize_clip, FormatTag, Tick, TrackContext};
use jammin_gen::{generate, select_by_keyword, select_by_model, Backend, GenError, GenRequest, SelectionMode};
use jammin_live::{ClipAddress, ColorScheme, DawClient};
use serde::Serialize;

use crate::state::JobTrigger;

/// What a job needs besides its trigger.
#[derive(Clone)]
pub struct JobDeps {
    pub daw: Arc<dyn DawClient>,
    pub backend: Arc<dyn Backend>,
    pub selection_mode: SelectionMode,
    pub colors: ColorScheme,
}

/// Where a failed job stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Color,
    Context,
    Read,
    Render,
    Generate,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Color => "color",
            Stage::Context => "context",
            Stage::Read => "read",
            Stage::Render => "render",
            Stage::Generate => "generate",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JobResult {
    Done { addr: ClipAddress, name: String, format: FormatTag, edit: bool, notes: usize, attempts: u32 },
    Failed { addr: ClipAddress, name: String, stage: Stage, error: String },
    /// Dropped before it started, during shutdown.
    Cancelled { addr: ClipAddress, name: String },
}

impl JobResult {
    pub fn addr(&self) -> ClipAddress {
        match self {
            JobResult::Done { addr, .. } | JobResult::Failed { addr, .. } | JobResult::Cancelled { addr, .. } => *addr,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            JobResult::Done { name, .. } | JobResult::Failed { name, .. } | JobResult::Cancelled { name, .. } => name,
        }
    }

    pub fn is_done(&self) -> bool {
        matches!(self, JobResult::Done { .. })
    }
}

struct Failure(Stage, String);

fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> Failure {
    move |e| Failure(stage, e.to_string())
}

fn stage(trigger: &JobTrigger, name: &str) {
    tracing::info!(event = "stage", clip = %trigger.addr, name = %trigger.name, stage = name);
}

/// Runs the job for `trigger`: color the clip as generating, build the
/// prompt (an edit when the clip already holds notes), generate, write the
/// notes and color the clip done.
///
/// Any failure colors the clip as errored. Existing notes are cleared only
/// once replacement notes have been parsed.
pub fn run_job(trigger: &JobTrigger, deps: &JobDeps) -> JobResult {
    match try_job(trigger, deps) {
        Ok(done) => done,
        Err(Failure(stage, error)) => {
            tracing::warn!(event = "stage", clip = %trigger.addr, name = %trigger.name, stage = %stage, error = %error, "job failed");
            if stage != Stage::Color {
                if let Err(e) = deps.daw.set_color(trigger.addr, deps.colors.error) {
                    tracing::warn!(clip = %trigger.addr, error = %e, "could not color clip as failed");
                }
            }
            JobResult::Failed { addr: trigger.addr, name: trigger.name.clone(), stage, error }
        }
    }
}

fn try_job(trigger: &JobTrigger, deps: &JobDeps) -> Result<JobResult, Failure> {
    let daw = deps.daw.as_ref();
    let addr = trigger.addr;
    stage(trigger, "color");
    daw.set_color(addr, deps.colors.generating).map_err(at(Stage::Color))?;

    stage(trigger, "context");
    let tempo = daw.tempo().map_err(at(Stage::Context))?;
    let ts = daw.time_sig().map_err(at(Stage::Context))?;
    let track_name = daw.track_name(addr.track).map_err(at(Stage::Context))?;
    let track = TrackContext::new(track_name, tempo, ts);

    let mut existing = None;
    if trigger.has_notes {
        stage(trigger, "read");
        let notes = daw.get_notes(addr).map_err(at(Stage::Read))?;
        if !notes.is_empty() {
            let clip = quantize(&normalize_clip(notes, ts), Tick(RENDER_GRID));
            existing = Some(render_abc(&clip, tempo).map_err(at(Stage::Render))?);
        }
    }
    let req = match existing {
        Some(abc) => GenRequest::edit(trigger.name.clone(), track, abc),
        None => {
            let format = match deps.selection_mode {
                SelectionMode::Keyword => select_by_keyword(&trigger.name, &track),
                SelectionMode::Model => select_by_model(&trigger.name, &track, deps.backend.as_ref()).format,
            };
            GenRequest::generate(trigger.name.clone(), track, format)
        }
    };
    let edit = req.is_edit();

    stage(trigger, "generate");
    let outcome = generate(&req, deps.backend.as_ref()).map_err(|e: GenError| Failure(Stage::Generate, e.to_string()))?;

    stage(trigger, "write");
    daw.create_clip(addr, outcome.clip.length()).map_err(at(Stage::Write))?;
    if edit {
        daw.clear_notes(addr).map_err(at(Stage::Write))?;
    }
    daw.add_notes(addr, outcome.clip.notes()).map_err(at(Stage::Write))?;
    daw.set_color(addr, deps.colors.done).map_err(at(Stage::Color))?;

    Ok(JobResult::Done {
        addr,
        name: trigger.name.clone(),
        format: req.format,
        edit,
        notes: outcome.clip.len(),
        attempts: outcome.attempts,
    })
}
