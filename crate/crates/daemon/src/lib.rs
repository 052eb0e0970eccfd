//! The jammin daemon: polls a DAW for renamed clips and fills them with
//! notes generated from the clip name.
//!
//! [`engine`] runs the loop, [`job`] one generation against one clip,
//! [`state`] holds the per-clip bookkeeping and [`config`] the settings file.

pub mod cli;
pub mod config;
pub mod engine;
pub mod job;
pub mod state;

pub use config::{Config, ConfigError};
pub use engine::{poll_once, Engine, EngineOptions, JobLedger};
pub use job::{run_job, JobDeps, JobResult, Stage};
pub use state::{ClipRecord, ClipStatus, JobTrigger, SessionState, Snapshot, SnapshotEntry};
