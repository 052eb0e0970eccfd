//! Per-clip session state: the trigger rule, rename coalescing and the
//! processed-name snapshot.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use jammin_live::{ClipAddress, ClipInfo};
use serde::{Deserialize, Serialize};

use crate::job::JobResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipStatus {
    Idle,
    Generating,
    Done,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipRecord {
    pub key: ClipAddress,
    pub last_seen_name: String,
    pub has_notes: bool,
    pub status: ClipStatus,
    pub last_processed_name: String,
    /// Latest name typed while a job was running; set only while generating.
    pub pending_name: Option<String>,
    /// Name the running job was started for.
    in_flight_name: Option<String>,
}

impl ClipRecord {
    fn new(key: ClipAddress) -> Self {
        ClipRecord {
            key,
            last_seen_name: String::new(),
            has_notes: false,
            status: ClipStatus::Idle,
            last_processed_name: String::new(),
            pending_name: None,
            in_flight_name: None,
        }
    }

    pub fn in_flight_name(&self) -> Option<&str> {
        self.in_flight_name.as_deref()
    }
}

/// A clip whose name asks for a job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobTrigger {
    pub addr: ClipAddress,
    pub name: String,
    pub has_notes: bool,
}

/// On-disk form of the session: processed names only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub version: u32,
    pub clips: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotEntry {
    pub track: u32,
    pub clip: u32,
    pub last_processed_name: String,
}

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Default, Clone)]
pub struct SessionState {
    records: BTreeMap<ClipAddress, ClipRecord>,
    snapshot_path: Option<PathBuf>,
}

impl SessionState {
    pub fn new(snapshot_path: Option<PathBuf>) -> Self {
        SessionState { records: BTreeMap::new(), snapshot_path }
    }

    /// Loads the snapshot at `path` if there is one. A missing file is a
    /// fresh start; an unreadable one is logged and also a fresh start.
    pub fn restore(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let mut state = SessionState::new(Some(path.clone()));
        match fs::read_to_string(&path) {
            Ok(text) => match serde_json::from_str::<Snapshot>(&text) {
                Ok(snap) if snap.version == SNAPSHOT_VERSION => state.apply_snapshot(&snap),
                Ok(snap) => tracing::warn!(
                    event = "restore",
                    path = %path.display(),
                    version = snap.version,
                    "unsupported snapshot version, starting fresh"
                ),
                Err(e) => tracing::warn!(
                    event = "restore",
                    path = %path.display(),
                    error = %e,
                    "corrupt snapshot, starting fresh"
                ),
            },
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => tracing::warn!(
                event = "restore",
                path = %path.display(),
                error = %e,
                "unreadable snapshot, starting fresh"
            ),
        }
        state
    }

    pub fn snapshot_path(&self) -> Option<&Path> {
        self.snapshot_path.as_deref()
    }

    pub fn record(&self, addr: ClipAddress) -> Option<&ClipRecord> {
        self.records.get(&addr)
    }

    pub fn records(&self) -> impl Iterator<Item = &ClipRecord> {
        self.records.values()
    }

    pub fn generating(&self) -> usize {
        self.records.values().filter(|r| r.status == ClipStatus::Generating).count()
    }

    /// Applies one scan and returns the clips that need a job. Each
    /// returned clip is marked generating.
    ///
    /// Slots missing from the scan are forgotten unless a job is running
    /// for them.
    pub fn observe(&mut self, scan: &[ClipInfo]) -> Vec<JobTrigger> {
        let mut triggers = Vec::new();
        let seen: std::collections::BTreeSet<_> = scan.iter().map(|c| c.addr).collect();
        self.records.retain(|addr, r| seen.contains(addr) || r.status == ClipStatus::Generating);
        for info in scan {
            let rec = self.records.entry(info.addr).or_insert_with(|| ClipRecord::new(info.addr));
            rec.has_notes = info.has_notes;
            let renamed = rec.last_seen_name != info.name;
            rec.last_seen_name = info.name.clone();
            if rec.status == ClipStatus::Generating {
                if renamed && !info.name.is_empty() {
                    rec.pending_name = Some(info.name.clone());
                }
                continue;
            }
            if !info.name.is_empty() && info.name != rec.last_processed_name {
                rec.status = ClipStatus::Generating;
                rec.in_flight_name = Some(info.name.clone());
                triggers.push(JobTrigger { addr: info.addr, name: info.name.clone(), has_notes: info.has_notes });
            }
        }
        triggers
    }

    /// Records a finished job and returns the coalesced follow-up job, if a
    /// rename arrived while it ran.
    pub fn complete(&mut self, result: &JobResult) -> Option<JobTrigger> {
        let rec = self.records.entry(result.addr()).or_insert_with(|| ClipRecord::new(result.addr()));
        rec.in_flight_name = None;
        let pending = rec.pending_name.take();
        match result {
            JobResult::Done { name, .. } => {
                rec.status = ClipStatus::Done;
                rec.has_notes = true;
                rec.last_processed_name = name.clone();
            }
            JobResult::Failed { name, .. } => {
                rec.status = ClipStatus::Error;
                rec.last_processed_name = name.clone();
            }
            JobResult::Cancelled { .. } => {
                rec.status = ClipStatus::Idle;
                return None;
            }
        }
        let name = pending.filter(|p| !p.is_empty() && *p != rec.last_processed_name)?;
        rec.status = ClipStatus::Generating;
        rec.in_flight_name = Some(name.clone());
        Some(JobTrigger { addr: rec.key, name, has_notes: rec.has_notes })
    }

    pub fn snapshot(&self) -> Snapshot {
        let clips = self
            .records
            .values()
            .filter(|r| !r.last_processed_name.is_empty())
            .map(|r| SnapshotEntry {
                track: r.key.track,
                clip: r.key.clip,
                last_processed_name: r.last_processed_name.clone(),
            })
            .collect();
        Snapshot { version: SNAPSHOT_VERSION, clips }
    }

    pub fn apply_snapshot(&mut self, snap: &Snapshot) {
        for e in &snap.clips {
            let addr = ClipAddress::new(e.track, e.clip);
            let rec = self.records.entry(addr).or_insert_with(|| ClipRecord::new(addr));
            rec.last_processed_name = e.last_processed_name.clone();
            rec.last_seen_name = e.last_processed_name.clone();
        }
    }

    /// Writes the snapshot through a temporary file and a rename.
    pub fn persist(&self) -> io::Result<()> {
        let Some(path) = &self.snapshot_path else { return Ok(()) };
        let json = serde_json::to_string_pretty(&self.snapshot()).map_err(io::Error::other)?;
        let tmp = path.with_extension("tmp");
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(&tmp, json + "\n")?;
        fs::rename(&tmp, path)
    }
}
