//! The polling loop and its worker pool.
//!
//! The engine thread owns [`SessionState`]. Workers receive triggers over a
//! channel, run them and send results back; they never touch the state.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};
use jammin_live::{ClipAddress, DawClient, ProtocolError};

use crate::job::{run_job, JobDeps, JobResult};
use crate::state::{JobTrigger, SessionState};

pub const DEFAULT_WORKERS: usize = 2;
pub const DEFAULT_POLL_INTERVAL: Duration = Duration::from_secs(1);
pub const SHUTDOWN_GRACE: Duration = Duration::from_secs(5);

/// Scans the DAW and applies the trigger rule.
pub fn poll_once(state: &mut SessionState, daw: &dyn DawClient) -> Result<Vec<JobTrigger>, ProtocolError> {
    let scan = daw.scan()?;
    let triggers = state.observe(&scan);
    tracing::debug!(event = "poll", clips = scan.len(), triggers = triggers.len());
    Ok(triggers)
}

/// Records which clips have a job running, to check that no clip ever has two.
#[derive(Debug, Default)]
pub struct JobLedger {
    inner: Mutex<LedgerInner>,
}

#[derive(Debug, Default)]
struct LedgerInner {
    active: HashSet<ClipAddress>,
    started: u64,
    finished: u64,
    overlaps: u64,
    peak: usize,
}

impl JobLedger {
    pub fn begin(&self, addr: ClipAddress) {
        let mut l = self.inner.lock().expect("ledger lock");
        if !l.active.insert(addr) {
            l.overlaps += 1;
            tracing::error!(clip = %addr, "second job started for a clip with one in flight");
        }
        l.started += 1;
        l.peak = l.peak.max(l.active.len());
    }

    pub fn end(&self, addr: ClipAddress) {
        let mut l = self.inner.lock().expect("ledger lock");
        l.active.remove(&addr);
        l.finished += 1;
    }

    /// Times a job began for a clip that already had one running.
    pub fn overlaps(&self) -> u64 {
        self.inner.lock().expect("ledger lock").overlaps
    }

    pub fn started(&self) -> u64 {
        self.inner.lock().expect("ledger lock").started
    }

    pub fn finished(&self) -> u64 {
        self.inner.lock().expect("ledger lock").finished
    }

    /// Most jobs ever running at once, across all clips.
    pub fn peak(&self) -> usize {
        self.inner.lock().expect("ledger lock").peak
    }
}

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub workers: usize,
    pub poll_interval: Duration,
    pub shutdown_grace: Duration,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { workers: DEFAULT_WORKERS, poll_interval: DEFAULT_POLL_INTERVAL, shutdown_grace: SHUTDOWN_GRACE }
    }
}

pub struct Engine {
    state: SessionState,
    deps: JobDeps,
    opts: EngineOptions,
    ledger: Arc<JobLedger>,
    stopping: Arc<AtomicBool>,
    jobs: Option<Sender<JobTrigger>>,
    results: Receiver<JobResult>,
    workers: Vec<JoinHandle<()>>,
    in_flight: usize,
    history: Vec<JobResult>,
}

impl Engine {
    pub fn new(state: SessionState, deps: JobDeps, opts: EngineOptions) -> Self {
        let (job_tx, job_rx) = unbounded::<JobTrigger>();
        let (res_tx, res_rx) = unbounded::<JobResult>();
        let ledger = Arc::new(JobLedger::default());
        let stopping = Arc::new(AtomicBool::new(false));
        let workers = (0..opts.workers.max(1))
            .map(|i| {
                let rx = job_rx.clone();
                let tx = res_tx.clone();
                let deps = deps.clone();
                let ledger = Arc::clone(&ledger);
                let stopping = Arc::clone(&stopping);
                thread::Builder::new()
                    .name(format!("jammin-worker-{i}"))
                    .spawn(move || {
                        for trigger in rx {
                            let result = if stopping.load(Ordering::SeqCst) {
                                JobResult::Cancelled { addr: trigger.addr, name: trigger.name }
                            } else {
                                ledger.begin(trigger.addr);
                                let r = run_job(&trigger, &deps);
                                ledger.end(trigger.addr);
                                r
                            };
                            if tx.send(result).is_err() {
                                break;
                            }
                        }
                    })
                    .expect("spawn worker thread")
            })
            .collect();
        Engine {
            state,
            deps,
            opts,
            ledger,
            stopping,
            jobs: Some(job_tx),
            results: res_rx,
            workers,
            in_flight: 0,
            history: Vec::new(),
        }
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn ledger(&self) -> &JobLedger {
        &self.ledger
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight
    }

    /// Results of every finished job, in completion order.
    pub fn history(&self) -> &[JobResult] {
        &self.history
    }

    /// Handles finished jobs, then polls once and dispatches new triggers.
    /// A failed scan is logged and leaves the state as it was.
    pub fn tick(&mut self) -> Result<usize, ProtocolError> {
        self.drain_results();
        match poll_once(&mut self.state, self.deps.daw.as_ref()) {
            Ok(triggers) => {
                let n = triggers.len();
                for t in triggers {
                    self.dispatch(t);
                }
                Ok(n)
            }
            Err(e) => {
                tracing::warn!(event = "poll", error = %e, "poll skipped");
                Err(e)
            }
        }
    }

    fn dispatch(&mut self, trigger: JobTrigger) {
        tracing::info!(event = "trigger", clip = %trigger.addr, name = %trigger.name, has_notes = trigger.has_notes);
        if let Some(jobs) = &self.jobs {
            if jobs.send(trigger).is_ok() {
                self.in_flight += 1;
            }
        }
    }

    fn finish(&mut self, result: JobResult) {
        self.in_flight -= 1;
        match &result {
            JobResult::Done { addr, name, format, edit, notes, attempts } => tracing::info!(
                event = "result", clip = %addr, name = %name, status = "done",
                format = format.as_str(), edit, notes, attempts
            ),
            JobResult::Failed { addr, name, stage, error } => tracing::info!(
                event = "result", clip = %addr, name = %name, status = "error", stage = %stage, error = %error
            ),
            JobResult::Cancelled { addr, name } => {
                tracing::info!(event = "result", clip = %addr, name = %name, status = "cancelled")
            }
        }
        let follow_up = self.state.complete(&result);
        if let Err(e) = self.state.persist() {
            tracing::warn!(error = %e, "snapshot not written");
        }
        self.history.push(result);
        if let Some(t) = follow_up {
            self.dispatch(t);
        }
    }

    fn drain_results(&mut self) {
        while let Ok(r) = self.results.try_recv() {
            self.finish(r);
        }
    }

    /// Waits up to `timeout` for one job to finish.
    fn wait_result(&mut self, timeout: Duration) -> bool {
        match self.results.recv_timeout(timeout) {
            Ok(r) => {
                self.finish(r);
                true
            }
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => false,
        }
    }

    /// Polls every poll interval until `stop` is set, handling finished jobs
    /// as they arrive.
    pub fn run(&mut self, stop: &AtomicBool) {
        tracing::info!(event = "start", workers = self.workers.len(), poll_interval_s = self.opts.poll_interval.as_secs_f64());
        while !stop.load(Ordering::SeqCst) {
            let _ = self.tick();
            let next = Instant::now() + self.opts.poll_interval;
            while !stop.load(Ordering::SeqCst) {
                let now = Instant::now();
                if now >= next {
                    break;
                }
                self.wait_result((next - now).min(Duration::from_millis(50)));
            }
        }
    }

    /// Keeps polling until a poll finds nothing to do and no job is running,
    /// or `timeout` passes. Returns whether the engine went idle.
    pub fn run_until_idle(&mut self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        loop {
            let triggered = self.tick().unwrap_or(0);
            if triggered == 0 && self.in_flight == 0 {
                return true;
            }
            while self.in_flight > 0 {
                let now = Instant::now();
                if now >= deadline {
                    return false;
                }
                self.wait_result((deadline - now).min(self.opts.poll_interval));
            }
            if Instant::now() >= deadline {
                return false;
            }
        }
    }

    /// Stops taking jobs, lets running ones finish within the grace period,
    /// writes the snapshot and returns the final state. Jobs still running
    /// after the grace period are abandoned.
    pub fn shutdown(mut self) -> SessionState {
        self.stopping.store(true, Ordering::SeqCst);
        self.jobs = None;
        let deadline = Instant::now() + self.opts.shutdown_grace;
        while self.in_flight > 0 {
            let now = Instant::now();
            if now >= deadline {
                tracing::warn!(event = "shutdown", abandoned = self.in_flight, "jobs abandoned");
                break;
            }
            self.wait_result(deadline - now);
        }
        if let Err(e) = self.state.persist() {
            tracing::warn!(error = %e, "snapshot not written");
        }
        if self.in_flight == 0 {
            for w in self.workers.drain(..) {
                let _ = w.join();
            }
        }
        tracing::info!(event = "shutdown", "engine stopped");
        self.state
    }
}
