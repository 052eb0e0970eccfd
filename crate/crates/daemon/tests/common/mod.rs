#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use jammin::{Engine, EngineOptions, JobDeps, JobResult, SessionState};
use jammin_core::music_text::{extract_music_block, parse_as};
use jammin_core::{normalize_clip, NoteEvent, TimeSig};
use jammin_gen::{Backend, BackendError, MockBackend, Prompt, SelectionMode};
use jammin_live::{
    ClipAddress, ColorScheme, DawClient, InProcessExchange, Mutation, OscClient, SimServer, SimSet, Simulator,
    UdpExchange,
};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn mock_dir() -> PathBuf {
    fixtures().join("mock")
}

pub fn garbage_dir() -> PathBuf {
    fixtures().join("garbage")
}

pub fn scenario(name: &str) -> SimSet {
    SimSet::load(fixtures().join("scenarios").join(format!("{name}.json"))).expect("scenario loads")
}

/// Notes a fixture reply should produce, parsed straight from the file.
pub fn fixture_notes(dir: &Path, format: &str, slug: &str, ts: TimeSig) -> Vec<NoteEvent> {
    let text = std::fs::read_to_string(dir.join(format).join(format!("{slug}.txt"))).expect("fixture");
    let music = extract_music_block(&text).expect("fixture has music");
    let clip = parse_as(music.format(), music.body(), ts).expect("fixture parses");
    normalize_clip(clip.into_notes(), ts).into_notes()
}

/// Wraps a backend and keeps every prompt it was asked.
pub struct Recording<B> {
    pub inner: B,
    pub prompts: Mutex<Vec<Prompt>>,
}

impl<B> Recording<B> {
    pub fn new(inner: B) -> Self {
        Recording { inner, prompts: Mutex::new(Vec::new()) }
    }

    pub fn prompts(&self) -> Vec<Prompt> {
        self.prompts.lock().unwrap().clone()
    }
}

impl<B: Backend> Backend for Recording<B> {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        self.prompts.lock().unwrap().push(prompt.clone());
        self.inner.complete(prompt)
    }
}

pub fn opts(poll_ms: u64) -> EngineOptions {
    EngineOptions { poll_interval: Duration::from_millis(poll_ms), ..EngineOptions::default() }
}

pub fn deps(daw: Arc<dyn DawClient>, backend: Arc<dyn Backend>) -> JobDeps {
    JobDeps { daw, backend, selection_mode: SelectionMode::Keyword, colors: ColorScheme::default() }
}

/// Outcome of driving a simulator with the engine until it went idle.
pub struct Run {
    pub sim: Simulator,
    pub history: Vec<JobResult>,
    pub state: SessionState,
    pub overlaps: u64,
    pub peak: usize,
    /// From the renames to the engine going idle.
    pub elapsed: Duration,
    pub idle: bool,
}

impl Run {
    pub fn final_json(&self) -> String {
        self.sim.set().to_json_string()
    }

    pub fn colors(&self, addr: ClipAddress) -> Vec<u8> {
        self.sim
            .log()
            .mutations()
            .filter_map(|m| match m {
                Mutation::SetColor { addr: a, color } if *a == addr => Some(*color),
                _ => None,
            })
            .collect()
    }
}

/// Starts a UDP simulator for `set`, lets the engine take one baseline poll,
/// types `renames` and runs the engine until idle or `timeout`.
pub fn run_udp(
    set: SimSet,
    backend: Arc<dyn Backend>,
    renames: &[(u32, u32, &str)],
    snapshot: Option<PathBuf>,
    timeout: Duration,
) -> Run {
    let server = SimServer::start(Simulator::new(set), "127.0.0.1:0").expect("sim starts");
    let exchange = UdpExchange::open("127.0.0.1:0", server.local_addr()).expect("client socket");
    let daw: Arc<dyn DawClient> = Arc::new(OscClient::new(exchange));
    let state = match snapshot {
        Some(p) => SessionState::restore(p),
        None => SessionState::default(),
    };
    let mut engine = Engine::new(state, deps(daw, backend), opts(50));
    assert!(engine.run_until_idle(timeout), "baseline poll did not settle");
    for (t, c, name) in renames {
        server.sim().inject_rename(ClipAddress::new(*t, *c), name).expect("rename");
    }
    let start = Instant::now();
    let idle = engine.run_until_idle(timeout);
    let elapsed = start.elapsed();
    let history = engine.history().to_vec();
    let overlaps = engine.ledger().overlaps();
    let peak = engine.ledger().peak();
    let state = engine.shutdown();
    Run { sim: server.stop(), history, state, overlaps, peak, elapsed, idle }
}

/// As [`run_udp`], with the simulator in-process.
pub fn run_in_process(set: SimSet, backend: Arc<dyn Backend>, renames: &[(u32, u32, &str)]) -> Run {
    let sim = Arc::new(Mutex::new(Simulator::new(set)));
    let daw: Arc<dyn DawClient> = Arc::new(OscClient::new(InProcessExchange::new(Arc::clone(&sim))));
    let mut engine = Engine::new(SessionState::default(), deps(daw, backend), opts(20));
    assert!(engine.run_until_idle(Duration::from_secs(10)));
    for (t, c, name) in renames {
        sim.lock().unwrap().inject_rename(ClipAddress::new(*t, *c), name).expect("rename");
    }
    let start = Instant::now();
    let idle = engine.run_until_idle(Duration::from_secs(10));
    let elapsed = start.elapsed();
    let history = engine.history().to_vec();
    let overlaps = engine.ledger().overlaps();
    let peak = engine.ledger().peak();
    let state = engine.shutdown();
    let sim = sim.lock().unwrap().clone();
    Run { sim, history, state, overlaps, peak, elapsed, idle }
}

pub fn mock() -> Arc<dyn Backend> {
    Arc::new(MockBackend::new(mock_dir()))
}

pub const FIG1_RENAMES: &[(u32, u32, &str)] = &[(0, 0, "4 bar funky bassline"), (1, 0, "basic rock beat")];

pub fn jammin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jammin"));
    c.env_remove("JAMMIN_API_KEY").env("JAMMIN_LOG", "info");
    c
}

pub fn free_port() -> u16 {
    std::net::UdpSocket::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("jammin.toml");
    std::fs::write(&p, body).unwrap();
    p
}

pub struct ProcessRun {
    pub final_json: String,
    pub daemon_log: String,
    pub daemon_exit: Option<i32>,
    /// From the renames to the last name appearing in the snapshot.
    pub elapsed: Duration,
}

/// Runs `jammin sim` on `scenario` and `jammin run` against it with the mock
/// fixtures, types `renames` on the simulator's stdin, waits until the
/// daemon's snapshot lists every name, then interrupts the daemon and quits
/// the simulator. The backend URL is unroutable, so a network call would
/// fail the jobs.
pub fn run_processes(scenario: &Path, renames: &[(u32, u32, &str)]) -> ProcessRun {
    let dir = tempfile::tempdir().unwrap();
    let (sim_port, listen_port) = (free_port(), free_port());
    let final_state = dir.path().join("final.json");
    let mut sim = jammin()
        .args(["sim", "--scenario", scenario.to_str().unwrap(), "--port", &sim_port.to_string()])
        .args(["--state-out", final_state.to_str().unwrap()])
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut sim_stderr = BufReader::new(sim.stderr.take().unwrap());
    let mut banner = String::new();
    sim_stderr.read_line(&mut banner).unwrap();
    assert!(banner.contains("listening"), "simulator said {banner:?}");
    std::thread::spawn(move || std::io::copy(&mut sim_stderr, &mut std::io::sink()));

    let snapshot = dir.path().join("state.json");
    let cfg = write_config(
        dir.path(),
        &format!(
            "daw_port = {sim_port}\nlisten_port = {listen_port}\npoll_interval_s = 0.1\nsnapshot_path = \"state.json\"\n\
             [backend]\nbase_url = \"http://10.255.255.1:9\"\nmodel_name = \"none\"\nrequest_timeout_s = 1\n"
        ),
    );
    let mut daemon = jammin()
        .args(["run", "--config", cfg.to_str().unwrap(), "--mock-llm", mock_dir().to_str().unwrap()])
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let daemon_stderr = daemon.stderr.take().unwrap();
    let log_reader = std::thread::spawn(move || {
        let mut log = String::new();
        BufReader::new(daemon_stderr).read_to_string(&mut log).unwrap();
        log
    });

    let start = Instant::now();
    let stdin = sim.stdin.as_mut().unwrap();
    for (t, c, name) in renames {
        writeln!(stdin, "rename {t} {c} {name}").unwrap();
    }
    stdin.flush().unwrap();
    let deadline = start + Duration::from_secs(10);
    loop {
        let done = std::fs::read_to_string(&snapshot)
            .is_ok_and(|s| renames.iter().all(|(_, _, n)| s.contains(&format!("{n:?}"))));
        if done {
            break;
        }
        if Instant::now() > deadline {
            let _ = daemon.kill();
            let _ = sim.kill();
            panic!("jobs not finished after 10 s; log:\n{}", log_reader.join().unwrap());
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    let elapsed = start.elapsed();

    let killed = Command::new("kill").args(["-INT", &daemon.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let daemon_exit = daemon.wait().unwrap().code();
    let daemon_log = log_reader.join().unwrap();
    writeln!(sim.stdin.as_mut().unwrap(), "quit").unwrap();
    assert!(sim.wait().unwrap().success());
    let final_json = std::fs::read_to_string(&final_state).unwrap();
    ProcessRun { final_json, daemon_log, daemon_exit, elapsed }
}
