//! Command-line entry points.

use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use jammin_core::music_text::{extract_music_block, parse_abc, parse_as};
use jammin_core::smf::write_smf;
use jammin_core::{normalize_clip, ClipNotes, FormatTag, TimeSig, TrackContext};
use jammin_gen::{
    generate, select_by_keyword, select_by_model, Backend, BackendConfig, BackendError, GenError, GenRequest,
    HttpBackend, MockBackend, SelectionMode,
};
use jammin_live::{Control, DawClient, OscClient, SimServer, SimSet, Simulator, UdpExchange};

use crate::config::Config;
use crate::engine::{Engine, EngineOptions};
use crate::job::JobDeps;
use crate::state::SessionState;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_UNREACHABLE: u8 = 3;
pub const EXIT_AUTH: u8 = 4;
pub const EXIT_PARSE: u8 = 5;
/// Anything without a code of its own, such as a backend that cannot be reached.
pub const EXIT_OTHER: u8 = 1;

const DEFAULT_TEMPO: f64 = 120.0;

#[derive(Debug, Parser)]
#[command(name = "jammin", version, about = "Turns clip names into MIDI with a language model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Poll the DAW and fill renamed clips.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Answer prompts from this fixture directory instead of the backend.
        #[arg(long, value_name = "FIXTURE_DIR")]
        mock_llm: Option<PathBuf>,
    },
    /// Serve a simulated DAW, with commands read from stdin.
    Sim {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 19000)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Write the final set as scenario JSON here on exit.
        #[arg(long)]
        state_out: Option<PathBuf>,
    },
    /// Parse a text music file and write a Standard MIDI File.
    Convert {
        #[arg(long)]
        format: FormatTag,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        timing: Timing,
    },
    /// Generate from a prompt straight to a MIDI file, without a DAW.
    Oneshot {
        prompt: String,
        #[arg(long)]
        track_name: String,
        #[arg(long)]
        out: PathBuf,
        /// Skip format selection.
        #[arg(long)]
        format: Option<FormatTag>,
        #[command(flatten)]
        timing: Timing,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_name = "FIXTURE_DIR")]
        mock_llm: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Timing {
    #[arg(long, value_name = "BPM")]
    pub tempo: Option<f64>,
    #[arg(long, value_name = "N/D")]
    pub meter: Option<TimeSig>,
}

/// A command failure: the message for stderr and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

pub fn init_logging(default_level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_from_env("JAMMIN_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level));
    let _ = tracing_subscriber::fmt()
        .json()
        .flatten_event(true)
        .with_current_span(false)
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

pub fn main(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Run { config, mock_llm } => {
            init_logging("info");
            cmd_run(&config, mock_llm)
        }
        Command::Sim { scenario, port, host, state_out } => {
            init_logging("warn");
            cmd_sim(&scenario, &host, port, state_out.as_deref())
        }
        Command::Convert { format, input, out, timing } => {
            init_logging("warn");
            cmd_convert(format, &input, &out, &timing)
        }
        Command::Oneshot { prompt, track_name, out, format, timing, config, mock_llm } => {
            init_logging("warn");
            cmd_oneshot(&prompt, &track_name, &out, format, &timing, config.as_deref(), mock_llm)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("jammin: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn shutdown_flag() -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    let s = Arc::clone(&stop);
    if let Err(e) = ctrlc::set_handler(move || s.store(true, Ordering::SeqCst)) {
        tracing::warn!(error = %e, "no interrupt handler installed");
    }
    stop
}

fn make_backend(mock: Option<PathBuf>, cfg: &BackendConfig) -> Result<Arc<dyn Backend>, Failure> {
    if let Some(dir) = mock {
        if !dir.is_dir() {
            return Err(fail(EXIT_CONFIG, format!("fixture directory {} does not exist", dir.display())));
        }
        return Ok(Arc::new(MockBackend::new(dir)));
    }
    let http = HttpBackend::new(cfg.clone()).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    http.api_key().map_err(|e| fail(EXIT_AUTH, e.to_string()))?;
    Ok(Arc::new(http))
}

fn cmd_run(config: &Path, mock_llm: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = Config::load(config).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?;
    let backend = make_backend(mock_llm.or_else(|| cfg.fixture_dir.clone()), &cfg.backend)?;
    let exchange = UdpExchange::open(("0.0.0.0", cfg.listen_port), cfg.daw_addr())
        .map_err(|e| fail(EXIT_UNREACHABLE, e.to_string()))?;
    let daw = OscClient::new(exchange);
    daw.tempo()
        .map_err(|e| fail(EXIT_UNREACHABLE, format!("DAW at {} not answering: {e}", cfg.daw_addr())))?;

    let state = SessionState::restore(&cfg.snapshot_path);
    let deps = JobDeps { daw: Arc::new(daw), backend, selection_mode: cfg.selection_mode, colors: cfg.colors };
    let opts = EngineOptions { workers: cfg.workers, poll_interval: cfg.poll_interval(), ..EngineOptions::default() };
    let mut engine = Engine::new(state, deps, opts);
    let stop = shutdown_flag();
    engine.run(&stop);
    engine.shutdown();
    Ok(())
}

fn cmd_sim(scenario: &Path, host: &str, port: u16, state_out: Option<&Path>) -> Result<(), Failure> {
    let set = SimSet::load(scenario).map_err(|e| fail(EXIT_CONFIG, format!("{}: {e}", scenario.display())))?;
    let server =
        SimServer::start(Simulator::new(set), (host, port)).map_err(|e| fail(EXIT_UNREACHABLE, e.to_string()))?;
    eprintln!("simulator listening on {}", server.local_addr());
    let stop = shutdown_flag();

    let (tx, rx) = crossbeam_channel::unbounded::<String>();
    std::thread::spawn(move || {
        for line in std::io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    // Stdin closing leaves the simulator serving until interrupted.
    let mut stdin_open = true;
    while !stop.load(Ordering::SeqCst) {
        if !stdin_open {
            std::thread::sleep(Duration::from_millis(100));
            continue;
        }
        let line = match rx.recv_timeout(Duration::from_millis(100)) {
            Ok(l) => l,
            Err(crossbeam_channel::RecvTimeoutError::Timeout) => continue,
            Err(crossbeam_channel::RecvTimeoutError::Disconnected) => {
                stdin_open = false;
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match Control::parse(&line) {
            Ok(Control::Quit) => break,
            Ok(cmd) => match server.sim().control(&cmd) {
                Ok(out) => println!("{}", out.trim_end()),
                Err(e) => eprintln!("error: {e}"),
            },
            Err(e) => eprintln!("error: {e}"),
        }
    }
    let sim = server.stop();
    if let Some(path) = state_out {
        std::fs::write(path, sim.set().to_json_string())
            .map_err(|e| fail(EXIT_OTHER, format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Reads a text music file for `convert`. A fenced block is unwrapped.
fn read_music(format: FormatTag, path: &Path) -> Result<String, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    if text.contains("```") {
        let block = extract_music_block(&text).map_err(|e| fail(EXIT_PARSE, e.to_string()))?;
        if block.format() != format {
            return Err(fail(EXIT_PARSE, format!("{} holds {} music, not {format}", path.display(), block.format())));
        }
        return Ok(block.body().to_string());
    }
    Ok(text)
}

fn check_tempo(tempo: Option<f64>) -> Result<Option<f64>, Failure> {
    match tempo {
        Some(t) if !(t.is_finite() && t > 0.0) => Err(fail(EXIT_CONFIG, format!("tempo {t} must be positive"))),
        t => Ok(t),
    }
}

/// Parses `body` as `format`, returning the clip and the tempo to write.
/// ABC files supply their own meter and tempo unless the flags override them.
pub fn convert_text(format: FormatTag, body: &str, tempo: Option<f64>, meter: Option<TimeSig>) -> Result<(ClipNotes, f64), Failure> {
    let tempo = check_tempo(tempo)?;
    let parse_err = |e: jammin_core::MusicTextError| fail(EXIT_PARSE, e.to_string());
    match format {
        FormatTag::Abc => {
            let (clip, header) = parse_abc(body).map_err(parse_err)?;
            let ts = meter.unwrap_or(header.meter);
            let tempo = tempo.or(header.tempo_bpm).unwrap_or(DEFAULT_TEMPO);
            Ok((normalize_clip(clip.into_notes(), ts), tempo))
        }
        other => {
            let ts = meter.unwrap_or(TimeSig::COMMON);
            let clip = parse_as(other, body, ts).map_err(parse_err)?;
            Ok((clip, tempo.unwrap_or(DEFAULT_TEMPO)))
        }
    }
}

fn write_midi(out: &Path, clip: &ClipNotes, tempo: f64) -> Result<(), Failure> {
    std::fs::write(out, write_smf(clip, tempo)).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", out.display())))?;
    let bars = clip.length().get() / clip.time_sig().bar_ticks().get();
    println!("wrote {} notes, {bars} bars at {tempo} bpm to {}", clip.len(), out.display());
    Ok(())
}

fn cmd_convert(format: FormatTag, input: &Path, out: &Path, timing: &Timing) -> Result<(), Failure> {
    let body = read_music(format, input)?;
    let (clip, tempo) = convert_text(format, &body, timing.tempo, timing.meter)?;
    write_midi(out, &clip, tempo)
}

fn cmd_oneshot(
    prompt: &str,
    track_name: &str,
    out: &Path,
    format: Option<FormatTag>,
    timing: &Timing,
    config: Option<&Path>,
    mock_llm: Option<PathBuf>,
) -> Result<(), Failure> {
    if prompt.trim().is_empty() {
        return Err(fail(EXIT_CONFIG, "prompt is empty"));
    }
    let cfg = match config {
        Some(p) => Config::load(p).map_err(|e| fail(EXIT_CONFIG, e.to_string()))?,
        None => Config::default(),
    };
    let backend = make_backend(mock_llm.or_else(|| cfg.fixture_dir.clone()), &cfg.backend)?;
    let tempo = check_tempo(timing.tempo)?.unwrap_or(DEFAULT_TEMPO);
    let track = TrackContext::new(track_name, tempo, timing.meter.unwrap_or(TimeSig::COMMON));
    let format = format.unwrap_or_else(|| match cfg.selection_mode {
        SelectionMode::Keyword => select_by_keyword(prompt, &track),
        SelectionMode::Model => select_by_model(prompt, &track, backend.as_ref()).format,
    });
    let req = GenRequest::generate(prompt, track, format);
    let outcome = generate(&req, backend.as_ref()).map_err(|e| match &e {
        GenError::Backend(BackendError::Auth(_)) => fail(EXIT_AUTH, e.to_string()),
        GenError::Backend(_) => fail(EXIT_OTHER, e.to_string()),
        GenError::Exhausted { .. } => fail(EXIT_PARSE, e.to_string()),
    })?;
    write_midi(out, &outcome.clip, tempo)
}
