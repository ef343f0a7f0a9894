//! `glove` — operator entry point for the data-glove toolkit.
//!
//! Machine-readable output (JSON / JSON Lines) goes to stdout; human logs
//! go to stderr. Exit codes are a stable contract: 0 success, 2
//! configuration or usage problem, 3 network failure, 4 data integrity
//! failure. Every command is deterministic given the config digest and
//! seed.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use glove_core::config::RunConfig;
use glove_core::driver::{export_csv, Listener, Recording};
use glove_core::eval;
use glove_core::hand::HandPose;
use glove_core::sim::trajectory::{TrajectoryConfig, DEFAULT_WANDER_DEG};
use glove_core::sim::{Capture, GloveSim, Pace, RunMode, UdpSink};
use glove_core::topology::SensorTopology;
use glove_core::wire::{SensorPacket, DEFAULT_PORT};

const EXIT_CONFIG: i32 = 2;
const EXIT_NETWORK: i32 = 3;
const EXIT_DATA: i32 = 4;

#[derive(Parser)]
#[command(name = "glove", version, about = "IMU data-glove simulator, driver, and evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the virtual glove and stream or record its telemetry.
    Simulate(SimulateArgs),
    /// Receive telemetry on a UDP port, printing rolling statistics.
    Listen(ListenArgs),
    /// Flatten a session recording to CSV.
    Export(ExportArgs),
    /// Compute hand joint angles from a session recording.
    Pose(PoseArgs),
    /// Run the drift/autonomy evaluation protocol.
    Evaluate(EvaluateArgs),
    /// Summarize previously written evaluation reports.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration JSON; defaults to the reference glove.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))
                    .map_err(config_err)?;
                RunConfig::from_json(&text).map_err(|e| config_err(anyhow!(e)))?
            }
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        // Fail early with the full violation list.
        config.resolve().map_err(|e| config_err(anyhow!(e)))?;
        Ok(config)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// How long to run, e.g. `10s`, `30m`, `1.5h`.
    #[arg(long, conflicts_with = "until_empty")]
    duration: Option<String>,
    /// Run until the battery empties.
    #[arg(long)]
    until_empty: bool,
    /// Stream datagrams to `host:port` (default from the config).
    #[arg(long, conflicts_with = "to_file")]
    target: Option<Option<String>>,
    /// Write a session recording instead of streaming.
    #[arg(long)]
    to_file: Option<PathBuf>,
    /// Ground-truth sidecar path (default: `<to-file>.truth.jsonl`).
    #[arg(long, requires = "to_file")]
    truth: Option<PathBuf>,
    /// Sleep to wall clock instead of running as fast as possible.
    #[arg(long)]
    realtime: bool,
}

#[derive(Args)]
struct ListenArgs {
    /// UDP port (default: GLOVE_PORT env var or 9750).
    #[arg(long)]
    port: Option<u16>,
    /// Record raw datagrams to this file as they arrive.
    #[arg(long)]
    record: Option<PathBuf>,
    /// Rolling statistics period, e.g. `5s`.
    #[arg(long, default_value = "5s")]
    stats_interval: String,
    /// Stop after this long instead of waiting for Ctrl-C.
    #[arg(long)]
    duration: Option<String>,
}

#[derive(Args)]
struct ExportArgs {
    /// Session recording to read.
    #[arg(short, long)]
    input: PathBuf,
    /// CSV destination (stdout when omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PoseArgs {
    /// Session recording to read.
    #[arg(short, long)]
    input: PathBuf,
    /// Topology JSON (default: the reference eleven-sensor glove).
    #[arg(short, long)]
    topology: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Which protocol to run.
    #[arg(value_parser = ["static", "dynamic", "autonomy"])]
    test: String,
    #[command(flatten)]
    config: ConfigArgs,
    /// Session length, e.g. `30m` (static default) or `45m` (dynamic).
    #[arg(long)]
    duration: Option<String>,
    /// Independent seeded trials.
    #[arg(long, default_value_t = 1)]
    trials: u32,
}

#[derive(Args)]
struct ReportArgs {
    /// Evaluation report JSON files to summarize.
    #[arg(short, long, num_args = 1..)]
    input: Vec<PathBuf>,
}

/// Error carrying its process exit code.
#[derive(Debug)]
struct CliError {
    code: i32,
    source: anyhow::Error,
}

fn config_err(e: anyhow::Error) -> CliError {
    CliError { code: EXIT_CONFIG, source: e }
}

fn network_err(e: anyhow::Error) -> CliError {
    CliError { code: EXIT_NETWORK, source: e }
}

fn data_err(e: anyhow::Error) -> CliError {
    CliError { code: EXIT_DATA, source: e }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Listen(args) => cmd_listen(args),
        Command::Export(args) => cmd_export(args),
        Command::Pose(args) => cmd_pose(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {:#}", e.source);
        std::process::exit(e.code);
    }
}

/// Parse `10s`, `30m`, `1.5h`, or bare seconds into seconds.
fn parse_duration_s(text: &str) -> Result<f64, CliError> {
    let text = text.trim();
    let (number, unit) = match text.chars().last() {
        Some('s') => (&text[..text.len() - 1], 1.0),
        Some('m') => (&text[..text.len() - 1], 60.0),
        Some('h') => (&text[..text.len() - 1], 3600.0),
        _ => (text, 1.0),
    };
    let value: f64 = number
        .parse()
        .map_err(|_| config_err(anyhow!("bad duration `{text}` (expected e.g. 10s, 30m, 1.5h)")))?;
    if !value.is_finite() || value <= 0.0 {
        return Err(config_err(anyhow!("duration must be positive, got `{text}`")));
    }
    Ok(value * unit)
}

fn default_port() -> u16 {
    std::env::var("GLOVE_PORT")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = args.config.load()?;
    let mode = match (&args.duration, args.until_empty) {
        (Some(text), false) => RunMode::Duration(parse_duration_s(text)?),
        (None, true) => RunMode::UntilEmpty,
        (None, false) => {
            return Err(config_err(anyhow!("need --duration or --until-empty")));
        }
        (Some(_), true) => unreachable!("clap conflicts_with"),
    };
    let pace = if args.realtime { Pace::Realtime } else { Pace::Fast };

    let mut sim = GloveSim::new(&config).map_err(|e| config_err(anyhow!(e)))?;

    let mut udp_sink = match &args.target {
        Some(explicit) => {
            let mut target =
                explicit.clone().unwrap_or_else(|| config.network.target.clone());
            if !target.contains(':') {
                target = format!("{target}:{}", default_port());
            }
            eprintln!("streaming to {target}");
            Some(
                UdpSink::connect(&target)
                    .with_context(|| format!("connecting UDP sink to {target}"))
                    .map_err(network_err)?,
            )
        }
        None => None,
    };

    let capture = Capture { packets: args.to_file.is_some(), truth: args.to_file.is_some() };
    let log = sim
        .run(
            mode,
            pace,
            capture,
            udp_sink.as_mut().map(|s| s as &mut dyn glove_core::sim::PacketSink),
        )
        .map_err(|e| config_err(anyhow!(e)))?;

    if let Some(path) = &args.to_file {
        let mut recording = Recording::default(); // simulated session: epoch 0
        for (emit_ms, packet) in &log.packets {
            recording.frames.push(glove_core::driver::RecordedFrame {
                arrival_offset_ms: *emit_ms as u32,
                payload: packet.encode().expect("sim packets always encode"),
            });
        }
        recording.save(path).map_err(|e| data_err(anyhow!(e)))?;

        let truth_path = args
            .truth
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.truth.jsonl", path.display())));
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(&truth_path)
                .with_context(|| format!("creating {}", truth_path.display()))
                .map_err(data_err)?,
        );
        for record in &log.truth {
            serde_json::to_writer(&mut out, record).map_err(|e| data_err(anyhow!(e)))?;
            out.write_all(b"\n").map_err(|e| data_err(anyhow!(e)))?;
        }
        out.flush().map_err(|e| data_err(anyhow!(e)))?;
        eprintln!(
            "wrote {} packets to {} and {} truth records to {}",
            log.packets.len(),
            path.display(),
            log.truth.len(),
            truth_path.display()
        );
    }

    let summary = serde_json::json!({
        "cycles": log.cycles,
        "simulated_ms": log.end_clock_ms,
        "battery_empty": log.battery_empty,
        "autonomy_min": if log.battery_empty { Some(log.autonomy_minutes()) } else { None },
        "sink_dropped": log.sink_dropped,
        "config_digest": config.digest(),
        "seed": config.seed,
    });
    println!("{summary}");
    Ok(())
}

fn cmd_listen(args: ListenArgs) -> Result<(), CliError> {
    let port = args.port.unwrap_or_else(default_port);
    let interval_s = parse_duration_s(&args.stats_interval)?;
    let deadline = args.duration.as_deref().map(parse_duration_s).transpose()?;

    let listener = Listener::bind(port, args.record.as_deref())
        .map_err(|e| network_err(anyhow!(e)))?;
    eprintln!("listening on UDP port {}", listener.local_port());

    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = Arc::clone(&stop);
        let _ = ctrlc::set_handler(move || stop.store(true, Ordering::Relaxed));
    }

    let start = std::time::Instant::now();
    let mut last_stats = start;
    let mut prev_received = 0u64;
    while !stop.load(Ordering::Relaxed) {
        if let Some(limit) = deadline {
            if start.elapsed().as_secs_f64() >= limit {
                break;
            }
        }
        // Drain delivered packets; the tracker and recorder already saw them.
        while listener.recv_timeout(Duration::from_millis(50)).is_some() {}

        if last_stats.elapsed().as_secs_f64() >= interval_s {
            let tracker = listener.tracker_snapshot();
            let received = tracker.received();
            let line = serde_json::json!({
                "t_s": start.elapsed().as_secs_f64().round(),
                "received": received,
                "lost": tracker.packets_lost(),
                "malformed": tracker.malformed(),
                "interval_rate_hz": (received - prev_received) as f64 / interval_s,
                "consumer_overrun": listener.consumer_overrun(),
            });
            println!("{line}");
            prev_received = received;
            last_stats = std::time::Instant::now();
        }
    }

    let overrun = listener.consumer_overrun();
    let tracker = listener.shutdown().map_err(|e| data_err(anyhow!(e)))?;
    match tracker.stats_with_overrun(overrun) {
        Ok(stats) => println!("{}", serde_json::to_string(&stats).expect("stats serialize")),
        Err(e) => eprintln!("no final statistics: {e}"),
    }
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<(), CliError> {
    let recording = Recording::load(&args.input).map_err(|e| data_err(anyhow!(e)))?;
    let rows = match &args.output {
        Some(path) => {
            let mut out = std::io::BufWriter::new(
                std::fs::File::create(path)
                    .with_context(|| format!("creating {}", path.display()))
                    .map_err(data_err)?,
            );
            let rows = export_csv(&recording, &mut out).map_err(|e| data_err(anyhow!(e)))?;
            out.flush().map_err(|e| data_err(anyhow!(e)))?;
            rows
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            export_csv(&recording, &mut out).map_err(|e| data_err(anyhow!(e)))?
        }
    };
    eprintln!("exported {rows} sample rows from {} frames", recording.frames.len());
    Ok(())
}

fn cmd_pose(args: PoseArgs) -> Result<(), CliError> {
    let topology = match &args.topology {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading topology {}", path.display()))
                .map_err(config_err)?;
            SensorTopology::load(&text).map_err(|e| config_err(anyhow!(e)))?
        }
        None => SensorTopology::default_topology(),
    };
    let recording = Recording::load(&args.input).map_err(|e| data_err(anyhow!(e)))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut warned: BTreeSet<String> = BTreeSet::new();
    let mut malformed = 0u64;
    for frame in &recording.frames {
        let packet = match SensorPacket::decode(&frame.payload) {
            Ok(p) => p,
            Err(_) => {
                malformed += 1;
                continue;
            }
        };
        let pose = HandPose::from_packet(&packet, &topology).map_err(|e| data_err(anyhow!(e)))?;
        for segment in &pose.missing {
            let name = segment.to_string();
            if warned.insert(name.clone()) {
                eprintln!("warning: no samples for {name}; its finger is omitted");
            }
        }
        writeln!(out, "{}", pose.to_json_line()).map_err(|e| data_err(anyhow!(e)))?;
    }
    if malformed > 0 {
        eprintln!("skipped {malformed} malformed frames");
    }
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(config_err(anyhow!("--trials must be at least 1")));
    }
    let mut config = args.config.load()?;
    let eval_err = |e: eval::EvalError| match e {
        eval::EvalError::Sim(_) => data_err(anyhow!(e)),
        _ => config_err(anyhow!(e)),
    };

    let output = match args.test.as_str() {
        "static" => {
            let duration = parse_duration_s(args.duration.as_deref().unwrap_or("30m"))?;
            let trials = eval::drift_trials(&config, duration, args.trials, false)
                .map_err(eval_err)?;
            serde_json::to_string(&trials).expect("report serialize")
        }
        "dynamic" => {
            let duration = parse_duration_s(args.duration.as_deref().unwrap_or("45m"))?;
            if config.trajectory.is_static() {
                // The protocol default for dynamic runs.
                config.trajectory = TrajectoryConfig::RandomMotion {
                    max_rate_deg_s: 90.0,
                    wander_deg: DEFAULT_WANDER_DEG,
                };
            }
            let trials =
                eval::drift_trials(&config, duration, args.trials, true).map_err(eval_err)?;
            serde_json::to_string(&trials).expect("report serialize")
        }
        "autonomy" => {
            let trials = eval::autonomy_trials(&config, args.trials).map_err(eval_err)?;
            serde_json::to_string(&trials).expect("report serialize")
        }
        other => return Err(config_err(anyhow!("unknown test `{other}`"))),
    };
    println!("{output}");
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    if args.input.is_empty() {
        return Err(config_err(anyhow!("need at least one report file")));
    }
    let mut entries = Vec::new();
    for path in &args.input {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(data_err)?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(data_err)?;
        let (test, mean) = summarize_report(&value)
            .ok_or_else(|| data_err(anyhow!("{} is not an evaluation report", path.display())))?;
        entries.push(serde_json::json!({
            "file": path.display().to_string(),
            "test": test,
            "mean": mean,
        }));
    }
    let means: Vec<f64> =
        entries.iter().map(|e| e["mean"].as_f64().expect("mean is a number")).collect();
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    let sd = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / means.len() as f64).sqrt();
    let out = serde_json::json!({
        "inputs": entries,
        "across_inputs": { "mean": mean, "sd": sd },
    });
    println!("{out}");
    Ok(())
}

/// Pull (test name, headline mean) out of any report this toolkit writes.
fn summarize_report(value: &serde_json::Value) -> Option<(String, f64)> {
    let test = value.get("test")?.as_str()?.to_string();
    if let Some(mean) = value.pointer("/across_trials/mean").and_then(|v| v.as_f64()) {
        return Some((test, mean));
    }
    if let Some(mean) = value.pointer("/aggregate/mean_deg").and_then(|v| v.as_f64()) {
        return Some((test, mean));
    }
    None
}
