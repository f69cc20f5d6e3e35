use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use ovgrasp_core::eval::{
    check_published, evaluate_splits, gas_report, parse_published_csv, parse_trials_csv, scenario_metrics, ApReport,
    GroundTruth, GAS_TOLERANCE,
};
use ovgrasp_core::geometry::DistanceSpace;
use ovgrasp_core::intent::Token;
use ovgrasp_core::ovdetect::{DetectionRecord, VocabularyFile};
use ovgrasp_core::protocol::{decode_command, encode_command};
use ovgrasp_core::sim::{run_scenario, InteractiveServer, Scenario, ScenarioTrace, SimError};

#[derive(Parser, Debug)]
#[command(name = "ovgrasp", version, about = "Grasp-assistance pipeline simulator and evaluation tools")]
struct Cli {
    /// Raise log verbosity (-v info, -vv debug). OVGRASP_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Play a scripted scenario and write trace, telemetry and metrics.
    Run(RunConfig),
    /// Score a detection log against ground truth (AP at IoU >= 0.5).
    EvalAp {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Grasping ability scores from trial scores or a published component table.
    EvalGas {
        /// CSV: object,grasp_type,grasping,maintaining
        #[arg(long, conflicts_with = "table", required_unless_present = "table")]
        trials: Option<PathBuf>,
        /// CSV: method,grasp_type,grasping,maintaining,gas
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Print the 4-byte command frame for a token.
    ProtoEncode {
        /// G, R or S
        #[arg(long)]
        token: String,
        #[arg(long, default_value_t = 0)]
        seq: u8,
    },
    /// Decode a command frame given as hex bytes.
    ProtoDecode {
        /// e.g. "a5 00 47 xx" or "a50047xx"
        #[arg(required = true)]
        hex: Vec<String>,
    },
    /// Serve the steering UI channel (newline-delimited JSON over TCP).
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory for the trace written on shutdown.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
struct RunConfig {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario's distance space (mixed or metric).
    #[arg(long)]
    distance_space: Option<DistanceSpace>,
}

/// Exit 1 for I/O failures, 2 for invalid input.
enum Failure {
    Io(anyhow::Error),
    Invalid(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn io(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Io(e.into())
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> CmdResult {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(io(e)),
        _ => Ok(()),
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| invalid(anyhow!("{}: {e}", path.display())))
}

fn write_output(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(io)
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| match e {
        SimError::Io { .. } | SimError::ScenarioInvalid { .. } => invalid(e),
        other => io(other),
    })
}

fn write_trace(dir: &Path, trace: &ScenarioTrace) -> CmdResult {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(io)?;
    write_output(&dir.join("trace.jsonl"), &trace.trace_jsonl())?;
    write_output(&dir.join("telemetry.jsonl"), &trace.telemetry_jsonl())?;
    write_output(&dir.join("detections.jsonl"), &trace.detections_jsonl())?;
    let gt = serde_json::to_string_pretty(&trace.ground_truth()).map_err(io)?;
    write_output(&dir.join("ground_truth.json"), &(gt + "\n"))?;
    let metrics = scenario_metrics(trace).map_err(invalid)?;
    let metrics = serde_json::to_string_pretty(&metrics).map_err(io)?;
    write_output(&dir.join("metrics.json"), &(metrics + "\n"))
}

fn cmd_run(cfg: RunConfig) -> CmdResult {
    let mut scenario = load_scenario(&cfg.scenario)?;
    if let Some(seed) = cfg.seed {
        scenario.config.seed = seed;
    }
    if let Some(space) = cfg.distance_space {
        scenario.config.distance_space = space;
    }
    let trace = run_scenario(&scenario).map_err(invalid)?;
    write_trace(&cfg.out, &trace)?;
    log::info!("{} frames written to {}", trace.frames.len(), cfg.out.display());
    Ok(())
}

fn cmd_eval_ap(detections: &Path, gt_path: &Path, vocab_path: &Path) -> CmdResult {
    let mut log = Vec::new();
    for (i, line) in read_input(detections)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(line)
            .map_err(|e| invalid(anyhow!("{} line {}: {e}", detections.display(), i + 1)))?;
        log.push(rec);
    }
    let gt: GroundTruth = serde_json::from_str(&read_input(gt_path)?)
        .map_err(|e| invalid(anyhow!("{} line {}: {e}", gt_path.display(), e.line())))?;
    let vocab = VocabularyFile::load(vocab_path).map_err(invalid)?;
    let report = evaluate_splits(&log, &gt, &vocab).map_err(invalid)?;
    emit(&ApReport::table(&[("mock", &report)]))?;
    emit(&(serde_json::to_string_pretty(&report).map_err(io)? + "\n"))?;
    Ok(())
}

fn cmd_eval_gas(trials: Option<&Path>, table: Option<&Path>) -> CmdResult {
    if let Some(path) = trials {
        let text = read_input(path)?;
        let trials = parse_trials_csv(text.as_bytes()).map_err(|e| invalid(anyhow!("{}: {e}", path.display())))?;
        let report = gas_report(&trials).map_err(invalid)?;
        emit(&report.table("trials"))?;
        emit(&(serde_json::to_string_pretty(&report).map_err(io)? + "\n"))?;
    } else if let Some(path) = table {
        let text = read_input(path)?;
        let rows = parse_published_csv(text.as_bytes()).map_err(|e| invalid(anyhow!("{}: {e}", path.display())))?;
        let checks = check_published(&rows, GAS_TOLERANCE);
        let mut table = format!("{:<24} {:<12} {:>9} {:>9}  status\n", "method", "grasp_type", "published", "computed");
        for c in &checks {
            table += &format!(
                "{:<24} {:<12} {:>9.2} {:>9.2}  {}\n",
                c.method,
                c.grasp_type.as_str(),
                c.published,
                c.computed,
                if c.consistent { "ok" } else { "INCONSISTENT" }
            );
        }
        emit(&table)?;
        emit(&(serde_json::to_string_pretty(&checks).map_err(io)? + "\n"))?;
    }
    Ok(())
}

fn parse_hex(parts: &[String]) -> Result<Vec<u8>, Failure> {
    let joined: String = parts.concat().chars().filter(|c| !c.is_whitespace()).collect();
    let joined = joined.trim_start_matches("0x");
    if !joined.len().is_multiple_of(2) {
        return Err(invalid(anyhow!("odd number of hex digits")));
    }
    (0..joined.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&joined[i..i + 2], 16).map_err(|e| invalid(anyhow!("bad hex '{}': {e}", &joined[i..i + 2]))))
        .collect()
}

fn cmd_proto_encode(token: &str, seq: u8) -> CmdResult {
    let token: Token = token.parse().map_err(|e| invalid(anyhow!("{e}")))?;
    let frame = encode_command(token.as_byte(), seq).map_err(invalid)?;
    emit(&format!("{:02x} {:02x} {:02x} {:02x}\n", frame[0], frame[1], frame[2], frame[3]))
}

fn cmd_proto_decode(hex: &[String]) -> CmdResult {
    let bytes = parse_hex(hex)?;
    match decode_command(&bytes).map_err(invalid)? {
        Some((token, seq)) => emit(&format!("token={token} seq={seq}\n")),
        None => Err(invalid(anyhow!("frame truncated: {} of 4 bytes", bytes.len()))),
    }
}

fn cmd_serve(scenario: &Path, host: &str, port: u16, out: Option<&Path>) -> CmdResult {
    let scenario = load_scenario(scenario)?;
    let server = InteractiveServer::bind(host, port).map_err(io)?;
    let shutdown = Arc::new(AtomicBool::new(false));
    {
        let shutdown = shutdown.clone();
        ctrlc::set_handler(move || shutdown.store(true, Ordering::SeqCst)).map_err(io)?;
    }
    emit(&format!("listening on {}\n", server.local_addr()))?;
    io::stdout().flush().map_err(io)?;
    let trace = server.run(&scenario, shutdown).map_err(io)?;
    log::info!("shutting down after {} frames", trace.frames.len());
    if let Some(dir) = out {
        write_trace(dir, &trace)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OVGRASP_LOG", default)).init();

    let result = match cli.command {
        Cmd::Run(cfg) => cmd_run(cfg),
        Cmd::EvalAp {
            detections,
            ground_truth,
            vocab,
        } => cmd_eval_ap(&detections, &ground_truth, &vocab),
        Cmd::EvalGas { trials, table } => cmd_eval_gas(trials.as_deref(), table.as_deref()),
        Cmd::ProtoEncode { token, seq } => cmd_proto_encode(&token, seq),
        Cmd::ProtoDecode { hex } => cmd_proto_decode(&hex),
        Cmd::Serve {
            scenario,
            port,
            host,
            out,
        } => cmd_serve(&scenario, &host, port, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
