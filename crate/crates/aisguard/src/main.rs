//! `aisguard` command line.
//!
//! Exit codes: 0 success, 1 fatal configuration or I/O error, 2 run completed
//! but too many input lines were rejected. `AISGUARD_LOG` sets the log level.

use std::fs;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use aisguard::config::load_config;
use aisguard::events::read_detected;
use aisguard::run::{create_file, RunRequest};
use aisguard::scenario::{eval_report, load_scenario, read_truth, write_synth};
use aisguard_core::synth::{generate, MatchParams};
use aisguard_core::{Mode, PipelineConfig};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::info;

#[derive(Parser)]
#[command(name = "aisguard", version, about = "GNSS spoofing and jamming detection from decoded AIS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector over decoded AIS files (.ndjson, .jsonl, .json, .csv).
    Run {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// JSON configuration; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Naive comparator: skip stage 1 and report every cluster.
        #[arg(long)]
        baseline: bool,
        /// GeoJSON land polygons; without it every cluster counts as coastal.
        #[arg(long)]
        coastline: Option<PathBuf>,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Generate a synthetic scenario with ground truth.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score detected events against a truth sidecar.
    Eval {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Events of a baseline run, for the false-alarm reduction.
        #[arg(long)]
        baseline_events: Option<PathBuf>,
        #[arg(long, default_value_t = MatchParams::default().radius_m)]
        match_radius_m: f64,
        #[arg(long, default_value_t = MatchParams::default().window_s)]
        match_window_s: f64,
    },
}

enum Status {
    Ok,
    RecordErrors,
}

fn execute(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Run { input, config, out, baseline, coastline, workers } => {
            let config = match config {
                Some(path) => load_config(&path)?,
                None => PipelineConfig::default(),
            };
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let req = RunRequest {
                inputs: input,
                config,
                coastline,
                mode: if baseline { Mode::Baseline } else { Mode::Full },
                workers,
                out_dir: out,
            };
            let outcome = aisguard::run(&req)?;
            let finals = outcome.output.stage3.events.iter().filter(|e| aisguard_core::pipeline::is_final(e.category));
            info!("{} events written to {}", finals.count(), req.out_dir.display());
            for (file, e) in outcome.parse_errors.iter().take(20) {
                log::warn!("{}: {e}", file.display());
            }
            Ok(if outcome.too_many_errors { Status::RecordErrors } else { Status::Ok })
        }
        Command::Synth { scenario, out } => {
            let sc = load_scenario(&scenario)?;
            let generated = generate(&sc).context("scenario generation failed")?;
            write_synth(&out, &generated)?;
            info!("{} records, {} truth events", generated.records.len(), generated.truth.events.len());
            Ok(Status::Ok)
        }
        Command::Eval { events, truth, out, baseline_events, match_radius_m, match_window_s } => {
            let read_events = |path: &PathBuf| -> Result<_> {
                let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                read_detected(&text).with_context(|| format!("{}", path.display()))
            };
            let detected = read_events(&events)?;
            let baseline = baseline_events.as_ref().map(read_events).transpose()?;
            let file = fs::File::open(&truth).with_context(|| format!("cannot read {}", truth.display()))?;
            let truth = read_truth(BufReader::new(file)).with_context(|| format!("{}", truth.display()))?;
            let params = MatchParams { radius_m: match_radius_m, window_s: match_window_s };
            let report = eval_report(&detected, baseline.as_deref(), &truth.events, params);
            let mut w = create_file(&out)?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            std::io::Write::flush(&mut w)?;
            Ok(Status::Ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AISGUARD_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::RecordErrors) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
