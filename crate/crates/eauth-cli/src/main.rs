//! Command-line front door. Every subcommand drives the same `eauth`
//! library paths the HTTP service uses; this binary only parses arguments,
//! reads files, and prints JSON.
//!
//! Exit codes: 0 success, 1 domain error (JSON error object on stderr),
//! 2 usage error (from argument parsing).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eauth::config::ServiceConfig;
use eauth::engine::{error_code, Engine, EngineError, SamplePayload};
use eauth::types::{Instrument, Modality};

mod commands;
use commands::*;

#[derive(Parser)]
#[command(
    name = "eauth",
    version,
    about = "Multi-instrument biometric e-authentication engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to the service configuration JSON.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Register a learner and/or submit enrollment samples.
    Enroll {
        #[command(flatten)]
        config: ConfigArg,
        /// Existing learner id.
        #[arg(long, conflicts_with = "register")]
        learner: Option<String>,
        /// Register a new learner with this display name first.
        #[arg(long)]
        register: Option<String>,
        #[arg(long)]
        modality: String,
        #[arg(long, default_value = "s1")]
        session: String,
        /// Frame rate for face samples.
        #[arg(long, default_value_t = 10.0)]
        fps: f64,
        /// Submit samples without finalizing even when complete.
        #[arg(long)]
        no_finalize: bool,
        /// Sample files (WAV / PGM / JSONL / CSV) or directories of PGM frames.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Verify a probe against a claimed identity.
    Verify {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        learner: String,
        #[arg(long)]
        modality: String,
        /// Record the outcome under this assessment activity.
        #[arg(long)]
        activity: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        fps: f64,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Presentation-attack check (identity-agnostic).
    Pad {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        modality: String,
        #[arg(long)]
        activity: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        fps: f64,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Build (with --learner) or print the trust report for an activity.
    Report {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        activity: String,
        #[arg(long)]
        learner: Option<String>,
    },
    /// Generate synthetic corpora and attack transforms.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Run a synthetic evaluation and print the error-rate report.
    Evaluate {
        /// One of vr, fr, kd, fra, vra.
        #[arg(long)]
        instrument: String,
        /// Population size (speakers, typists, or identities).
        #[arg(long)]
        speakers: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 8000)]
        sample_rate: u32,
        /// Also write the DET points as CSV.
        #[arg(long)]
        det_csv: Option<PathBuf>,
    },
    /// Calibrate an instrument threshold on synthetic data and write it
    /// back into the config file.
    Calibrate {
        #[command(flatten)]
        config: ConfigArg,
        /// One of vr, fr, kd.
        #[arg(long)]
        instrument: String,
        /// One of eer, far-at, frr-at.
        #[arg(long, default_value = "eer")]
        target: String,
        /// Target rate for far-at / frr-at.
        #[arg(long, default_value_t = 0.05)]
        value: f64,
        #[arg(long)]
        speakers: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train instrument background models.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        /// One of vr, vra, fra.
        #[arg(long)]
        instrument: String,
        /// Directory of WAV files (vr / vra).
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Labeled PGM manifest (fra).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Synthetic speaker population as WAV files.
    Voices {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        speakers: usize,
        #[arg(long, default_value_t = 4)]
        utterances: usize,
        #[arg(long, default_value_t = 3.0)]
        duration: f64,
        #[arg(long, default_value_t = 8000)]
        sample_rate: u32,
        #[arg(long, default_value_t = 99)]
        seed: u64,
        /// Base for per-utterance seeds; vary to get fresh utterances from
        /// the same population.
        #[arg(long, default_value_t = 0)]
        utterance_seed_base: u64,
    },
    /// Synthetic typing streams as JSONL files.
    Typing {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        typists: usize,
        #[arg(long, default_value_t = 2)]
        streams: usize,
        #[arg(long, default_value_t = 400)]
        keystrokes: usize,
        #[arg(long, default_value_t = 5)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream_seed_base: u64,
    },
    /// Synthetic face identities as PGM frame directories.
    Faces {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        identities: usize,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 50)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        frame_seed_base: u64,
    },
    /// Replay-attack transform of a WAV file.
    Replay {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        seed: u64,
    },
    /// Recapture-attack transform of a PGM frame.
    Recapture {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 3)]
        seed: u64,
    },
    /// Labeled bona fide + recaptured frame corpus with a JSON manifest.
    FacePadCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 32)]
        size: usize,
        #[arg(long, default_value_t = 5)]
        seed: u64,
    },
}

pub(crate) struct CliError {
    code: String,
    message: String,
}

impl CliError {
    fn new(code: &str, message: impl Into<String>) -> CliError {
        CliError {
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn to_json(&self) -> String {
        serde_json::json!({"error": {"code": self.code, "message": self.message}}).to_string()
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> CliError {
        CliError::new(error_code(&e), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::new("IoError", e.to_string())
    }
}

pub(crate) fn parse_modality(raw: &str) -> Result<Modality, CliError> {
    Modality::parse(raw)
        .ok_or_else(|| CliError::new("UsageError", format!("unknown modality '{raw}'")))
}

pub(crate) fn parse_instrument(raw: &str) -> Result<Instrument, CliError> {
    Instrument::parse(raw)
        .ok_or_else(|| CliError::new("UsageError", format!("unknown instrument '{raw}'")))
}

pub(crate) fn load_config(path: &Path) -> Result<ServiceConfig, CliError> {
    ServiceConfig::load(path).map_err(|m| CliError::new("ConfigError", m))
}

pub(crate) fn open_engine(path: &Path) -> Result<Engine, CliError> {
    Ok(Engine::open(load_config(path)?)?)
}

/// Reads sample files into a payload for the given modality. For faces,
/// each path may be a PGM file or a directory of PGM frames (sorted by
/// name); all frames form one sequence.
pub(crate) fn read_payload(
    modality: Modality,
    files: &[PathBuf],
    fps: f64,
) -> Result<SamplePayload, CliError> {
    match modality {
        Modality::Voice => {
            if files.len() != 1 {
                return Err(CliError::new(
                    "UsageError",
                    "voice samples take exactly one WAV file",
                ));
            }
            Ok(SamplePayload::Wav(std::fs::read(&files[0])?))
        }
        Modality::Face => {
            let mut frame_paths = Vec::new();
            for f in files {
                if f.is_dir() {
                    let mut entries: Vec<PathBuf> = std::fs::read_dir(f)?
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
                        .collect();
                    entries.sort();
                    frame_paths.extend(entries);
                } else {
                    frame_paths.push(f.clone());
                }
            }
            if frame_paths.is_empty() {
                return Err(CliError::new("UsageError", "no PGM frames found"));
            }
            let frames: Result<Vec<Vec<u8>>, _> = frame_paths.iter().map(std::fs::read).collect();
            Ok(SamplePayload::PgmFrames {
                frames: frames?,
                fps,
            })
        }
        Modality::Keystroke => {
            if files.len() != 1 {
                return Err(CliError::new(
                    "UsageError",
                    "keystroke samples take exactly one JSONL or CSV file",
                ));
            }
            let text = std::fs::read_to_string(&files[0])?;
            let events = if files[0].extension().is_some_and(|e| e == "csv") {
                eauth::keystroke::parse_csv_events(&text)
            } else {
                eauth::keystroke::parse_jsonl_events(&text)
            }
            .map_err(EngineError::from)?;
            Ok(SamplePayload::Keystrokes(events))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Serve { config } => cmd_serve(&config.config),
        Command::Enroll {
            config,
            learner,
            register,
            modality,
            session,
            fps,
            no_finalize,
            files,
        } => cmd_enroll(
            &config.config,
            learner,
            register,
            &modality,
            &session,
            fps,
            no_finalize,
            &files,
        ),
        Command::Verify {
            config,
            learner,
            modality,
            activity,
            fps,
            files,
        } => cmd_verify(&config.config, &learner, &modality, activity.as_deref(), fps, &files),
        Command::Pad {
            config,
            modality,
            activity,
            fps,
            files,
        } => cmd_pad(&config.config, &modality, activity.as_deref(), fps, &files),
        Command::Report {
            config,
            activity,
            learner,
        } => cmd_report(&config.config, &activity, learner.as_deref()),
        Command::Simulate(sim) => cmd_simulate(sim),
        Command::Evaluate {
            instrument,
            speakers,
            seed,
            sample_rate,
            det_csv,
        } => cmd_evaluate(&instrument, speakers, seed, sample_rate, det_csv.as_deref()),
        Command::Calibrate {
            config,
            instrument,
            target,
            value,
            speakers,
            seed,
        } => cmd_calibrate(&config.config, &instrument, &target, value, speakers, seed),
        Command::Train {
            config,
            instrument,
            corpus,
            manifest,
            seed,
        } => cmd_train(
            &config.config,
            &instrument,
            corpus.as_deref(),
            manifest.as_deref(),
            seed,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
