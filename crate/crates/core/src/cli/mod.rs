//! The `indrnn-eeg` command line.
//!
//! Exit codes: 0 success, 1 unexpected failure, 2 bad input (files,
//! formats, configuration, too little data), 3 numerical failure
//! (non-finite loss or gradient, failed gradient check).

mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub use config::Settings;
pub use manifest::{FileDigest, ManifestBuilder, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "indrnn-eeg", version, about = "IndRNN seizure/non-seizure EEG classification")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Disable data-parallel execution.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment an EDF corpus, print segment statistics and optionally write a segment cache.
    Segment(SegmentArgs),
    /// Train one model on one balanced split and save a checkpoint.
    Train(TrainArgs),
    /// Repeated random-split cross-validation.
    Cv(ExperimentArgs),
    /// Cross-validation at each segment length.
    SweepLength(ExperimentArgs),
    /// Cross-validation at each IndRNN depth.
    SweepDepth(ExperimentArgs),
    /// Finite-difference check of the analytic gradients (64-bit).
    Gradcheck(GradcheckArgs),
    /// Write a synthetic EDF corpus with summary files.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct SegmentArgs {
    data_dir: PathBuf,
    #[arg(long)]
    summary_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 23.0)]
    seconds: f64,
    /// One channel label per line (default: the built-in 17-channel montage).
    #[arg(long)]
    channels_file: Option<PathBuf>,
    /// Temporal decimation applied to cached samples.
    #[arg(long, default_value_t = 1)]
    decimate: usize,
    /// Segment cache to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Segment cache from `segment` (overrides `cache` in the config).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    summary_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra configuration entries, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_parser = ["indrnn", "lstm", "cnn"])]
    model: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    decimation: Option<usize>,
    /// Checkpoint path; history, metrics and manifest are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    repetitions: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value = "indrnn", value_parser = ["indrnn", "lstm", "cnn"])]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Scale analytic gradients by 1 + FACTOR before comparing (should fail).
    #[arg(long, value_name = "FACTOR")]
    corrupt: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    cases: usize,
    /// Seconds per file.
    #[arg(long, default_value_t = 1200.0)]
    duration: f64,
    #[arg(long, default_value_t = 4)]
    seizures_per_case: usize,
    #[arg(long, default_value_t = 1)]
    files_per_case: usize,
    /// Shortest seizure in whole seconds.
    #[arg(long, default_value_t = 40)]
    min_seizure_seconds: u32,
    /// Longest seizure in whole seconds.
    #[arg(long, default_value_t = 120)]
    max_seizure_seconds: u32,
    #[arg(long)]
    out: PathBuf,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        return EXIT_NUMERICAL;
    }
    match e {
        Error::Training { source, .. } | Error::Repetition { source, .. } => exit_code(source),
        Error::InvalidConfig(_)
        | Error::Edf { .. }
        | Error::Summary { .. }
        | Error::Channels(_)
        | Error::Annotation { .. }
        | Error::InsufficientSegments { .. }
        | Error::Format { .. }
        | Error::Io { .. }
        | Error::RawIo(_)
        | Error::NoData(_) => EXIT_INPUT,
        _ => EXIT_FAILURE,
    }
}

/// Runs the command line given by `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    crate::exec::set_parallel(!cli.sequential);
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match cli.command {
        Command::Segment(a) => commands::segment(a, argv),
        Command::Train(a) => commands::train(a, argv),
        Command::Cv(a) => commands::cv(a, argv),
        Command::SweepLength(a) => commands::sweep_length(a, argv),
        Command::SweepDepth(a) => commands::sweep_depth(a, argv),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Synth(a) => commands::synth(a, argv),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
