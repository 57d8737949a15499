//! `softfail` command-line tool.
//!
//! Exit codes: 0 on success, 1 on internal failure (including failures to
//! write outputs), 2 when an input or flag is invalid.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{GridFlags, PreprocessFlags, SvmFlags};

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<softfail::Error> for CliError {
    fn from(e: softfail::Error) -> Self {
        CliError::input(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Tsv,
}

#[derive(Debug, Parser)]
#[command(name = "softfail", version, about = "Detect soft failures in robot simulation runs from joint-velocity noise")]
pub struct Cli {
    /// TOML configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (default 1).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Report rendering.
    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: Format,
    /// More log output; repeat for debug messages.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the noise trace from a joint-velocity log.
    Estimate {
        /// Tab-separated log with a header row; timestamps in the first column.
        #[arg(long)]
        input: PathBuf,
        /// Actual-velocity columns: names or zero-based index ranges such as
        /// `1-30`, comma-separated. Empty means every column not listed as desired.
        #[arg(long, default_value = "")]
        actual: String,
        /// Desired-velocity columns, same syntax.
        #[arg(long, default_value = "")]
        desired: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a classifier on an annotated trace.
    Train {
        #[arg(long)]
        noise: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Output model file.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        preprocess: PreprocessFlags,
        #[command(flatten)]
        svm: SvmFlags,
    },
    /// Score a model on an annotated validation trace.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        noise: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Grid search over FFT stride, C_hat and gamma.
    Tune {
        #[arg(long)]
        train_noise: PathBuf,
        #[arg(long)]
        train_annotations: PathBuf,
        #[arg(long)]
        val_noise: PathBuf,
        #[arg(long)]
        val_annotations: PathBuf,
        #[command(flatten)]
        grid: GridFlags,
        #[command(flatten)]
        preprocess: PreprocessFlags,
        /// Completed points are appended here and skipped when rerunning.
        #[arg(long)]
        journal: Option<PathBuf>,
        /// Tab-separated results for every grid point.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Retrain at the selected point and save the model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Label every frame of a trace.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        noise: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a labelled synthetic trace.
    Synth {
        /// Scenario file (TOML).
        #[arg(long, conflicts_with_all = ["preset", "duration"])]
        scenario: Option<PathBuf>,
        /// Built-in corpus; `validation` uses seed + 1 so a shared seed
        /// yields disjoint corpora.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Preset length in seconds (default 64 for training, 34 for validation).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        noise: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Write the resolved scenario here.
        #[arg(long)]
        spec_out: Option<PathBuf>,
    },
    /// Dump the intermediate tensors of one frame as TSV files.
    Inspect {
        #[arg(long)]
        noise: PathBuf,
        /// Zero-based frame index.
        #[arg(long, default_value_t = 0)]
        frame: usize,
        /// Take preprocessing settings from this model.
        #[arg(long, conflicts_with_all = ["fft_stride", "frame_stride"])]
        model: Option<PathBuf>,
        #[command(flatten)]
        preprocess: PreprocessFlags,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Training,
    Validation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
