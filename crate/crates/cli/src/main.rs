use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use commands::{FigureArgs, IngestArgs};
use error::CliError;

/// In-region location verification experiments.
#[derive(Parser)]
#[command(name = "irlv", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw train/validation/test sets for one map.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Map index (RNG stream).
        #[arg(long, default_value_t = 0)]
        map: usize,
        #[arg(long)]
        force: bool,
    },
    /// Fit the configured model on a dataset CSV.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Validation rows for bandwidth selection.
        #[arg(long)]
        valid: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// One-class models: discard H1 rows instead of failing.
        #[arg(long)]
        drop_h1_rows: bool,
        #[arg(long)]
        force: bool,
    },
    /// ROC and operating points of a trained model on a labeled dataset.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Rows whose H0 scores set the thresholds (default: the test rows).
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Full multi-map experiment: per-map and averaged ROCs.
    Roc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Label and split an attenuation grid CSV (x,y,ap_1..ap_N in dB).
    Ingest {
        #[arg(long)]
        grid: PathBuf,
        /// ROI rectangle as x0,y0,x1,y1.
        #[arg(long, allow_hyphen_values = true)]
        roi: String,
        #[arg(long)]
        n_train: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV of AP coordinates (header x,y).
        #[arg(long)]
        aps: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Run a canned figure bundle.
    ReproduceFigure {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(irlv::presets::FIGURES))]
        figure: String,
        #[arg(long)]
        out: PathBuf,
        /// Small sizes for a smoke run.
        #[arg(long)]
        quick: bool,
        /// Attenuation grid CSV replacing the synthetic grid (fig11).
        #[arg(long)]
        data: Option<PathBuf>,
        /// ROI for --data, as x0,y0,x1,y1.
        #[arg(long, allow_hyphen_values = true)]
        roi: Option<String>,
        #[arg(long)]
        force: bool,
    },
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.cmd {
        Cmd::Simulate { config, out, map, force } => commands::simulate(&config, out, map, force),
        Cmd::Train { config, data, valid, out, drop_h1_rows, force } => {
            commands::train(&config, &data, valid.as_deref(), out, drop_h1_rows, force)
        }
        Cmd::Evaluate { config, model, data, calibration, out, force } => {
            commands::evaluate(&config, &model, &data, calibration.as_deref(), out, force)
        }
        Cmd::Roc { config, out, force } => commands::roc(&config, out, force),
        Cmd::Ingest { grid, roi, n_train, seed, aps, out, force } => {
            commands::ingest(IngestArgs { grid: &grid, roi: &roi, n_train, seed, aps: aps.as_deref(), out, force })
        }
        Cmd::ReproduceFigure { figure, out, quick, data, roi, force } => commands::reproduce_figure(FigureArgs {
            figure: &figure,
            quick,
            data: data.as_deref(),
            roi: roi.as_deref(),
            out,
            force,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
