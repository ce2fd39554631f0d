//! `metrology`: camera height and object heights from detection documents.
//!
//! Exit status: 0 on success, 1 when the input is at fault (bad arguments,
//! unreadable or invalid documents), 2 on internal failures (including
//! failing to write outputs).

mod commands;
mod files;

use clap::{Args, Parser, Subcommand};
use metrology_core::io::ToolkitConfig;
use metrology_core::solver::Method;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "metrology",
    version,
    about = "Single-view camera height and object height estimation"
)]
struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate camera and object heights for a document or a directory of documents.
    Solve(SolveArgs),
    /// Generate synthetic detection documents with ground truth.
    Synth(SynthArgs),
    /// Score results against ground truth.
    Eval(EvalArgs),
    /// Render an SVG overlay of a document and its results.
    Overlay(OverlayArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Detection document, or a directory of them.
    input: PathBuf,
    /// Overrides the configured method: scalenet, pgm or pgm-fixed.
    #[arg(long)]
    method: Option<String>,
    /// Output file (default: standard output), or directory when the input is one.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write an SVG overlay here (a directory when the input is one).
    #[arg(long, value_name = "PATH")]
    overlay: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    scenes: usize,
    /// Objects per scene (default: from the configuration).
    #[arg(long)]
    objects: Option<usize>,
    /// Output directory; a single scene goes to standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Results file or directory.
    #[arg(long)]
    results: PathBuf,
    /// Ground truth: documents carrying `ground_truth`, or bare truth files.
    #[arg(long)]
    truth: PathBuf,
    /// Compare against standing heights by undoing the upright ratio.
    #[arg(long)]
    upright: bool,
    /// Write the residual threshold curve as CSV.
    #[arg(long, value_name = "FILE")]
    curve: Option<PathBuf>,
    /// Report file (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OverlayArgs {
    document: PathBuf,
    results: PathBuf,
    /// SVG file (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// A failure and whose fault it is.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

pub type CliResult<T> = Result<T, Failure>;

pub trait Blame<T> {
    fn input(self) -> CliResult<T>;
    fn internal(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Blame<T> for Result<T, E> {
    fn input(self) -> CliResult<T> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn internal(self) -> CliResult<T> {
        self.map_err(|e| Failure::Internal(e.into()))
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ToolkitConfig> {
    let Some(path) = path else {
        return Ok(ToolkitConfig::default());
    };
    let text = files::read_text(path)?;
    ToolkitConfig::from_toml(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .input()
}

fn run(cli: Cli) -> CliResult<()> {
    let mut config = load_config(cli.config.as_deref())?;
    if cli.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure::Input(anyhow::anyhow!(
            "no subcommand given; see `metrology --help`"
        )));
    };
    match command {
        Command::Solve(args) => {
            if let Some(m) = &args.method {
                config.method = m.parse::<Method>().map_err(anyhow::Error::msg).input()?;
            }
            commands::solve(
                &config,
                &args.input,
                args.output.as_deref(),
                args.overlay.as_deref(),
            )
        }
        Command::Synth(args) => commands::synth(
            &config,
            args.seed,
            args.scenes,
            args.objects.unwrap_or(config.synth.objects),
            args.output.as_deref(),
        ),
        Command::Eval(args) => commands::eval(
            &args.results,
            &args.truth,
            args.upright,
            args.curve.as_deref(),
            args.output.as_deref(),
        ),
        Command::Overlay(args) => {
            commands::overlay(&config, &args.document, &args.results, args.output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Input(e))) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Internal(e))) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
        Err(_) => ExitCode::from(2),
    }
}
