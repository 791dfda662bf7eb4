//! Command-line workbench: corpus building, transform fitting, training,
//! evaluation and plot-data export.

use std::ffi::OsString;
use std::path::PathBuf;

use argon::Error;
use clap::{Parser, Subcommand};

pub mod commands;
pub mod manifest;
pub mod settings;

pub use manifest::ExperimentManifest;
pub use settings::{Flags, Reg, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "argon", version, about = "Attribute-regularized latent models for symbolic melodies")]
struct Cli {
    /// TOML file with defaults for any flag (keys as the flag names).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the melody corpus.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Compute every attribute of every melody.
    Attributes,
    /// Fit the power transform of one attribute on the training split.
    FitTransform,
    /// Train one model.
    Train,
    /// Score a trained model on the test split.
    Eval,
    /// Write scatter, density and distribution data for plotting.
    ExportPlots,
    /// Run the full three-regularizer, two-gamma grid on a synthetic corpus.
    Replicate,
}

#[derive(Debug, Subcommand)]
enum CorpusCommand {
    /// Generate a synthetic corpus.
    Synth,
    /// Extract melodies from a directory of MIDI files.
    Ingest { dir: PathBuf },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) => EXIT_USAGE,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = settings::resolve(cli.flags, cli.config.as_deref()).and_then(|s| dispatch(&cli.command, &s));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("argon: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: &Command, s: &Settings) -> argon::Result<()> {
    match command {
        Command::Corpus(CorpusCommand::Synth) => commands::synth(s).map(drop),
        Command::Corpus(CorpusCommand::Ingest { dir }) => commands::ingest(s, dir).map(drop),
        Command::Attributes => commands::attributes(s).map(drop),
        Command::FitTransform => commands::fit_transform(s).map(drop),
        Command::Train => commands::train(s),
        Command::Eval => commands::eval(s).map(drop),
        Command::ExportPlots => commands::export_plots(s),
        Command::Replicate => commands::replicate(s).map(drop),
    }
}
