//! `maestro`: the command-line pipeline. Import a score, compare renditions,
//! aggregate survey ratings, train the emotion model, and generate an
//! emotionally targeted interpretation.
//!
//! Exit codes: 0 success, 1 usage error, 2 input or format error, 3 domain
//! error (e.g. the scores are not renditions of one work, or a validation
//! run found problems), 4 internal error. Payload goes to stdout, every
//! diagnostic to stderr.

mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::Defaults;

#[derive(Parser)]
#[command(
    name = "maestro",
    version,
    about = "Symbolic-score emotion modelling and interpretation generation"
)]
struct Cli {
    /// Emit machine-readable JSON payloads on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Echo the effective configuration and extra progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    /// Configuration file (maestro-config/1); defaults to $MAESTRO_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import a partwise MusicXML document into the canonical score format.
    ImportMusicxml(commands::ImportArgs),
    /// Export a canonical score as a Standard MIDI File for audition.
    ExportMidi(commands::ExportMidiArgs),
    /// Check a score's structural invariants.
    Validate(commands::ScoreArg),
    /// Compare an original score with an interpretation of the same work.
    Diff(commands::DiffArgs),
    /// Apply a delta set to a score.
    ApplyDelta(commands::ApplyDeltaArgs),
    /// List a score's rated segments.
    Segment(commands::ScoreArg),
    /// Print the 14-dimensional feature vector of every segment.
    Featurize(commands::ScoreArg),
    /// Aggregate participant ratings into per-segment emotion targets.
    SurveyAggregate(commands::SurveyArgs),
    /// Build a training dataset from scores and ratings.
    BuildDataset(commands::BuildDatasetArgs),
    /// Fit the ridge regression model on a dataset.
    Train(commands::TrainArgs),
    /// Predict per-segment emotions for a score.
    Predict(commands::PredictArgs),
    /// Generate an emotionally targeted interpretation of a score.
    Generate(commands::GenerateArgs),
    /// Flag content human players could not execute.
    Playability(commands::ScoreArg),
}

/// Shared flags resolved once per invocation.
pub struct Context {
    pub json: bool,
    pub verbose: bool,
    pub defaults: Defaults,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
    Domain(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Input(m)
            | CliError::Domain(m)
            | CliError::Internal(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(error)) => {
            eprintln!("error: {}", error.message());
            ExitCode::from(error.exit_code())
        }
        Err(_) => {
            eprintln!("error: internal failure (panic)");
            ExitCode::from(4)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let defaults = load_defaults(cli.config.as_deref())?;
    let ctx = Context {
        json: cli.json,
        verbose: cli.verbose,
        defaults,
    };
    if ctx.verbose {
        eprintln!("{}", ctx.defaults.describe());
    }
    match cli.command {
        Command::ImportMusicxml(args) => commands::import_musicxml(&ctx, args),
        Command::ExportMidi(args) => commands::export_midi(&ctx, args),
        Command::Validate(args) => commands::validate(&ctx, args),
        Command::Diff(args) => commands::diff(&ctx, args),
        Command::ApplyDelta(args) => commands::apply_delta(&ctx, args),
        Command::Segment(args) => commands::segment(&ctx, args),
        Command::Featurize(args) => commands::featurize(&ctx, args),
        Command::SurveyAggregate(args) => commands::survey_aggregate(&ctx, args),
        Command::BuildDataset(args) => commands::build_dataset(&ctx, args),
        Command::Train(args) => commands::train(&ctx, args),
        Command::Predict(args) => commands::predict(&ctx, args),
        Command::Generate(args) => commands::generate(&ctx, args),
        Command::Playability(args) => commands::playability(&ctx, args),
    }
}

fn load_defaults(flag: Option<&str>) -> Result<Defaults, CliError> {
    let path = match flag {
        Some(path) => Some(path.to_string()),
        None => std::env::var("MAESTRO_CONFIG")
            .ok()
            .filter(|p| !p.is_empty()),
    };
    match path {
        None => Ok(Defaults::default()),
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Input(format!("cannot read config `{path}`: {e}")))?;
            Defaults::from_file(&text)
                .map_err(|e| CliError::Input(format!("bad config `{path}`: {e}")))
        }
    }
}
