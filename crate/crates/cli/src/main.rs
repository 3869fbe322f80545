//! `vox`: the speaker clustering pipeline as one batch executable.
//!
//! Exit codes: 0 on success, 2 for usage and configuration problems
//! (including missing input files), 1 for runtime failures.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use voxcluster::Error;

use crate::config::FileConfig;

#[derive(Parser)]
#[command(name = "vox", version, about = "Unknown-speaker clustering pipeline")]
struct Cli {
    /// JSON config file consulted for options not given as flags or VOX_* env vars.
    #[arg(long, global = true, env = "VOX_CONFIG")]
    config: Option<PathBuf>,
    /// Print per-step progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled speaker corpus.
    Synth(commands::SynthArgs),
    /// Train the CNN speaker classifier on a corpus manifest.
    Train(commands::TrainArgs),
    /// Extract window embeddings from one clip.
    Embed(commands::EmbedArgs),
    /// Segment a clip by speaker: cluster windows, refine boundaries.
    Diarize(commands::DiarizeArgs),
    /// Identify the speaker of a query clip against enrolled speakers.
    Identify(commands::IdentifyArgs),
    /// Render projections and a dendrogram from saved embeddings.
    Viz(commands::VizArgs),
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Format(_)
        | Error::Unsupported(_)
        | Error::Config(_)
        | Error::Dimension(_)
        | Error::ClipTooShort { .. }
        | Error::DegenerateData(_)
        | Error::Manifest(_) => 2,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
        Error::State(_) | Error::Internal(_) | Error::Diverged { .. } | Error::Io { .. } => 1,
    }
}

fn main() {
    let cli = Cli::parse();
    let result = FileConfig::load(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Synth(args) => commands::cmd_synth(args, &file),
        Command::Train(args) => commands::cmd_train(args, &file, cli.verbose),
        Command::Embed(args) => commands::cmd_embed(args, &file),
        Command::Diarize(args) => commands::cmd_diarize(args, &file),
        Command::Identify(args) => commands::cmd_identify(args, &file),
        Command::Viz(args) => commands::cmd_viz(args, &file),
    });
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
