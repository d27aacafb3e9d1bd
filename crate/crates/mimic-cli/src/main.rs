//! Operator entry point for the meeting synthesis engine.
//!
//! Exit codes: 0 success, 1 unusable input (config, source, flags),
//! 2 backend trouble (connectivity, missing credentials, exhausted budget),
//! 3 generation or evaluation failure.

mod batch;
mod ops;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "mimic",
    version,
    about = "Staged multi-agent meeting-transcript generator",
    long_about = "Generates synthetic multi-party meeting transcripts from articles by \
        staging them like a film production: summary and casting, scene outline, \
        turn-by-turn filming between non-omniscient participant agents, director \
        review, naturalistic disruptions, and an editing pass.\n\n\
        Live runs read MIMIC_API_KEY (required), MIMIC_API_BASE, and MIMIC_MODEL \
        from the environment; --scripted replays canned responses instead and \
        needs no credentials."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one meeting transcript from a source article.
    Generate(ops::GenerateArgs),
    /// Generate a meeting for every source file in a directory.
    Batch(batch::BatchArgs),
    /// Score a transcript with the judge instruments and write a report.
    Evaluate(ops::EvaluateArgs),
    /// Print the corpus-statistics row for a transcript.
    Stats(ops::StatsArgs),
    /// Generate a single-writer omniscient transcript for comparison.
    Baseline(ops::BaselineArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successes; anything else is bad
            // usage, which is an input problem, not a backend one.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(args) => ops::cmd_generate(args),
        Command::Batch(args) => batch::cmd_batch(args),
        Command::Evaluate(args) => ops::cmd_evaluate(args),
        Command::Stats(args) => ops::cmd_stats(args),
        Command::Baseline(args) => ops::cmd_baseline(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", ops::redact(e.message()));
        std::process::exit(e.exit_code());
    }
}
