mod eval;
mod fit;
mod ingest;
mod noise;
mod rank;
mod synth;

use anyhow::Result;
use clap::{Parser, Subcommand};

/// A command-line usage problem (bad flag combination, unknown name).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "bayesum",
    version,
    about = "Query-focused extractive summarization: Bayesian sentence ranking, IR baselines, and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Tokenize, index and archive a corpus from JSONL + qrels files.
    Ingest(ingest::IngestArgs),
    /// Fit the admixture model on an archived corpus.
    Fit(fit::FitArgs),
    /// Rank sentences with the requested systems and write run files.
    Rank(rank::RankArgs),
    /// Score run files against gold extraction judgments.
    Eval(eval::EvalArgs),
    /// Interpolate an IR run with true qrels into noisy judgment files.
    Noise(noise::NoiseArgs),
    /// Sample a synthetic corpus with known ground truth.
    Synth(synth::SynthArgs),
}

pub(crate) fn configure_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        if n > 0 {
            // Ignore the error if a pool already exists (tests).
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => ingest::run(args),
        Command::Fit(args) => fit::run(args),
        Command::Rank(args) => rank::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Noise(args) => noise::run(args),
        Command::Synth(args) => synth::run(args),
    }
}

