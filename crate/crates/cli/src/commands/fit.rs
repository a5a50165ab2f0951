use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use bayesum::bayesum::{em_fit_from, init_params, AlphaUpdate, Engine, FitConfig, ModelParams};
use bayesum::corpus::{read_qrels_for, Corpus, FieldSet};

use crate::config::{pick, FileConfig};
use crate::util::{stage_dir, write_atomic};

#[derive(Args)]
pub struct FitArgs {
    /// Corpus archive produced by `ingest` (or `synth` + `ingest`).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Query fields made visible to the model (title,description,summary,
    /// concepts | all | none).
    #[arg(long)]
    pub fields: Option<String>,
    /// Inference engine: variational | ep.
    #[arg(long)]
    pub engine: Option<String>,
    /// Outer EM iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Inner fixed-point iterations per sentence.
    #[arg(long)]
    pub inner_iters: Option<usize>,
    /// Relative bound-change tolerance for early stopping.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Smoothing weight toward the general model.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub alpha_general: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_other: f64,
    /// Update the Dirichlet prior by moment matching each iteration.
    #[arg(long)]
    pub learn_alpha: bool,
    /// Weight of each observed query word in the M-step counts.
    #[arg(long, default_value_t = 1.0)]
    pub query_word_weight: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Resume from a previously saved model instead of initializing.
    #[arg(long)]
    pub init_model: Option<PathBuf>,
    /// Alternative qrels replacing the archive's relevance judgments
    /// (noisy-judgment experiments).
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Optional TOML config file; flags win over file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn build_config(
    fields: Option<&str>,
    engine: Option<&str>,
    iters: Option<usize>,
    inner_iters: Option<usize>,
    tolerance: Option<f64>,
    lambda: Option<f64>,
    seed: Option<u64>,
    file: &FileConfig,
) -> Result<FitConfig> {
    let fields_str = fields
        .map(str::to_string)
        .or_else(|| file.fields.clone())
        .unwrap_or_else(|| "all".into());
    let engine_str = engine
        .map(str::to_string)
        .or_else(|| file.engine.clone())
        .unwrap_or_else(|| "variational".into());
    let defaults = FitConfig::default();
    Ok(FitConfig {
        engine: engine_str.parse::<Engine>()?,
        max_iters: pick(iters, file.iters, defaults.max_iters),
        inner_iters: pick(inner_iters, file.inner_iters, defaults.inner_iters),
        tolerance: pick(tolerance, file.tolerance, defaults.tolerance),
        seed: pick(seed, file.seed, defaults.seed),
        fields: FieldSet::parse(&fields_str)?,
        lambda_smooth: pick(lambda, file.lambda, defaults.lambda_smooth),
        ..defaults
    })
}

/// Load a corpus archive, optionally swapping in alternative qrels.
pub fn load_corpus_with_qrels(
    corpus_path: &PathBuf,
    qrels: Option<&PathBuf>,
) -> Result<(Corpus, bool)> {
    let corpus = Corpus::load_archive_path(corpus_path)
        .with_context(|| format!("loading corpus {}", corpus_path.display()))?;
    match qrels {
        None => Ok((corpus, false)),
        Some(path) => {
            let per_query = read_qrels_for(path, &corpus)
                .with_context(|| format!("loading qrels {}", path.display()))?;
            Ok((corpus.with_relevance(per_query)?, true))
        }
    }
}

pub fn run(args: FitArgs) -> Result<()> {
    super::configure_threads(args.threads);
    let file = FileConfig::load(args.config.as_deref())?;
    let mut cfg = build_config(
        args.fields.as_deref(),
        args.engine.as_deref(),
        args.iters,
        args.inner_iters,
        args.tolerance,
        args.lambda,
        args.seed,
        &file,
    )?;
    cfg.alpha_general = args.alpha_general;
    cfg.alpha_other = args.alpha_other;
    cfg.query_word_weight = args.query_word_weight;
    if args.learn_alpha {
        cfg.alpha_update = AlphaUpdate::Learned;
    }

    let (corpus, _) = load_corpus_with_qrels(&args.corpus, args.qrels.as_ref())?;
    let threads = args.threads.or(file.threads);
    super::configure_threads(threads);

    let init = match &args.init_model {
        Some(dir) => ModelParams::load_dir(dir)
            .with_context(|| format!("loading initial model {}", dir.display()))?,
        None => init_params(&corpus, &cfg)?,
    };
    let (params, trace) = em_fit_from(&corpus, init, &cfg)?;

    let mut trace_csv = String::from("iteration,bound,seconds\n");
    for t in &trace {
        writeln!(trace_csv, "{},{},{:.3}", t.iteration, t.bound, t.seconds)?;
    }
    let hash = cfg.hash();
    stage_dir(&args.out, |staging| {
        params.save_dir(staging, &hash)?;
        write_atomic(&staging.join("trace.csv"), trace_csv.as_bytes())?;
        Ok(())
    })?;

    let last = trace.last();
    println!(
        "fit: {} iterations, final bound {} -> {}",
        trace.len(),
        last.map_or("n/a".into(), |t| format!("{:.4}", t.bound)),
        args.out.display()
    );
    Ok(())
}
