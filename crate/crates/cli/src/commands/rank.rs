use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use bayesum::bayesum::{score_sentences, FitConfig, ModelParams, ScoreMethod};
use bayesum::corpus::{Corpus, FieldSet};
use bayesum::rankers::{
    feedback_grid, idf_weights, pool_all, pool_filtered, rank_cosine, rank_jaccard, rank_kl,
    rank_kl_rel, rank_position, rank_random, write_run, FeedbackConfig, Ranking,
};

use super::UsageError;
use crate::config::{pick, FileConfig};
use crate::util::{query_seed, stage_dir, write_atomic};

const ALL_SYSTEMS: [&str; 7] = [
    "random", "position", "jaccard", "cosine", "kl", "kl-rel", "bayesum",
];

#[derive(Args)]
pub struct RankArgs {
    /// Corpus archive.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for run files (one per system / grid point).
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated systems: random,position,jaccard,cosine,kl,kl-rel,bayesum (or all).
    #[arg(long, value_delimiter = ',', required = true)]
    pub systems: Vec<String>,
    /// Query fields used by the text-matching systems.
    #[arg(long)]
    pub fields: Option<String>,
    /// Fitted model directory (required for bayesum).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Smoothing weight toward the background model.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Feedback depth for kl-rel.
    #[arg(long, default_value_t = 25)]
    pub feedback_n: usize,
    /// Feedback interpolation weight for kl-rel.
    #[arg(long, default_value_t = 0.4)]
    pub feedback_lambda: f64,
    /// Sweep the full kl-rel grid (n in {5,10,25,50,100} x lambda in
    /// {0.2,0.4,0.6,0.8}) instead of the single configured point.
    #[arg(long)]
    pub grid: bool,
    /// Score bayesum sentences by posterior query share instead of KL.
    #[arg(long)]
    pub posterior_scores: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Alternative qrels replacing the archive's relevance judgments.
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// Optional TOML config file; flags win over file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

struct QueryJob {
    query_id: String,
    query_tokens_filtered: Vec<u32>,
    doc_ids: Vec<String>,
    doc_indices: Vec<u32>,
}

fn query_jobs(corpus: &Corpus, fields: FieldSet) -> Vec<QueryJob> {
    corpus
        .queries()
        .iter()
        .enumerate()
        .filter_map(|(j, q)| {
            let docs = corpus.relevance().relevant_docs(j as u32);
            if docs.is_empty() {
                log::warn!("query {}: no relevant documents, skipped", q.id);
                return None;
            }
            Some(QueryJob {
                query_id: q.id.clone(),
                query_tokens_filtered: corpus.filter_tokens(&q.tokens_for(fields)),
                doc_ids: docs.iter().map(|&k| corpus.doc(k).id.clone()).collect(),
                doc_indices: docs.to_vec(),
            })
        })
        .collect()
}

pub fn run(args: RankArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    super::configure_threads(args.threads.or(file.threads));
    let seed = pick(args.seed, file.seed, 0);
    let lambda = pick(args.lambda, file.lambda, 0.1);
    let fields_str = args
        .fields
        .clone()
        .or_else(|| file.fields.clone())
        .unwrap_or_else(|| "all".into());
    let fields = FieldSet::parse(&fields_str)?;

    let mut systems: Vec<String> = args.systems.iter().map(|s| s.to_lowercase()).collect();
    if systems.iter().any(|s| s == "all") {
        systems = ALL_SYSTEMS.iter().map(|s| s.to_string()).collect();
    }
    for s in &systems {
        if !ALL_SYSTEMS.contains(&s.as_str()) {
            return Err(UsageError(format!(
                "unknown system '{s}' (expected one of {})",
                ALL_SYSTEMS.join(", ")
            ))
            .into());
        }
    }
    let params: Option<ModelParams> = if systems.iter().any(|s| s == "bayesum") {
        let dir = args.model.as_ref().ok_or_else(|| {
            UsageError("system 'bayesum' requires --model MODEL_DIR".into())
        })?;
        Some(ModelParams::load_dir(dir).with_context(|| format!("loading model {}", dir.display()))?)
    } else {
        None
    };

    let (corpus, qrels_overridden) = super::fit::load_corpus_with_qrels(&args.corpus, args.qrels.as_ref())?;
    if let Some(p) = &params {
        if p.vocab_size() != corpus.vocab_size() {
            anyhow::bail!(
                "model vocabulary ({}) does not match corpus ({})",
                p.vocab_size(),
                corpus.vocab_size()
            );
        }
    }

    let jobs = query_jobs(&corpus, fields);
    let background = corpus.background_model(true)?;
    let idf = idf_weights(&corpus);
    let fields_tag = fields.to_string();

    let mut outputs: Vec<(String, Vec<Ranking>)> = Vec::new();
    for system in &systems {
        match system.as_str() {
            "random" => {
                let rankings = jobs
                    .iter()
                    .map(|job| {
                        let pool = pool_all(&corpus, &job.doc_indices);
                        rank_random(&job.query_id, &pool, query_seed(seed, &job.query_id))
                    })
                    .collect::<bayesum::Result<Vec<_>>>()?;
                outputs.push((format!("random__{fields_tag}"), rankings));
            }
            "position" => {
                let rankings = jobs
                    .iter()
                    .map(|job| rank_position(&job.query_id, &pool_all(&corpus, &job.doc_indices)))
                    .collect::<bayesum::Result<Vec<_>>>()?;
                outputs.push((format!("position__{fields_tag}"), rankings));
            }
            "jaccard" => {
                let rankings = jobs
                    .iter()
                    .map(|job| {
                        let pool = pool_filtered(&corpus, &job.doc_indices);
                        rank_jaccard(&job.query_id, &job.query_tokens_filtered, &pool)
                    })
                    .collect::<bayesum::Result<Vec<_>>>()?;
                outputs.push((format!("jaccard__{fields_tag}"), rankings));
            }
            "cosine" => {
                let rankings = jobs
                    .iter()
                    .map(|job| {
                        let pool = pool_filtered(&corpus, &job.doc_indices);
                        rank_cosine(&job.query_id, &job.query_tokens_filtered, &pool, &idf)
                    })
                    .collect::<bayesum::Result<Vec<_>>>()?;
                outputs.push((format!("cosine__{fields_tag}"), rankings));
            }
            "kl" => {
                let rankings = jobs
                    .iter()
                    .map(|job| {
                        let pool = pool_filtered(&corpus, &job.doc_indices);
                        rank_kl(&job.query_id, &job.query_tokens_filtered, &pool, &background, lambda)
                    })
                    .collect::<bayesum::Result<Vec<_>>>()?;
                outputs.push((format!("kl__{fields_tag}"), rankings));
            }
            "kl-rel" => {
                let points = if args.grid {
                    feedback_grid()
                } else {
                    vec![FeedbackConfig::new(args.feedback_n, args.feedback_lambda)?]
                };
                for cfg in points {
                    let rankings = jobs
                        .iter()
                        .map(|job| {
                            let pool = pool_filtered(&corpus, &job.doc_indices);
                            rank_kl_rel(
                                &job.query_id,
                                &job.query_tokens_filtered,
                                &pool,
                                &pool,
                                &cfg,
                                &background,
                                lambda,
                            )
                        })
                        .collect::<bayesum::Result<Vec<_>>>()?;
                    outputs.push((
                        format!("kl-rel__{fields_tag}__n{}_l{}", cfg.n, cfg.lambda),
                        rankings,
                    ));
                }
            }
            "bayesum" => {
                let params = params.as_ref().expect("checked above");
                let method = if args.posterior_scores {
                    ScoreMethod::PosteriorProportion
                } else {
                    ScoreMethod::KlDivergence
                };
                let cfg = FitConfig { fields, ..Default::default() };
                let rankings = jobs
                    .iter()
                    .map(|job| {
                        score_sentences(
                            &corpus,
                            params,
                            &job.query_id,
                            &job.doc_ids,
                            lambda,
                            method,
                            &cfg,
                            qrels_overridden,
                        )
                    })
                    .collect::<bayesum::Result<Vec<_>>>()?;
                outputs.push((format!("bayesum__{fields_tag}"), rankings));
            }
            _ => unreachable!("validated above"),
        }
    }

    stage_dir(&args.out, |staging| {
        for (tag, rankings) in &outputs {
            let mut bytes = Vec::new();
            write_run(&mut bytes, rankings, tag)?;
            write_atomic(&staging.join(format!("{tag}.run")), &bytes)?;
        }
        Ok(())
    })?;
    println!(
        "ranked: {} run file(s) over {} query(ies) -> {}",
        outputs.len(),
        jobs.len(),
        args.out.display()
    );
    Ok(())
}
