use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use bayesum::corpus::{load_corpus, LoadOptions, TokenizeOptions};

use crate::util::write_atomic;

#[derive(Args)]
pub struct IngestArgs {
    /// JSONL documents: {"id", "sentences": [..]} or {"id", "text"}.
    #[arg(long)]
    pub docs: PathBuf,
    /// JSONL queries: {"id", "title"?, "description"?, "summary"?, "concepts"?}.
    #[arg(long)]
    pub queries: PathBuf,
    /// TSV qrels: query_id<TAB>doc_id<TAB>0|1.
    #[arg(long)]
    pub qrels: PathBuf,
    /// Output corpus archive (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Disable Porter stemming.
    #[arg(long)]
    pub no_stem: bool,
    /// Remove stopwords at tokenization time (off by default; the
    /// baseline rankers filter at ranking time instead).
    #[arg(long)]
    pub remove_stopwords: bool,
    /// Drop tokens occurring fewer than this many times corpus-wide.
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
}

pub fn run(args: IngestArgs) -> Result<()> {
    let opts = LoadOptions {
        tokenize: TokenizeOptions {
            stem: !args.no_stem,
            remove_stopwords: args.remove_stopwords,
        },
        min_count: args.min_count,
    };
    let corpus = load_corpus(&args.docs, &args.queries, &args.qrels, &opts)
        .context("loading corpus")?;
    let mut bytes = Vec::new();
    corpus.save_archive(&mut bytes)?;
    write_atomic(&args.out, &bytes)?;
    println!(
        "ingested: {} queries, {} documents, {} sentences, {} words, {} relevant pairs -> {}",
        corpus.num_queries(),
        corpus.num_docs(),
        corpus.total_sentences(),
        corpus.total_words(),
        corpus.relevance().num_pairs(),
        args.out.display()
    );
    Ok(())
}
