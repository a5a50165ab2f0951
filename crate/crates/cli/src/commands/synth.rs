use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::Serialize;

use bayesum::bayesum::{block_params, round_robin_relevance, sample_corpus, SampleShape};
use bayesum::corpus::Corpus;

use crate::config::{pick, FileConfig};
use crate::util::{stage_dir, write_atomic};

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory (docs.jsonl, queries.jsonl, qrels.tsv, gold.tsv,
    /// truth/).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub queries: usize,
    #[arg(long, default_value_t = 4)]
    pub docs: usize,
    /// Sentences per document.
    #[arg(long, default_value_t = 20)]
    pub sentences: usize,
    /// Words per sentence.
    #[arg(long, default_value_t = 8)]
    pub words: usize,
    #[arg(long, default_value_t = 30)]
    pub vocab: usize,
    /// Observed words sampled per query.
    #[arg(long, default_value_t = 6)]
    pub query_words: usize,
    /// Vocabulary block size per document topic.
    #[arg(long, default_value_t = 3)]
    pub doc_block: usize,
    /// Vocabulary block size per query topic.
    #[arg(long, default_value_t = 3)]
    pub query_block: usize,
    /// Probability mass each topic puts on its own block.
    #[arg(long, default_value_t = 0.9)]
    pub core_mass: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha_general: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_other: f64,
    /// True query share above which a sentence is planted as gold.
    #[arg(long, default_value_t = 0.5)]
    pub gold_threshold: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional TOML config file; flags win over file values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Serialize)]
struct DocLine<'a> {
    id: &'a str,
    sentences: Vec<String>,
}

#[derive(Serialize)]
struct QueryLine<'a> {
    id: &'a str,
    title: String,
}

fn render_tokens(corpus: &Corpus, tokens: &[u32]) -> String {
    tokens
        .iter()
        .map(|&t| corpus.vocab().token(t))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn run(args: SynthArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let seed = pick(args.seed, file.seed, 0);
    let truth_params = block_params(
        args.queries,
        args.docs,
        args.vocab,
        args.doc_block,
        args.query_block,
        args.core_mass,
        (args.alpha_general, args.alpha_other),
    )?;
    let shape = SampleShape {
        num_queries: args.queries,
        num_docs: args.docs,
        sentences_per_doc: args.sentences,
        words_per_sentence: args.words,
        query_words: args.query_words,
    };
    let relevance = round_robin_relevance(args.queries, args.docs);
    let (corpus, truth) = sample_corpus(&truth_params, shape, &relevance, seed)?;

    let mut docs_jsonl = String::new();
    for doc in corpus.documents() {
        let line = DocLine {
            id: &doc.id,
            sentences: doc
                .sentences
                .iter()
                .map(|s| render_tokens(&corpus, &s.tokens))
                .collect(),
        };
        writeln!(docs_jsonl, "{}", serde_json::to_string(&line)?)?;
    }
    let mut queries_jsonl = String::new();
    for q in corpus.queries() {
        let line = QueryLine {
            id: &q.id,
            title: render_tokens(&corpus, &q.field_tokens[0]),
        };
        writeln!(queries_jsonl, "{}", serde_json::to_string(&line)?)?;
    }
    let mut qrels = String::new();
    for (j, q) in corpus.queries().iter().enumerate() {
        for &k in corpus.relevance().relevant_docs(j as u32) {
            writeln!(qrels, "{}\t{}\t1", q.id, corpus.doc(k).id)?;
        }
    }
    let gold = truth.gold(&corpus, args.gold_threshold);
    let mut gold_tsv = String::new();
    for ((query_id, doc_id), sentences) in gold.iter() {
        for s in sentences {
            writeln!(gold_tsv, "{query_id}\t{doc_id}\t{s}")?;
        }
    }
    let mut pi_csv = String::from("doc_id,sentence,component,share\n");
    for (k, doc) in corpus.documents().iter().enumerate() {
        for (s, pi) in truth.pi[k].iter().enumerate() {
            for (c, share) in pi.iter().enumerate() {
                if *share > 0.0 {
                    writeln!(pi_csv, "{},{},{},{}", doc.id, s, c, share)?;
                }
            }
        }
    }

    stage_dir(&args.out, |staging| {
        write_atomic(&staging.join("docs.jsonl"), docs_jsonl.as_bytes())?;
        write_atomic(&staging.join("queries.jsonl"), queries_jsonl.as_bytes())?;
        write_atomic(&staging.join("qrels.tsv"), qrels.as_bytes())?;
        write_atomic(&staging.join("gold.tsv"), gold_tsv.as_bytes())?;
        truth.params.save_dir(&staging.join("truth"), "synthetic-truth")?;
        write_atomic(&staging.join("truth").join("pi.csv"), pi_csv.as_bytes())?;
        Ok(())
    })?;
    println!(
        "synthesized: {} queries x {} docs x {} sentences x {} words, |V|={}, {} gold pair(s) -> {}",
        args.queries,
        args.docs,
        args.sentences,
        args.words,
        args.vocab,
        gold.num_pairs(),
        args.out.display()
    );
    Ok(())
}
