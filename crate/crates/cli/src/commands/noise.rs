use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use bayesum::eval::interpolate_judgments;

use super::UsageError;
use crate::util::{stage_dir, write_atomic};

#[derive(Args)]
pub struct NoiseArgs {
    /// External document-level IR run:
    /// query_id<TAB>doc_id<TAB>rank<TAB>score.
    #[arg(long)]
    pub ir_run: PathBuf,
    /// True qrels to interpolate toward.
    #[arg(long)]
    pub qrels: PathBuf,
    /// Output directory, one synthetic qrels per beta plus rprecision.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Interpolation weights toward the truth (default six evenly spaced).
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// IR ranking depth considered per query.
    #[arg(long, default_value_t = 1000)]
    pub depth: usize,
}

fn read_truth(path: &PathBuf) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let mut truth: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 3 || !matches!(cols[2], "0" | "1") {
            anyhow::bail!("{}:{}: malformed qrels line", path.display(), lineno + 1);
        }
        if cols[2] == "1" {
            truth.entry(cols[0].into()).or_default().insert(cols[1].into());
        }
    }
    Ok(truth)
}

fn read_ir_run(path: &PathBuf) -> Result<BTreeMap<String, Vec<(String, f64)>>> {
    let mut runs: BTreeMap<String, Vec<(usize, String, f64)>> = BTreeMap::new();
    for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 4 {
            anyhow::bail!(
                "{}:{}: expected 4 columns (query, doc, rank, score)",
                path.display(),
                lineno + 1
            );
        }
        let rank: usize = cols[2]
            .parse()
            .with_context(|| format!("{}:{}: bad rank", path.display(), lineno + 1))?;
        let score: f64 = cols[3]
            .parse()
            .with_context(|| format!("{}:{}: bad score", path.display(), lineno + 1))?;
        runs.entry(cols[0].into())
            .or_default()
            .push((rank, cols[1].into(), score));
    }
    Ok(runs
        .into_iter()
        .map(|(q, mut v)| {
            v.sort_by(|a, b| a.0.cmp(&b.0));
            (q, v.into_iter().map(|(_, d, s)| (d, s)).collect())
        })
        .collect())
}

fn beta_label(beta: f64) -> String {
    format!("{beta}").replace('.', "_")
}

pub fn run(args: NoiseArgs) -> Result<()> {
    let truth = read_truth(&args.qrels)?;
    if truth.is_empty() {
        return Err(UsageError("qrels file has no relevant pairs".into()).into());
    }
    let ir = read_ir_run(&args.ir_run)?;
    let betas = args
        .betas
        .clone()
        .unwrap_or_else(|| vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0]);
    if betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(UsageError("betas must lie in [0, 1]".into()).into());
    }

    let empty: Vec<(String, f64)> = Vec::new();
    let mut files: Vec<(String, String)> = Vec::new();
    let mut rprec = String::from("beta,query_id,r_precision\n");
    for &beta in &betas {
        let mut qrels_text = String::new();
        for (query_id, relevant) in &truth {
            let ranking = ir.get(query_id).unwrap_or_else(|| {
                log::warn!("query {query_id} absent from the IR run");
                &empty
            });
            let synthetic = interpolate_judgments(ranking, relevant, beta, args.depth);
            for doc in &synthetic {
                writeln!(qrels_text, "{query_id}\t{doc}\t1")?;
            }
            let hits = synthetic.intersection(relevant).count() as f64;
            writeln!(
                rprec,
                "{beta},{query_id},{:.6}",
                hits / relevant.len() as f64
            )?;
        }
        files.push((format!("qrels_beta{}.tsv", beta_label(beta)), qrels_text));
    }

    stage_dir(&args.out, |staging| {
        for (name, text) in &files {
            write_atomic(&staging.join(name), text.as_bytes())?;
        }
        write_atomic(&staging.join("rprecision.csv"), rprec.as_bytes())?;
        Ok(())
    })?;
    println!(
        "noise: {} beta value(s) over {} query(ies) -> {}",
        betas.len(),
        truth.len(),
        args.out.display()
    );
    Ok(())
}
