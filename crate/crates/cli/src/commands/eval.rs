use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use bayesum::corpus::Corpus;
use bayesum::eval::{evaluate_pair, GoldExtraction};
use bayesum::rankers::{read_run, Ranking};

use super::UsageError;
use crate::util::{stage_dir, write_atomic};

#[derive(Args)]
pub struct EvalArgs {
    /// Run files or directories containing *.run files.
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    /// Gold extraction judgments: query_id<TAB>doc_id<TAB>sentence_index.
    #[arg(long)]
    pub gold: PathBuf,
    /// Output directory for summary.csv and per_query.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Corpus archive for id validation (optional).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Oracle-select the best grid point per system by this metric
    /// (map | mrr | p2).
    #[arg(long)]
    pub oracle: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OracleMetric {
    Map,
    Mrr,
    PAt2,
}

impl OracleMetric {
    fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "map" => Ok(Self::Map),
            "mrr" => Ok(Self::Mrr),
            "p2" | "p@2" | "p_at_2" => Ok(Self::PAt2),
            other => Err(UsageError(format!(
                "unknown oracle metric '{other}' (expected map, mrr or p2)"
            ))
            .into()),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Map => "map",
            Self::Mrr => "mrr",
            Self::PAt2 => "p2",
        }
    }

    fn of(&self, row: &Scores) -> f64 {
        match self {
            Self::Map => row.map,
            Self::Mrr => row.mrr,
            Self::PAt2 => row.p_at_2,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Scores {
    pairs: usize,
    map: f64,
    mrr: f64,
    p_at_2: f64,
}

struct RunReport {
    system: String,
    fields: String,
    grid: String,
    overall: Scores,
    per_query: BTreeMap<String, Scores>,
}

fn collect_run_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "run"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(UsageError("no run files found".into()).into());
    }
    Ok(files)
}

/// Run tags look like `system__fields` with an optional `__grid` suffix.
fn parse_tag(tag: &str) -> (String, String, String) {
    let parts: Vec<&str> = tag.split("__").collect();
    match parts.len() {
        0 | 1 => (tag.to_string(), String::new(), String::new()),
        2 => (parts[0].into(), parts[1].into(), String::new()),
        _ => (parts[0].into(), parts[1].into(), parts[2..].join("__")),
    }
}

fn evaluate_run(tag: &str, rankings: &[Ranking], gold: &GoldExtraction) -> RunReport {
    let by_query: BTreeMap<&str, &Ranking> = rankings
        .iter()
        .map(|r| (r.query_id.as_str(), r))
        .collect();
    let mut per_query: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for ((query_id, doc_id), gold_set) in gold.iter() {
        if gold_set.is_empty() {
            log::warn!("gold pair ({query_id}, {doc_id}) is empty, skipped");
            continue;
        }
        let ranked: Vec<usize> = match by_query.get(query_id.as_str()) {
            Some(r) => r.doc_slice(doc_id),
            None => {
                log::warn!("run {tag}: query {query_id} missing, pair scores 0");
                Vec::new()
            }
        };
        if let Some(m) = evaluate_pair(&ranked, gold_set) {
            per_query
                .entry(query_id.clone())
                .or_default()
                .push((m.ap, m.rr, m.p_at_2));
        }
    }

    let mean =
        |vals: &[(f64, f64, f64)], pick: fn(&(f64, f64, f64)) -> f64| -> f64 {
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().map(pick).sum::<f64>() / vals.len() as f64
            }
        };
    let mut all_pairs: Vec<(f64, f64, f64)> = Vec::new();
    let mut query_scores = BTreeMap::new();
    for (q, vals) in &per_query {
        query_scores.insert(
            q.clone(),
            Scores {
                pairs: vals.len(),
                map: mean(vals, |v| v.0),
                mrr: mean(vals, |v| v.1),
                p_at_2: mean(vals, |v| v.2),
            },
        );
        all_pairs.extend_from_slice(vals);
    }
    let (system, fields, grid) = parse_tag(tag);
    RunReport {
        system,
        fields,
        grid,
        overall: Scores {
            pairs: all_pairs.len(),
            map: mean(&all_pairs, |v| v.0),
            mrr: mean(&all_pairs, |v| v.1),
            p_at_2: mean(&all_pairs, |v| v.2),
        },
        per_query: query_scores,
    }
}

pub fn run(args: EvalArgs) -> Result<()> {
    let oracle = args.oracle.as_deref().map(OracleMetric::parse).transpose()?;
    let corpus = args
        .corpus
        .as_ref()
        .map(|p| Corpus::load_archive_path(p))
        .transpose()
        .context("loading corpus")?;
    let gold = GoldExtraction::load_tsv(&args.gold, corpus.as_ref()).context("loading gold")?;
    if gold.is_empty() {
        return Err(UsageError("gold file contains no judgments".into()).into());
    }

    let mut reports = Vec::new();
    for path in collect_run_files(&args.runs)? {
        let (tag, rankings) = read_run(
            BufReader::new(File::open(&path)?),
            &path.display().to_string(),
        )?;
        reports.push(evaluate_run(&tag, &rankings, &gold));
    }
    reports.sort_by(|a, b| {
        (&a.system, &a.fields, &a.grid).cmp(&(&b.system, &b.fields, &b.grid))
    });

    // Oracle selection: within each (system, fields) group keep the grid
    // point that maximizes the requested metric.
    let selected: Vec<(usize, bool)> = match oracle {
        None => (0..reports.len()).map(|i| (i, false)).collect(),
        Some(metric) => {
            let mut groups: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
            for (i, r) in reports.iter().enumerate() {
                groups
                    .entry((r.system.clone(), r.fields.clone()))
                    .or_default()
                    .push(i);
            }
            let mut picks = Vec::new();
            for (_, members) in groups {
                let grid_group = members.len() > 1;
                let best = members
                    .into_iter()
                    .max_by(|&a, &b| {
                        metric
                            .of(&reports[a].overall)
                            .total_cmp(&metric.of(&reports[b].overall))
                            // Stable preference for the earlier grid point on ties.
                            .then_with(|| reports[b].grid.cmp(&reports[a].grid))
                    })
                    .unwrap();
                picks.push((best, grid_group));
            }
            picks.sort_unstable();
            picks
        }
    };

    let mut summary = csv::Writer::from_writer(Vec::new());
    summary.write_record(["system", "fields", "grid", "selected_by", "pairs", "map", "mrr", "p_at_2"])?;
    for &(i, oracle_picked) in &selected {
        let r = &reports[i];
        let flag = match (oracle, oracle_picked) {
            (Some(m), true) => m.name(),
            _ => "",
        };
        summary.write_record([
            r.system.as_str(),
            r.fields.as_str(),
            r.grid.as_str(),
            flag,
            &r.overall.pairs.to_string(),
            &format!("{:.6}", r.overall.map),
            &format!("{:.6}", r.overall.mrr),
            &format!("{:.6}", r.overall.p_at_2),
        ])?;
        println!(
            "{}\t{}\t{}\tpairs={}\tMAP={:.4}\tMRR={:.4}\tP@2={:.4}{}",
            r.system,
            r.fields,
            r.grid,
            r.overall.pairs,
            r.overall.map,
            r.overall.mrr,
            r.overall.p_at_2,
            if oracle_picked { "\t[oracle]" } else { "" }
        );
    }

    let mut per_query = csv::Writer::from_writer(Vec::new());
    per_query.write_record(["system", "fields", "grid", "query_id", "pairs", "map", "mrr", "p_at_2"])?;
    for &(i, _) in &selected {
        let r = &reports[i];
        for (q, s) in &r.per_query {
            per_query.write_record([
                r.system.as_str(),
                r.fields.as_str(),
                r.grid.as_str(),
                q.as_str(),
                &s.pairs.to_string(),
                &format!("{:.6}", s.map),
                &format!("{:.6}", s.mrr),
                &format!("{:.6}", s.p_at_2),
            ])?;
        }
    }

    let summary_bytes = summary.into_inner()?;
    let per_query_bytes = per_query.into_inner()?;
    stage_dir(&args.out, |staging| {
        write_atomic(&staging.join("summary.csv"), &summary_bytes)?;
        write_atomic(&staging.join("per_query.csv"), &per_query_bytes)?;
        Ok(())
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_parsing() {
        assert_eq!(
            parse_tag("kl__title"),
            ("kl".into(), "title".into(), String::new())
        );
        assert_eq!(
            parse_tag("kl-rel__title+summary__n25_l0.4"),
            ("kl-rel".into(), "title+summary".into(), "n25_l0.4".into())
        );
        assert_eq!(parse_tag("bare"), ("bare".into(), String::new(), String::new()));
    }
}
