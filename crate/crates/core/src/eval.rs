//! Evaluation: MAP / MRR / P@2, Cohen's kappa, R-precision, the
//! noisy-relevance interpolation harness, and the greedy
//! redundancy-penalized multidocument selector.
//!
//! Metrics take a ranked item list plus a gold set and are generic over
//! the item type (sentence indices within a document, or document ids).
//! Pairs with empty gold are skipped by callers; the metric functions
//! signal that case with `None`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::hash::Hash;
use std::io::{BufRead, BufReader};
use std::path::Path;

use statrs::function::gamma::ln_gamma;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::langmodel::CountVector;

/// Average precision: the mean over gold items of precision at that
/// item's rank. Gold items never ranked contribute precision 0.
/// `None` when the gold set is empty.
pub fn average_precision<T: Eq + Hash>(ranked: &[T], gold: &HashSet<T>) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, item) in ranked.iter().enumerate() {
        if gold.contains(item) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / gold.len() as f64)
}

/// Reciprocal of the rank of the first gold item; 0 when none is ranked.
pub fn mrr<T: Eq + Hash>(ranked: &[T], gold: &HashSet<T>) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    Some(
        ranked
            .iter()
            .position(|item| gold.contains(item))
            .map_or(0.0, |i| 1.0 / (i + 1) as f64),
    )
}

/// Precision at the first point two gold items have been selected:
/// 2 / rank-of-second-hit. With a single gold item the fallback is P@1,
/// i.e. 1 / rank-of-first-hit. 0 when the required hit never happens.
pub fn p_at_2<T: Eq + Hash>(ranked: &[T], gold: &HashSet<T>) -> Option<f64> {
    if gold.is_empty() {
        return None;
    }
    let need = if gold.len() >= 2 { 2 } else { 1 };
    let mut hits = 0usize;
    for (i, item) in ranked.iter().enumerate() {
        if gold.contains(item) {
            hits += 1;
            if hits == need {
                return Some(need as f64 / (i + 1) as f64);
            }
        }
    }
    Some(0.0)
}

/// Cohen's kappa over binary select/not-select decisions on a universe
/// of `universe` items: (Po - Pe) / (1 - Pe). When expected agreement is
/// 1 (both raters constant), returns 1 if they agree everywhere else 0.
pub fn kappa<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>, universe: usize) -> f64 {
    assert!(universe > 0, "kappa over an empty universe");
    let n = universe as f64;
    let n11 = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    let n00 = n - union;
    let po = (n11 + n00) / n;
    let pa = a.len() as f64 / n;
    let pb = b.len() as f64 / n;
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (1.0 - pe).abs() < 1e-12 {
        return if (po - 1.0).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    (po - pe) / (1.0 - pe)
}

/// Precision at rank R, where R is the size of the true relevant set.
/// `None` when the relevant set is empty.
pub fn r_precision<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let r = relevant.len();
    let hits = ranked
        .iter()
        .take(r)
        .filter(|item| relevant.contains(*item))
        .count();
    Some(hits as f64 / r as f64)
}

/// Synthesize a relevant set by interpolating an external IR ranking
/// with the true judgments.
///
/// Each candidate document scores `beta * [in truth] + (1-beta) * s`
/// where `s` is the doc's IR score min-max normalized within the query
/// (docs outside the top `depth`, or unranked, get 0). The top |truth|
/// documents by score win; ties prefer IR rank order, then doc id, so
/// beta = 0 reproduces the IR top-|truth| and beta = 1 the truth exactly.
pub fn interpolate_judgments(
    ir_ranking: &[(String, f64)],
    truth: &BTreeSet<String>,
    beta: f64,
    depth: usize,
) -> BTreeSet<String> {
    if truth.is_empty() {
        log::warn!("interpolate_judgments: empty truth set");
        return BTreeSet::new();
    }
    let considered = &ir_ranking[..depth.min(ir_ranking.len())];
    let (min, max) = considered
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), (_, s)| (lo.min(*s), hi.max(*s)));
    let normalize = |s: f64| {
        if (max - min).abs() < f64::EPSILON {
            1.0
        } else {
            (s - min) / (max - min)
        }
    };

    struct Cand<'a> {
        doc: &'a str,
        score: f64,
        ir_rank: usize,
    }
    let mut by_doc: BTreeMap<&str, Cand> = BTreeMap::new();
    for (rank, (doc, s)) in considered.iter().enumerate() {
        by_doc.insert(
            doc,
            Cand {
                doc,
                score: (1.0 - beta) * normalize(*s),
                ir_rank: rank,
            },
        );
    }
    for doc in truth {
        by_doc
            .entry(doc)
            .and_modify(|c| c.score += beta)
            .or_insert(Cand {
                doc,
                score: beta,
                ir_rank: usize::MAX,
            });
    }
    let mut cands: Vec<Cand> = by_doc.into_values().collect();
    cands.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.ir_rank.cmp(&b.ir_rank))
            .then_with(|| a.doc.cmp(b.doc))
    });
    cands
        .into_iter()
        .take(truth.len())
        .map(|c| c.doc.to_string())
        .collect()
}

/// Greedy redundancy-penalized selection: repeatedly pick the candidate
/// maximizing score(s) - penalty * max over selected of sim(s, t), until
/// k picks or the pool is exhausted. Returns indices in selection order;
/// ties go to the lowest index.
pub fn greedy_select(
    scores: &[f64],
    sim: impl Fn(usize, usize) -> f64,
    penalty: f64,
    k: usize,
) -> Vec<usize> {
    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: BTreeSet<usize> = (0..scores.len()).collect();
    while selected.len() < k && !remaining.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for &i in &remaining {
            let redundancy = selected.iter().map(|&t| sim(i, t)).fold(0.0f64, f64::max);
            let value = scores[i] - penalty * redundancy;
            if best.is_none_or(|(_, bv)| value > bv) {
                best = Some((i, value));
            }
        }
        let (pick, _) = best.unwrap();
        remaining.remove(&pick);
        selected.push(pick);
    }
    selected
}

/// Cosine similarity of raw term-frequency vectors.
pub fn cosine_counts(a: &CountVector, b: &CountVector) -> f64 {
    let na: f64 = a.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().map(|(t, c)| c * b.get(t)).sum();
    dot / (na * nb)
}

/// Two-sided exact sign test: probability of observing a win/loss split
/// at least this lopsided under a fair coin. Ties are excluded by the
/// caller.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let k = wins.min(losses);
    let ln_choose = |n: usize, i: usize| {
        ln_gamma(n as f64 + 1.0) - ln_gamma(i as f64 + 1.0) - ln_gamma((n - i) as f64 + 1.0)
    };
    let tail: f64 = (0..=k)
        .map(|i| (ln_choose(n, i) - n as f64 * 2.0f64.ln()).exp())
        .sum();
    (2.0 * tail).min(1.0)
}

/// Human sentence-extraction judgments: for each judged (query, doc)
/// pair, the set of selected sentence indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldExtraction {
    pairs: BTreeMap<(String, String), BTreeSet<usize>>,
}

impl GoldExtraction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, sentence: usize) {
        self.pairs
            .entry((query_id.to_string(), doc_id.to_string()))
            .or_default()
            .insert(sentence);
    }

    pub fn get(&self, query_id: &str, doc_id: &str) -> Option<&BTreeSet<usize>> {
        self.pairs.get(&(query_id.to_string(), doc_id.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &BTreeSet<usize>)> {
        self.pairs.iter()
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Judged doc ids for one query, sorted.
    pub fn docs_for_query(&self, query_id: &str) -> Vec<&str> {
        self.pairs
            .iter()
            .filter(|((q, _), _)| q == query_id)
            .map(|((_, d), _)| d.as_str())
            .collect()
    }

    pub fn query_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.pairs.keys().map(|(q, _)| q.as_str()).collect();
        ids.dedup();
        ids
    }

    /// Parse the TSV form `query_id<TAB>doc_id<TAB>sentence_index`,
    /// validating ids and indices against the corpus when given.
    pub fn load_tsv(path: &Path, corpus: Option<&Corpus>) -> Result<Self> {
        let mut gold = Self::new();
        for (lineno, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 columns, got {}", cols.len())));
            }
            let sentence: usize = cols[2]
                .parse()
                .map_err(|e| err(format!("bad sentence index: {e}")))?;
            if let Some(c) = corpus {
                if c.query_idx(cols[0]).is_none() {
                    return Err(err(format!("unknown query id '{}'", cols[0])));
                }
                let Some(d) = c.doc_idx(cols[1]) else {
                    return Err(err(format!("unknown document id '{}'", cols[1])));
                };
                if sentence >= c.doc(d).sentences.len() {
                    return Err(err(format!(
                        "sentence index {} out of range for document '{}'",
                        sentence, cols[1]
                    )));
                }
            }
            gold.insert(cols[0], cols[1], sentence);
        }
        Ok(gold)
    }
}

/// The three sentence-level metrics for one judged (query, doc) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMetrics {
    pub ap: f64,
    pub rr: f64,
    pub p_at_2: f64,
}

/// Evaluate one judged pair: the ranked sentence indices of a document
/// against the gold set. `None` when gold is empty (pair is skipped).
pub fn evaluate_pair(ranked: &[usize], gold: &BTreeSet<usize>) -> Option<PairMetrics> {
    let gold_set: HashSet<usize> = gold.iter().copied().collect();
    Some(PairMetrics {
        ap: average_precision(ranked, &gold_set)?,
        rr: mrr(ranked, &gold_set)?,
        p_at_2: p_at_2(ranked, &gold_set)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[usize]) -> HashSet<usize> {
        items.iter().copied().collect()
    }

    #[test]
    fn ap_worked_values() {
        // Perfect ranking of both gold items.
        assert_eq!(average_precision(&[1, 2], &set(&[1, 2])), Some(1.0));
        // Gold {s1, s3} against [s1, s2, s3]: (1 + 2/3) / 2.
        let ap = average_precision(&[1, 2, 3], &set(&[1, 3])).unwrap();
        assert_eq!(ap, (1.0 + 2.0 / 3.0) / 2.0);
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        // A gold item never ranked contributes zero precision.
        let ap = average_precision(&[1, 2], &set(&[1, 9])).unwrap();
        assert_eq!(ap, 0.5);
        // Empty gold is a skip signal.
        assert_eq!(average_precision(&[1, 2], &set(&[])), None);
    }

    #[test]
    fn mrr_worked_values() {
        assert_eq!(mrr(&[1, 2, 3], &set(&[1])), Some(1.0));
        assert_eq!(mrr(&[2, 1, 3], &set(&[1])), Some(0.5));
        assert_eq!(mrr(&[2, 3], &set(&[9])), Some(0.0));
    }

    #[test]
    fn p_at_2_worked_values() {
        // [rel, rel, ...] -> 1.0
        assert_eq!(p_at_2(&[1, 2, 3], &set(&[1, 2])), Some(1.0));
        // [rel, non, rel] -> second hit at rank 3 -> 2/3.
        assert_eq!(p_at_2(&[1, 9, 2], &set(&[1, 2])), Some(2.0 / 3.0));
        // Single gold item: P@1 fallback, first hit at rank 4 -> 0.25.
        assert_eq!(p_at_2(&[7, 8, 9, 1], &set(&[1])), Some(0.25));
        // Second gold item never ranked.
        assert_eq!(p_at_2(&[1, 9], &set(&[1, 2])), Some(0.0));
    }

    #[test]
    fn kappa_worked_values() {
        // Perfect agreement.
        assert_eq!(kappa(&set(&[1, 2]), &set(&[1, 2]), 10), 1.0);
        // Agreement exactly at chance: a = {0,1}, b = {0,2}, N = 4 gives
        // Po = 0.5 and Pe = 0.5.
        assert_eq!(kappa(&set(&[0, 1]), &set(&[0, 2]), 4), 0.0);
        // Both raters constant and agreeing: degenerate case.
        assert_eq!(kappa(&set(&[]), &set(&[]), 5), 1.0);
    }

    #[test]
    fn r_precision_worked_values() {
        let truth = set(&[1, 2, 3, 4]);
        assert_eq!(r_precision(&[1, 2, 3, 4, 9], &truth), Some(1.0));
        assert_eq!(r_precision(&[1, 2, 8, 9], &truth), Some(0.5));
        assert_eq!(r_precision(&[1], &set(&[])), None);
    }

    fn ir(docs: &[(&str, f64)]) -> Vec<(String, f64)> {
        docs.iter().map(|(d, s)| (d.to_string(), *s)).collect()
    }

    fn truth_set(docs: &[&str]) -> BTreeSet<String> {
        docs.iter().map(|d| d.to_string()).collect()
    }

    #[test]
    fn interpolation_endpoints() {
        let run = ir(&[("d9", 9.0), ("d8", 8.0), ("d7", 7.0), ("d1", 1.0)]);
        let truth = truth_set(&["d1", "d2"]);
        assert_eq!(interpolate_judgments(&run, &truth, 1.0, 100), truth);
        let beta0 = interpolate_judgments(&run, &truth, 0.0, 100);
        assert_eq!(beta0, truth_set(&["d8", "d9"]));
    }

    #[test]
    fn interpolation_overlap_monotone_in_beta() {
        // 10 docs; IR ranks the wrong half on top.
        let run = ir(&[
            ("n0", 10.0),
            ("n1", 9.0),
            ("n2", 8.0),
            ("t0", 7.0),
            ("t1", 6.0),
            ("n3", 5.0),
            ("t2", 4.0),
            ("n4", 3.0),
            ("t3", 2.0),
            ("t4", 1.0),
        ]);
        let truth = truth_set(&["t0", "t1", "t2", "t3", "t4"]);
        let mut prev = -1isize;
        for i in 0..=10 {
            let beta = i as f64 / 10.0;
            let synth = interpolate_judgments(&run, &truth, beta, 100);
            assert_eq!(synth.len(), truth.len());
            let overlap = synth.intersection(&truth).count() as isize;
            assert!(
                overlap >= prev,
                "overlap dropped from {prev} to {overlap} at beta={beta}"
            );
            prev = overlap;
        }
        assert_eq!(prev, 5);
    }

    #[test]
    fn interpolation_depth_cutoff() {
        let run = ir(&[("d9", 9.0), ("d8", 8.0), ("d7", 7.0)]);
        let truth = truth_set(&["d7"]);
        // With depth 2 the hit at IR rank 3 is invisible; beta=0 takes
        // the IR top-1 instead.
        let synth = interpolate_judgments(&run, &truth, 0.0, 2);
        assert_eq!(synth, truth_set(&["d9"]));
    }

    #[test]
    fn empty_truth_yields_empty_set() {
        let run = ir(&[("d1", 1.0)]);
        assert!(interpolate_judgments(&run, &BTreeSet::new(), 0.5, 10).is_empty());
    }

    #[test]
    fn greedy_without_penalty_is_top_k() {
        let scores = [0.1, 0.9, 0.5, 0.7];
        let picks = greedy_select(&scores, |_, _| 0.0, 0.0, 3);
        assert_eq!(picks, vec![1, 3, 2]);
    }

    #[test]
    fn greedy_excludes_duplicate() {
        // Sentence 1 duplicates sentence 0 (similarity 1); with a large
        // penalty the distinct sentence 2 wins the second slot.
        let scores = [1.0, 0.9, 0.5];
        let sim = |a: usize, b: usize| {
            if (a, b) == (0, 1) || (a, b) == (1, 0) {
                1.0
            } else {
                0.0
            }
        };
        let picks = greedy_select(&scores, sim, 10.0, 2);
        assert_eq!(picks, vec![0, 2]);
    }

    #[test]
    fn greedy_exhausts_pool_when_k_large() {
        let scores = [0.3, 0.2, 0.1];
        let picks = greedy_select(&scores, |_, _| 0.0, 0.0, 99);
        assert_eq!(picks.len(), 3);
    }

    #[test]
    fn cosine_counts_basics() {
        let a = CountVector::from_tokens(&[0, 0, 1]);
        let b = CountVector::from_tokens(&[0, 0, 1]);
        assert!((cosine_counts(&a, &b) - 1.0).abs() < 1e-12);
        let c = CountVector::from_tokens(&[2]);
        assert_eq!(cosine_counts(&a, &c), 0.0);
        assert_eq!(cosine_counts(&a, &CountVector::new()), 0.0);
    }

    #[test]
    fn sign_test_sanity() {
        assert_eq!(sign_test(0, 0), 1.0);
        // 5 wins, 0 losses: p = 2 * (1/2)^5 = 1/16.
        assert!((sign_test(5, 0) - 2.0 * 0.5f64.powi(5)).abs() < 1e-12);
        assert!((sign_test(3, 3) - 1.0).abs() < 1e-9);
        assert!(sign_test(20, 2) < 0.01);
    }
}
