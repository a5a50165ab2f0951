//! The comparison ranking systems behind one interface: random and
//! position strawmen, Jaccard and TF-IDF cosine vector-space rankers,
//! and the language-model KL ranker with optional blind relevance
//! feedback. All rankers emit "higher is better" scores (KL negated) so
//! evaluation is ranker-agnostic.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::langmodel::{kl_divergence, CountVector, UnigramModel};

/// One scored sentence of a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub doc_id: String,
    pub sentence: usize,
    pub score: f64,
}

/// An ordered list of scored (document, sentence) pairs for one query.
/// Scores are non-increasing, pairs unique, ties broken by
/// (doc id, sentence index) ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub query_id: String,
    entries: Vec<RankEntry>,
}

impl Ranking {
    /// Sort, deduplicate-check and validate scored entries.
    pub fn from_scores(query_id: &str, mut entries: Vec<RankEntry>) -> Result<Self> {
        for e in &entries {
            if !e.score.is_finite() {
                return Err(Error::NonFiniteScore {
                    doc: e.doc_id.clone(),
                    sentence: e.sentence,
                });
            }
        }
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
                .then_with(|| a.sentence.cmp(&b.sentence))
        });
        for pair in entries.windows(2) {
            if pair[0].doc_id == pair[1].doc_id && pair[0].sentence == pair[1].sentence {
                return Err(Error::DuplicateEntry {
                    doc: pair[0].doc_id.clone(),
                    sentence: pair[0].sentence,
                });
            }
        }
        Ok(Self {
            query_id: query_id.to_string(),
            entries,
        })
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// (doc, sentence) keys in rank order.
    pub fn keys(&self) -> Vec<(String, usize)> {
        self.entries
            .iter()
            .map(|e| (e.doc_id.clone(), e.sentence))
            .collect()
    }

    /// Sentence indices of one document, in rank order.
    pub fn doc_slice(&self, doc_id: &str) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.doc_id == doc_id)
            .map(|e| e.sentence)
            .collect()
    }
}

/// A sentence as the rankers see it: identity plus a token view that may
/// already have stopwords removed. An empty token list is legal (a
/// sentence that was all stopwords) and still gets ranked.
#[derive(Debug, Clone)]
pub struct SentenceTokens {
    pub doc_id: String,
    pub sentence: usize,
    pub position: u32,
    pub tokens: Vec<u32>,
}

/// All sentences of the given documents, raw tokens.
pub fn pool_all(corpus: &Corpus, docs: &[u32]) -> Vec<SentenceTokens> {
    build_pool(corpus, docs, false)
}

/// All sentences of the given documents, stopwords removed.
pub fn pool_filtered(corpus: &Corpus, docs: &[u32]) -> Vec<SentenceTokens> {
    build_pool(corpus, docs, true)
}

fn build_pool(corpus: &Corpus, docs: &[u32], filter: bool) -> Vec<SentenceTokens> {
    let mut pool = Vec::new();
    for &k in docs {
        let doc = corpus.doc(k);
        for (i, s) in doc.sentences.iter().enumerate() {
            pool.push(SentenceTokens {
                doc_id: doc.id.clone(),
                sentence: i,
                position: s.position,
                tokens: if filter {
                    corpus.filtered_tokens(s)
                } else {
                    s.tokens.clone()
                },
            });
        }
    }
    pool
}

/// Uniform random permutation, deterministic per seed. Scores are the
/// negated permutation ranks.
pub fn rank_random(query_id: &str, sentences: &[SentenceTokens], seed: u64) -> Result<Ranking> {
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let entries = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| RankEntry {
            doc_id: sentences[i].doc_id.clone(),
            sentence: sentences[i].sentence,
            score: -((rank + 1) as f64),
        })
        .collect();
    Ranking::from_scores(query_id, entries)
}

/// Earlier absolute position scores higher; ties fall to doc id order.
pub fn rank_position(query_id: &str, sentences: &[SentenceTokens]) -> Result<Ranking> {
    let entries = sentences
        .iter()
        .map(|s| RankEntry {
            doc_id: s.doc_id.clone(),
            sentence: s.sentence,
            score: -(s.position as f64),
        })
        .collect();
    Ranking::from_scores(query_id, entries)
}

/// Jaccard overlap between token-type sets: |Q n S| / |Q u S|.
/// Both sides are expected stopword-removed and stemmed.
pub fn rank_jaccard(
    query_id: &str,
    query_tokens: &[u32],
    sentences: &[SentenceTokens],
) -> Result<Ranking> {
    let q: BTreeSet<u32> = query_tokens.iter().copied().collect();
    let entries = sentences
        .iter()
        .map(|s| {
            let st: BTreeSet<u32> = s.tokens.iter().copied().collect();
            let inter = q.intersection(&st).count();
            let union = q.union(&st).count();
            RankEntry {
                doc_id: s.doc_id.clone(),
                sentence: s.sentence,
                score: if union == 0 {
                    0.0
                } else {
                    inter as f64 / union as f64
                },
            }
        })
        .collect();
    Ranking::from_scores(query_id, entries)
}

/// IDF per token computed on the full document set: ln(K / df).
/// Tokens appearing in no document get 0 (they cannot match anyway).
pub fn idf_weights(corpus: &Corpus) -> Vec<f64> {
    let k = corpus.num_docs() as f64;
    corpus
        .doc_frequencies()
        .iter()
        .map(|&df| if df == 0 { 0.0 } else { (k / df as f64).ln() })
        .collect()
}

/// TF-IDF weighted cosine similarity; zero-norm vectors score 0.
pub fn rank_cosine(
    query_id: &str,
    query_tokens: &[u32],
    sentences: &[SentenceTokens],
    idf: &[f64],
) -> Result<Ranking> {
    let weigh = |tokens: &[u32]| -> BTreeMap<u32, f64> {
        let mut tf = BTreeMap::new();
        for &t in tokens {
            *tf.entry(t).or_insert(0.0) += 1.0;
        }
        for (t, w) in tf.iter_mut() {
            *w *= idf[*t as usize];
        }
        tf
    };
    let q = weigh(query_tokens);
    let q_norm = q.values().map(|w| w * w).sum::<f64>().sqrt();
    let entries = sentences
        .iter()
        .map(|s| {
            let sv = weigh(&s.tokens);
            let s_norm = sv.values().map(|w| w * w).sum::<f64>().sqrt();
            let dot: f64 = q
                .iter()
                .filter_map(|(t, wq)| sv.get(t).map(|ws| wq * ws))
                .sum();
            RankEntry {
                doc_id: s.doc_id.clone(),
                sentence: s.sentence,
                score: if q_norm == 0.0 || s_norm == 0.0 {
                    0.0
                } else {
                    dot / (q_norm * s_norm)
                },
            }
        })
        .collect();
    Ranking::from_scores(query_id, entries)
}

/// A sentence's smoothed language model; all-stopword sentences fall
/// back to the background itself.
fn sentence_model(
    tokens: &[u32],
    background: &UnigramModel,
    lambda: f64,
) -> Result<UnigramModel> {
    if tokens.is_empty() {
        return Ok(background.clone());
    }
    UnigramModel::mle(&CountVector::from_tokens(tokens), background.len())?
        .smooth(background, lambda)
}

/// Rank by -KL(query model || sentence model) where the query model is
/// the given (unsmoothed) distribution, smoothed here against the
/// background. Shared by the plain and feedback-expanded KL rankers.
pub fn rank_kl_with_model(
    query_id: &str,
    query_model: &UnigramModel,
    sentences: &[SentenceTokens],
    background: &UnigramModel,
    lambda: f64,
) -> Result<Ranking> {
    let q = query_model.smooth(background, lambda)?;
    let entries = sentences
        .iter()
        .map(|s| {
            let sm = sentence_model(&s.tokens, background, lambda)?;
            Ok(RankEntry {
                doc_id: s.doc_id.clone(),
                sentence: s.sentence,
                score: -kl_divergence(&q, &sm)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ranking::from_scores(query_id, entries)
}

/// The plain KL ranker: query model is the MLE of the query tokens.
pub fn rank_kl(
    query_id: &str,
    query_tokens: &[u32],
    sentences: &[SentenceTokens],
    background: &UnigramModel,
    lambda: f64,
) -> Result<Ranking> {
    let q = UnigramModel::mle(&CountVector::from_tokens(query_tokens), background.len())?;
    rank_kl_with_model(query_id, &q, sentences, background, lambda)
}

/// Blind relevance feedback configuration: how many top-ranked sentences
/// feed back, and the interpolation weight of the feedback model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackConfig {
    pub n: usize,
    pub lambda: f64,
}

impl FeedbackConfig {
    pub fn new(n: usize, lambda: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("feedback n must be positive".into()));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidSmoothingWeight(lambda));
        }
        Ok(Self { n, lambda })
    }
}

/// The grid swept by the feedback ranker: n in {5,10,25,50,100} crossed
/// with lambda in {0.2,0.4,0.6,0.8}.
pub fn feedback_grid() -> Vec<FeedbackConfig> {
    let mut grid = Vec::new();
    for n in [5usize, 10, 25, 50, 100] {
        for lambda in [0.2, 0.4, 0.6, 0.8] {
            grid.push(FeedbackConfig { n, lambda });
        }
    }
    grid
}

/// KL ranking with blind relevance feedback: run the query against the
/// pool of relevant-document sentences, estimate a feedback model on the
/// top n, interpolate it into the query model, then rank the targets.
pub fn rank_kl_rel(
    query_id: &str,
    query_tokens: &[u32],
    targets: &[SentenceTokens],
    pool: &[SentenceTokens],
    cfg: &FeedbackConfig,
    background: &UnigramModel,
    lambda_smooth: f64,
) -> Result<Ranking> {
    if pool.is_empty() {
        return Err(Error::EmptyDocSet(query_id.to_string()));
    }
    let original =
        UnigramModel::mle(&CountVector::from_tokens(query_tokens), background.len())?;

    let stage1 = rank_kl_with_model(query_id, &original, pool, background, lambda_smooth)?;
    let n = if cfg.n > stage1.len() {
        log::warn!(
            "query {}: feedback pool has {} sentences, fewer than n={}; using all",
            query_id,
            stage1.len(),
            cfg.n
        );
        stage1.len()
    } else {
        cfg.n
    };

    let by_key: BTreeMap<(&str, usize), &[u32]> = pool
        .iter()
        .map(|s| ((s.doc_id.as_str(), s.sentence), s.tokens.as_slice()))
        .collect();
    let mut feedback_counts = CountVector::new();
    for e in stage1.entries().iter().take(n) {
        if let Some(tokens) = by_key.get(&(e.doc_id.as_str(), e.sentence)) {
            for &t in *tokens {
                feedback_counts.add(t, 1.0);
            }
        }
    }
    let expanded = if feedback_counts.is_empty() {
        log::warn!("query {query_id}: empty feedback model, keeping original query model");
        original
    } else {
        let feedback = UnigramModel::mle(&feedback_counts, background.len())?;
        original.smooth(&feedback, cfg.lambda)?
    };
    rank_kl_with_model(query_id, &expanded, targets, background, lambda_smooth)
}

/// Write rankings in the run format: one line per entry,
/// `query_id<TAB>doc_id:sentence<TAB>rank<TAB>score<TAB>run_tag`.
pub fn write_run<W: Write>(mut w: W, rankings: &[Ranking], tag: &str) -> Result<()> {
    for ranking in rankings {
        for (rank, e) in ranking.entries().iter().enumerate() {
            writeln!(
                w,
                "{}\t{}:{}\t{}\t{}\t{}",
                ranking.query_id,
                e.doc_id,
                e.sentence,
                rank + 1,
                e.score,
                tag
            )?;
        }
    }
    Ok(())
}

/// Parse a run file back into per-query rankings (in file order) and the
/// run tag.
pub fn read_run<R: BufRead>(r: R, path: &str) -> Result<(String, Vec<Ranking>)> {
    let mut tag = String::new();
    let mut per_query: BTreeMap<String, Vec<(usize, RankEntry)>> = BTreeMap::new();
    let mut query_order: Vec<String> = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_string(),
            line: lineno + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(err(format!("expected 5 columns, got {}", cols.len())));
        }
        let (doc_id, sent) = cols[1]
            .rsplit_once(':')
            .ok_or_else(|| err("missing ':' in doc:sentence".into()))?;
        let sentence: usize = sent.parse().map_err(|e| err(format!("bad sentence index: {e}")))?;
        let rank: usize = cols[2].parse().map_err(|e| err(format!("bad rank: {e}")))?;
        let score: f64 = cols[3].parse().map_err(|e| err(format!("bad score: {e}")))?;
        if tag.is_empty() {
            tag = cols[4].to_string();
        }
        if !per_query.contains_key(cols[0]) {
            query_order.push(cols[0].to_string());
        }
        per_query.entry(cols[0].to_string()).or_default().push((
            rank,
            RankEntry {
                doc_id: doc_id.to_string(),
                sentence,
                score,
            },
        ));
    }
    let mut rankings = Vec::new();
    for qid in query_order {
        let mut entries = per_query.remove(&qid).unwrap();
        entries.sort_by_key(|(rank, _)| *rank);
        rankings.push(Ranking {
            query_id: qid,
            entries: entries.into_iter().map(|(_, e)| e).collect(),
        });
    }
    Ok((tag, rankings))
}
