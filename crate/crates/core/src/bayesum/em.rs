//! Corpus-level fitting: initialization, the E-step / M-step loop, and
//! evidence computation.
//!
//! The E-step runs per-sentence inference (embarrassingly parallel
//! against read-only parameters); count aggregation is a sequential
//! reduce in sentence order, so results do not depend on the thread
//! count. The recorded bound is the sum of per-sentence evidence
//! estimates plus the exact query-word log-likelihood.

use std::time::Instant;

use rayon::prelude::*;

use super::{
    ep::infer_ep, variational::infer_variational, AllowedMask, AlphaUpdate, ComponentIndex,
    Engine, FitConfig, ModelParams, SentencePosterior,
};
use crate::corpus::{Corpus, FieldSet, BACKGROUND_FLOOR};
use crate::error::{Error, Result};
use crate::langmodel::{CountVector, UnigramModel};

/// Inner fixed-point convergence threshold on max |delta gamma|.
const INNER_TOL: f64 = 1e-6;

/// One row of the fit trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub bound: f64,
    pub seconds: f64,
}

/// Initial parameters: corpus MLE (floored) for general English,
/// half-uniform document and query MLEs, and a prior that expects filler
/// to dominate.
pub fn init_params(corpus: &Corpus, cfg: &FitConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let v = corpus.vocab_size();
    let uniform = UnigramModel::uniform(v);
    let general = UnigramModel::mle(&corpus.word_counts(false), v)?.with_floor(BACKGROUND_FLOOR);

    let mut docs = Vec::with_capacity(corpus.num_docs());
    for doc in corpus.documents() {
        let mut counts = CountVector::new();
        for s in &doc.sentences {
            for &t in &s.tokens {
                counts.add(t, 1.0);
            }
        }
        docs.push(UnigramModel::mle(&counts, v)?.smooth(&uniform, 0.5)?);
    }

    let mut queries = Vec::with_capacity(corpus.num_queries());
    for q in corpus.queries() {
        let tokens = q.tokens_for(cfg.fields);
        if tokens.is_empty() {
            queries.push(uniform.clone());
        } else {
            queries
                .push(UnigramModel::mle(&CountVector::from_tokens(&tokens), v)?.smooth(&uniform, 0.5)?);
        }
    }

    let index = ComponentIndex::new(corpus.num_docs(), corpus.num_queries());
    let mut alpha = vec![cfg.alpha_other; index.total()];
    alpha[0] = cfg.alpha_general;
    let params = ModelParams {
        index,
        alpha,
        general,
        docs,
        queries,
    };
    params.validate()?;
    Ok(params)
}

/// Approximate posterior for one sentence under the configured engine.
pub fn infer_sentence(
    tokens: &[u32],
    mask: &AllowedMask,
    params: &ModelParams,
    cfg: &FitConfig,
) -> Result<SentencePosterior> {
    match cfg.engine {
        Engine::Variational => infer_variational(tokens, mask, params, cfg.inner_iters, INNER_TOL),
        Engine::Ep => infer_ep(tokens, mask, params, cfg.inner_iters, INNER_TOL),
    }
}

/// Exact log-likelihood of the observed query words (the first bracket
/// of the joint): sum over queries and their selected-field words of
/// ln p_q(w).
pub(crate) fn query_word_log_likelihood(
    corpus: &Corpus,
    params: &ModelParams,
    fields: FieldSet,
) -> Result<f64> {
    let mut total = 0.0;
    for (j, q) in corpus.queries().iter().enumerate() {
        let model = &params.queries[j];
        for w in q.tokens_for(fields) {
            let p = model.prob(w);
            if p <= 0.0 {
                return Err(Error::UnexplainableToken(format!(
                    "token id {w} in query '{}'",
                    q.id
                )));
            }
            total += p.ln();
        }
    }
    Ok(total)
}

fn doc_masks(corpus: &Corpus, index: &ComponentIndex) -> Vec<AllowedMask> {
    (0..corpus.num_docs() as u32)
        .map(|k| AllowedMask::for_doc(index, k, corpus.relevance()))
        .collect()
}

/// Infer every sentence and total the evidence bound. Posteriors come
/// back flattened in (document, sentence) order.
fn e_step(
    corpus: &Corpus,
    params: &ModelParams,
    cfg: &FitConfig,
    masks: &[AllowedMask],
) -> Result<(f64, Vec<SentencePosterior>)> {
    let jobs: Vec<(usize, usize)> = corpus
        .documents()
        .iter()
        .enumerate()
        .flat_map(|(k, d)| (0..d.sentences.len()).map(move |s| (k, s)))
        .collect();
    let results: Vec<Result<SentencePosterior>> = jobs
        .par_iter()
        .map(|&(k, s)| {
            infer_sentence(&corpus.documents()[k].sentences[s].tokens, &masks[k], params, cfg)
        })
        .collect();

    let mut bound = query_word_log_likelihood(corpus, params, cfg.fields)?;
    let mut posteriors = Vec::with_capacity(results.len());
    for (&(k, s), result) in jobs.iter().zip(results) {
        let post = result?;
        if !post.log_evidence.is_finite() {
            return Err(Error::NonFinite {
                context: "sentence evidence",
                doc: corpus.documents()[k].id.clone(),
                sentence: s,
            });
        }
        bound += post.log_evidence;
        posteriors.push(post);
    }
    if !bound.is_finite() {
        return Err(Error::NonFinite {
            context: "evidence bound",
            doc: String::new(),
            sentence: 0,
        });
    }
    Ok((bound, posteriors))
}

/// Re-estimate every component model from responsibility-weighted counts.
/// Query components also receive their observed query words as fixed
/// counts.
///
/// Every stored document and query model has the smoothed form
/// (1-lambda) core + lambda p_G. The M-step therefore splits each word
/// count assigned to a component between that component's core and the
/// general model in proportion to the two branches' likelihoods, takes
/// the MLE of each core and of the general counts, and re-assembles the
/// smoothed models against the new general model. This is an exact EM
/// step for the smoothed family, which keeps the corpus evidence bound
/// non-decreasing; re-estimating cores directly from unsplit counts
/// would not.
fn m_step(
    corpus: &Corpus,
    params: &mut ModelParams,
    posteriors: &[SentencePosterior],
    cfg: &FitConfig,
) -> Result<()> {
    let v = corpus.vocab_size();
    let total = params.index.total();
    let mut counts = vec![vec![0.0f64; v]; total];

    let mut flat = posteriors.iter();
    for doc in corpus.documents() {
        for s in &doc.sentences {
            let post = flat.next().expect("one posterior per sentence");
            for (n, &w) in s.tokens.iter().enumerate() {
                let row = &post.responsibilities[n];
                for (i, &c) in post.components().iter().enumerate() {
                    counts[c as usize][w as usize] += row[i];
                }
            }
        }
    }
    for (j, q) in corpus.queries().iter().enumerate() {
        let c = params.index.query(j as u32) as usize;
        for w in q.tokens_for(cfg.fields) {
            counts[c][w as usize] += cfg.query_word_weight;
        }
    }

    // Split non-general counts between the component core and the
    // general branch of the smoothing mixture.
    let lambda = cfg.lambda_smooth;
    let mut general_counts = counts[0].clone();
    let mut core_counts = vec![vec![0.0f64; v]; total];
    for c in 1..total {
        let model = params.component_model(c as u32);
        for w in 0..v {
            let n = counts[c][w];
            if n == 0.0 {
                continue;
            }
            let p = model.prob(w as u32);
            let share_g = if p > 0.0 {
                (lambda * params.general.prob(w as u32) / p).min(1.0)
            } else {
                1.0
            };
            general_counts[w] += n * share_g;
            core_counts[c][w] += n * (1.0 - share_g);
        }
    }

    let estimate = |c: &[f64]| -> UnigramModel {
        UnigramModel::mle_dense(c).unwrap_or_else(|_| UnigramModel::uniform(v))
    };
    let general = estimate(&general_counts).with_floor(BACKGROUND_FLOOR);
    let mut docs = Vec::with_capacity(params.index.num_docs());
    for k in 0..params.index.num_docs() {
        let c = params.index.doc(k as u32) as usize;
        docs.push(estimate(&core_counts[c]).smooth(&general, lambda)?);
    }
    let mut queries = Vec::with_capacity(params.index.num_queries());
    for j in 0..params.index.num_queries() {
        let c = params.index.query(j as u32) as usize;
        queries.push(estimate(&core_counts[c]).smooth(&general, lambda)?);
    }
    params.general = general;
    params.docs = docs;
    params.queries = queries;
    Ok(())
}

/// Fixed-point moment matching for the Dirichlet prior: pool every
/// sentence posterior's first and second moments per component, match a
/// Dirichlet precision to them, and rescale the means.
fn update_alpha(params: &mut ModelParams, posteriors: &[SentencePosterior]) {
    let total = params.index.total();
    let mut mean_sum = vec![0.0f64; total];
    let mut sq_sum = vec![0.0f64; total];
    let mut seen = vec![0usize; total];
    for post in posteriors {
        let g0: f64 = post.gamma.iter().sum();
        for (i, &c) in post.components().iter().enumerate() {
            let g = post.gamma[i];
            mean_sum[c as usize] += g / g0;
            sq_sum[c as usize] += g * (g + 1.0) / (g0 * (g0 + 1.0));
            seen[c as usize] += 1;
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut means = vec![0.0f64; total];
    for c in 0..total {
        if seen[c] == 0 {
            continue;
        }
        let m = mean_sum[c] / seen[c] as f64;
        let v = sq_sum[c] / seen[c] as f64;
        means[c] = m;
        num += m - v;
        den += v - m * m;
    }
    if !(num > 0.0) || !(den > 0.0) {
        return;
    }
    let precision = num / den;
    for c in 0..total {
        if seen[c] > 0 {
            params.alpha[c] = (precision * means[c]).max(1e-3);
        }
    }
}

/// Fit starting from [`init_params`].
pub fn em_fit(corpus: &Corpus, cfg: &FitConfig) -> Result<(ModelParams, Vec<TraceEntry>)> {
    let params = init_params(corpus, cfg)?;
    em_fit_from(corpus, params, cfg)
}

/// Fit starting from the given parameters (resume support). Alternates
/// full E and M steps; stops when the relative bound change drops below
/// the tolerance or the iteration cap is reached.
pub fn em_fit_from(
    corpus: &Corpus,
    mut params: ModelParams,
    cfg: &FitConfig,
) -> Result<(ModelParams, Vec<TraceEntry>)> {
    cfg.validate()?;
    params.validate()?;
    let masks = doc_masks(corpus, &params.index);
    let mut trace = Vec::new();
    let start = Instant::now();
    let mut prev_bound: Option<f64> = None;
    for iteration in 1..=cfg.max_iters {
        let (bound, posteriors) = e_step(corpus, &params, cfg, &masks)?;
        trace.push(TraceEntry {
            iteration,
            bound,
            seconds: start.elapsed().as_secs_f64(),
        });
        if let Some(prev) = prev_bound {
            if (bound - prev).abs() <= cfg.tolerance * bound.abs().max(1.0) {
                break;
            }
        }
        prev_bound = Some(bound);
        m_step(corpus, &mut params, &posteriors, cfg)?;
        if cfg.alpha_update == AlphaUpdate::Learned {
            update_alpha(&mut params, &posteriors);
        }
    }
    Ok((params, trace))
}

/// Corpus log evidence under the configured approximate engine: the sum
/// of per-sentence estimates plus the exact query-word term.
pub fn log_evidence(corpus: &Corpus, params: &ModelParams, cfg: &FitConfig) -> Result<f64> {
    cfg.validate()?;
    params.validate()?;
    let masks = doc_masks(corpus, &params.index);
    Ok(e_step(corpus, params, cfg, &masks)?.0)
}
