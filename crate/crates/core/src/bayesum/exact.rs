//! Exact inference by enumeration, for small sentences only.
//!
//! Summing over every source assignment z with the closed-form
//! Dirichlet-multinomial integral gives the exact marginal likelihood
//! and posterior. This is the oracle that keeps both approximate engines
//! honest; it refuses inputs above the size caps.

use statrs::function::gamma::ln_gamma;

use super::variational::word_log_probs;
use super::{AllowedMask, FitConfig, ModelParams, SentencePosterior};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const EXACT_WORD_CAP: usize = 8;
pub const EXACT_COMPONENT_CAP: usize = 3;

/// Exact posterior for one sentence by enumerating all |mask|^N source
/// assignments. Errors above the size caps.
pub fn infer_exact(
    tokens: &[u32],
    mask: &AllowedMask,
    params: &ModelParams,
) -> Result<SentencePosterior> {
    let n = tokens.len();
    let m = mask.len();
    if n > EXACT_WORD_CAP || m > EXACT_COMPONENT_CAP {
        return Err(Error::ExactModeTooLarge {
            words: n,
            components: m,
            word_cap: EXACT_WORD_CAP,
            component_cap: EXACT_COMPONENT_CAP,
        });
    }
    let alpha = params.alpha_masked(mask);
    let alpha_total: f64 = alpha.iter().sum();
    let logp = word_log_probs(tokens, mask, params)?;

    // ln E[prod_n pi_{z_n}] under Dir(alpha), a function of the counts.
    let log_dirmult = |counts: &[usize]| -> f64 {
        let mut v = ln_gamma(alpha_total) - ln_gamma(alpha_total + n as f64);
        for (i, &c) in counts.iter().enumerate() {
            v += ln_gamma(alpha[i] + c as f64) - ln_gamma(alpha[i]);
        }
        v
    };

    let total = (m as u64).pow(n as u32) as usize;
    let mut log_weights = Vec::with_capacity(total);
    let mut assignment = vec![0usize; n];
    let mut counts = vec![0usize; m];
    for code in 0..total {
        let mut rest = code;
        let mut log_like = 0.0;
        counts.iter_mut().for_each(|c| *c = 0);
        for w in 0..n {
            let z = rest % m;
            rest /= m;
            assignment[w] = z;
            counts[z] += 1;
            log_like += logp[w][z];
        }
        log_weights.push((log_like + log_dirmult(&counts), assignment.clone()));
    }

    let max = log_weights
        .iter()
        .map(|(lw, _)| *lw)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_weights.iter().map(|(lw, _)| (lw - max).exp()).sum();
    let log_evidence = max + sum.ln();

    // Posterior responsibilities r[w][i] = P(z_w = i | words); the
    // posterior mean of pi is then (alpha + sum_w r_w) / (alpha0 + N).
    let mut responsibilities = vec![vec![0.0; m]; n];
    for (lw, assignment) in &log_weights {
        let weight = (lw - log_evidence).exp();
        for (w, &z) in assignment.iter().enumerate() {
            responsibilities[w][z] += weight;
        }
    }
    for row in &mut responsibilities {
        let s: f64 = row.iter().sum();
        for r in row.iter_mut() {
            *r /= s;
        }
    }
    let mut gamma = alpha;
    for row in &responsibilities {
        for (g, r) in gamma.iter_mut().zip(row) {
            *g += r;
        }
    }
    Ok(SentencePosterior::new(mask, gamma, responsibilities, log_evidence))
}

/// Exact log marginal likelihood of one sentence (size-capped).
pub fn exact_log_evidence(
    tokens: &[u32],
    mask: &AllowedMask,
    params: &ModelParams,
) -> Result<f64> {
    Ok(infer_exact(tokens, mask, params)?.log_evidence)
}

/// Exact corpus log evidence: the enumerated sentence terms plus the
/// query-word log-likelihood. Refused when any sentence exceeds the caps.
pub fn log_evidence_exact(corpus: &Corpus, params: &ModelParams, cfg: &FitConfig) -> Result<f64> {
    let mut total = super::em::query_word_log_likelihood(corpus, params, cfg.fields)?;
    for (k, doc) in corpus.documents().iter().enumerate() {
        let mask = AllowedMask::for_doc(&params.index, k as u32, corpus.relevance());
        for s in &doc.sentences {
            total += exact_log_evidence(&s.tokens, &mask, params)?;
        }
    }
    Ok(total)
}
