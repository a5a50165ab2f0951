//! Mean-field variational inference for one sentence.
//!
//! Factorized posterior q(pi) q(z) with q(pi) = Dir(gamma) and
//! independent per-word responsibilities. The fixed point alternates
//! phi(n,i) proportional to p_i(w_n) exp(digamma(gamma_i) - digamma(sum))
//! with gamma = alpha + sum_n phi(n). The returned log-evidence is the
//! variational lower bound, so corpus-level EM traces are guaranteed
//! non-decreasing up to float noise.

use statrs::function::gamma::{digamma, ln_gamma};

use super::{AllowedMask, ModelParams, SentencePosterior};
use crate::error::Result;

/// Log-probability table logp[n][i] = ln p_(mask_i)(w_n);
/// errors when some word has zero probability under every allowed component.
pub(crate) fn word_log_probs(
    tokens: &[u32],
    mask: &AllowedMask,
    params: &ModelParams,
) -> Result<Vec<Vec<f64>>> {
    tokens
        .iter()
        .map(|&w| {
            let row: Vec<f64> = mask
                .components()
                .iter()
                .map(|&c| params.component_model(c).prob(w).ln())
                .collect();
            if row.iter().all(|lp| *lp == f64::NEG_INFINITY) {
                return Err(crate::error::Error::UnexplainableToken(format!(
                    "token id {w}"
                )));
            }
            Ok(row)
        })
        .collect()
}

/// Normalize a log-weight row into probabilities in place.
pub(crate) fn softmax(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub(crate) fn infer_variational(
    tokens: &[u32],
    mask: &AllowedMask,
    params: &ModelParams,
    max_inner: usize,
    tol: f64,
) -> Result<SentencePosterior> {
    let m = mask.len();
    let n = tokens.len();
    let alpha = params.alpha_masked(mask);
    let logp = word_log_probs(tokens, mask, params)?;

    let mut phi = vec![vec![1.0 / m as f64; m]; n];
    let mut gamma: Vec<f64> = alpha
        .iter()
        .map(|&a| a + n as f64 / m as f64)
        .collect();

    for _ in 0..max_inner {
        let dg_total = digamma(gamma.iter().sum());
        let elog_pi: Vec<f64> = gamma.iter().map(|&g| digamma(g) - dg_total).collect();
        let mut new_gamma = alpha.clone();
        for (row, lp) in phi.iter_mut().zip(&logp) {
            for i in 0..m {
                row[i] = lp[i] + elog_pi[i];
            }
            softmax(row);
            for i in 0..m {
                new_gamma[i] += row[i];
            }
        }
        let delta = gamma
            .iter()
            .zip(&new_gamma)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        gamma = new_gamma;
        if delta < tol {
            break;
        }
    }

    let bound = elbo(&alpha, &gamma, &phi, &logp);
    Ok(SentencePosterior::new(mask, gamma, phi, bound))
}

/// The variational lower bound on ln p(words):
/// E[ln p(pi)] + sum_n E[ln p(z_n|pi)] + sum_n E[ln p(w_n|z_n)]
/// - E[ln q(pi)] - sum_n E[ln q(z_n)].
fn elbo(alpha: &[f64], gamma: &[f64], phi: &[Vec<f64>], logp: &[Vec<f64>]) -> f64 {
    let gamma_total: f64 = gamma.iter().sum();
    let dg_total = digamma(gamma_total);
    let elog_pi: Vec<f64> = gamma.iter().map(|&g| digamma(g) - dg_total).collect();

    let alpha_total: f64 = alpha.iter().sum();
    let mut bound = ln_gamma(alpha_total) - ln_gamma(gamma_total);
    for i in 0..alpha.len() {
        bound += ln_gamma(gamma[i]) - ln_gamma(alpha[i]);
        bound += (alpha[i] - gamma[i]) * elog_pi[i];
    }
    for (row, lp) in phi.iter().zip(logp) {
        for i in 0..row.len() {
            let p = row[i];
            if p > 0.0 {
                bound += p * (lp[i] + elog_pi[i] - p.ln());
            }
        }
    }
    bound
}
