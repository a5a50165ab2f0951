//! Expectation propagation for one sentence.
//!
//! Each word's mixture likelihood term is approximated by a Dirichlet-
//! shaped term so the running posterior q(pi) stays a Dirichlet. A
//! deletion/inclusion step removes one word's approximation (the cavity),
//! moment-matches the exact tilted distribution (integral, mean, and
//! second moments), and includes the refreshed approximation. Steps whose
//! cavity turns non-positive are skipped and retried on the next sweep.

use super::variational::word_log_probs;
use super::{AllowedMask, ModelParams, SentencePosterior};
use crate::error::Result;
use crate::langmodel::ln_multivariate_beta;

const MIN_CAVITY: f64 = 1e-8;

pub(crate) fn infer_ep(
    tokens: &[u32],
    mask: &AllowedMask,
    params: &ModelParams,
    max_sweeps: usize,
    tol: f64,
) -> Result<SentencePosterior> {
    let m = mask.len();
    let n = tokens.len();
    let alpha = params.alpha_masked(mask);
    let logp = word_log_probs(tokens, mask, params)?;
    if m == 1 {
        // Degenerate single-component simplex: the posterior is exact.
        let log_evidence: f64 = logp.iter().map(|row| row[0]).sum();
        return Ok(SentencePosterior::new(
            mask,
            vec![alpha[0] + n as f64],
            vec![vec![1.0]; n],
            log_evidence,
        ));
    }
    let probs: Vec<Vec<f64>> = logp
        .into_iter()
        .map(|row| row.into_iter().map(f64::exp).collect())
        .collect();

    let mut gamma = alpha.clone();
    let mut beta = vec![vec![0.0; m]; n];
    let mut log_scale = vec![0.0; n];

    for _ in 0..max_sweeps {
        let mut max_delta = 0.0f64;
        for w in 0..n {
            // Deletion: remove this word's approximate term.
            let cavity: Vec<f64> = gamma.iter().zip(&beta[w]).map(|(g, b)| g - b).collect();
            if cavity.iter().any(|&g| g <= MIN_CAVITY) {
                continue;
            }
            let g0: f64 = cavity.iter().sum();
            let p = &probs[w];

            // Exact moments of t_w(pi) Dir(pi | cavity).
            let z: f64 = p.iter().zip(&cavity).map(|(pi, gi)| pi * gi).sum::<f64>() / g0;
            if !(z > 0.0) {
                continue;
            }
            let mut mean = vec![0.0; m];
            let mut second = vec![0.0; m];
            for i in 0..m {
                mean[i] = cavity[i] * (z * g0 + p[i]) / (z * g0 * (g0 + 1.0));
                second[i] = cavity[i] * (cavity[i] + 1.0) * (z * g0 + 2.0 * p[i])
                    / (z * g0 * (g0 + 1.0) * (g0 + 2.0));
            }

            // Match a Dirichlet to the tilted mean and second moments:
            // pooled precision from E[pi_i^2] = m_i (s m_i + 1) / (s + 1).
            let num: f64 = mean.iter().zip(&second).map(|(m, v)| m - v).sum();
            let den: f64 = mean
                .iter()
                .zip(&second)
                .map(|(m, v)| v - m * m)
                .sum();
            if !(den > 0.0) || !(num > 0.0) {
                continue;
            }
            let precision = num / den;
            let new_gamma: Vec<f64> = mean.iter().map(|&mi| precision * mi).collect();
            if new_gamma.iter().any(|&g| !g.is_finite() || g <= 0.0) {
                continue;
            }

            // Inclusion: normalization match fixes the term's scale.
            log_scale[w] =
                z.ln() + ln_multivariate_beta(&cavity) - ln_multivariate_beta(&new_gamma);
            for i in 0..m {
                let nb = new_gamma[i] - cavity[i];
                max_delta = max_delta.max((new_gamma[i] - gamma[i]).abs());
                beta[w][i] = nb;
            }
            gamma = new_gamma;
        }
        if max_delta < tol {
            break;
        }
    }

    // Responsibilities from each word's cavity distribution.
    let mut responsibilities = Vec::with_capacity(n);
    for w in 0..n {
        let mut cavity: Vec<f64> = gamma.iter().zip(&beta[w]).map(|(g, b)| g - b).collect();
        if cavity.iter().any(|&g| g <= 0.0) {
            cavity = gamma.clone();
        }
        let mut row: Vec<f64> = probs[w].iter().zip(&cavity).map(|(p, g)| p * g).collect();
        let sum: f64 = row.iter().sum();
        for r in &mut row {
            *r /= sum;
        }
        responsibilities.push(row);
    }

    let log_evidence = log_scale.iter().sum::<f64>() + ln_multivariate_beta(&gamma)
        - ln_multivariate_beta(&alpha);
    Ok(SentencePosterior::new(
        mask,
        gamma,
        responsibilities,
        log_evidence,
    ))
}
