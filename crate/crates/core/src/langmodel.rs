//! Unigram distributions, smoothing, KL divergence, and the Dirichlet
//! log-density. These are the numeric substrate shared by the baselines
//! and the admixture model.
//!
//! All log quantities are in nats.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Sparse mapping token id -> non-negative real count. Counts are reals
/// because EM produces fractional expected counts. Absent key means zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountVector {
    counts: BTreeMap<u32, f64>,
}

impl CountVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, token: u32, count: f64) {
        debug_assert!(count >= 0.0);
        if count > 0.0 {
            *self.counts.entry(token).or_insert(0.0) += count;
        }
    }

    pub fn get(&self, token: u32) -> f64 {
        self.counts.get(&token).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.counts.iter().map(|(&t, &c)| (t, c))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn from_tokens(tokens: &[u32]) -> Self {
        let mut cv = Self::new();
        for &t in tokens {
            cv.add(t, 1.0);
        }
        cv
    }
}

/// A probability distribution over a fixed vocabulary, stored densely.
/// Entries sum to one within 1e-9 and are never negative.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramModel {
    probs: Vec<f64>,
}

/// Tolerance on the simplex-sum invariant.
const SIMPLEX_TOL: f64 = 1e-9;

impl UnigramModel {
    /// Wrap a dense probability vector, validating the simplex invariants.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotOnSimplex(sum));
        }
        Ok(Self { probs })
    }

    /// Uniform distribution over a vocabulary of the given size.
    pub fn uniform(vocab_size: usize) -> Self {
        assert!(vocab_size > 0, "uniform model over empty vocabulary");
        Self {
            probs: vec![1.0 / vocab_size as f64; vocab_size],
        }
    }

    /// Maximum-likelihood estimate: p(w) = count(w) / total, zeros for
    /// unseen words. Errors when the total count is zero.
    pub fn mle(counts: &CountVector, vocab_size: usize) -> Result<Self> {
        let total = counts.total();
        if total <= 0.0 {
            return Err(Error::EmptyModel);
        }
        let mut probs = vec![0.0; vocab_size];
        for (t, c) in counts.iter() {
            probs[t as usize] = c / total;
        }
        Ok(Self { probs })
    }

    /// MLE from a dense count slice; same contract as [`UnigramModel::mle`].
    pub fn mle_dense(counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyModel);
        }
        Ok(Self {
            probs: counts.iter().map(|&c| c / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, token: u32) -> f64 {
        self.probs[token as usize]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Mix `epsilon` of uniform mass into the model so every entry is
    /// strictly positive: p' = (1-eps) p + eps/|V|.
    pub fn with_floor(&self, epsilon: f64) -> Self {
        let v = self.probs.len() as f64;
        Self {
            probs: self
                .probs
                .iter()
                .map(|&p| (1.0 - epsilon) * p + epsilon / v)
                .collect(),
        }
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    /// Jelinek-Mercer interpolation toward a background model:
    /// (1-lambda) self + lambda background. `lambda` must lie in (0,1).
    pub fn smooth(&self, background: &UnigramModel, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidSmoothingWeight(lambda));
        }
        if self.len() != background.len() {
            return Err(Error::DimensionMismatch {
                left: self.len(),
                right: background.len(),
            });
        }
        Ok(Self {
            probs: self
                .probs
                .iter()
                .zip(&background.probs)
                .map(|(&p, &b)| (1.0 - lambda) * p + lambda * b)
                .collect(),
        })
    }

    /// Serialize as sparse TSV lines `token_id<TAB>probability`; entries
    /// equal to zero are omitted.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, &p) in self.probs.iter().enumerate() {
            if p != 0.0 {
                writeln!(w, "{}\t{}", i, p)?;
            }
        }
        Ok(())
    }

    /// Parse the sparse TSV form produced by [`UnigramModel::write_tsv`].
    pub fn read_tsv<R: BufRead>(r: R, vocab_size: usize, path: &str) -> Result<Self> {
        let mut probs = vec![0.0; vocab_size];
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let parse = |s: Option<&str>, what: &str| -> Result<String> {
                s.map(str::to_string).ok_or_else(|| Error::Parse {
                    path: path.to_string(),
                    line: lineno + 1,
                    message: format!("missing {what}"),
                })
            };
            let id: u32 = parse(parts.next(), "token id")?
                .parse()
                .map_err(|e| Error::Parse {
                    path: path.to_string(),
                    line: lineno + 1,
                    message: format!("bad token id: {e}"),
                })?;
            let p: f64 = parse(parts.next(), "probability")?
                .parse()
                .map_err(|e| Error::Parse {
                    path: path.to_string(),
                    line: lineno + 1,
                    message: format!("bad probability: {e}"),
                })?;
            if (id as usize) >= vocab_size {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: lineno + 1,
                    message: format!("token id {id} out of range (|V| = {vocab_size})"),
                });
            }
            probs[id as usize] = p;
        }
        Self::new(probs)
    }
}

/// KL(p || q) = sum_w p(w) ln(p(w)/q(w)), in nats. Terms with p(w) = 0
/// contribute zero; q must be positive wherever p is (callers smooth q
/// against a strictly positive background first).
pub fn kl_divergence(p: &UnigramModel, q: &UnigramModel) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut kl = 0.0;
    for (i, (&pw, &qw)) in p.probs.iter().zip(&q.probs).enumerate() {
        if pw > 0.0 {
            if qw <= 0.0 {
                return Err(Error::SupportViolation(i as u32));
            }
            kl += pw * (pw / qw).ln();
        }
    }
    // Float cancellation can leave a tiny negative residue when p ~ q.
    Ok(kl.max(0.0))
}

/// Log-density of Dir(alpha) at a point on the simplex:
/// ln G(sum a_i) - sum ln G(a_i) + sum (a_i - 1) ln theta_i.
///
/// theta_i = 0 is an error when a_i < 1 (density diverges), contributes
/// nothing when a_i = 1, and yields -inf when a_i > 1.
pub fn dirichlet_log_density(theta: &[f64], alpha: &[f64]) -> Result<f64> {
    if theta.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            left: theta.len(),
            right: alpha.len(),
        });
    }
    if let Some(i) = alpha.iter().position(|&a| !(a > 0.0)) {
        return Err(Error::NonPositiveAlpha(i));
    }
    let sum: f64 = theta.iter().sum();
    if theta.iter().any(|&t| t < 0.0) || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::NotOnSimplex(sum));
    }
    let alpha_total: f64 = alpha.iter().sum();
    let mut logdens = ln_gamma(alpha_total);
    for (i, (&t, &a)) in theta.iter().zip(alpha).enumerate() {
        logdens -= ln_gamma(a);
        if t == 0.0 {
            if a < 1.0 {
                return Err(Error::InfiniteDensity(i));
            }
            if a > 1.0 {
                return Ok(f64::NEG_INFINITY);
            }
            // a == 1: (a-1) ln 0 = 0.
        } else {
            logdens += (a - 1.0) * t.ln();
        }
    }
    Ok(logdens)
}

/// ln of the multivariate beta function: sum ln G(a_i) - ln G(sum a_i).
pub fn ln_multivariate_beta(alpha: &[f64]) -> f64 {
    alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(alpha.iter().sum())
}
