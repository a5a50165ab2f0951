//! Tokenization pipeline: lowercase, strip punctuation, optionally drop
//! stopwords, Porter-stem.

use serde::{Deserialize, Serialize};

use super::{porter, stopwords};

/// Preprocessing switches. Stemming defaults on; stopword removal
/// defaults off because the admixture model keeps filler words (its
/// general-English component is what absorbs them) while the baseline
/// rankers filter them at ranking time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct TokenizeOptions {
    pub stem: bool,
    pub remove_stopwords: bool,
}

impl Default for TokenizeOptions {
    fn default() -> Self {
        Self {
            stem: true,
            remove_stopwords: false,
        }
    }
}

/// Split text into lowercase alphanumeric runs, apply the configured
/// stopword removal and stemming. Deterministic and pure; empty input
/// yields an empty sequence.
pub fn tokenize(text: &str, opts: &TokenizeOptions) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lower in ch.to_lowercase() {
                current.push(lower);
            }
        } else if !current.is_empty() {
            push_token(&mut tokens, std::mem::take(&mut current), opts);
        }
    }
    if !current.is_empty() {
        push_token(&mut tokens, current, opts);
    }
    tokens
}

fn push_token(tokens: &mut Vec<String>, raw: String, opts: &TokenizeOptions) {
    if opts.remove_stopwords && stopwords::is_stopword(&raw) {
        return;
    }
    tokens.push(if opts.stem { porter::stem(&raw) } else { raw });
}
