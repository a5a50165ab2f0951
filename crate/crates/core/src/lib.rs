//! Query-focused extractive summarization with a Bayesian admixture model.
//!
//! Sentences of documents relevant to a query are ranked by the KL
//! divergence between a learned per-query language model and per-sentence
//! language models. The query models are estimated by approximate
//! inference (mean-field variational or expectation propagation) in an
//! admixture model in which every word of every sentence is attributed
//! to general English, to its document's background, or to one of the
//! queries the document is relevant to.
//!
//! The crate also ships the surrounding apparatus: corpus ingestion
//! (tokenization, Porter stemming, sentence segmentation, relevance
//! judgments), six baseline rankers, IR metrics, a noisy-judgment
//! harness, and a synthetic-corpus sampler for end-to-end checks.

pub mod bayesum;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod langmodel;
pub mod rankers;

pub use error::{Error, Result};
