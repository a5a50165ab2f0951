//! Synthetic corpus generation by executing the generative story, plus a
//! deterministic block-structured parameter builder for benchmarks.
//!
//! Sampling records the drawn per-sentence mixture degrees so benchmarks
//! can plant gold sentences (those whose true query share clears a
//! threshold) and recovery tests can compare fitted models to the truth.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use super::{AllowedMask, ComponentIndex, ModelParams};
use crate::corpus::{
    Corpus, Document, PreprocessDescriptor, Query, Sentence, TokenizeOptions, Vocab,
};
use crate::error::{Error, Result};
use crate::eval::GoldExtraction;
use crate::langmodel::UnigramModel;

/// Dimensions of a sampled corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleShape {
    pub num_queries: usize,
    pub num_docs: usize,
    pub sentences_per_doc: usize,
    pub words_per_sentence: usize,
    /// Observed words drawn per query (its title field).
    pub query_words: usize,
}

/// Ground truth retained from sampling: the generating parameters and
/// every sentence's drawn mixture degrees (full-length, zeros outside
/// the mask).
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub params: ModelParams,
    /// pi[doc][sentence] over all 1+K+J components.
    pub pi: Vec<Vec<Vec<f64>>>,
}

impl SyntheticTruth {
    /// True query share of one sentence: the sum of the sentence's
    /// degrees over query components of the given query.
    pub fn query_share(&self, doc: usize, sentence: usize, query: usize) -> f64 {
        let c = self.params.index.query(query as u32) as usize;
        self.pi[doc][sentence][c]
    }

    /// Plant gold extraction judgments: for every relevant (query, doc)
    /// pair, the sentences whose true query share reaches the threshold.
    pub fn gold(&self, corpus: &Corpus, threshold: f64) -> GoldExtraction {
        let mut gold = GoldExtraction::new();
        for (j, q) in corpus.queries().iter().enumerate() {
            for &k in corpus.relevance().relevant_docs(j as u32) {
                let doc = corpus.doc(k);
                for s in 0..doc.sentences.len() {
                    if self.query_share(k as usize, s, j) >= threshold {
                        gold.insert(&q.id, &doc.id, s);
                    }
                }
            }
        }
        gold
    }
}

/// Deterministic block-structured parameters for synthetic benchmarks.
///
/// The vocabulary splits into a filler block (general English) followed
/// by one block per document and one per query; each component puts
/// `core_mass` uniformly on its own block and spreads the rest over the
/// whole vocabulary. `alpha = (general, other)` fills the prior.
pub fn block_params(
    num_queries: usize,
    num_docs: usize,
    vocab_size: usize,
    doc_block: usize,
    query_block: usize,
    core_mass: f64,
    alpha: (f64, f64),
) -> Result<ModelParams> {
    let needed = num_docs * doc_block + num_queries * query_block;
    if vocab_size < needed + 1 {
        return Err(Error::InvalidConfig(format!(
            "vocabulary of {vocab_size} too small for {needed} block tokens plus filler"
        )));
    }
    if !(core_mass > 0.0 && core_mass < 1.0) {
        return Err(Error::InvalidConfig("core_mass must lie in (0,1)".into()));
    }
    let filler = vocab_size - needed;
    let block_model = |start: usize, len: usize| {
        let mut probs = vec![(1.0 - core_mass) / vocab_size as f64; vocab_size];
        for p in probs.iter_mut().skip(start).take(len) {
            *p += core_mass / len as f64;
        }
        UnigramModel::new(probs).expect("block model is a distribution")
    };

    let general = block_model(0, filler);
    let mut offset = filler;
    let mut docs = Vec::with_capacity(num_docs);
    for _ in 0..num_docs {
        docs.push(block_model(offset, doc_block));
        offset += doc_block;
    }
    let mut queries = Vec::with_capacity(num_queries);
    for _ in 0..num_queries {
        queries.push(block_model(offset, query_block));
        offset += query_block;
    }

    let index = ComponentIndex::new(num_docs, num_queries);
    let mut alpha_vec = vec![alpha.1; index.total()];
    alpha_vec[0] = alpha.0;
    let params = ModelParams {
        index,
        alpha: alpha_vec,
        general,
        docs,
        queries,
    };
    params.validate()?;
    Ok(params)
}

fn sample_word<R: Rng>(dist: &WeightedIndex<f64>, rng: &mut R) -> u32 {
    dist.sample(rng) as u32
}

/// Dirichlet draw of arbitrary dimension via normalized Gamma variates.
fn sample_dirichlet<R: Rng>(alpha: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut draws = Vec::with_capacity(alpha.len());
    for &a in alpha {
        let gamma = Gamma::new(a, 1.0)
            .map_err(|e| Error::InvalidConfig(format!("bad Dirichlet parameter {a}: {e}")))?;
        draws.push(gamma.sample(rng));
    }
    let total: f64 = draws.iter().sum();
    if !(total > 0.0) {
        // All-zero draws can occur for extremely small alpha; retry once
        // with a deterministic fallback to the normalized alpha itself.
        let a0: f64 = alpha.iter().sum();
        return Ok(alpha.iter().map(|&a| a / a0).collect());
    }
    Ok(draws.into_iter().map(|d| d / total).collect())
}

/// Execute the generative story: query words from their query models,
/// then per sentence a Dirichlet draw of degrees over the allowed
/// components, a source per word, and the word from the source's model.
/// Deterministic given the seed.
pub fn sample_corpus(
    true_params: &ModelParams,
    shape: SampleShape,
    relevance: &[Vec<u32>],
    seed: u64,
) -> Result<(Corpus, SyntheticTruth)> {
    true_params.validate()?;
    let index = true_params.index;
    if index.num_docs() != shape.num_docs || index.num_queries() != shape.num_queries {
        return Err(Error::DimensionMismatch {
            left: index.total(),
            right: 1 + shape.num_docs + shape.num_queries,
        });
    }
    if relevance.len() != shape.num_queries {
        return Err(Error::DimensionMismatch {
            left: relevance.len(),
            right: shape.num_queries,
        });
    }
    if shape.words_per_sentence == 0 || shape.sentences_per_doc == 0 {
        return Err(Error::InvalidConfig(
            "sentences_per_doc and words_per_sentence must be positive".into(),
        ));
    }
    let v = true_params.vocab_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let word_dists: Vec<WeightedIndex<f64>> = (0..index.total() as u32)
        .map(|c| {
            WeightedIndex::new(true_params.component_model(c).probs().iter().copied())
                .map_err(|e| Error::InvalidConfig(format!("component {c} not sampleable: {e}")))
        })
        .collect::<Result<_>>()?;

    // Queries first, mirroring the story's first step.
    let mut queries = Vec::with_capacity(shape.num_queries);
    for j in 0..shape.num_queries {
        let dist = &word_dists[index.query(j as u32) as usize];
        let title: Vec<u32> = (0..shape.query_words)
            .map(|_| sample_word(dist, &mut rng))
            .collect();
        queries.push(Query {
            id: format!("q{j:03}"),
            field_tokens: [title, vec![], vec![], vec![]],
        });
    }

    let rel_matrix =
        crate::corpus::RelevanceMatrix::from_pairs(&flatten_relevance(relevance), shape.num_docs, shape.num_queries);

    let mut documents = Vec::with_capacity(shape.num_docs);
    let mut pi_record = Vec::with_capacity(shape.num_docs);
    for k in 0..shape.num_docs {
        let mask = AllowedMask::for_doc(&index, k as u32, &rel_matrix);
        let alpha_masked = true_params.alpha_masked(&mask);
        let mut sentences = Vec::with_capacity(shape.sentences_per_doc);
        let mut doc_pi = Vec::with_capacity(shape.sentences_per_doc);
        let mut offset = 0usize;
        for s in 0..shape.sentences_per_doc {
            let pi: Vec<f64> = sample_dirichlet(&alpha_masked, &mut rng)?;
            let source = WeightedIndex::new(pi.iter().copied())
                .map_err(|e| Error::InvalidConfig(format!("bad degree draw: {e}")))?;
            let tokens: Vec<u32> = (0..shape.words_per_sentence)
                .map(|_| {
                    let z = mask.components()[source.sample(&mut rng)];
                    sample_word(&word_dists[z as usize], &mut rng)
                })
                .collect();
            let mut full_pi = vec![0.0; index.total()];
            for (i, &c) in mask.components().iter().enumerate() {
                full_pi[c as usize] = pi[i];
            }
            doc_pi.push(full_pi);
            let len = tokens.len();
            sentences.push(Sentence {
                tokens,
                span: (offset, offset + len),
                position: s as u32,
            });
            offset += len + 1;
        }
        documents.push(Document {
            id: format!("d{k:03}"),
            sentences,
        });
        pi_record.push(doc_pi);
    }

    let vocab = Vocab::from_tokens((0..v).map(|t| format!("w{t}")).collect(), true);
    let corpus = Corpus::from_parts(
        vocab,
        documents,
        queries,
        relevance.to_vec(),
        PreprocessDescriptor {
            tokenize: TokenizeOptions::default(),
            min_count: 1,
            stopword_hash: crate::corpus::stopwords::list_hash(),
        },
        Vec::new(),
    )?;
    Ok((
        corpus,
        SyntheticTruth {
            params: true_params.clone(),
            pi: pi_record,
        },
    ))
}

fn flatten_relevance(per_query: &[Vec<u32>]) -> Vec<(u32, u32)> {
    per_query
        .iter()
        .enumerate()
        .flat_map(|(j, docs)| docs.iter().map(move |&d| (d, j as u32)))
        .collect()
}

/// Round-robin relevance: document k is relevant to query k mod J.
pub fn round_robin_relevance(num_queries: usize, num_docs: usize) -> Vec<Vec<u32>> {
    let mut per_query = vec![Vec::new(); num_queries];
    for k in 0..num_docs {
        per_query[k % num_queries].push(k as u32);
    }
    per_query
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_setup() -> (ModelParams, SampleShape, Vec<Vec<u32>>) {
        let params = block_params(1, 1, 12, 3, 3, 0.9, (2.0, 1.0)).unwrap();
        let shape = SampleShape {
            num_queries: 1,
            num_docs: 1,
            sentences_per_doc: 10,
            words_per_sentence: 6,
            query_words: 4,
        };
        (params, shape, vec![vec![0]])
    }

    #[test]
    fn same_seed_same_corpus() {
        let (params, shape, rel) = small_setup();
        let (a, _) = sample_corpus(&params, shape, &rel, 42).unwrap();
        let (b, _) = sample_corpus(&params, shape, &rel, 42).unwrap();
        let mut bytes_a = Vec::new();
        let mut bytes_b = Vec::new();
        a.save_archive(&mut bytes_a).unwrap();
        b.save_archive(&mut bytes_b).unwrap();
        assert_eq!(bytes_a, bytes_b);
        let (c, _) = sample_corpus(&params, shape, &rel, 43).unwrap();
        let mut bytes_c = Vec::new();
        c.save_archive(&mut bytes_c).unwrap();
        assert_ne!(bytes_a, bytes_c);
    }

    #[test]
    fn general_dominant_alpha_draws_from_general() {
        // The doc is relevant to nothing, so the mask is {general, doc};
        // with the doc's prior weight vanishingly small, every word comes
        // from the general model's support.
        let mut params = block_params(0, 1, 8, 3, 0, 0.999, (5.0, 1.0)).unwrap();
        params.alpha[1] = 1e-9;
        // Make the general model exactly zero outside its block so
        // support membership is checkable.
        let filler = 5;
        let mut probs = vec![0.0; 8];
        for p in probs.iter_mut().take(filler) {
            *p = 1.0 / filler as f64;
        }
        params.general = UnigramModel::new(probs).unwrap();
        let shape = SampleShape {
            num_queries: 0,
            num_docs: 1,
            sentences_per_doc: 50,
            words_per_sentence: 8,
            query_words: 0,
        };
        let (corpus, _) = sample_corpus(&params, shape, &[], 1).unwrap();
        for s in &corpus.doc(0).sentences {
            for &w in &s.tokens {
                assert!((w as usize) < filler, "word {w} outside the general block");
            }
        }
    }

    #[test]
    fn empirical_marginal_matches_analytic_mixture() {
        // One doc relevant to one query: mask {G, d, q}, masked alpha
        // (2,1,1), expected degrees (0.5, 0.25, 0.25). The word marginal
        // is that mixture of the three component models.
        let (params, _, rel) = small_setup();
        let shape = SampleShape {
            num_queries: 1,
            num_docs: 1,
            sentences_per_doc: 2500,
            words_per_sentence: 40,
            query_words: 0,
        };
        let (corpus, _) = sample_corpus(&params, shape, &rel, 9).unwrap();
        let v = corpus.vocab_size();
        let counts = corpus.word_counts(false);
        let total = counts.total();
        let expected: Vec<f64> = (0..v as u32)
            .map(|w| {
                0.5 * params.general.prob(w)
                    + 0.25 * params.docs[0].prob(w)
                    + 0.25 * params.queries[0].prob(w)
            })
            .collect();
        let tv: f64 = (0..v as u32)
            .map(|w| (counts.get(w) / total - expected[w as usize]).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.01, "total variation {tv} exceeds 0.01");
    }

    #[test]
    fn truth_gold_thresholds_on_query_share() {
        let (params, shape, rel) = small_setup();
        let (corpus, truth) = sample_corpus(&params, shape, &rel, 5).unwrap();
        let gold = truth.gold(&corpus, 0.0);
        // Threshold 0 plants every sentence of every relevant pair.
        assert_eq!(gold.num_pairs(), 1);
        assert_eq!(gold.get("q000", "d000").unwrap().len(), 10);
        let none = truth.gold(&corpus, 1.1);
        assert!(none.is_empty());
    }

    #[test]
    fn block_params_structure() {
        let params = block_params(2, 4, 30, 3, 3, 0.9, (2.0, 1.0)).unwrap();
        assert_eq!(params.index.total(), 7);
        // Filler is 30 - 4*3 - 2*3 = 12 tokens.
        assert!(params.general.prob(0) > params.general.prob(12));
        // Doc 0's block starts right after the filler.
        assert!(params.docs[0].prob(12) > params.docs[0].prob(0));
        assert!(params.queries[0].prob(24) > params.queries[0].prob(0));
        for m in [&params.general, &params.docs[0], &params.queries[1]] {
            assert!(m.is_strictly_positive());
        }
    }
}
