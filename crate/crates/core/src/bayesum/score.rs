//! Sentence scoring with fitted parameters.

use super::{infer_sentence, AllowedMask, FitConfig, ModelParams};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::langmodel::{kl_divergence, CountVector, UnigramModel};
use crate::rankers::{RankEntry, Ranking};

/// How fitted parameters turn into sentence scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMethod {
    /// Negative KL divergence between the query model and each smoothed
    /// sentence model. The contract; the default.
    KlDivergence,
    /// The posterior mean share of the query's component in each
    /// sentence's mixture degrees. Experimental alternative.
    PosteriorProportion,
}

/// The fitted query model, smoothed against the general model so it is
/// usable on the left of the KL ranking rule.
pub fn query_model(
    params: &ModelParams,
    corpus: &Corpus,
    query_id: &str,
    lambda: f64,
) -> Result<UnigramModel> {
    let j = corpus.query_idx(query_id).ok_or_else(|| Error::UnknownId {
        kind: "query",
        ids: query_id.to_string(),
    })?;
    params.queries[j as usize].smooth(&params.general, lambda)
}

/// Rank the sentences of the given documents for one query. Each
/// sentence's model is its MLE smoothed against the general model; the
/// score is -KL(query model || sentence model), descending, with ties
/// broken by (doc id, sentence index).
///
/// Every document must be relevant to the query unless `allow_unjudged`
/// is set (noisy-judgment runs rank docs the matrix does not cover).
#[allow(clippy::too_many_arguments)]
pub fn score_sentences(
    corpus: &Corpus,
    params: &ModelParams,
    query_id: &str,
    doc_ids: &[String],
    lambda: f64,
    method: ScoreMethod,
    cfg: &FitConfig,
    allow_unjudged: bool,
) -> Result<Ranking> {
    if doc_ids.is_empty() {
        return Err(Error::EmptyDocSet(query_id.to_string()));
    }
    let j = corpus.query_idx(query_id).ok_or_else(|| Error::UnknownId {
        kind: "query",
        ids: query_id.to_string(),
    })?;
    let mut docs = Vec::with_capacity(doc_ids.len());
    for id in doc_ids {
        let k = corpus.doc_idx(id).ok_or_else(|| Error::UnknownId {
            kind: "document",
            ids: id.clone(),
        })?;
        if !allow_unjudged && !corpus.relevance().is_relevant(k, j) {
            return Err(Error::NotRelevant {
                doc: id.clone(),
                query: query_id.to_string(),
            });
        }
        docs.push(k);
    }

    let mut entries = Vec::new();
    match method {
        ScoreMethod::KlDivergence => {
            let qm = query_model(params, corpus, query_id, lambda)?;
            for &k in &docs {
                let doc = corpus.doc(k);
                for (i, s) in doc.sentences.iter().enumerate() {
                    let sm = UnigramModel::mle(
                        &CountVector::from_tokens(&s.tokens),
                        corpus.vocab_size(),
                    )?
                    .smooth(&params.general, lambda)?;
                    entries.push(RankEntry {
                        doc_id: doc.id.clone(),
                        sentence: i,
                        score: -kl_divergence(&qm, &sm)?,
                    });
                }
            }
        }
        ScoreMethod::PosteriorProportion => {
            let component = params.index.query(j);
            for &k in &docs {
                let doc = corpus.doc(k);
                let mask = AllowedMask::for_doc(&params.index, k, corpus.relevance());
                for (i, s) in doc.sentences.iter().enumerate() {
                    let post = infer_sentence(&s.tokens, &mask, params, cfg)?;
                    entries.push(RankEntry {
                        doc_id: doc.id.clone(),
                        sentence: i,
                        score: post.pi_mean_of(component),
                    });
                }
            }
        }
    }
    Ranking::from_scores(query_id, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesum::{em_fit, init_params};
    use crate::corpus::{
        Document, FieldSet, PreprocessDescriptor, Query, Sentence, TokenizeOptions, Vocab,
    };

    fn corpus() -> Corpus {
        let vocab = Vocab::from_tokens(
            vec!["alpha".into(), "beta".into(), "gamma".into(), "delta".into()],
            false,
        );
        let doc = Document {
            id: "d1".into(),
            sentences: vec![
                Sentence { tokens: vec![0, 1], span: (0, 1), position: 0 },
                Sentence { tokens: vec![2, 3], span: (2, 3), position: 1 },
                Sentence { tokens: vec![0, 2], span: (4, 5), position: 2 },
            ],
        };
        let query = Query {
            id: "q1".into(),
            field_tokens: [vec![0, 1], vec![], vec![], vec![]],
        };
        Corpus::from_parts(
            vocab,
            vec![doc],
            vec![query],
            vec![vec![0]],
            PreprocessDescriptor {
                tokenize: TokenizeOptions::default(),
                min_count: 1,
                stopword_hash: String::new(),
            },
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn unknown_query_id_is_an_error() {
        let c = corpus();
        let cfg = FitConfig::default();
        let params = init_params(&c, &cfg).unwrap();
        assert!(matches!(
            query_model(&params, &c, "nope", 0.1),
            Err(Error::UnknownId { .. })
        ));
    }

    #[test]
    fn zero_iteration_fit_leaves_query_model_at_init() {
        let c = corpus();
        let cfg = FitConfig { max_iters: 0, ..Default::default() };
        let init = init_params(&c, &cfg).unwrap();
        let (fitted, _) = em_fit(&c, &cfg).unwrap();
        assert_eq!(
            query_model(&init, &c, "q1", 0.1).unwrap(),
            query_model(&fitted, &c, "q1", 0.1).unwrap()
        );
    }

    #[test]
    fn on_topic_sentence_ranks_first_and_is_deterministic() {
        let c = corpus();
        let cfg = FitConfig::default();
        let (params, _) = em_fit(&c, &cfg).unwrap();
        let docs = vec!["d1".to_string()];
        let r1 = score_sentences(
            &c, &params, "q1", &docs, 0.1, ScoreMethod::KlDivergence, &cfg, false,
        )
        .unwrap();
        // Sentence 0 carries exactly the query words.
        assert_eq!(r1.entries()[0].sentence, 0);
        let r2 = score_sentences(
            &c, &params, "q1", &docs, 0.1, ScoreMethod::KlDivergence, &cfg, false,
        )
        .unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn empty_doc_set_is_an_error() {
        let c = corpus();
        let cfg = FitConfig::default();
        let params = init_params(&c, &cfg).unwrap();
        assert!(matches!(
            score_sentences(&c, &params, "q1", &[], 0.1, ScoreMethod::KlDivergence, &cfg, false),
            Err(Error::EmptyDocSet(_))
        ));
    }

    #[test]
    fn posterior_proportion_method_runs() {
        let c = corpus();
        let cfg = FitConfig::default();
        let (params, _) = em_fit(&c, &cfg).unwrap();
        let r = score_sentences(
            &c,
            &params,
            "q1",
            &["d1".to_string()],
            0.1,
            ScoreMethod::PosteriorProportion,
            &cfg,
            false,
        )
        .unwrap();
        assert_eq!(r.len(), 3);
        for e in r.entries() {
            assert!((0.0..=1.0).contains(&e.score));
        }
    }

    #[test]
    fn relevance_precondition_enforced() {
        let c = corpus();
        // Make a second query that is relevant to nothing.
        let mut queries = c.queries().to_vec();
        queries.push(Query { id: "q2".into(), field_tokens: [vec![1], vec![], vec![], vec![]] });
        let c2 = Corpus::from_parts(
            Vocab::from_tokens(c.vocab().tokens().to_vec(), false),
            c.documents().to_vec(),
            queries,
            vec![vec![0], vec![]],
            c.descriptor().clone(),
            Vec::new(),
        )
        .unwrap();
        let cfg = FitConfig { fields: FieldSet::ALL, ..Default::default() };
        let params = init_params(&c2, &cfg).unwrap();
        let docs = vec!["d1".to_string()];
        assert!(matches!(
            score_sentences(&c2, &params, "q2", &docs, 0.1, ScoreMethod::KlDivergence, &cfg, false),
            Err(Error::NotRelevant { .. })
        ));
        // The override admits unjudged documents.
        assert!(score_sentences(
            &c2, &params, "q2", &docs, 0.1, ScoreMethod::KlDivergence, &cfg, true
        )
        .is_ok());
    }
}
