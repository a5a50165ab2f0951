//! Integration checks of the inference stack against the enumeration
//! oracle, the evidence API contracts, and fitting behaviour.

use bayesum::bayesum::*;
use bayesum::corpus::FieldSet;
use bayesum::Error;

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

/// A small relevant-pair world: two docs, one query, doc 0 relevant.
fn small_world(seed: u64, sentences: usize, words: usize) -> (bayesum::corpus::Corpus, ModelParams) {
    let params = block_params(1, 2, 16, 3, 3, 0.9, (2.0, 1.0)).unwrap();
    let shape = SampleShape {
        num_queries: 1,
        num_docs: 2,
        sentences_per_doc: sentences,
        words_per_sentence: words,
        query_words: 3,
    };
    let (corpus, _) = sample_corpus(&params, shape, &[vec![0]], seed).unwrap();
    (corpus, params)
}

#[test]
fn two_word_sentences_match_the_enumeration_oracle() {
    let (corpus, params) = small_world(3, 30, 2);
    for k in 0..2u32 {
        let mask = AllowedMask::for_doc(&params.index, k, corpus.relevance());
        for s in &corpus.doc(k).sentences {
            let exact = infer_exact(&s.tokens, &mask, &params).unwrap();
            // EP's estimate targets the integral itself.
            let ep = infer_sentence(
                &s.tokens,
                &mask,
                &params,
                &FitConfig { engine: Engine::Ep, ..Default::default() },
            )
            .unwrap();
            assert!(
                (ep.log_evidence - exact.log_evidence).abs() <= 0.1,
                "ep evidence {} vs exact {}",
                ep.log_evidence,
                exact.log_evidence
            );
            // The variational estimate is a lower bound; its posterior
            // mean still tracks the truth.
            let var = infer_sentence(&s.tokens, &mask, &params, &FitConfig::default()).unwrap();
            assert!(var.log_evidence <= exact.log_evidence + 1e-9);
            for (a, b) in var.pi_mean().iter().zip(exact.pi_mean()) {
                assert!((a - b).abs() <= 0.05, "pi {a} vs exact {b}");
            }
        }
    }
}

#[test]
fn variational_evidence_is_a_lower_bound() {
    let (corpus, params) = small_world(8, 40, 6);
    let cfg = FitConfig::default();
    for k in 0..2u32 {
        let mask = AllowedMask::for_doc(&params.index, k, corpus.relevance());
        for s in &corpus.doc(k).sentences {
            let exact = exact_log_evidence(&s.tokens, &mask, &params).unwrap();
            let post = infer_sentence(&s.tokens, &mask, &params, &cfg).unwrap();
            assert!(
                post.log_evidence <= exact + 1e-9,
                "ELBO {} exceeds exact {}",
                post.log_evidence,
                exact
            );
        }
    }
}

#[test]
fn exact_mode_refuses_oversized_inputs() {
    let (corpus, params) = small_world(4, 1, 9);
    let mask = AllowedMask::for_doc(&params.index, 0, corpus.relevance());
    let tokens = &corpus.doc(0).sentences[0].tokens;
    assert_eq!(tokens.len(), 9);
    assert!(matches!(
        infer_exact(tokens, &mask, &params),
        Err(Error::ExactModeTooLarge { .. })
    ));
    // Within the cap it works.
    assert!(infer_exact(&tokens[..8], &mask, &params).is_ok());
}

#[test]
fn corpus_evidence_decreases_when_a_query_model_is_perturbed() {
    let (corpus, _) = small_world(6, 40, 6);
    let cfg = FitConfig {
        fields: FieldSet::TITLE,
        ..Default::default()
    };
    let (fitted, _) = em_fit(&corpus, &cfg).unwrap();
    let exact_baseline = log_evidence_exact(&corpus, &fitted, &cfg).unwrap();

    // Swap the learned query model for something unrelated to the data
    // it explains; every evidence route must drop.
    let mut perturbed = fitted.clone();
    perturbed.queries[0] = perturbed.general.clone();
    assert!(log_evidence_exact(&corpus, &perturbed, &cfg).unwrap() < exact_baseline);
    for engine in [Engine::Variational, Engine::Ep] {
        let cfg = FitConfig { engine, ..cfg.clone() };
        let baseline = log_evidence(&corpus, &fitted, &cfg).unwrap();
        let worse = log_evidence(&corpus, &perturbed, &cfg).unwrap();
        assert!(
            worse < baseline,
            "{engine:?}: perturbed evidence {worse} not below baseline {baseline}"
        );
    }
}

#[test]
fn fit_trace_is_monotone_and_resumable() {
    let (corpus, _) = small_world(5, 30, 6);
    let cfg = FitConfig {
        fields: FieldSet::TITLE,
        max_iters: 12,
        tolerance: 1e-12,
        ..Default::default()
    };
    let (params, trace) = em_fit(&corpus, &cfg).unwrap();
    assert!(!trace.is_empty());
    for w in trace.windows(2) {
        assert!(w[1].bound >= w[0].bound - 1e-6);
        assert!(w[1].seconds >= w[0].seconds);
    }

    // Resuming from the fitted parameters starts at (or above) the
    // fitted bound.
    let dir = tempfile::tempdir().unwrap();
    params.save_dir(dir.path(), "t").unwrap();
    let reloaded = ModelParams::load_dir(dir.path()).unwrap();
    let resume_cfg = FitConfig { max_iters: 2, ..cfg.clone() };
    let (_, resumed) = em_fit_from(&corpus, reloaded, &resume_cfg).unwrap();
    assert!(resumed[0].bound >= trace.last().unwrap().bound - 1e-6);
}

#[test]
fn ep_fit_runs_and_recovers_direction() {
    let truth = block_params(1, 2, 16, 3, 3, 0.9, (2.0, 1.0)).unwrap();
    let shape = SampleShape {
        num_queries: 1,
        num_docs: 2,
        sentences_per_doc: 60,
        words_per_sentence: 8,
        query_words: 8,
    };
    let (corpus, synth) = sample_corpus(&truth, shape, &[vec![0, 1]], 17).unwrap();
    let cfg = FitConfig {
        engine: Engine::Ep,
        fields: FieldSet::TITLE,
        max_iters: 15,
        ..Default::default()
    };
    let init = init_params(&corpus, &cfg).unwrap();
    let (fitted, trace) = em_fit(&corpus, &cfg).unwrap();
    assert!(!trace.is_empty());
    let before = total_variation(init.queries[0].probs(), synth.params.queries[0].probs());
    let after = total_variation(fitted.queries[0].probs(), synth.params.queries[0].probs());
    assert!(after < before, "EP fit did not improve: {before} -> {after}");
}

#[test]
fn learned_alpha_stays_positive_and_fits() {
    let (corpus, _) = small_world(7, 30, 6);
    let cfg = FitConfig {
        fields: FieldSet::TITLE,
        alpha_update: AlphaUpdate::Learned,
        max_iters: 8,
        ..Default::default()
    };
    let (params, trace) = em_fit(&corpus, &cfg).unwrap();
    assert!(!trace.is_empty());
    assert!(params.alpha.iter().all(|&a| a > 0.0));
}
