//! Property tests for the numeric substrate and the inference
//! invariants: simplex preservation, KL non-negativity, scale
//! invariance, determinism, and the mask contract on posteriors.

use proptest::prelude::*;

use bayesum::bayesum::{
    block_params, infer_sentence, round_robin_relevance, sample_corpus, AllowedMask, Engine,
    FitConfig, SampleShape,
};
use bayesum::corpus::{tokenize, RelevanceMatrix, TokenizeOptions, Vocab};
use bayesum::langmodel::{kl_divergence, CountVector, UnigramModel};
use bayesum::rankers::{rank_jaccard, rank_kl, rank_position, rank_random, SentenceTokens};

fn arbitrary_distribution(len: usize) -> impl Strategy<Value = UnigramModel> {
    prop::collection::vec(1e-6..1.0f64, len).prop_map(|weights| {
        let total: f64 = weights.iter().sum();
        UnigramModel::new(weights.into_iter().map(|w| w / total).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kl_is_non_negative_on_smoothed_pairs(
        p in arbitrary_distribution(12),
        q in arbitrary_distribution(12),
        lambda in 0.01..0.99f64,
    ) {
        let bg = UnigramModel::uniform(12);
        let ps = p.smooth(&bg, lambda).unwrap();
        let qs = q.smooth(&bg, lambda).unwrap();
        let kl = kl_divergence(&ps, &qs).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert_eq!(kl_divergence(&ps, &ps).unwrap(), 0.0);
    }

    #[test]
    fn smooth_preserves_simplex_and_is_affine(
        p in arbitrary_distribution(8),
        bg in arbitrary_distribution(8),
        lambda in 0.01..0.99f64,
    ) {
        let s = p.smooth(&bg, lambda).unwrap();
        let sum: f64 = s.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        for i in 0..8u32 {
            let expected = (1.0 - lambda) * p.prob(i) + lambda * bg.prob(i);
            prop_assert!((s.prob(i) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn mle_then_smooth_is_scale_invariant(
        counts in prop::collection::vec(0.0..50.0f64, 10),
        scale in 0.01..100.0f64,
        lambda in 0.01..0.99f64,
    ) {
        prop_assume!(counts.iter().sum::<f64>() > 0.0);
        let bg = UnigramModel::uniform(10);
        let mut a = CountVector::new();
        let mut b = CountVector::new();
        for (i, &c) in counts.iter().enumerate() {
            a.add(i as u32, c);
            b.add(i as u32, c * scale);
        }
        let ma = UnigramModel::mle(&a, 10).unwrap().smooth(&bg, lambda).unwrap();
        let mb = UnigramModel::mle(&b, 10).unwrap().smooth(&bg, lambda).unwrap();
        for i in 0..10u32 {
            prop_assert!((ma.prob(i) - mb.prob(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn tokenization_is_deterministic(text in ".{0,200}", remove in any::<bool>()) {
        let opts = TokenizeOptions { stem: true, remove_stopwords: remove };
        prop_assert_eq!(tokenize(&text, &opts), tokenize(&text, &opts));
    }

    #[test]
    fn vocab_ids_round_trip(tokens in prop::collection::btree_set("[a-z]{1,8}", 1..40)) {
        let tokens: Vec<String> = tokens.into_iter().collect();
        let vocab = Vocab::from_tokens(tokens.clone(), false);
        for (i, t) in tokens.iter().enumerate() {
            prop_assert_eq!(vocab.id(t), Some(i as u32));
            prop_assert_eq!(vocab.token(i as u32), t.as_str());
        }
    }

    #[test]
    fn relevance_matrix_lists_sorted_and_consistent(
        pairs in prop::collection::vec((0u32..12, 0u32..5), 0..40)
    ) {
        let m = RelevanceMatrix::from_pairs(&pairs, 12, 5);
        for q in 0..5u32 {
            let docs = m.relevant_docs(q);
            prop_assert!(docs.windows(2).all(|w| w[0] < w[1]));
            for d in 0..12u32 {
                let expected = pairs.iter().any(|&(pd, pq)| pd == d && pq == q);
                prop_assert_eq!(m.is_relevant(d, q), expected);
            }
        }
    }

    #[test]
    fn rankings_are_sorted_unique_and_deterministic(
        token_lists in prop::collection::vec(prop::collection::vec(0u32..6, 0..5), 1..12),
        seed in any::<u64>(),
    ) {
        let sentences: Vec<SentenceTokens> = token_lists
            .iter()
            .enumerate()
            .map(|(i, tokens)| SentenceTokens {
                doc_id: format!("d{}", i % 3),
                sentence: i,
                position: (i / 3) as u32,
                tokens: tokens.clone(),
            })
            .collect();
        let bg = UnigramModel::uniform(6);
        let rankings = vec![
            rank_random("q", &sentences, seed).unwrap(),
            rank_position("q", &sentences).unwrap(),
            rank_jaccard("q", &[0, 1], &sentences).unwrap(),
            rank_kl("q", &[0, 1], &sentences, &bg, 0.1).unwrap(),
        ];
        for r in rankings {
            let entries = r.entries();
            prop_assert_eq!(entries.len(), sentences.len());
            for w in entries.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
                if w[0].score == w[1].score {
                    prop_assert!(
                        (&w[0].doc_id, w[0].sentence) < (&w[1].doc_id, w[1].sentence)
                    );
                }
            }
        }
    }
}

proptest! {
    // Inference is costlier; fewer cases.
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn posteriors_respect_mask_and_simplex(
        seed in any::<u64>(),
        relevant in any::<bool>(),
        n_words in 1usize..10,
    ) {
        let params = block_params(1, 2, 16, 3, 3, 0.9, (2.0, 1.0)).unwrap();
        // Doc 0 optionally relevant to the query; doc 1 never.
        let rel = if relevant { vec![vec![0u32]] } else { vec![vec![]] };
        let shape = SampleShape {
            num_queries: 1,
            num_docs: 2,
            sentences_per_doc: 1,
            words_per_sentence: n_words,
            query_words: 2,
        };
        let (corpus, _) = sample_corpus(&params, shape, &rel, seed).unwrap();
        for k in 0..2u32 {
            let mask = AllowedMask::for_doc(&params.index, k, corpus.relevance());
            let tokens = &corpus.doc(k).sentences[0].tokens;
            for engine in [Engine::Variational, Engine::Ep] {
                let cfg = FitConfig { engine, ..Default::default() };
                let post = infer_sentence(tokens, &mask, &params, &cfg).unwrap();
                for row in &post.responsibilities {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    prop_assert!(row.iter().all(|&r| r >= 0.0));
                }
                prop_assert!(post.gamma.iter().all(|&g| g > 0.0));
                let total = params.index.total();
                let full = post.pi_mean_full(total);
                prop_assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for c in 0..total as u32 {
                    if !mask.contains(c) {
                        prop_assert_eq!(full[c as usize], 0.0);
                        for w in 0..tokens.len() {
                            prop_assert_eq!(
                                post.responsibilities_full(w, total)[c as usize],
                                0.0
                            );
                        }
                    }
                }
                // Same inputs, same posterior.
                let again = infer_sentence(tokens, &mask, &params, &cfg).unwrap();
                prop_assert_eq!(&post.gamma, &again.gamma);
            }
        }
    }

    #[test]
    fn round_robin_covers_all_docs(j in 1usize..5, k in 1usize..20) {
        let rel = round_robin_relevance(j, k);
        let mut seen = vec![false; k];
        for docs in &rel {
            for &d in docs {
                seen[d as usize] = true;
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }
}
