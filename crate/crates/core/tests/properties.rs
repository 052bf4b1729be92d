use proptest::prelude::*;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semdiff_core::datagen::{build_documents, inversion_count, max_inversions, permute_document, InversionSampler};
use semdiff_core::document::{
    aggregate_subword_to_word, validate_pair, LabeledPair, Side, Source, Token, TokenizedDocument, Word,
};
use semdiff_core::encoders::{CrossEntropyTable, EmbeddingMatrix, Entropies};
use semdiff_core::eval::{evaluate, spearman};
use semdiff_core::io::parse_jsonl;
use semdiff_core::metrics::{diff_align, diff_del, diff_del_ngram, diff_mask, npmi, EncodedDoc};

fn rows(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    prop::collection::vec(prop::collection::vec(-1.0f32..1.0, d), n).prop_filter("non-degenerate rows", |rs| {
        rs.iter().all(|r| r.iter().any(|x| x.abs() > 1e-3))
    })
}

fn encoded(rows: &[Vec<f32>]) -> EncodedDoc {
    EncodedDoc::plain(EmbeddingMatrix::from_rows(0, rows).unwrap())
}

/// A document whose words are split into 1-3 tokens each.
fn subword_doc() -> impl Strategy<Value = TokenizedDocument> {
    prop::collection::vec(1usize..=3, 1..12).prop_map(|pieces| {
        let words: Vec<Word> = (0..pieces.len())
            .map(|w| Word::new(format!("w{w}"), Some(0.5)))
            .collect();
        let tokens = pieces
            .iter()
            .enumerate()
            .flat_map(|(w, &n)| {
                (0..n).map(move |p| Token {
                    surface: format!("w{w}#{p}"),
                    word_index: w,
                    is_punctuation: false,
                    is_special: false,
                })
            })
            .collect();
        TokenizedDocument {
            language: "en".into(),
            words,
            tokens,
            sentences: Vec::new(),
        }
        .with_delimiters("<s>", "</s>")
    })
}

fn text_pair(id: usize, a: &str, b: &str) -> LabeledPair {
    LabeledPair {
        pair_id: format!("p{id}"),
        source: Source::Ists,
        inversions: 0,
        side_a: TokenizedDocument::from_text("en", a, Some(0.2)),
        side_b: TokenizedDocument::from_text("en", b, Some(0.8)),
    }
}

proptest! {
    #[test]
    fn aggregation_is_idempotent_on_word_constant_scores(doc in subword_doc(), seed in any::<u64>()) {
        let per_word: Vec<f64> = (0..doc.words.len()).map(|w| ((seed >> (w % 60)) & 0xff) as f64 / 255.0).collect();
        let tokens: Vec<f64> = doc.tokens.iter().map(|t| if t.is_special { 9.0 } else { per_word[t.word_index] }).collect();
        let words = aggregate_subword_to_word(&tokens, &doc).unwrap();
        for (x, y) in words.iter().zip(&per_word) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn aggregation_commutes_with_affine_maps(
        doc in subword_doc(),
        scale in -3.0f64..3.0,
        shift in -2.0f64..2.0,
        raw in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let tokens: Vec<f64> = raw.iter().cycle().take(doc.token_count()).copied().collect();
        let mapped: Vec<f64> = tokens.iter().map(|x| scale * x + shift).collect();
        let before = aggregate_subword_to_word(&tokens, &doc).unwrap();
        let after = aggregate_subword_to_word(&mapped, &doc).unwrap();
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((scale * x + shift - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn del_ignores_the_scale_of_b(a in rows(2..10, 8), b in rows(1..10, 8), c in 0.1f32..10.0) {
        let scaled: Vec<Vec<f32>> = b.iter().map(|r| r.iter().map(|x| x * c).collect()).collect();
        let x = diff_del(&encoded(&a), &encoded(&b)).unwrap().value;
        let y = diff_del(&encoded(&a), &encoded(&scaled)).unwrap().value;
        for (p, q) in x.iter().zip(&y) {
            prop_assert!((p - q).abs() <= 1e-6);
        }
    }

    #[test]
    fn del_matches_unigram_ngram(a in rows(1..10, 6), b in rows(1..10, 6)) {
        let x = diff_del(&encoded(&a), &encoded(&b)).unwrap().value;
        let y = diff_del_ngram(&encoded(&a), &encoded(&b), 1).unwrap().value;
        prop_assert_eq!(x, y);
    }

    #[test]
    fn del_is_within_its_range(a in rows(1..10, 6), b in rows(1..10, 6), n in 1usize..=3) {
        for s in diff_del_ngram(&encoded(&a), &encoded(&b), n).unwrap().value {
            prop_assert!((-0.5 - 1e-12..=1.5 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn align_ignores_the_order_of_b(a in rows(1..8, 6), b in rows(1..8, 6), seed in any::<u64>()) {
        let mut shuffled = b.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let x = diff_align(&encoded(&a), &encoded(&b)).unwrap().value;
        let y = diff_align(&encoded(&a), &encoded(&shuffled)).unwrap().value;
        prop_assert_eq!(x, y);
    }

    #[test]
    fn align_is_within_its_range(a in rows(1..8, 5), b in rows(1..8, 5)) {
        for s in diff_align(&encoded(&a), &encoded(&b)).unwrap().value {
            prop_assert!((0.0..=2.0 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn npmi_is_bounded(h_alone in 0.0f64..20.0, h_with in 0.0f64..20.0) {
        let v = npmi(h_alone, h_with);
        prop_assert!((-1.0..=1.0).contains(&v));
        if h_with <= h_alone {
            prop_assert!(v >= 0.0);
        }
    }

    #[test]
    fn mask_scores_are_in_unit_interval(entropies in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..8)) {
        let words: Vec<String> = (0..entropies.len()).map(|i| format!("t{i}")).collect();
        let pair = text_pair(0, &words.join(" "), "other");
        let mut table = CrossEntropyTable::new();
        for (i, (h_alone, h_with_context)) in entropies.iter().enumerate() {
            table.insert("p0", Side::A, i, Entropies { h_alone: *h_alone, h_with_context: *h_with_context }).unwrap();
        }
        for s in diff_mask(&table, &pair, Side::A).unwrap() {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn spearman_ignores_increasing_transforms(
        pairs in prop::collection::vec((0i32..8, -20i32..20), 3..40),
    ) {
        let gold: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let pred: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        prop_assume!(gold.iter().any(|g| *g != gold[0]) && pred.iter().any(|p| *p != pred[0]));
        let cubed: Vec<f64> = pred.iter().map(|x| x * x * x + 2.0 * x).collect();
        let shifted: Vec<f64> = gold.iter().map(|x| 3.0 * x - 7.0).collect();
        let base = spearman(&gold, &pred).unwrap();
        prop_assert_eq!(base.to_bits(), spearman(&shifted, &cubed).unwrap().to_bits());
        prop_assert!((-1.0..=1.0).contains(&base));
    }

    #[test]
    fn evaluation_ignores_pair_order(n in 3usize..10, seed in any::<u64>()) {
        let pairs: Vec<LabeledPair> = (0..n)
            .map(|i| {
                let mut p = text_pair(i, &format!("a{i} b{i} c ."), &format!("d{i} e"));
                p.side_a.words[0].gold_label = Some((i % 3) as f64 / 2.0);
                p
            })
            .collect();
        let scores: Vec<_> = pairs
            .iter()
            .flat_map(|p| {
                [Side::A, Side::B].map(|side| semdiff_core::document::ScoreVector {
                    pair_id: p.pair_id.clone(),
                    side,
                    token_scores: vec![],
                    word_scores: (0..p.side(side).words.len()).map(|w| ((w * 7 + p.pair_id.len()) % 5) as f64).collect(),
                })
            })
            .collect();
        let mut shuffled = pairs.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let x = evaluate(&pairs, &scores, "v").unwrap();
        let y = evaluate(&shuffled, &scores, "v").unwrap();
        prop_assert_eq!(x.n_words_scored, y.n_words_scored);
        prop_assert!((x.spearman - y.spearman).abs() <= 1e-12);
    }

    #[test]
    fn sampler_hits_the_requested_inversions(k in 1usize..=12, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let i = (frac * max_inversions(k) as f64).round() as usize;
        let perm = InversionSampler::new(k).unwrap().sample(i, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(inversion_count(&perm), i);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..k).collect::<Vec<_>>());
    }

    #[test]
    fn documents_keep_every_label(n in 1usize..30, k in 1usize..6, seed in any::<u64>()) {
        let pairs: Vec<LabeledPair> = (0..n).map(|i| text_pair(i, &format!("x{i} y ,"), &format!("z{i}"))).collect();
        let docs = build_documents(&pairs, k, seed).unwrap().value;
        prop_assert_eq!(docs.len(), n / k);
        for d in &docs {
            prop_assert!(validate_pair(d).is_empty(), "{:?}", validate_pair(d));
            prop_assert_eq!(d.side_a.sentence_count(), k);
            let permuted = permute_document(d, max_inversions(k) / 2, seed).unwrap();
            prop_assert!(validate_pair(&permuted).is_empty());
            prop_assert_eq!(&permuted.side_a, &d.side_a);
            let mut before: Vec<String> = d.side_b.words.iter().map(|w| format!("{}{:?}", w.surface, w.gold_label)).collect();
            let mut after: Vec<String> = permuted.side_b.words.iter().map(|w| format!("{}{:?}", w.surface, w.gold_label)).collect();
            before.sort();
            after.sort();
            prop_assert_eq!(before, after);
        }
    }

    #[test]
    fn datasets_survive_json_lines(n in 1usize..10, k in 1usize..4, seed in any::<u64>()) {
        let pairs: Vec<LabeledPair> = (0..n).map(|i| text_pair(i, &format!("a{i} \"q\" é"), "b ! c")).collect();
        let docs = build_documents(&pairs, k, seed).unwrap().value;
        let text: String = docs.iter().map(|d| serde_json::to_string(d).unwrap() + "\n").collect();
        let back: Vec<LabeledPair> = parse_jsonl(text.as_bytes(), "mem").unwrap();
        prop_assert_eq!(back, docs);
    }
}
