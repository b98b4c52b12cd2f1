//! Structural invariants of tokenization, rules and merging on arbitrary text.

use proptest::prelude::*;

use deid_core::langpack::{bundled_packs_dir, load_pack, LanguagePack};
use deid_core::merge::merge;
use deid_core::model::Document;
use deid_core::preprocess::{detect_sentences, tokenize_all};
use deid_core::rules::apply_rules;
use std::sync::LazyLock;

static EN: LazyLock<LanguagePack> = LazyLock::new(|| load_pack(&bundled_packs_dir().join("en")).unwrap());

/// Note-like text: words, numbers, dates, punctuation, newlines, non-ASCII.
fn note() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[A-Z][a-z]{1,8}",
        "[a-z]{1,8}",
        "[0-9]{1,4}",
        "[0-9]{1,2}/[0-9]{1,2}/[0-9]{2,4}",
        Just("Dr.".to_string()),
        Just("48-year-old".to_string()),
        Just("Jane".to_string()),
        Just("Memphis".to_string()),
        Just("José".to_string()),
        Just("MRN:".to_string()),
        "[.,;:!?()/-]",
        Just("\n".to_string()),
        Just("\n\n".to_string()),
    ];
    proptest::collection::vec((piece, prop_oneof![Just(" "), Just(""), Just("  ")]), 0..40)
        .prop_map(|v| v.into_iter().map(|(p, s)| format!("{p}{s}")).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sentences_are_ordered_trimmed_and_in_bounds(text in note()) {
        let chars: Vec<char> = text.chars().collect();
        let sentences = detect_sentences(&text, &EN.sentences);
        let mut prev = 0;
        for (i, s) in sentences.iter().enumerate() {
            prop_assert_eq!(s.index, i);
            prop_assert!(s.span.start >= prev && s.span.end <= chars.len());
            prop_assert!(!chars[s.span.start].is_whitespace() && !chars[s.span.end - 1].is_whitespace());
            prev = s.span.end;
        }
        // every non-whitespace character lies in some sentence
        for (i, c) in chars.iter().enumerate() {
            if !c.is_whitespace() {
                prop_assert!(sentences.iter().any(|s| s.span.start <= i && i < s.span.end), "char {} {:?} uncovered", i, c);
            }
        }
    }

    #[test]
    fn tokens_partition_non_whitespace(text in note()) {
        let chars: Vec<char> = text.chars().collect();
        let sentences = detect_sentences(&text, &EN.sentences);
        let tokens = tokenize_all(&text, &sentences);
        let mut prev = 0;
        let mut covered = 0;
        for t in &tokens {
            prop_assert!(t.span.start >= prev);
            let surface: String = chars[t.span.start..t.span.end].iter().collect();
            prop_assert_eq!(&surface, &t.text);
            prop_assert!(surface.chars().all(char::is_alphanumeric) || surface.chars().count() == 1);
            prop_assert!(!surface.chars().any(char::is_whitespace));
            covered += t.span.len();
            prev = t.span.end;
        }
        prop_assert_eq!(covered, chars.iter().filter(|c| !c.is_whitespace()).count());
    }

    #[test]
    fn rule_chunks_match_their_text(text in note()) {
        let doc = Document::new("d", None, text, "en").unwrap();
        for c in apply_rules(&doc, &EN.rules) {
            prop_assert!(c.span.end <= doc.char_len());
            prop_assert_eq!(doc.slice(c.span), c.text.as_str());
            prop_assert!((0.0..=1.0).contains(&c.confidence));
        }
    }

    #[test]
    fn merge_is_disjoint_and_idempotent(text in note()) {
        let doc = Document::new("d", None, text, "en").unwrap();
        let detection = deid_core::pipeline::detect(&doc, &EN, deid_core::pipeline::Stages::ALL);
        let winners: Vec<_> = detection.merged.winners().into_iter().cloned().collect();
        for w in winners.windows(2) {
            prop_assert!(w[0].span.end <= w[1].span.start);
        }
        prop_assert!(detection.merged.chunks.iter().all(|c| c.label.is_phi()));
        prop_assert!(detection.merged.suppressors.iter().all(|c| !c.label.is_phi()));
        let again = merge(winners.clone(), &EN.merge_policy);
        prop_assert_eq!(again.winners().into_iter().cloned().collect::<Vec<_>>(), winners);
        prop_assert!(again.discarded.is_empty());
    }
}
