//! Hand-segmented sentence corpus for the shipped English pack.

use std::fs;
use std::path::PathBuf;

use deid_core::langpack::{bundled_packs_dir, load_pack};
use deid_core::preprocess::detect_sentences;

#[test]
fn english_sentence_golden_corpus() {
    let pack = load_pack(&bundled_packs_dir().join("en")).unwrap();
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/sentences");
    let mut notes: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    notes.sort();
    assert_eq!(notes.len(), 20);
    let mut failures = Vec::new();
    for note in &notes {
        let text = fs::read_to_string(note).unwrap();
        let expected: Vec<String> = fs::read_to_string(note.with_extension("sentences"))
            .unwrap()
            .lines()
            .map(String::from)
            .collect();
        let chars: Vec<char> = text.chars().collect();
        let got: Vec<String> = detect_sentences(&text, &pack.sentences)
            .iter()
            .map(|s| chars[s.span.start..s.span.end].iter().collect())
            .collect();
        if got != expected {
            failures.push(format!("{}: got {got:?}, want {expected:?}", note.display()));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
