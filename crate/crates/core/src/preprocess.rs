//! Sentence boundary detection and offset-preserving tokenization.
//!
//! Sentence detection is a line-aware heuristic tuned for clinical notes:
//! notes are full of headers, vitals and list items that carry no terminal
//! punctuation, so a newline ends a sentence unless the line closed with
//! `.`, `!` or `?` (in which case the punctuation rule decides).

use std::collections::HashSet;

use crate::model::Span;
use crate::text::fold;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSpan {
    pub span: Span,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub span: Span,
    pub text: String,
    pub sentence_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceConfig {
    /// Case-folded abbreviations including their final period, e.g. `dr.`.
    pub abbreviations: HashSet<String>,
    /// Split at a newline when the line lacks terminal punctuation.
    pub split_unpunctuated_lines: bool,
    /// Treat a single capital letter followed by a period as an initial.
    pub initials_are_abbreviations: bool,
}

impl Default for SentenceConfig {
    fn default() -> Self {
        SentenceConfig {
            abbreviations: HashSet::new(),
            split_unpunctuated_lines: true,
            initials_are_abbreviations: true,
        }
    }
}

impl SentenceConfig {
    pub fn with_abbreviations<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        SentenceConfig {
            abbreviations: abbreviations.into_iter().map(|a| fold(a.as_ref())).collect(),
            ..SentenceConfig::default()
        }
    }

    /// Parse an abbreviation list: one entry per line, `#` comments.
    pub fn parse_abbreviations(source: &str) -> HashSet<String> {
        source
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(fold)
            .collect()
    }
}

/// Pluggable sentence segmentation.
pub trait SentenceDetector: Send + Sync {
    fn detect(&self, text: &str) -> Vec<SentenceSpan>;
}

#[derive(Debug, Clone, Default)]
pub struct HeuristicSentenceDetector {
    pub config: SentenceConfig,
}

impl HeuristicSentenceDetector {
    pub fn new(config: SentenceConfig) -> Self {
        HeuristicSentenceDetector { config }
    }
}

impl SentenceDetector for HeuristicSentenceDetector {
    fn detect(&self, text: &str) -> Vec<SentenceSpan> {
        detect_sentences(text, &self.config)
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

pub fn detect_sentences(text: &str, config: &SentenceConfig) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut last_end = 0usize;

    let close = |start: &mut Option<usize>, end: usize, out: &mut Vec<SentenceSpan>| {
        if let Some(s) = start.take() {
            let index = out.len();
            out.push(SentenceSpan {
                span: Span::new(s, end),
                index,
            });
        }
    };

    for (i, &c) in chars.iter().enumerate() {
        if c == '\n' {
            if start.is_none() {
                continue;
            }
            let line_terminated = is_terminal(chars[last_end - 1]);
            if (config.split_unpunctuated_lines && !line_terminated) || next_line_blank(&chars, i + 1) {
                close(&mut start, last_end, &mut out);
            }
            continue;
        }
        if c.is_whitespace() {
            continue;
        }
        if start.is_none() {
            start = Some(i);
        }
        last_end = i + 1;

        if is_terminal(c) && is_boundary_after(&chars, i) && !is_abbreviation(&chars, i, config) {
            close(&mut start, last_end, &mut out);
        }
    }
    close(&mut start, last_end, &mut out);
    out
}

/// Terminal punctuation at `i` is followed by whitespace and then a capital.
fn is_boundary_after(chars: &[char], i: usize) -> bool {
    match chars.get(i + 1) {
        Some(c) if c.is_whitespace() => {}
        _ => return false,
    }
    chars[i + 1..]
        .iter()
        .find(|c| !c.is_whitespace())
        .is_some_and(|c| c.is_uppercase())
}

fn is_abbreviation(chars: &[char], i: usize, config: &SentenceConfig) -> bool {
    if chars[i] != '.' {
        return false;
    }
    let word_start = chars[..i].iter().rposition(|c| c.is_whitespace()).map_or(0, |p| p + 1);
    let word: String = chars[word_start..=i].iter().collect();
    if config.initials_are_abbreviations {
        let mut it = word.chars();
        if let (Some(first), Some('.'), None) = (it.next(), it.next(), it.next()) {
            if first.is_uppercase() {
                return true;
            }
        }
    }
    config.abbreviations.contains(&fold(&word))
}

fn next_line_blank(chars: &[char], from: usize) -> bool {
    for &c in &chars[from.min(chars.len())..] {
        if c == '\n' {
            return true;
        }
        if !c.is_whitespace() {
            return false;
        }
    }
    // trailing whitespace to end of text
    true
}

/// Tokenize one sentence: maximal alphanumeric runs are tokens, each other
/// non-whitespace character is a token of its own.
pub fn tokenize(sentence: &SentenceSpan, text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().enumerate().skip(sentence.span.start);
    let mut run: Option<(usize, String)> = None;
    let end = sentence.span.end;

    let flush = |run: &mut Option<(usize, String)>, pos: usize, tokens: &mut Vec<Token>| {
        if let Some((s, word)) = run.take() {
            tokens.push(Token {
                span: Span::new(s, pos),
                text: word,
                sentence_index: sentence.index,
            });
        }
    };

    for (pos, c) in chars.by_ref() {
        if pos >= end {
            break;
        }
        if c.is_alphanumeric() {
            match run.as_mut() {
                Some((_, word)) => word.push(c),
                None => run = Some((pos, c.to_string())),
            }
            continue;
        }
        flush(&mut run, pos, &mut tokens);
        if !c.is_whitespace() {
            tokens.push(Token {
                span: Span::new(pos, pos + 1),
                text: c.to_string(),
                sentence_index: sentence.index,
            });
        }
    }
    flush(&mut run, end, &mut tokens);
    tokens
}

/// Sentences and tokens for a whole text in one pass over the sentences.
pub fn tokenize_all(text: &str, sentences: &[SentenceSpan]) -> Vec<Token> {
    sentences.iter().flat_map(|s| tokenize(s, text)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentence_texts(text: &str, config: &SentenceConfig) -> Vec<String> {
        detect_sentences(text, config)
            .iter()
            .map(|s| text.chars().skip(s.span.start).take(s.span.len()).collect())
            .collect()
    }

    fn token_texts(text: &str) -> Vec<String> {
        let n = text.chars().count();
        if n == 0 {
            return vec![];
        }
        let s = SentenceSpan {
            span: Span::new(0, n),
            index: 0,
        };
        tokenize(&s, text).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn empty_text_has_no_sentences() {
        assert!(detect_sentences("", &SentenceConfig::default()).is_empty());
        assert!(detect_sentences(" \n\n ", &SentenceConfig::default()).is_empty());
    }

    #[test]
    fn unpunctuated_line_splits_at_newline() {
        let got = sentence_texts("BP 120/80\nPlan: discharge today.", &SentenceConfig::default());
        assert_eq!(got, vec!["BP 120/80", "Plan: discharge today."]);
    }

    #[test]
    fn abbreviation_suppresses_split() {
        let cfg = SentenceConfig::with_abbreviations(["Dr."]);
        let got = sentence_texts("Dr. Hopkins saw John. He was well.", &cfg);
        assert_eq!(got, vec!["Dr. Hopkins saw John.", "He was well."]);
        // without the list "Dr." ends a sentence
        let got = sentence_texts("Dr. Hopkins saw John. He was well.", &SentenceConfig::default());
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn punctuated_line_continues_into_lowercase() {
        let got = sentence_texts("Seen today.\nfollow up in 2 weeks.", &SentenceConfig::default());
        assert_eq!(got, vec!["Seen today.\nfollow up in 2 weeks."]);
        let got = sentence_texts("Seen today.\n\nfollow up.", &SentenceConfig::default());
        assert_eq!(got, vec!["Seen today.", "follow up."]);
    }

    #[test]
    fn tokenizer_examples() {
        assert!(token_texts("").is_empty());
        assert_eq!(token_texts("48-year-old"), vec!["48", "-", "year", "-", "old"]);
        assert_eq!(token_texts("04/12/2022"), vec!["04", "/", "12", "/", "2022"]);
        assert_eq!(token_texts("y.o."), vec!["y", ".", "o", "."]);
        assert_eq!(token_texts("T2DM"), vec!["T2DM"]);
        assert_eq!(token_texts("Parkinson's"), vec!["Parkinson", "'", "s"]);
    }

    #[test]
    fn token_spans_index_the_document() {
        let text = "Hi.  Ünal  is 5yo.";
        let sents = detect_sentences(text, &SentenceConfig::default());
        let tokens = tokenize_all(text, &sents);
        let chars: Vec<char> = text.chars().collect();
        for t in &tokens {
            let s: String = chars[t.span.start..t.span.end].iter().collect();
            assert_eq!(s, t.text);
        }
        assert_eq!(tokens[2].text, "Ünal");
        assert_eq!(tokens[2].sentence_index, 1);
    }
}
