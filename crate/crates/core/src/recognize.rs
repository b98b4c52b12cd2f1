//! Entity recognizers. Each recognizer turns a tokenized document into labeled
//! chunks; overlaps between recognizers are left for the merge stage.

use std::collections::HashSet;
use std::fmt;

use regex::Regex;
use thiserror::Error;

use crate::model::{Document, EntityChunk, EntityLabel, Source, Span};
use crate::preprocess::{tokenize, SentenceSpan, Token};
use crate::text::normalize;

pub const DEFAULT_MAX_ENTRY_TOKENS: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecognizeError {
    #[error("gazetteer has no entries")]
    EmptyGazetteer,
    #[error("line {line}: entry `{entry}` spans {tokens} tokens, more than the limit of {max}")]
    EntryTooLong {
        line: usize,
        entry: String,
        tokens: usize,
        max: usize,
    },
    #[error("line {line}: {message}")]
    BadHeader { line: usize, message: String },
    #[error("invalid pattern for recognizer `{id}`: {message}")]
    BadPattern { id: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognizerOutput {
    pub recognizer_id: String,
    pub chunks: Vec<EntityChunk>,
}

/// Contract every recognizer honours: chunks align to token boundaries,
/// carry `source = recognizer id`, and are deterministic for fixed inputs.
pub trait Recognizer: Send + Sync + fmt::Debug {
    fn id(&self) -> &str;
    fn recognize(&self, doc: &Document, tokens: &[Token]) -> RecognizerOutput;
}

/// Dictionary of surface forms for one label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gazetteer {
    pub label: EntityLabel,
    pub case_sensitive: bool,
    pub max_entry_tokens: usize,
    entries: HashSet<String>,
    // normalized first token of every entry, for a cheap pre-filter
    heads: HashSet<String>,
}

fn entry_tokens(entry: &str) -> Vec<String> {
    let n = entry.chars().count();
    if n == 0 {
        return Vec::new();
    }
    let s = SentenceSpan {
        span: Span::new(0, n),
        index: 0,
    };
    tokenize(&s, entry).into_iter().map(|t| t.text).collect()
}

impl Gazetteer {
    pub fn new<I, S>(
        label: EntityLabel,
        entries: I,
        case_sensitive: bool,
        max_entry_tokens: usize,
    ) -> Result<Self, RecognizeError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut g = Gazetteer {
            label,
            case_sensitive,
            max_entry_tokens,
            entries: HashSet::new(),
            heads: HashSet::new(),
        };
        for (i, e) in entries.into_iter().enumerate() {
            g.insert(e.as_ref(), i + 1)?;
        }
        if g.entries.is_empty() {
            return Err(RecognizeError::EmptyGazetteer);
        }
        Ok(g)
    }

    fn insert(&mut self, entry: &str, line: usize) -> Result<(), RecognizeError> {
        let toks = entry_tokens(entry);
        if toks.is_empty() {
            return Ok(());
        }
        if toks.len() > self.max_entry_tokens {
            return Err(RecognizeError::EntryTooLong {
                line,
                entry: entry.to_string(),
                tokens: toks.len(),
                max: self.max_entry_tokens,
            });
        }
        self.heads.insert(normalize(&toks[0], self.case_sensitive));
        self.entries.insert(normalize(entry, self.case_sensitive));
        Ok(())
    }

    /// Parse a gazetteer file. The first non-comment line is the header
    /// `label=<Label>;case_sensitive=<bool>[;max_tokens=<n>]`; each further
    /// line is one entry. Tab-separated rows contribute their first column,
    /// so surrogate vocabulary files double as gazetteers.
    pub fn parse(source: &str) -> Result<Self, RecognizeError> {
        let mut lines = source
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hline, header) = lines.next().ok_or(RecognizeError::BadHeader {
            line: 1,
            message: "missing header".into(),
        })?;
        let header = parse_header(header, hline)?;
        let label = header.label.ok_or(RecognizeError::BadHeader {
            line: hline,
            message: "header lacks `label=`".into(),
        })?;
        let mut g = Gazetteer {
            label,
            case_sensitive: header.case_sensitive.unwrap_or(false),
            max_entry_tokens: header.max_tokens.unwrap_or(DEFAULT_MAX_ENTRY_TOKENS),
            entries: HashSet::new(),
            heads: HashSet::new(),
        };
        for (line, l) in lines {
            let entry = l.split('\t').next().unwrap_or("").trim();
            g.insert(entry, line)?;
        }
        if g.entries.is_empty() {
            return Err(RecognizeError::EmptyGazetteer);
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.entries.contains(&normalize(surface, self.case_sensitive))
    }

    /// Number of tokens in the longest entry matching at token `i`, staying
    /// inside the sentence of token `i`.
    pub fn longest_match_at(&self, doc: &Document, tokens: &[Token], i: usize) -> Option<usize> {
        if !self.heads.contains(&normalize(&tokens[i].text, self.case_sensitive)) {
            return None;
        }
        let sentence = tokens[i].sentence_index;
        let mut limit = 0;
        while limit < self.max_entry_tokens && i + limit < tokens.len() && tokens[i + limit].sentence_index == sentence
        {
            limit += 1;
        }
        (1..=limit).rev().find(|&w| {
            let span = Span::new(tokens[i].span.start, tokens[i + w - 1].span.end);
            self.entries.contains(&normalize(doc.slice(span), self.case_sensitive))
        })
    }
}

#[derive(Debug, Default)]
pub(crate) struct Header {
    pub label: Option<EntityLabel>,
    pub case_sensitive: Option<bool>,
    pub max_tokens: Option<usize>,
    pub component: Option<String>,
}

pub(crate) fn parse_header(header: &str, line: usize) -> Result<Header, RecognizeError> {
    let bad = |message: String| RecognizeError::BadHeader { line, message };
    let mut h = Header::default();
    for field in header.split(';').map(str::trim).filter(|f| !f.is_empty()) {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, found `{field}`")))?;
        let v = v.trim();
        match k.trim() {
            "label" => h.label = Some(v.parse().map_err(|e| bad(format!("{e}")))?),
            "case_sensitive" => h.case_sensitive = Some(v.parse().map_err(|_| bad(format!("invalid boolean `{v}`")))?),
            "max_tokens" => h.max_tokens = Some(v.parse().map_err(|_| bad(format!("invalid integer `{v}`")))?),
            "component" => h.component = Some(v.to_string()),
            other => return Err(bad(format!("unknown header key `{other}`"))),
        }
    }
    Ok(h)
}

/// Greedy leftmost-longest scan. Emitted chunks never overlap each other.
pub fn gazetteer_scan(doc: &Document, tokens: &[Token], gazetteer: &Gazetteer, source: &Source) -> Vec<EntityChunk> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        match gazetteer.longest_match_at(doc, tokens, i) {
            Some(w) => {
                let span = Span::new(tokens[i].span.start, tokens[i + w - 1].span.end);
                out.push(EntityChunk::from_doc(doc, span, gazetteer.label, source.clone()));
                i += w;
            }
            None => i += 1,
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GazetteerRecognizer {
    id: String,
    pub gazetteer: Gazetteer,
}

impl GazetteerRecognizer {
    pub fn new(id: impl Into<String>, gazetteer: Gazetteer) -> Self {
        GazetteerRecognizer {
            id: id.into(),
            gazetteer,
        }
    }
}

impl Recognizer for GazetteerRecognizer {
    fn id(&self) -> &str {
        &self.id
    }

    fn recognize(&self, doc: &Document, tokens: &[Token]) -> RecognizerOutput {
        RecognizerOutput {
            recognizer_id: self.id.clone(),
            chunks: gazetteer_scan(doc, tokens, &self.gazetteer, &Source::recognizer(&self.id)),
        }
    }
}

/// Person names from a first-name and a surname list: `First Last`, `First`,
/// or a bare `Last`.
#[derive(Debug, Clone)]
pub struct PersonNameRecognizer {
    id: String,
    pub label: EntityLabel,
    pub first: Gazetteer,
    pub last: Gazetteer,
}

impl PersonNameRecognizer {
    pub fn new(id: impl Into<String>, label: EntityLabel, first: Gazetteer, last: Gazetteer) -> Self {
        PersonNameRecognizer {
            id: id.into(),
            label,
            first,
            last,
        }
    }
}

/// Tokens `a` and `b` are separated by spaces only, on one line.
fn joined_by_space(doc: &Document, a: &Token, b: &Token) -> bool {
    if a.sentence_index != b.sentence_index || a.span.end >= b.span.start {
        return false;
    }
    let gap = doc.slice(Span::new(a.span.end, b.span.start));
    gap.chars().all(|c| c == ' ' || c == '\t')
}

impl Recognizer for PersonNameRecognizer {
    fn id(&self) -> &str {
        &self.id
    }

    fn recognize(&self, doc: &Document, tokens: &[Token]) -> RecognizerOutput {
        let source = Source::recognizer(&self.id);
        let mut chunks = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let consumed = if let Some(f) = self.first.longest_match_at(doc, tokens, i) {
                let j = i + f;
                match tokens.get(j) {
                    Some(next) if joined_by_space(doc, &tokens[j - 1], next) => {
                        f + self.last.longest_match_at(doc, tokens, j).unwrap_or(0)
                    }
                    _ => f,
                }
            } else {
                self.last.longest_match_at(doc, tokens, i).unwrap_or(0)
            };
            if consumed == 0 {
                i += 1;
                continue;
            }
            let span = Span::new(tokens[i].span.start, tokens[i + consumed - 1].span.end);
            chunks.push(EntityChunk::from_doc(doc, span, self.label, source.clone()));
            i += consumed;
        }
        RecognizerOutput {
            recognizer_id: self.id.clone(),
            chunks,
        }
    }
}

/// Plain regular-expression recognizer. Matches that do not fall on token
/// boundaries are dropped.
#[derive(Debug, Clone)]
pub struct PatternRecognizer {
    id: String,
    pub label: EntityLabel,
    pattern: Regex,
    pub confidence: f64,
}

impl PatternRecognizer {
    pub fn new(
        id: impl Into<String>,
        label: EntityLabel,
        pattern: &str,
        confidence: f64,
    ) -> Result<Self, RecognizeError> {
        let id = id.into();
        let pattern = Regex::new(pattern).map_err(|e| RecognizeError::BadPattern {
            id: id.clone(),
            message: e.to_string(),
        })?;
        Ok(PatternRecognizer {
            id,
            label,
            pattern,
            confidence,
        })
    }

    pub fn pattern(&self) -> &str {
        self.pattern.as_str()
    }
}

impl Recognizer for PatternRecognizer {
    fn id(&self) -> &str {
        &self.id
    }

    fn recognize(&self, doc: &Document, tokens: &[Token]) -> RecognizerOutput {
        let starts: HashSet<usize> = tokens.iter().map(|t| t.span.start).collect();
        let ends: HashSet<usize> = tokens.iter().map(|t| t.span.end).collect();
        let source = Source::recognizer(&self.id);
        let chunks = self
            .pattern
            .find_iter(&doc.text)
            .filter(|m| !m.is_empty())
            .map(|m| Span::new(doc.char_offset(m.start()), doc.char_offset(m.end())))
            .filter(|s| starts.contains(&s.start) && ends.contains(&s.end))
            .map(|s| EntityChunk::from_doc(doc, s, self.label, source.clone()).with_confidence(self.confidence))
            .collect();
        RecognizerOutput {
            recognizer_id: self.id.clone(),
            chunks,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{detect_sentences, tokenize_all, SentenceConfig};

    fn prep(text: &str) -> (Document, Vec<Token>) {
        let doc = Document::new("t", None, text, "en").unwrap();
        let cfg = SentenceConfig::with_abbreviations(["Dr."]);
        let tokens = tokenize_all(text, &detect_sentences(text, &cfg));
        (doc, tokens)
    }

    fn texts(chunks: &[EntityChunk]) -> Vec<(&str, EntityLabel)> {
        chunks.iter().map(|c| (c.text.as_str(), c.label)).collect()
    }

    #[test]
    fn no_hits_no_chunks() {
        let (doc, tokens) = prep("no phi here");
        let g = Gazetteer::new(EntityLabel::Patient, ["John"], true, 3).unwrap();
        assert!(gazetteer_scan(&doc, &tokens, &g, &Source::recognizer("names")).is_empty());
    }

    #[test]
    fn jane_and_memphis() {
        let (doc, tokens) = prep("Jane is a 48-year-old nurse from Memphis.");
        let names = GazetteerRecognizer::new(
            "first",
            Gazetteer::new(EntityLabel::Patient, ["Jane"], true, 3).unwrap(),
        );
        let cities = GazetteerRecognizer::new(
            "cities",
            Gazetteer::new(EntityLabel::City, ["Memphis"], true, 3).unwrap(),
        );
        let mut chunks = names.recognize(&doc, &tokens).chunks;
        chunks.extend(cities.recognize(&doc, &tokens).chunks);
        assert_eq!(
            texts(&chunks),
            vec![("Jane", EntityLabel::Patient), ("Memphis", EntityLabel::City)]
        );
        assert_eq!(chunks[1].span, Span::new(33, 40));
        assert_eq!(chunks[1].source, Source::recognizer("cities"));
    }

    #[test]
    fn longest_match_wins() {
        let (doc, tokens) = prep("Boston Children's Hospital");
        let g = Gazetteer::new(
            EntityLabel::Hospital,
            ["Children's Hospital", "Boston Children's Hospital"],
            false,
            6,
        )
        .unwrap();
        let chunks = gazetteer_scan(&doc, &tokens, &g, &Source::recognizer("h"));
        assert_eq!(
            texts(&chunks),
            vec![("Boston Children's Hospital", EntityLabel::Hospital)]
        );
    }

    #[test]
    fn john_and_hopkins() {
        let (doc, tokens) = prep("John was Diagnosed with Parkinson's by Dr. Hopkins");
        let first = GazetteerRecognizer::new(
            "first",
            Gazetteer::new(EntityLabel::Patient, ["John"], true, 3).unwrap(),
        );
        let last = GazetteerRecognizer::new(
            "last",
            Gazetteer::new(EntityLabel::Doctor, ["Hopkins"], true, 3).unwrap(),
        );
        let mut chunks = first.recognize(&doc, &tokens).chunks;
        chunks.extend(last.recognize(&doc, &tokens).chunks);
        assert_eq!(
            texts(&chunks),
            vec![("John", EntityLabel::Patient), ("Hopkins", EntityLabel::Doctor)]
        );
    }

    #[test]
    fn entry_over_window_rejected_at_load() {
        let err = Gazetteer::new(EntityLabel::Hospital, ["a b c d"], false, 3).unwrap_err();
        assert!(matches!(err, RecognizeError::EntryTooLong { tokens: 4, max: 3, .. }));
        assert!(Gazetteer::new(EntityLabel::Hospital, ["a b c"], false, 3).is_ok());
        assert_eq!(
            Gazetteer::new(EntityLabel::City, Vec::<String>::new(), false, 3).unwrap_err(),
            RecognizeError::EmptyGazetteer
        );
    }

    #[test]
    fn parse_file_with_header() {
        let src = "# cities\nlabel=City;case_sensitive=false;max_tokens=3\nMemphis\t-\ten\nNew  York\n";
        let g = Gazetteer::parse(src).unwrap();
        assert_eq!(g.label, EntityLabel::City);
        assert!(g.contains("memphis"));
        assert!(g.contains("new york"));
        assert!(matches!(
            Gazetteer::parse("Memphis\n"),
            Err(RecognizeError::BadHeader { line: 1, .. })
        ));
        assert!(matches!(
            Gazetteer::parse("label=Planet\nMars\n"),
            Err(RecognizeError::BadHeader { .. })
        ));
    }

    #[test]
    fn person_names_join_first_and_last() {
        let (doc, tokens) = prep("Jane Doe came in. Jane is fine. Mrs. Doe agreed.");
        let r = PersonNameRecognizer::new(
            "names",
            EntityLabel::Patient,
            Gazetteer::new(EntityLabel::Patient, ["Jane"], true, 2).unwrap(),
            Gazetteer::new(EntityLabel::Patient, ["Doe"], true, 2).unwrap(),
        );
        let out = r.recognize(&doc, &tokens);
        let got: Vec<_> = out.chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(got, vec!["Jane Doe", "Jane", "Doe"]);
    }

    #[test]
    fn pattern_recognizer_requires_token_alignment() {
        let (doc, tokens) = prep("call 555-123-4567 or x5551234567");
        let r = PatternRecognizer::new("phone", EntityLabel::Phone, r"\d{3}-?\d{3}-?\d{4}", 0.9).unwrap();
        let out = r.recognize(&doc, &tokens);
        assert_eq!(texts(&out.chunks), vec![("555-123-4567", EntityLabel::Phone)]);
        assert!((out.chunks[0].confidence - 0.9).abs() < 1e-12);
        assert!(PatternRecognizer::new("bad", EntityLabel::Phone, "(", 1.0).is_err());
    }
}
