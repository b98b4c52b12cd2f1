//! Chunk merger: resolves overlapping detections from all recognizers and
//! rules into one non-overlapping set, using a (source, label) priority table.
//!
//! Chunks are ranked by priority, then by the configured tie-break criteria,
//! then by a fixed fallback (end, label, source id) so the ranking is total.
//! The merged set is built greedily in rank order, accepting every chunk that
//! overlaps nothing already accepted; losers are dropped whole, never
//! trimmed. Non-PHI winners (e.g. a disease mention) suppress the PHI chunks
//! they overlap and are then reported separately.
//!
//! Policy file format:
//!
//! ```text
//! default 10
//! priority rule * 20
//! priority diseases Disease 100
//! tiebreak longer-span,higher-confidence,earlier-start,lexicographic-source
//! ```
//!
//! A source class is `*`, `rule`, `recognizer`, `rule:<id>`,
//! `recognizer:<id>` or a bare id; the label is a label name or `*`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{EntityChunk, EntityLabel, Source, SourceKind};
use crate::recognize::RecognizerOutput;

/// Largest instance the exhaustive resolver accepts.
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MergeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("policy has no `default <int>` line")]
    MissingDefault,
    #[error("brute-force resolver accepts at most {BRUTE_FORCE_LIMIT} chunks, got {0}")]
    TooManyChunks(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TieBreak {
    LongerSpan,
    HigherConfidence,
    EarlierStart,
    LexicographicSource,
}

impl TieBreak {
    pub const DEFAULT_ORDER: [TieBreak; 4] = [
        TieBreak::LongerSpan,
        TieBreak::HigherConfidence,
        TieBreak::EarlierStart,
        TieBreak::LexicographicSource,
    ];

    fn compare(self, a: &EntityChunk, b: &EntityChunk) -> Ordering {
        match self {
            TieBreak::LongerSpan => b.span.len().cmp(&a.span.len()),
            TieBreak::HigherConfidence => b.confidence.total_cmp(&a.confidence),
            TieBreak::EarlierStart => a.span.start.cmp(&b.span.start),
            TieBreak::LexicographicSource => a.source.id.cmp(&b.source.id),
        }
    }
}

impl FromStr for TieBreak {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "longer-span" => Ok(TieBreak::LongerSpan),
            "higher-confidence" => Ok(TieBreak::HigherConfidence),
            "earlier-start" => Ok(TieBreak::EarlierStart),
            "lexicographic-source" => Ok(TieBreak::LexicographicSource),
            other => Err(format!("unknown tie-break criterion `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceClass {
    Any,
    Kind(SourceKind),
    Exact(SourceKind, String),
    Id(String),
}

impl SourceClass {
    fn parse(s: &str) -> SourceClass {
        match s {
            "*" => SourceClass::Any,
            "rule" => SourceClass::Kind(SourceKind::Rule),
            "recognizer" => SourceClass::Kind(SourceKind::Recognizer),
            _ => match s.split_once(':') {
                Some(("rule", id)) => SourceClass::Exact(SourceKind::Rule, id.to_string()),
                Some(("recognizer", id)) => SourceClass::Exact(SourceKind::Recognizer, id.to_string()),
                _ => SourceClass::Id(s.to_string()),
            },
        }
    }

    /// Higher is more specific; `None` when the class does not apply.
    fn specificity(&self, source: &Source) -> Option<u8> {
        match self {
            SourceClass::Exact(kind, id) if *kind == source.kind && *id == source.id => Some(3),
            SourceClass::Id(id) if *id == source.id => Some(3),
            SourceClass::Kind(kind) if *kind == source.kind => Some(2),
            SourceClass::Any => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergePolicy {
    entries: Vec<(SourceClass, Option<EntityLabel>, i64)>,
    pub default_priority: i64,
    pub tie_break: Vec<TieBreak>,
}

impl Default for MergePolicy {
    fn default() -> Self {
        MergePolicy::new(0)
    }
}

impl MergePolicy {
    pub fn new(default_priority: i64) -> Self {
        MergePolicy {
            entries: Vec::new(),
            default_priority,
            tie_break: TieBreak::DEFAULT_ORDER.to_vec(),
        }
    }

    /// Add a priority entry; `label = None` matches every label.
    pub fn with_priority(mut self, class: &str, label: Option<EntityLabel>, priority: i64) -> Self {
        self.set_priority(SourceClass::parse(class), label, priority);
        self
    }

    pub fn with_tie_break(mut self, order: Vec<TieBreak>) -> Self {
        self.tie_break = order;
        self
    }

    fn set_priority(&mut self, class: SourceClass, label: Option<EntityLabel>, priority: i64) {
        match self.entries.iter_mut().find(|(c, l, _)| *c == class && *l == label) {
            Some(entry) => entry.2 = priority,
            None => self.entries.push((class, label, priority)),
        }
    }

    /// Priority of a (source, label) pair: the most specific matching entry,
    /// where source specificity outranks label specificity.
    pub fn priority(&self, source: &Source, label: EntityLabel) -> i64 {
        self.entries
            .iter()
            .filter_map(|(class, l, p)| {
                let s = class.specificity(source)?;
                match l {
                    Some(l) if *l == label => Some(((s, 1u8), *p)),
                    Some(_) => None,
                    None => Some(((s, 0u8), *p)),
                }
            })
            .max_by_key(|(spec, _)| *spec)
            .map_or(self.default_priority, |(_, p)| p)
    }

    /// Total ranking: `Less` means `a` is preferred over `b`.
    pub fn rank(&self, a: &EntityChunk, b: &EntityChunk) -> Ordering {
        self.priority(&b.source, b.label)
            .cmp(&self.priority(&a.source, a.label))
            .then_with(|| {
                self.tie_break
                    .iter()
                    .map(|t| t.compare(a, b))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
            .then_with(|| a.span.end.cmp(&b.span.end))
            .then_with(|| a.label.cmp(&b.label))
            .then_with(|| a.source.cmp(&b.source))
    }

    pub fn parse(source: &str) -> Result<Self, MergeError> {
        let mut policy = MergePolicy::new(0);
        let mut default = None;
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let err = |message: String| MergeError::Parse { line, message };
            let parts: Vec<&str> = text.split_whitespace().collect();
            match parts.as_slice() {
                ["default", n] => default = Some(n.parse().map_err(|_| err(format!("invalid integer `{n}`")))?),
                ["priority", class, label, n] => {
                    let label = match *label {
                        "*" => None,
                        l => Some(l.parse::<EntityLabel>().map_err(|e| err(e.to_string()))?),
                    };
                    let n = n.parse().map_err(|_| err(format!("invalid integer `{n}`")))?;
                    policy.set_priority(SourceClass::parse(class), label, n);
                }
                ["tiebreak", order] => {
                    let order = order
                        .split(',')
                        .map(str::parse::<TieBreak>)
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(err)?;
                    policy.tie_break = order;
                }
                _ => return Err(err(format!("unrecognized policy line `{text}`"))),
            }
        }
        policy.default_priority = default.ok_or(MergeError::MissingDefault)?;
        Ok(policy)
    }
}

/// A chunk that lost an overlap, with the chunk that beat it.
#[derive(Debug, Clone, PartialEq)]
pub struct Discarded {
    pub chunk: EntityChunk,
    pub winner: EntityChunk,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergedChunks {
    /// Surviving PHI chunks, non-overlapping, sorted by start.
    pub chunks: Vec<EntityChunk>,
    /// Surviving non-PHI chunks; excluded from de-identification.
    pub suppressors: Vec<EntityChunk>,
    /// Audit trail of every chunk dropped in an overlap.
    pub discarded: Vec<Discarded>,
}

impl MergedChunks {
    /// PHI and non-PHI winners together, sorted by start.
    pub fn winners(&self) -> Vec<&EntityChunk> {
        let mut all: Vec<&EntityChunk> = self.chunks.iter().chain(&self.suppressors).collect();
        all.sort_by_key(|c| c.span);
        all
    }
}

/// Remove exact duplicates (same span, label and source), keeping the most
/// confident copy, and sort by rank.
fn ranked(chunks: impl IntoIterator<Item = EntityChunk>, policy: &MergePolicy) -> Vec<EntityChunk> {
    let mut v: Vec<EntityChunk> = chunks.into_iter().collect();
    v.sort_by(|a, b| {
        (a.span, a.label, &a.source)
            .cmp(&(b.span, b.label, &b.source))
            .then_with(|| b.confidence.total_cmp(&a.confidence))
    });
    v.dedup_by(|later, kept| later.span == kept.span && later.label == kept.label && later.source == kept.source);
    v.sort_by(|a, b| policy.rank(a, b));
    v
}

fn finish(accepted: Vec<EntityChunk>, rejected: Vec<EntityChunk>, policy: &MergePolicy) -> MergedChunks {
    let discarded = rejected
        .into_iter()
        .map(|chunk| {
            let winner = accepted
                .iter()
                .filter(|w| w.span.overlaps(&chunk.span))
                .min_by(|a, b| policy.rank(a, b))
                .cloned()
                .expect("a rejected chunk overlaps an accepted one");
            Discarded { chunk, winner }
        })
        .collect();
    let (mut chunks, mut suppressors): (Vec<_>, Vec<_>) = accepted.into_iter().partition(|c| c.label.is_phi());
    chunks.sort_by_key(|c| c.span);
    suppressors.sort_by_key(|c| c.span);
    MergedChunks {
        chunks,
        suppressors,
        discarded,
    }
}

/// Resolve overlaps among all chunks.
pub fn merge(chunks: impl IntoIterator<Item = EntityChunk>, policy: &MergePolicy) -> MergedChunks {
    let ranked = ranked(chunks, policy);
    // start -> end of accepted chunks; accepted spans never overlap, so the
    // only candidates for overlap are the neighbours around `start`.
    let mut occupied: BTreeMap<usize, usize> = BTreeMap::new();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for chunk in ranked {
        let s = chunk.span;
        let clash_before = occupied
            .range(..s.end)
            .next_back()
            .is_some_and(|(_, &end)| end > s.start);
        if clash_before {
            rejected.push(chunk);
        } else {
            occupied.insert(s.start, s.end);
            accepted.push(chunk);
        }
    }
    finish(accepted, rejected, policy)
}

/// Merge recognizer outputs together with rule chunks.
pub fn merge_outputs(outputs: &[RecognizerOutput], rule_chunks: &[EntityChunk], policy: &MergePolicy) -> MergedChunks {
    let all = outputs
        .iter()
        .flat_map(|o| o.chunks.iter().cloned())
        .chain(rule_chunks.iter().cloned());
    merge(all, policy)
}

/// Exhaustive reference resolver: among all pairwise non-overlapping
/// subsets, pick the one whose membership vector, read in rank order, is
/// lexicographically greatest.
pub fn resolve_overlap_bruteforce(chunks: &[EntityChunk], policy: &MergePolicy) -> Result<MergedChunks, MergeError> {
    let ranked = ranked(chunks.iter().cloned(), policy);
    let n = ranked.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(MergeError::TooManyChunks(n));
    }
    let mut conflicts = vec![0u32; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && ranked[i].span.overlaps(&ranked[j].span) {
                conflicts[i] |= 1 << j;
            }
        }
    }
    // bit (n-1-i) stands for rank i, so comparing masks as integers is the
    // lexicographic comparison of membership vectors
    let rank_mask = |subset: u32| -> u32 {
        (0..n)
            .filter(|i| subset & (1 << i) != 0)
            .map(|i| 1u32 << (n - 1 - i))
            .sum()
    };
    let mut best: Option<(u32, u32)> = None;
    for subset in 0u32..(1u32 << n) {
        let independent = (0..n).all(|i| subset & (1 << i) == 0 || conflicts[i] & subset == 0);
        if !independent {
            continue;
        }
        let key = rank_mask(subset);
        if best.is_none_or(|(k, _)| key > k) {
            best = Some((key, subset));
        }
    }
    let chosen = best.map_or(0, |(_, s)| s);
    let (accepted, rejected): (Vec<_>, Vec<_>) = ranked
        .into_iter()
        .enumerate()
        .partition(|(i, _)| chosen & (1 << i) != 0);
    Ok(finish(
        accepted.into_iter().map(|(_, c)| c).collect(),
        rejected.into_iter().map(|(_, c)| c).collect(),
        policy,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Span;

    fn chunk(start: usize, end: usize, label: EntityLabel, source: Source) -> EntityChunk {
        EntityChunk {
            span: Span::new(start, end),
            label,
            text: "x".repeat(end - start),
            source,
            confidence: 1.0,
        }
    }

    #[test]
    fn single_chunk_passes_through() {
        let c = chunk(0, 4, EntityLabel::Patient, Source::recognizer("names"));
        let out = merge(vec![c.clone()], &MergePolicy::default());
        assert_eq!(out.chunks, vec![c]);
        assert!(out.discarded.is_empty());
    }

    #[test]
    fn rule_ssn_beats_recognizer_id() {
        let policy = MergePolicy::new(0)
            .with_priority("rule", None, 20)
            .with_priority("recognizer", None, 10);
        let ssn = chunk(4, 15, EntityLabel::Id, Source::rule("ssn"));
        // the recognizer chunk is longer, but priority comes first
        let ner = chunk(0, 15, EntityLabel::Id, Source::recognizer("ner"));
        let out = merge(vec![ner.clone(), ssn.clone()], &policy);
        assert_eq!(out.chunks, vec![ssn.clone()]);
        assert_eq!(
            out.discarded,
            vec![Discarded {
                chunk: ner,
                winner: ssn
            }]
        );
    }

    #[test]
    fn disease_suppresses_patient() {
        // "John was Diagnosed with Parkinson's by Dr. Hopkins at John Hopkins Hospital."
        let policy = MergePolicy::new(10).with_priority("diseases", None, 100);
        let ner = Source::recognizer("phi");
        let input = vec![
            chunk(0, 4, EntityLabel::Patient, ner.clone()),
            chunk(24, 35, EntityLabel::Disease, Source::recognizer("diseases")),
            chunk(24, 33, EntityLabel::Patient, ner.clone()),
            chunk(43, 50, EntityLabel::Doctor, ner.clone()),
            chunk(54, 75, EntityLabel::Hospital, ner.clone()),
            chunk(54, 66, EntityLabel::Patient, ner.clone()),
        ];
        let out = merge(input, &policy);
        let got: Vec<_> = out.chunks.iter().map(|c| (c.span.start, c.label)).collect();
        assert_eq!(
            got,
            vec![
                (0, EntityLabel::Patient),
                (43, EntityLabel::Doctor),
                (54, EntityLabel::Hospital)
            ]
        );
        assert_eq!(out.suppressors.len(), 1);
        assert_eq!(out.suppressors[0].label, EntityLabel::Disease);
        assert!(out.discarded.iter().any(|d| d.winner.label == EntityLabel::Disease));
    }

    #[test]
    fn tie_breaks_in_default_order() {
        let p = MergePolicy::default();
        let long = chunk(0, 6, EntityLabel::City, Source::recognizer("b"));
        let short = chunk(0, 4, EntityLabel::City, Source::recognizer("a"));
        assert_eq!(merge(vec![short.clone(), long.clone()], &p).chunks, vec![long]);
        let sure = chunk(2, 6, EntityLabel::City, Source::recognizer("b")).with_confidence(0.9);
        let unsure = chunk(0, 4, EntityLabel::City, Source::recognizer("a")).with_confidence(0.5);
        assert_eq!(merge(vec![unsure, sure.clone()], &p).chunks, vec![sure]);
        let early = chunk(0, 4, EntityLabel::City, Source::recognizer("z"));
        let late = chunk(2, 6, EntityLabel::City, Source::recognizer("a"));
        assert_eq!(merge(vec![late, early.clone()], &p).chunks, vec![early]);
        let a = chunk(0, 4, EntityLabel::City, Source::recognizer("a"));
        let b = chunk(0, 4, EntityLabel::Country, Source::recognizer("b"));
        assert_eq!(merge(vec![b, a.clone()], &p).chunks, vec![a]);
    }

    #[test]
    fn priority_specificity() {
        let p = MergePolicy::new(1)
            .with_priority("*", None, 2)
            .with_priority("rule", None, 3)
            .with_priority("rule", Some(EntityLabel::Age), 4)
            .with_priority("rule:age", None, 5)
            .with_priority("age", Some(EntityLabel::Age), 6);
        assert_eq!(p.priority(&Source::recognizer("x"), EntityLabel::City), 2);
        assert_eq!(p.priority(&Source::rule("x"), EntityLabel::City), 3);
        assert_eq!(p.priority(&Source::rule("x"), EntityLabel::Age), 4);
        assert_eq!(p.priority(&Source::rule("age"), EntityLabel::City), 5);
        assert_eq!(p.priority(&Source::rule("age"), EntityLabel::Age), 6);
        assert_eq!(MergePolicy::new(7).priority(&Source::rule("q"), EntityLabel::Zip), 7);
    }

    #[test]
    fn parse_policy_file() {
        let src = "# comment\ndefault 10\npriority rule * 20\npriority diseases Disease 100\ntiebreak earlier-start,longer-span\n";
        let p = MergePolicy::parse(src).unwrap();
        assert_eq!(p.default_priority, 10);
        assert_eq!(p.priority(&Source::rule("x"), EntityLabel::Age), 20);
        assert_eq!(p.priority(&Source::recognizer("diseases"), EntityLabel::Disease), 100);
        assert_eq!(p.tie_break, vec![TieBreak::EarlierStart, TieBreak::LongerSpan]);
        assert_eq!(
            MergePolicy::parse("priority rule * 2\n"),
            Err(MergeError::MissingDefault)
        );
        assert!(matches!(
            MergePolicy::parse("default x"),
            Err(MergeError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            MergePolicy::parse("default 1\npriority rule Planet 3"),
            Err(MergeError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            MergePolicy::parse("default 1\ntiebreak biggest"),
            Err(MergeError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn brute_force_small_cases() {
        let p = MergePolicy::default();
        assert!(resolve_overlap_bruteforce(&[], &p).unwrap().chunks.is_empty());
        let a = chunk(0, 2, EntityLabel::City, Source::recognizer("a"));
        let b = chunk(3, 5, EntityLabel::City, Source::recognizer("a"));
        let out = resolve_overlap_bruteforce(&[b.clone(), a.clone()], &p).unwrap();
        assert_eq!(out.chunks, vec![a, b]);
        let many: Vec<_> = (0..21)
            .map(|i| chunk(i, i + 1, EntityLabel::Zip, Source::rule("z")))
            .collect();
        assert_eq!(
            resolve_overlap_bruteforce(&many, &p),
            Err(MergeError::TooManyChunks(21))
        );
    }

    #[test]
    fn exact_duplicates_collapse() {
        let a = chunk(0, 2, EntityLabel::City, Source::recognizer("a"));
        let out = merge(vec![a.clone(), a.clone().with_confidence(0.5)], &MergePolicy::default());
        assert_eq!(out.chunks, vec![a]);
        assert!(out.discarded.is_empty());
    }
}
