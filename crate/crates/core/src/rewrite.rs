//! Final de-identification step: replace every surviving PHI chunk by its
//! label, by asterisks, or by a consistent surrogate.
//!
//! Text outside chunks is copied through unchanged, and every replacement is
//! logged with its position in the output so the vault can undo it.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datetime::{parse_date, render_date, shift_date, DateFormat, DateLocale, NameStyle, ParsedDate};
use crate::faker::{Faker, FakerError, Gender, LengthMode, PatientContext};
use crate::merge::MergedChunks;
use crate::model::{to_coarse, Document, EntityChunk, EntityLabel, Span};
use crate::text::char_len;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewriteError {
    #[error("invalid rewrite policy: {0}")]
    Policy(String),
    /// Merge must never hand over overlapping chunks; this is a bug, not a
    /// user error.
    #[error("internal error: chunks {first:?} and {second:?} overlap after merge")]
    Overlap { first: Span, second: Span },
    #[error("chunk {span:?} lies outside the document")]
    OutOfBounds { span: Span },
    #[error(transparent)]
    Faker(#[from] FakerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewriteMode {
    /// `PATIENT`, `CITY`, ...
    MaskEntity,
    /// A fixed number of asterisks.
    MaskFixed,
    /// As many asterisks as the chunk has characters.
    MaskSameLength,
    /// Realistic surrogates.
    Obfuscate,
}

impl RewriteMode {
    pub fn name(self) -> &'static str {
        match self {
            RewriteMode::MaskEntity => "mask-entity",
            RewriteMode::MaskFixed => "mask-fixed",
            RewriteMode::MaskSameLength => "mask-length",
            RewriteMode::Obfuscate => "obfuscate",
        }
    }

    pub const ALL: [RewriteMode; 4] = [
        RewriteMode::MaskEntity,
        RewriteMode::MaskFixed,
        RewriteMode::MaskSameLength,
        RewriteMode::Obfuscate,
    ];
}

impl fmt::Display for RewriteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewriteMode {
    type Err = RewriteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mask-entity" => Ok(RewriteMode::MaskEntity),
            "mask-fixed" => Ok(RewriteMode::MaskFixed),
            "mask-length" | "mask-same-length" => Ok(RewriteMode::MaskSameLength),
            "obfuscate" => Ok(RewriteMode::Obfuscate),
            other => Err(RewriteError::Policy(format!("unknown mode `{other}`"))),
        }
    }
}

/// What to do with a date chunk that cannot be parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DateFallback {
    /// Asterisks of the chunk's length.
    Mask,
    /// A random date in the locale's canonical format.
    RandomDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewritePolicy {
    pub mode: RewriteMode,
    pub fixed_mask_width: usize,
    /// Labels left untouched. A coarse label also covers its granular labels.
    pub whitelist: BTreeSet<EntityLabel>,
    pub length_mode: LengthMode,
    pub date_fallback: DateFallback,
}

impl RewritePolicy {
    pub fn new(mode: RewriteMode) -> Self {
        RewritePolicy {
            mode,
            fixed_mask_width: 3,
            whitelist: BTreeSet::new(),
            length_mode: LengthMode::Free,
            date_fallback: DateFallback::Mask,
        }
    }

    pub fn with_fixed_width(mut self, width: usize) -> Self {
        self.fixed_mask_width = width;
        self
    }

    pub fn with_whitelist<I: IntoIterator<Item = EntityLabel>>(mut self, labels: I) -> Self {
        self.whitelist = labels.into_iter().collect();
        self
    }

    pub fn with_length_mode(mut self, length_mode: LengthMode) -> Self {
        self.length_mode = length_mode;
        self
    }

    pub fn validate(&self) -> Result<(), RewriteError> {
        if self.fixed_mask_width == 0 {
            return Err(RewriteError::Policy("fixed mask width must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_whitelisted(&self, label: EntityLabel) -> bool {
        self.whitelist.contains(&label) || self.whitelist.contains(&to_coarse(label))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replacement {
    pub chunk: EntityChunk,
    pub replacement: String,
    /// Character span of the replacement in the output text.
    pub output_span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewriteResult {
    pub text: String,
    /// Ordered by input span.
    pub replacements: Vec<Replacement>,
}

/// Language resources needed to obfuscate.
#[derive(Debug, Clone, Copy)]
pub struct Surrogates<'a> {
    pub faker: &'a Faker,
    pub locale: &'a DateLocale,
}

pub fn rewrite(
    doc: &Document,
    merged: &MergedChunks,
    policy: &RewritePolicy,
    ctx: &mut PatientContext,
    surrogates: Surrogates<'_>,
) -> Result<RewriteResult, RewriteError> {
    policy.validate()?;
    let mut chunks: Vec<&EntityChunk> = merged.chunks.iter().collect();
    chunks.sort_by_key(|c| c.span);
    for pair in chunks.windows(2) {
        if pair[0].span.overlaps(&pair[1].span) {
            return Err(RewriteError::Overlap {
                first: pair[0].span,
                second: pair[1].span,
            });
        }
    }
    if let Some(c) = chunks.iter().find(|c| c.span.end > doc.char_len()) {
        return Err(RewriteError::OutOfBounds { span: c.span });
    }

    // Built left to right; output offsets follow from what has been written.
    let mut text = String::with_capacity(doc.text.len());
    let mut out_chars = 0usize;
    let mut cursor = 0usize;
    let mut replacements = Vec::new();
    for chunk in chunks {
        if policy.is_whitelisted(chunk.label) {
            continue;
        }
        text.push_str(between(doc, cursor, chunk.span.start));
        out_chars += chunk.span.start - cursor;

        let replacement = replacement_for(chunk, policy, ctx, surrogates)?;
        let len = char_len(&replacement);
        text.push_str(&replacement);
        replacements.push(Replacement {
            chunk: chunk.clone(),
            replacement,
            output_span: Span::new(out_chars, out_chars + len),
        });
        out_chars += len;
        cursor = chunk.span.end;
    }
    text.push_str(between(doc, cursor, doc.char_len()));
    Ok(RewriteResult { text, replacements })
}

/// Text between two character positions, possibly empty.
fn between(doc: &Document, start: usize, end: usize) -> &str {
    &doc.text[doc.byte_offset(start)..doc.byte_offset(end)]
}

fn replacement_for(
    chunk: &EntityChunk,
    policy: &RewritePolicy,
    ctx: &mut PatientContext,
    surrogates: Surrogates<'_>,
) -> Result<String, RewriteError> {
    let n = char_len(&chunk.text);
    Ok(match policy.mode {
        RewriteMode::MaskEntity => chunk.label.mask_token(),
        RewriteMode::MaskFixed => "*".repeat(policy.fixed_mask_width),
        RewriteMode::MaskSameLength => "*".repeat(n),
        RewriteMode::Obfuscate if chunk.label == EntityLabel::Date => {
            obfuscate_date(&chunk.text, policy, ctx, surrogates.locale)
        }
        RewriteMode::Obfuscate => {
            let s = surrogates
                .faker
                .surrogate(chunk, ctx, Gender::Unknown, policy.length_mode)?;
            if policy.length_mode == LengthMode::SameLength && char_len(&s) != n {
                // dictionary overrides may ignore the length constraint
                "*".repeat(n)
            } else if s.is_empty() {
                "*".repeat(n.max(1))
            } else {
                s
            }
        }
    })
}

/// Shift a date by the patient's offset and render it in its own format.
pub fn obfuscate_date(text: &str, policy: &RewritePolicy, ctx: &PatientContext, locale: &DateLocale) -> String {
    let n = char_len(text);
    let rendered = match parse_date(text, locale) {
        Ok(d) => {
            let shifted = shift_date(&d, ctx.day_shift);
            let out = shifted.render(locale);
            if policy.length_mode == LengthMode::SameLength {
                fit_date(&shifted, out, n, locale)
            } else {
                Some(out)
            }
        }
        Err(_) => match policy.date_fallback {
            DateFallback::Mask => None,
            DateFallback::RandomDate => {
                let mut rng = ctx.rng("date-fallback", text);
                let year = rng.gen_range(1950..=2030);
                let month = rng.gen_range(1..=12);
                let day = rng.gen_range(1..=28);
                let format = DateFormat::canonical(locale.canonical_order);
                let d = ParsedDate::new(year, month, Some(day), format, locale.code.clone())
                    .expect("day 1..=28 exists in every month");
                let out = d.render(locale);
                if policy.length_mode == LengthMode::SameLength && char_len(&out) != n {
                    None
                } else {
                    Some(out)
                }
            }
        },
    };
    rendered.unwrap_or_else(|| "*".repeat(n))
}

/// Bring a rendered date to exactly `n` characters: pad with spaces, or
/// fall back to abbreviated month names when it is too long.
fn fit_date(d: &ParsedDate, rendered: String, n: usize, locale: &DateLocale) -> Option<String> {
    let pad = |s: String| {
        let len = char_len(&s);
        (len <= n).then(|| format!("{s}{}", " ".repeat(n - len)))
    };
    if let Some(s) = pad(rendered) {
        return Some(s);
    }
    let abbreviated = match d.format {
        DateFormat::MonthNameYear { case, .. } => DateFormat::MonthNameYear {
            style: NameStyle::Abbrev,
            case,
        },
        DateFormat::MonthNameDayYear {
            case, pad_day, comma, ..
        } => DateFormat::MonthNameDayYear {
            style: NameStyle::Abbrev,
            case,
            pad_day,
            comma,
        },
        DateFormat::DayMonthNameYear { case, pad_day, .. } => DateFormat::DayMonthNameYear {
            style: NameStyle::Abbrev,
            case,
            pad_day,
        },
        _ => return None,
    };
    pad(render_date(d, &abbreviated, locale))
}

/// Replay a replacement log over the original text.
pub fn apply_replacements(original: &str, replacements: &[Replacement]) -> String {
    let chars: Vec<char> = original.chars().collect();
    let mut out = String::with_capacity(original.len());
    let mut cursor = 0;
    for r in replacements {
        out.extend(&chars[cursor..r.chunk.span.start]);
        out.push_str(&r.replacement);
        cursor = r.chunk.span.end;
    }
    out.extend(&chars[cursor..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faker::{AgeGroupTable, SurrogateVocabulary};
    use crate::model::Source;

    const JANE: &str = "Jane is a 48-year-old nurse from Memphis.";

    fn doc(text: &str) -> Document {
        Document::new("d1", None, text, "en").unwrap()
    }

    fn chunk(d: &Document, start: usize, end: usize, label: EntityLabel) -> EntityChunk {
        EntityChunk::from_doc(d, Span::new(start, end), label, Source::recognizer("test"))
    }

    fn jane() -> (Document, MergedChunks) {
        let d = doc(JANE);
        let chunks = vec![
            chunk(&d, 0, 4, EntityLabel::Patient),
            chunk(&d, 10, 21, EntityLabel::Age),
            chunk(&d, 22, 27, EntityLabel::Profession),
            chunk(&d, 33, 40, EntityLabel::City),
        ];
        (
            d,
            MergedChunks {
                chunks,
                ..Default::default()
            },
        )
    }

    fn ctx() -> PatientContext {
        PatientContext::new("p", 7, 10, AgeGroupTable::default())
    }

    fn run(policy: &RewritePolicy) -> RewriteResult {
        let (d, m) = jane();
        let faker = Faker::default();
        let locale = DateLocale::english();
        rewrite(
            &d,
            &m,
            policy,
            &mut ctx(),
            Surrogates {
                faker: &faker,
                locale: &locale,
            },
        )
        .unwrap()
    }

    #[test]
    fn mask_modes() {
        assert_eq!(
            run(&RewritePolicy::new(RewriteMode::MaskEntity)).text,
            "PATIENT is a AGE PROFESSION from CITY."
        );
        assert_eq!(
            run(&RewritePolicy::new(RewriteMode::MaskFixed)).text,
            "*** is a *** *** from ***."
        );
        let wl = RewritePolicy::new(RewriteMode::MaskFixed).with_whitelist([EntityLabel::Age]);
        assert_eq!(run(&wl).text, "*** is a 48-year-old *** from ***.");
        let same = run(&RewritePolicy::new(RewriteMode::MaskSameLength));
        assert_eq!(same.text, "**** is a *********** ***** from *******.");
    }

    #[test]
    fn whitelisting_everything_is_identity() {
        let p = RewritePolicy::new(RewriteMode::MaskEntity).with_whitelist(EntityLabel::ALL);
        let r = run(&p);
        assert_eq!(r.text, JANE);
        assert!(r.replacements.is_empty());
    }

    #[test]
    fn coarse_whitelist_covers_granular() {
        let p = RewritePolicy::new(RewriteMode::MaskEntity).with_whitelist([EntityLabel::Location]);
        assert_eq!(run(&p).text, "PATIENT is a AGE PROFESSION from Memphis.");
    }

    #[test]
    fn replacement_log_replays_and_locates_output() {
        let r = run(&RewritePolicy::new(RewriteMode::MaskEntity));
        assert_eq!(apply_replacements(JANE, &r.replacements), r.text);
        let chars: Vec<char> = r.text.chars().collect();
        for rep in &r.replacements {
            let s: String = chars[rep.output_span.start..rep.output_span.end].iter().collect();
            assert_eq!(s, rep.replacement);
        }
    }

    #[test]
    fn zero_width_rejected() {
        let (d, m) = jane();
        let faker = Faker::default();
        let locale = DateLocale::english();
        let p = RewritePolicy::new(RewriteMode::MaskFixed).with_fixed_width(0);
        let err = rewrite(
            &d,
            &m,
            &p,
            &mut ctx(),
            Surrogates {
                faker: &faker,
                locale: &locale,
            },
        );
        assert!(matches!(err, Err(RewriteError::Policy(_))));
    }

    #[test]
    fn overlap_is_internal_error() {
        let d = doc(JANE);
        let m = MergedChunks {
            chunks: vec![
                chunk(&d, 0, 4, EntityLabel::Patient),
                chunk(&d, 2, 6, EntityLabel::City),
            ],
            ..Default::default()
        };
        let faker = Faker::default();
        let locale = DateLocale::english();
        let err = rewrite(
            &d,
            &m,
            &RewritePolicy::new(RewriteMode::MaskEntity),
            &mut ctx(),
            Surrogates {
                faker: &faker,
                locale: &locale,
            },
        );
        assert!(matches!(err, Err(RewriteError::Overlap { .. })));
    }

    #[test]
    fn obfuscated_dates_keep_format() {
        let p = RewritePolicy::new(RewriteMode::Obfuscate);
        let c = PatientContext::new("p", 1, -14, AgeGroupTable::default());
        let en = DateLocale::english();
        assert_eq!(obfuscate_date("April 2020", &p, &c, &en), "March 2020");
        assert_eq!(obfuscate_date("04/12/2022", &p, &c, &en), "03/29/2022");
        assert_eq!(obfuscate_date("yesterday", &p, &c, &en), "*********");
        let same = p.clone().with_length_mode(LengthMode::SameLength);
        // "May 2020" shifted to "April 2020" would grow; abbreviated instead
        let c2 = PatientContext::new("p", 1, -20, AgeGroupTable::default());
        assert_eq!(obfuscate_date("May 2020", &same, &c2, &en), "Apr 2020");
        let random = RewritePolicy {
            date_fallback: DateFallback::RandomDate,
            ..p
        };
        let r = obfuscate_date("sometime", &random, &c, &en);
        assert!(parse_date(&r, &en).is_ok(), "{r}");
    }

    #[test]
    fn obfuscate_replaces_with_vocab() {
        let (d, m) = jane();
        let mut faker = Faker::default();
        faker.vocabularies.insert(
            EntityLabel::City,
            SurrogateVocabulary::from_strings(EntityLabel::City, ["Fresno", "Dayton", "Memphis", "Norfolk"]).unwrap(),
        );
        let locale = DateLocale::english();
        let p = RewritePolicy::new(RewriteMode::Obfuscate).with_length_mode(LengthMode::SameLength);
        let r = rewrite(
            &d,
            &m,
            &p,
            &mut ctx(),
            Surrogates {
                faker: &faker,
                locale: &locale,
            },
        )
        .unwrap();
        assert_eq!(char_len(&r.text), char_len(JANE));
        assert_eq!(r.replacements.len(), 4);
        assert_eq!(r.replacements[3].replacement, "Norfolk");
        for rep in &r.replacements {
            assert_ne!(rep.replacement, rep.chunk.text);
        }
    }
}
