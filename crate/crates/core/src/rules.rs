//! Contextual rule engine: a regex core whose matches are kept only when a
//! prefix term occurs shortly before them and/or a suffix term shortly after.
//!
//! Rule file format, one rule per line, `#` comments:
//!
//! ```text
//! rule age_unit label=Age core=/\b\d{1,3}\b/ suffix=[year,yr,y.o.,month] window=15 phi=true
//! ```
//!
//! Keys: `label` and `core` are required; `prefix`, `suffix`, `window`
//! (characters, default 20), `maxlen` (longest allowed context term, default
//! 32) and `phi` (default true) are optional.

use std::collections::HashSet;

use regex::Regex;
use thiserror::Error;

use crate::model::{Document, EntityChunk, EntityLabel, Source, Span};
use crate::text::{char_len, fold};

pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_CONTEXT_LENGTH_LIMIT: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate rule id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: rule `{id}` has invalid label `{label}`")]
    InvalidLabel { line: usize, id: String, label: String },
    #[error("line {line}: rule `{id}` has an invalid core pattern: {message}")]
    InvalidRegex { line: usize, id: String, message: String },
    #[error("line {line}: rule `{id}`: context term `{term}` is longer than {limit} characters")]
    TermTooLong {
        line: usize,
        id: String,
        term: String,
        limit: usize,
    },
    #[error("line {line}: rule `{id}`: phi={phi} contradicts label {label}")]
    PhiMismatch {
        line: usize,
        id: String,
        phi: bool,
        label: EntityLabel,
    },
}

#[derive(Debug, Clone)]
pub struct ContextualRule {
    pub rule_id: String,
    pub label: EntityLabel,
    pub core: Regex,
    /// Case-folded NFC terms.
    pub prefix_terms: Vec<String>,
    pub suffix_terms: Vec<String>,
    pub context_window: usize,
    pub context_length_limit: usize,
    pub is_phi: bool,
}

impl ContextualRule {
    pub fn new(rule_id: impl Into<String>, label: EntityLabel, core: &str) -> Result<Self, RuleError> {
        let rule_id = rule_id.into();
        let core = Regex::new(core).map_err(|e| RuleError::InvalidRegex {
            line: 0,
            id: rule_id.clone(),
            message: e.to_string(),
        })?;
        Ok(ContextualRule {
            rule_id,
            label,
            core,
            prefix_terms: Vec::new(),
            suffix_terms: Vec::new(),
            context_window: DEFAULT_WINDOW,
            context_length_limit: DEFAULT_CONTEXT_LENGTH_LIMIT,
            is_phi: label.is_phi(),
        })
    }

    pub fn with_prefix<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, terms: I) -> Self {
        self.prefix_terms = terms.into_iter().map(|t| fold(t.as_ref())).collect();
        self
    }

    pub fn with_suffix<I: IntoIterator<Item = S>, S: AsRef<str>>(mut self, terms: I) -> Self {
        self.suffix_terms = terms.into_iter().map(|t| fold(t.as_ref())).collect();
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.context_window = window;
        self
    }

    /// Drop both context constraints, leaving a plain regex rule.
    pub fn without_context(mut self) -> Self {
        self.prefix_terms.clear();
        self.suffix_terms.clear();
        self
    }

    fn context_ok(&self, chars: &[char], span: Span) -> bool {
        let prefix_ok = self.prefix_terms.is_empty() || {
            let lo = span.start.saturating_sub(self.context_window);
            let window = fold(&chars[lo..span.start].iter().collect::<String>());
            self.prefix_terms.iter().any(|t| window.contains(t.as_str()))
        };
        let suffix_ok = self.suffix_terms.is_empty() || {
            let hi = (span.end + self.context_window).min(chars.len());
            let window = fold(&chars[span.end..hi].iter().collect::<String>());
            self.suffix_terms.iter().any(|t| window.contains(t.as_str()))
        };
        prefix_ok && suffix_ok
    }

    /// Chunks produced by this rule alone.
    pub fn apply(&self, doc: &Document, chars: &[char]) -> Vec<EntityChunk> {
        let source = Source::rule(&self.rule_id);
        self.core
            .find_iter(&doc.text)
            .filter(|m| !m.is_empty())
            .map(|m| Span::new(doc.char_offset(m.start()), doc.char_offset(m.end())))
            .filter(|&span| self.context_ok(chars, span))
            .map(|span| EntityChunk::from_doc(doc, span, self.label, source.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    pub rules: Vec<ContextualRule>,
    pub language: String,
}

impl RuleSet {
    pub fn new(language: impl Into<String>, rules: Vec<ContextualRule>) -> Result<Self, RuleError> {
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.rule_id.clone()) {
                return Err(RuleError::DuplicateId {
                    line: 0,
                    id: r.rule_id.clone(),
                });
            }
        }
        Ok(RuleSet {
            rules,
            language: language.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, rule_id: &str) -> Option<&ContextualRule> {
        self.rules.iter().find(|r| r.rule_id == rule_id)
    }
}

/// Run every rule over the document. The result is sorted canonically, so
/// it does not depend on rule order.
pub fn apply_rules(doc: &Document, ruleset: &RuleSet) -> Vec<EntityChunk> {
    let chars: Vec<char> = doc.text.chars().collect();
    let mut out: Vec<EntityChunk> = ruleset.rules.iter().flat_map(|r| r.apply(doc, &chars)).collect();
    out.sort_by(|a, b| a.canonical_cmp(b));
    out
}

/// Parse and compile a rule file.
pub fn compile_ruleset(source: &str, language: &str) -> Result<RuleSet, RuleError> {
    let mut rules = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rule = parse_rule_line(trimmed, line)?;
        if !seen.insert(rule.rule_id.clone()) {
            return Err(RuleError::DuplicateId { line, id: rule.rule_id });
        }
        rules.push(rule);
    }
    Ok(RuleSet {
        rules,
        language: language.to_string(),
    })
}

/// Split `key=value` fields; values may be `/regex/` or `[a, b]`.
pub(crate) fn split_fields(rest: &str, line: usize) -> Result<Vec<(String, String)>, RuleError> {
    let chars: Vec<char> = rest.chars().collect();
    let mut fields = Vec::new();
    let mut i = 0;
    let err = |message: String| RuleError::Parse { line, message };
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        if chars[i] == '#' {
            break;
        }
        let key_start = i;
        while i < chars.len() && chars[i] != '=' && !chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() || chars[i] != '=' {
            let key: String = chars[key_start..i].iter().collect();
            return Err(err(format!("expected `=` after `{key}`")));
        }
        let key: String = chars[key_start..i].iter().collect();
        i += 1;
        let value: String = match chars.get(i) {
            Some('/') => {
                let start = i + 1;
                let mut j = start;
                loop {
                    if j >= chars.len() {
                        return Err(err(format!("unterminated /pattern/ for `{key}`")));
                    }
                    if chars[j] == '\\' {
                        j += 2;
                        continue;
                    }
                    if chars[j] == '/' && chars.get(j + 1).is_none_or(|c| c.is_whitespace()) {
                        break;
                    }
                    j += 1;
                }
                i = j + 1;
                chars[start..j].iter().collect()
            }
            Some('[') => {
                let start = i + 1;
                let close = chars[start..]
                    .iter()
                    .position(|&c| c == ']')
                    .ok_or_else(|| err(format!("unterminated list for `{key}`")))?;
                i = start + close + 1;
                chars[start..start + close].iter().collect()
            }
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                chars[start..i].iter().collect()
            }
        };
        fields.push((key, value));
    }
    Ok(fields)
}

pub(crate) fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_rule_line(line_text: &str, line: usize) -> Result<ContextualRule, RuleError> {
    let err = |message: String| RuleError::Parse { line, message };
    let rest = line_text
        .strip_prefix("rule")
        .filter(|r| r.starts_with(char::is_whitespace))
        .ok_or_else(|| err("expected a line starting with `rule <id>`".into()))?
        .trim_start();
    let (id, rest) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    if id.is_empty() || id.contains('=') {
        return Err(err("missing rule id".into()));
    }
    let id = id.to_string();

    let mut label = None;
    let mut core = None;
    let mut prefix = Vec::new();
    let mut suffix = Vec::new();
    let mut window = DEFAULT_WINDOW;
    let mut limit = DEFAULT_CONTEXT_LENGTH_LIMIT;
    let mut phi = None;
    for (key, value) in split_fields(rest, line)? {
        match key.as_str() {
            "label" => {
                label = Some(value.parse::<EntityLabel>().map_err(|_| RuleError::InvalidLabel {
                    line,
                    id: id.clone(),
                    label: value.clone(),
                })?)
            }
            "core" => core = Some(value),
            "prefix" => prefix = parse_list(&value),
            "suffix" => suffix = parse_list(&value),
            "window" => window = value.parse().map_err(|_| err(format!("invalid window `{value}`")))?,
            "maxlen" => limit = value.parse().map_err(|_| err(format!("invalid maxlen `{value}`")))?,
            "phi" => {
                phi = Some(
                    value
                        .parse::<bool>()
                        .map_err(|_| err(format!("invalid phi `{value}`")))?,
                )
            }
            other => return Err(err(format!("unknown key `{other}` in rule `{id}`"))),
        }
    }
    let label = label.ok_or_else(|| err(format!("rule `{id}` has no label")))?;
    let core = core.ok_or_else(|| err(format!("rule `{id}` has no core pattern")))?;
    let phi = phi.unwrap_or(label.is_phi());
    if phi != label.is_phi() {
        return Err(RuleError::PhiMismatch { line, id, phi, label });
    }
    for term in prefix.iter().chain(&suffix) {
        if char_len(term) > limit {
            return Err(RuleError::TermTooLong {
                line,
                id,
                term: term.clone(),
                limit,
            });
        }
    }
    let core = Regex::new(&core).map_err(|e| RuleError::InvalidRegex {
        line,
        id: id.clone(),
        message: e.to_string(),
    })?;
    Ok(ContextualRule {
        rule_id: id,
        label,
        core,
        prefix_terms: prefix.iter().map(|t| fold(t)).collect(),
        suffix_terms: suffix.iter().map(|t| fold(t)).collect(),
        context_window: window,
        context_length_limit: limit,
        is_phi: phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Document {
        Document::new("t", None, text, "en").unwrap()
    }

    fn age_rule() -> ContextualRule {
        ContextualRule::new("age", EntityLabel::Age, r"\d{1,3}")
            .unwrap()
            .with_suffix(["year", "yr", "y.o.", "month"])
            .with_window(15)
    }

    fn run(rule: ContextualRule, text: &str) -> Vec<EntityChunk> {
        apply_rules(&doc(text), &RuleSet::new("en", vec![rule]).unwrap())
    }

    #[test]
    fn age_suffix_matches() {
        let got = run(age_rule(), "a 48-year-old nurse");
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].text, "48");
        assert_eq!(got[0].label, EntityLabel::Age);
        assert_eq!(got[0].span, Span::new(2, 4));
        assert_eq!(got[0].source, Source::rule("age"));
        assert_eq!(got[0].confidence, 1.0);
    }

    #[test]
    fn age_without_unit_is_dropped() {
        assert!(run(age_rule(), "Room 48 is ready").is_empty());
    }

    #[test]
    fn unconstrained_rule_is_plain_regex() {
        let rule = ContextualRule::new("ssn", EntityLabel::Id, r"\d{3}-\d{2}-\d{4}").unwrap();
        let got = run(rule, "SSN 123-45-6789");
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].text, "123-45-6789");
        assert_eq!(got[0].label, EntityLabel::Id);
    }

    #[test]
    fn prefix_terms_are_case_insensitive() {
        let rule = ContextualRule::new("mrn", EntityLabel::Id, r"\b\d{7}\b")
            .unwrap()
            .with_prefix(["MRN"])
            .with_window(5);
        assert_eq!(run(rule.clone(), "mrn: 1234567").len(), 1);
        assert!(run(rule.clone(), "MRN was 1234567").is_empty());
        assert!(run(rule, "1234567 MRN").is_empty());
    }

    #[test]
    fn window_requires_whole_term() {
        // "year" starts 1 char after the match but ends 5 chars after it
        let rule = ContextualRule::new("age", EntityLabel::Age, r"\d+")
            .unwrap()
            .with_suffix(["year"])
            .with_window(4);
        assert!(run(rule.clone(), "48-year").is_empty());
        assert_eq!(run(rule.with_window(5), "48-year").len(), 1);
    }

    #[test]
    fn compile_examples() {
        assert!(compile_ruleset("", "en").unwrap().is_empty());
        assert!(compile_ruleset("# only comments\n\n", "en").unwrap().is_empty());
        let dup = "rule a label=Age core=/\\d+/\nrule a label=Date core=/x/\n";
        assert_eq!(
            compile_ruleset(dup, "en").unwrap_err(),
            RuleError::DuplicateId {
                line: 2,
                id: "a".into()
            }
        );
    }

    #[test]
    fn compile_parses_all_fields() {
        let src = r"rule age_unit label=Age core=/\b\d{1,3}\b/ prefix=[aged, age of] suffix=[year,y.o.] window=15 maxlen=10 phi=true";
        let rs = compile_ruleset(src, "en").unwrap();
        let r = &rs.rules[0];
        assert_eq!(r.rule_id, "age_unit");
        assert_eq!(r.core.as_str(), r"\b\d{1,3}\b");
        assert_eq!(r.prefix_terms, vec!["aged", "age of"]);
        assert_eq!(r.suffix_terms, vec!["year", "y.o."]);
        assert_eq!((r.context_window, r.context_length_limit, r.is_phi), (15, 10, true));
    }

    #[test]
    fn core_may_contain_slashes() {
        let rs = compile_ruleset(r"rule d label=Date core=/\d{2}/\d{2}/\d{4}/ window=0", "en").unwrap();
        let got = apply_rules(&doc("seen 04/12/2022."), &rs);
        assert_eq!(got[0].text, "04/12/2022");
    }

    #[test]
    fn compile_errors_carry_lines() {
        let e = compile_ruleset("\nrule x label=Age core=/(/\n", "en").unwrap_err();
        assert!(matches!(e, RuleError::InvalidRegex { line: 2, ref id, .. } if id == "x"));
        let e = compile_ruleset("rule x label=Planet core=/a/", "en").unwrap_err();
        assert!(matches!(e, RuleError::InvalidLabel { line: 1, .. }));
        let e = compile_ruleset("rule x label=Age", "en").unwrap_err();
        assert!(matches!(e, RuleError::Parse { line: 1, .. }));
        let e = compile_ruleset("rule x label=Age core=/a/ suffix=[abcdef] maxlen=3", "en").unwrap_err();
        assert!(matches!(e, RuleError::TermTooLong { .. }));
        let e = compile_ruleset("rule x label=Age core=/a/ phi=false", "en").unwrap_err();
        assert!(matches!(e, RuleError::PhiMismatch { .. }));
        let e = compile_ruleset("rules x label=Age core=/a/", "en").unwrap_err();
        assert!(matches!(e, RuleError::Parse { .. }));
    }
}
