//! Language packs: a directory with a `manifest.txt` naming every resource
//! one language needs.
//!
//! ```text
//! language = en
//! version = 1.0.0
//! age_groups = 0,5,13,20,40,60,80
//! resource.first_names.person = names/first.tsv
//! resource.last_names.person = names/last.tsv
//! resource.gazetteer.city = gazetteers/cities.tsv
//! resource.vocab.city = gazetteers/cities.tsv
//! resource.rules.core = rules.txt
//! resource.patterns.core = patterns.txt
//! resource.abbreviations.core = abbreviations.txt
//! resource.titles.core = titles.txt
//! resource.dates.core = dates.txt
//! resource.policy.core = merge_policy.txt
//! taxonomy.Profession = Organization
//! ```
//!
//! `first_names`/`last_names` resources with the same name form one person
//! recognizer and feed the name surrogates. Paths are relative to the pack
//! directory and may not leave it. Loading reports every broken resource.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Component, Path, PathBuf};

use thiserror::Error;

use crate::datetime::DateLocale;
use crate::faker::{AgeGroupTable, Faker, NameVocabulary, SurrogateVocabulary, TitleList};
use crate::merge::MergePolicy;
use crate::model::{CoarseMap, EntityLabel};
use crate::preprocess::SentenceConfig;
use crate::recognize::{Gazetteer, GazetteerRecognizer, PatternRecognizer, PersonNameRecognizer, Recognizer};
use crate::rules::{compile_ruleset, parse_list, split_fields, ContextualRule, RuleError, RuleSet};
use crate::seeding::sha256_hex;

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ResourceKind {
    Gazetteer,
    FirstNames,
    LastNames,
    Rules,
    Patterns,
    Abbreviations,
    Titles,
    Dates,
    Vocab,
    Policy,
}

impl ResourceKind {
    pub fn parse(s: &str) -> Option<ResourceKind> {
        use ResourceKind::*;
        Some(match s {
            "gazetteer" => Gazetteer,
            "first_names" => FirstNames,
            "last_names" => LastNames,
            "rules" => Rules,
            "patterns" => Patterns,
            "abbreviations" => Abbreviations,
            "titles" => Titles,
            "dates" => Dates,
            "vocab" => Vocab,
            "policy" => Policy,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceEntry {
    pub kind: ResourceKind,
    pub name: String,
    pub path: PathBuf,
    /// Manifest line declaring the resource.
    pub line: usize,
}

/// One problem found while loading a pack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackProblem {
    /// Manifest entry or resource path.
    pub resource: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for PackProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.resource, l, self.message),
            None => write!(f, "{}: {}", self.resource, self.message),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("language pack {} failed to load:\n{}", path.display(), problems.iter().map(|p| format!("  {p}")).collect::<Vec<_>>().join("\n"))]
pub struct PackError {
    pub path: PathBuf,
    pub problems: Vec<PackProblem>,
}

/// Everything the pipeline needs for one language. Immutable after load.
#[derive(Debug)]
pub struct LanguagePack {
    pub language: String,
    pub version: String,
    pub root: PathBuf,
    pub manifest: Vec<ResourceEntry>,
    /// SHA-256 over the manifest and every resource, in manifest order.
    pub fingerprint: String,
    pub recognizers: Vec<Box<dyn Recognizer>>,
    pub rules: RuleSet,
    pub sentences: SentenceConfig,
    pub date_locale: DateLocale,
    pub faker: Faker,
    pub merge_policy: MergePolicy,
    pub coarse_map: CoarseMap,
    pub age_groups: AgeGroupTable,
}

impl PartialEq for LanguagePack {
    fn eq(&self, other: &Self) -> bool {
        self.language == other.language && self.version == other.version && self.fingerprint == other.fingerprint
    }
}

impl LanguagePack {
    pub fn recognizer_ids(&self) -> Vec<&str> {
        self.recognizers.iter().map(|r| r.id()).collect()
    }
}

struct Loader {
    root: PathBuf,
    problems: Vec<PackProblem>,
    digest_input: Vec<u8>,
}

impl Loader {
    fn problem(&mut self, resource: impl Into<String>, line: Option<usize>, message: impl Into<String>) {
        self.problems.push(PackProblem {
            resource: resource.into(),
            line,
            message: message.into(),
        });
    }

    fn read(&mut self, entry: &ResourceEntry) -> Option<String> {
        let label = format!("resource.{}.{}", kind_name(entry.kind), entry.name);
        if entry.path.is_absolute() || entry.path.components().any(|c| matches!(c, Component::ParentDir)) {
            self.problem(
                MANIFEST.to_string(),
                Some(entry.line),
                format!("{label}: path must stay inside the pack"),
            );
            return None;
        }
        let full = self.root.join(&entry.path);
        match fs::read_to_string(&full) {
            Ok(s) => {
                self.digest_input
                    .extend_from_slice(entry.path.to_string_lossy().as_bytes());
                self.digest_input.push(0);
                self.digest_input.extend_from_slice(s.as_bytes());
                self.digest_input.push(0);
                Some(s)
            }
            Err(e) => {
                self.problem(
                    MANIFEST,
                    Some(entry.line),
                    format!("{label}: cannot read {}: {e}", entry.path.display()),
                );
                None
            }
        }
    }
}

fn kind_name(kind: ResourceKind) -> &'static str {
    use ResourceKind::*;
    match kind {
        Gazetteer => "gazetteer",
        FirstNames => "first_names",
        LastNames => "last_names",
        Rules => "rules",
        Patterns => "patterns",
        Abbreviations => "abbreviations",
        Titles => "titles",
        Dates => "dates",
        Vocab => "vocab",
        Policy => "policy",
    }
}

/// Parse a pattern file: `pattern <id> label=<Label> core=/regex/ [confidence=<x>]`.
pub fn parse_patterns(source: &str) -> Result<Vec<PatternRecognizer>, (usize, String)> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let rest = text
            .strip_prefix("pattern")
            .filter(|r| r.starts_with(char::is_whitespace))
            .ok_or((line, "expected `pattern <id> ...`".to_string()))?
            .trim_start();
        let (id, rest) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
        if !seen.insert(id.to_string()) {
            return Err((line, format!("duplicate pattern id `{id}`")));
        }
        let fields = split_fields(rest, line).map_err(|e| (line, e.to_string()))?;
        let (mut label, mut core, mut confidence) = (None, None, 1.0);
        for (k, v) in fields {
            match k.as_str() {
                "label" => label = Some(v.parse::<EntityLabel>().map_err(|e| (line, e.to_string()))?),
                "core" => core = Some(v),
                "confidence" => {
                    confidence = v
                        .parse::<f64>()
                        .map_err(|_| (line, format!("invalid confidence `{v}`")))?
                }
                other => return Err((line, format!("unknown key `{other}`"))),
            }
        }
        let label = label.ok_or((line, "missing label".to_string()))?;
        let core = core.ok_or((line, "missing core".to_string()))?;
        out.push(PatternRecognizer::new(id, label, &core, confidence).map_err(|e| (line, e.to_string()))?);
    }
    Ok(out)
}

fn rule_line(e: &RuleError) -> Option<usize> {
    match e {
        RuleError::Parse { line, .. }
        | RuleError::DuplicateId { line, .. }
        | RuleError::InvalidLabel { line, .. }
        | RuleError::InvalidRegex { line, .. }
        | RuleError::TermTooLong { line, .. }
        | RuleError::PhiMismatch { line, .. } => Some(*line).filter(|l| *l > 0),
    }
}

/// Load and validate a pack directory.
pub fn load_pack(path: &Path) -> Result<LanguagePack, PackError> {
    let fail = |problems| PackError {
        path: path.to_path_buf(),
        problems,
    };
    let manifest_path = path.join(MANIFEST);
    let manifest_src = fs::read_to_string(&manifest_path).map_err(|e| {
        fail(vec![PackProblem {
            resource: manifest_path.display().to_string(),
            line: None,
            message: e.to_string(),
        }])
    })?;
    let mut ld = Loader {
        root: path.to_path_buf(),
        problems: Vec::new(),
        digest_input: manifest_src.clone().into_bytes(),
    };

    let mut language = None;
    let mut version = String::from("0");
    let mut entries: Vec<ResourceEntry> = Vec::new();
    let mut coarse_map = CoarseMap::default();
    let mut age_groups = AgeGroupTable::default();
    for (idx, raw) in manifest_src.lines().enumerate() {
        let line = idx + 1;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let Some((key, value)) = text.split_once('=') else {
            ld.problem(MANIFEST, Some(line), format!("expected `key = value`, got `{text}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if key == "language" {
            language = Some(value.to_string());
        } else if key == "version" {
            version = value.to_string();
        } else if key == "age_groups" {
            match AgeGroupTable::parse(value) {
                Ok(t) => age_groups = t,
                Err(e) => ld.problem(MANIFEST, Some(line), e.to_string()),
            }
        } else if let Some(granular) = key.strip_prefix("taxonomy.") {
            let res = granular
                .parse::<EntityLabel>()
                .and_then(|g| value.parse::<EntityLabel>().map(|c| (g, c)))
                .and_then(|(g, c)| coarse_map.set(g, c));
            if let Err(e) = res {
                ld.problem(MANIFEST, Some(line), e.to_string());
            }
        } else if let Some(rest) = key.strip_prefix("resource.") {
            let Some((kind, name)) = rest.split_once('.') else {
                ld.problem(
                    MANIFEST,
                    Some(line),
                    format!("expected `resource.<kind>.<name>`, got `{key}`"),
                );
                continue;
            };
            let Some(kind) = ResourceKind::parse(kind) else {
                ld.problem(MANIFEST, Some(line), format!("unknown resource kind `{kind}`"));
                continue;
            };
            if entries.iter().any(|e| e.kind == kind && e.name == name) {
                ld.problem(MANIFEST, Some(line), format!("duplicate resource `{key}`"));
                continue;
            }
            entries.push(ResourceEntry {
                kind,
                name: name.to_string(),
                path: PathBuf::from(value),
                line,
            });
        } else {
            ld.problem(MANIFEST, Some(line), format!("unknown manifest key `{key}`"));
        }
    }
    let language = language.unwrap_or_else(|| {
        ld.problem(MANIFEST, None, "missing `language`");
        String::new()
    });

    let mut recognizers: Vec<Box<dyn Recognizer>> = Vec::new();
    let mut all_rules: Vec<ContextualRule> = Vec::new();
    let mut abbreviations = BTreeSet::new();
    let mut titles = Vec::new();
    let mut date_locale = None;
    let mut policy = None;
    let mut vocabularies = BTreeMap::new();
    let mut first_names: BTreeMap<String, (Gazetteer, SurrogateVocabulary)> = BTreeMap::new();
    let mut last_names: BTreeMap<String, (Gazetteer, SurrogateVocabulary)> = BTreeMap::new();
    let mut gazetteer_labels: BTreeMap<EntityLabel, String> = BTreeMap::new();

    for entry in &entries {
        let Some(src) = ld.read(entry) else { continue };
        let res = entry.path.display().to_string();
        match entry.kind {
            ResourceKind::Gazetteer => match Gazetteer::parse(&src) {
                Ok(g) => {
                    if let Some(prev) = gazetteer_labels.insert(g.label, entry.name.clone()) {
                        ld.problem(
                            res,
                            None,
                            format!("duplicate label {}: already provided by gazetteer `{prev}`", g.label),
                        );
                    } else {
                        recognizers.push(Box::new(GazetteerRecognizer::new(entry.name.clone(), g)));
                    }
                }
                Err(e) => ld.problem(res, None, e.to_string()),
            },
            ResourceKind::FirstNames | ResourceKind::LastNames => {
                match (Gazetteer::parse(&src), SurrogateVocabulary::parse(&src)) {
                    (Ok(g), Ok(v)) => {
                        let target = if entry.kind == ResourceKind::FirstNames {
                            &mut first_names
                        } else {
                            &mut last_names
                        };
                        target.insert(entry.name.clone(), (g, v));
                    }
                    (Err(e), _) => ld.problem(res, None, e.to_string()),
                    (_, Err(e)) => ld.problem(res, None, e.to_string()),
                }
            }
            ResourceKind::Rules => match compile_ruleset(&src, &language) {
                Ok(rs) => {
                    for r in rs.rules {
                        if all_rules.iter().any(|x| x.rule_id == r.rule_id) {
                            ld.problem(
                                res.clone(),
                                None,
                                format!("rule id `{}` defined in more than one file", r.rule_id),
                            );
                        } else {
                            all_rules.push(r);
                        }
                    }
                }
                Err(e) => ld.problem(res, rule_line(&e), e.to_string()),
            },
            ResourceKind::Patterns => match parse_patterns(&src) {
                Ok(ps) => recognizers.extend(ps.into_iter().map(|p| Box::new(p) as Box<dyn Recognizer>)),
                Err((line, msg)) => ld.problem(res, Some(line), msg),
            },
            ResourceKind::Abbreviations => abbreviations.extend(SentenceConfig::parse_abbreviations(&src)),
            ResourceKind::Titles => titles.extend(
                src.lines()
                    .map(|l| l.split('#').next().unwrap_or("").trim().to_string())
                    .filter(|l| !l.is_empty()),
            ),
            ResourceKind::Dates => {
                if date_locale.is_some() {
                    ld.problem(res, None, "only one date table per pack");
                    continue;
                }
                match DateLocale::parse(&language, &src) {
                    Ok(d) => date_locale = Some(d),
                    Err(e) => ld.problem(res, None, e.to_string()),
                }
            }
            ResourceKind::Vocab => match SurrogateVocabulary::parse(&src) {
                Ok(v) => match vocabularies.entry(v.label) {
                    Entry::Occupied(_) => ld.problem(res, None, format!("duplicate vocabulary for label {}", v.label)),
                    Entry::Vacant(slot) => {
                        slot.insert(v);
                    }
                },
                Err(e) => ld.problem(res, None, e.to_string()),
            },
            ResourceKind::Policy => {
                if policy.is_some() {
                    ld.problem(res, None, "only one merge policy per pack");
                    continue;
                }
                match MergePolicy::parse(&src) {
                    Ok(p) => policy = Some(p),
                    Err(e) => ld.problem(res, None, e.to_string()),
                }
            }
        }
    }

    let mut names = None;
    let keys: BTreeSet<String> = first_names.keys().chain(last_names.keys()).cloned().collect();
    for key in keys {
        match (first_names.remove(&key), last_names.remove(&key)) {
            (Some((fg, fv)), Some((lg, lv))) => {
                let label = fg.label;
                recognizers.push(Box::new(PersonNameRecognizer::new(key.clone(), label, fg, lg)));
                if names.is_none() {
                    match NameVocabulary::new(fv, lv) {
                        Ok(n) => names = Some(n),
                        Err(e) => ld.problem(format!("resource.*.{key}"), None, e.to_string()),
                    }
                }
            }
            _ => ld.problem(
                MANIFEST,
                None,
                format!("names `{key}` need both resource.first_names.{key} and resource.last_names.{key}"),
            ),
        }
    }

    let rules = match RuleSet::new(language.clone(), all_rules) {
        Ok(r) => r,
        Err(e) => {
            ld.problem(MANIFEST, None, e.to_string());
            RuleSet::default()
        }
    };

    if !ld.problems.is_empty() {
        return Err(fail(ld.problems));
    }
    let titles = TitleList::new(titles);
    let fingerprint = sha256_hex(&ld.digest_input);
    Ok(LanguagePack {
        language: language.clone(),
        version,
        root: path.to_path_buf(),
        manifest: entries,
        fingerprint,
        recognizers,
        rules,
        sentences: SentenceConfig {
            abbreviations: abbreviations.into_iter().collect(),
            ..SentenceConfig::default()
        },
        date_locale: date_locale.unwrap_or_else(|| DateLocale {
            code: language,
            ..DateLocale::english()
        }),
        faker: Faker {
            names,
            vocabularies,
            titles,
            dictionary: Default::default(),
        },
        merge_policy: policy.unwrap_or_default(),
        coarse_map,
        age_groups,
    })
}

/// Language codes of the packs under `dir`: every subdirectory holding a
/// manifest, sorted.
pub fn list_supported(dir: &Path) -> Vec<String> {
    let Ok(read) = fs::read_dir(dir) else { return Vec::new() };
    let mut out: Vec<String> = read
        .filter_map(Result::ok)
        .filter(|e| e.path().join(MANIFEST).is_file())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .collect();
    out.sort();
    out
}

/// Directory of the packs shipped with this crate.
pub fn bundled_packs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("packs")
}

/// Parse a comma-separated label list.
pub fn parse_labels(s: &str) -> Result<Vec<EntityLabel>, crate::model::ModelError> {
    parse_list(s).iter().map(|l| l.parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, content: &str) {
        let p = dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).unwrap();
        }
        fs::write(p, content).unwrap();
    }

    #[test]
    fn minimal_pack_loads() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "manifest.txt", "language = xx\nresource.gazetteer.city = city.txt\nresource.dates.core = dates.txt\nresource.rules.core = rules.txt\n");
        write(dir.path(), "city.txt", "label=City;case_sensitive=false\nSpringfield\n");
        write(dir.path(), "dates.txt", "order = DMY\n");
        write(dir.path(), "rules.txt", "# none\n");
        let pack = load_pack(dir.path()).unwrap();
        assert_eq!(pack.language, "xx");
        assert_eq!(pack.recognizer_ids(), vec!["city"]);
        assert!(pack.rules.is_empty());
        assert_eq!(pack, load_pack(dir.path()).unwrap());
    }

    #[test]
    fn every_problem_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "manifest.txt",
            "language = xx\nresource.gazetteer.city = missing.txt\nresource.rules.core = rules.txt\nresource.bogus.x = y\nresource.patterns.p = ../escape.txt\n",
        );
        write(dir.path(), "rules.txt", "rule r1 label=City core=/(/\n");
        let err = load_pack(dir.path()).unwrap_err();
        assert_eq!(err.problems.len(), 4, "{err}");
        let text = err.to_string();
        assert!(text.contains("resource.gazetteer.city"), "{text}");
        assert!(text.contains("rules.txt:1"), "{text}");
    }

    #[test]
    fn supported_languages() {
        let dir = tempfile::tempdir().unwrap();
        assert!(list_supported(dir.path()).is_empty());
        write(dir.path(), "es/manifest.txt", "language = es\n");
        write(dir.path(), "en/manifest.txt", "language = en\n");
        fs::create_dir_all(dir.path().join("notapack")).unwrap();
        assert_eq!(list_supported(dir.path()), vec!["en", "es"]);
        assert!(list_supported(&dir.path().join("nope")).is_empty());
    }

    #[test]
    fn pattern_file() {
        let ps = parse_patterns("pattern ssn label=ID core=/\\d{3}-\\d{2}-\\d{4}/ confidence=0.9\n").unwrap();
        assert_eq!(ps[0].pattern(), r"\d{3}-\d{2}-\d{4}");
        assert!(parse_patterns("pattern a label=City core=/x/\npattern a label=City core=/y/\n").is_err());
    }
}
