//! Consistent surrogate generation.
//!
//! Every draw is keyed by a hash of (patient seed, what is being replaced),
//! so the same original always maps to the same surrogate for a patient, in
//! any document and in any processing order, while different patients get
//! independent draws. The per-patient maps record what was handed out so
//! that user overrides can be folded back in.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EntityChunk, EntityLabel};
use crate::recognize::parse_header;
use crate::seeding::{derive_seed, rng_for};
use crate::text::{char_len, fold, normalize};

/// Candidates considered in free length mode: the nearest few by edit distance.
const FREE_MODE_POOL: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FakerError {
    #[error("no surrogate vocabulary for label {0}")]
    MissingVocabulary(EntityLabel),
    #[error("surrogate vocabulary for {label} has no usable entries{detail}")]
    EmptyVocabulary { label: EntityLabel, detail: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid age groups: {0}")]
    AgeGroups(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Feminine,
    Masculine,
    Unknown,
}

impl Gender {
    fn parse(s: &str) -> Option<Gender> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f" | "female" | "feminine" => Some(Gender::Feminine),
            "m" | "male" | "masculine" => Some(Gender::Masculine),
            "" | "-" | "u" | "unknown" => Some(Gender::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NameComponent {
    First,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LengthMode {
    Free,
    SameLength,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub text: String,
    pub gender: Gender,
    pub locale: String,
}

/// Surrogate values for one label, bucketed by character length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurrogateVocabulary {
    pub label: EntityLabel,
    pub component: Option<NameComponent>,
    entries: Vec<VocabEntry>,
    buckets: BTreeMap<usize, Vec<usize>>,
    by_key: HashMap<String, usize>,
}

impl SurrogateVocabulary {
    pub fn new(label: EntityLabel, entries: Vec<VocabEntry>) -> Result<Self, FakerError> {
        let entries: Vec<VocabEntry> = entries.into_iter().filter(|e| !e.text.trim().is_empty()).collect();
        if entries.is_empty() {
            return Err(FakerError::EmptyVocabulary {
                label,
                detail: String::new(),
            });
        }
        let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut by_key = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            buckets.entry(char_len(&e.text)).or_default().push(i);
            by_key.entry(normalize(&e.text, false)).or_insert(i);
        }
        Ok(SurrogateVocabulary {
            label,
            component: None,
            entries,
            buckets,
            by_key,
        })
    }

    /// Convenience constructor for untagged entries.
    pub fn from_strings<I, S>(label: EntityLabel, items: I) -> Result<Self, FakerError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self::new(
            label,
            items
                .into_iter()
                .map(|s| VocabEntry {
                    text: s.as_ref().to_string(),
                    gender: Gender::Unknown,
                    locale: String::new(),
                })
                .collect(),
        )
    }

    /// Parse a vocabulary file: a `label=<Label>[;component=first|last]`
    /// header, then `entry<TAB>gender<TAB>locale` rows (gender and locale
    /// optional).
    pub fn parse(source: &str) -> Result<Self, FakerError> {
        let mut rows = source
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hline, header) = rows.next().ok_or(FakerError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let h = parse_header(header, hline).map_err(|e| FakerError::Parse {
            line: hline,
            message: e.to_string(),
        })?;
        let label = h.label.ok_or(FakerError::Parse {
            line: hline,
            message: "header lacks `label=`".into(),
        })?;
        let component = match h.component.as_deref() {
            None => None,
            Some("first") => Some(NameComponent::First),
            Some("last") => Some(NameComponent::Last),
            Some(other) => {
                return Err(FakerError::Parse {
                    line: hline,
                    message: format!("unknown component `{other}`"),
                })
            }
        };
        let mut entries = Vec::new();
        for (line, row) in rows {
            let mut cols = row.split('\t');
            let text = cols.next().unwrap_or("").trim().to_string();
            let gender_col = cols.next().unwrap_or("");
            let gender = Gender::parse(gender_col).ok_or_else(|| FakerError::Parse {
                line,
                message: format!("unknown gender `{gender_col}`"),
            })?;
            let locale = cols.next().unwrap_or("").trim().to_string();
            entries.push(VocabEntry { text, gender, locale });
        }
        let mut v = Self::new(label, entries)?;
        v.component = component;
        Ok(v)
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry indices whose text has exactly `len` characters.
    pub fn bucket(&self, len: usize) -> &[usize] {
        self.buckets.get(&len).map_or(&[], Vec::as_slice)
    }

    pub fn buckets(&self) -> &BTreeMap<usize, Vec<usize>> {
        &self.buckets
    }

    pub fn lookup(&self, text: &str) -> Option<&VocabEntry> {
        self.by_key.get(&normalize(text, false)).map(|&i| &self.entries[i])
    }

    fn count_gender(&self, g: Gender) -> usize {
        self.entries.iter().filter(|e| e.gender == g).count()
    }
}

/// First- and last-name vocabularies used for person names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameVocabulary {
    pub first: SurrogateVocabulary,
    pub last: SurrogateVocabulary,
}

impl NameVocabulary {
    /// Both genders need at least two first names, and there must be at
    /// least two surnames, so a surrogate different from any original exists.
    pub fn new(first: SurrogateVocabulary, last: SurrogateVocabulary) -> Result<Self, FakerError> {
        for g in [Gender::Feminine, Gender::Masculine] {
            if first.count_gender(g) < 2 {
                return Err(FakerError::EmptyVocabulary {
                    label: first.label,
                    detail: format!(" for gender {g:?} (need at least 2 first names)"),
                });
            }
        }
        if last.len() < 2 {
            return Err(FakerError::EmptyVocabulary {
                label: last.label,
                detail: " (need at least 2 surnames)".into(),
            });
        }
        Ok(NameVocabulary { first, last })
    }

    fn component(&self, c: NameComponent) -> &SurrogateVocabulary {
        match c {
            NameComponent::First => &self.first,
            NameComponent::Last => &self.last,
        }
    }

    /// Gender tag of a known first name.
    pub fn gender_of(&self, first_name: &str) -> Gender {
        self.first.lookup(first_name).map_or(Gender::Unknown, |e| e.gender)
    }
}

/// Age groups given by their lower bounds; the last group is open-ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeGroupTable {
    starts: Vec<u32>,
}

impl Default for AgeGroupTable {
    fn default() -> Self {
        AgeGroupTable {
            starts: vec![0, 5, 13, 20, 40, 60, 80],
        }
    }
}

impl AgeGroupTable {
    pub fn new(starts: Vec<u32>) -> Result<Self, FakerError> {
        if starts.first() != Some(&0) {
            return Err(FakerError::AgeGroups("the first group must start at 0".into()));
        }
        if starts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FakerError::AgeGroups(
                "group boundaries must be strictly increasing".into(),
            ));
        }
        Ok(AgeGroupTable { starts })
    }

    /// Parse `0,5,13,20,40,60,80`.
    pub fn parse(s: &str) -> Result<Self, FakerError> {
        let starts = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| FakerError::AgeGroups(format!("bad boundary `{p}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(starts)
    }

    /// Inclusive bounds of the group holding `age`; `None` upper bound for
    /// the open last group.
    pub fn group(&self, age: u32) -> (u32, Option<u32>) {
        let i = self.starts.partition_point(|&s| s <= age) - 1;
        (self.starts[i], self.starts.get(i + 1).map(|next| next - 1))
    }

    pub fn group_index(&self, age: u32) -> usize {
        self.starts.partition_point(|&s| s <= age) - 1
    }
}

/// Per-patient obfuscation state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientContext {
    pub patient_id: String,
    pub seed: u64,
    pub day_shift: i64,
    pub age_table: AgeGroupTable,
    pub name_map: BTreeMap<(NameComponent, String), String>,
    pub value_map: BTreeMap<(EntityLabel, String), String>,
}

impl PatientContext {
    pub fn new(patient_id: impl Into<String>, global_seed: u64, day_shift: i64, age_table: AgeGroupTable) -> Self {
        let patient_id = patient_id.into();
        let seed = derive_seed(global_seed, "patient", &patient_id);
        PatientContext {
            patient_id,
            seed,
            day_shift,
            age_table,
            name_map: BTreeMap::new(),
            value_map: BTreeMap::new(),
        }
    }

    pub fn rng(&self, domain: &str, key: &str) -> ChaCha8Rng {
        rng_for(self.seed, domain, key)
    }

    /// Surrogate already assigned to a name component.
    pub fn name_surrogate(&self, component: NameComponent, original: &str) -> Option<&str> {
        self.name_map.get(&(component, name_key(original))).map(String::as_str)
    }
}

fn name_key(word: &str) -> String {
    normalize(word, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Case {
    Upper,
    Lower,
    Mixed,
}

fn case_of(s: &str) -> Case {
    let letters: Vec<char> = s.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        Case::Upper
    } else if !letters.is_empty() && letters.iter().all(|c| c.is_lowercase()) {
        Case::Lower
    } else {
        Case::Mixed
    }
}

fn with_case(s: &str, case: Case) -> String {
    match case {
        Case::Upper => s.to_uppercase(),
        Case::Lower => s.to_lowercase(),
        Case::Mixed => s.to_string(),
    }
}

/// Force `s` to exactly `len` characters by trimming or repeating its last
/// character.
fn fit_length(s: &str, len: usize) -> String {
    let mut out: String = s.chars().take(len).collect();
    let last = s.chars().last().unwrap_or('x');
    while char_len(&out) < len {
        out.push(last);
    }
    out
}

/// Choose a surrogate for `original` among the vocabulary entries accepted
/// by `admit`. Never returns the original itself.
fn choose(
    vocab: &SurrogateVocabulary,
    original: &str,
    admit: &dyn Fn(&VocabEntry) -> bool,
    length_mode: LengthMode,
    rng: &mut ChaCha8Rng,
) -> Result<String, FakerError> {
    let orig_key = normalize(original, false);
    let usable = |i: &usize| {
        let e = &vocab.entries[*i];
        admit(e) && normalize(&e.text, false) != orig_key
    };
    let empty = || FakerError::EmptyVocabulary {
        label: vocab.label,
        detail: String::new(),
    };

    if length_mode == LengthMode::SameLength {
        let target = char_len(original);
        let same: Vec<usize> = vocab.bucket(target).iter().copied().filter(usable).collect();
        if let Some(&i) = same.choose(rng) {
            return Ok(vocab.entries[i].text.clone());
        }
        // no entry of the right length: nearest by edit distance, then forced to length
        let mut scored: Vec<(usize, usize)> = (0..vocab.entries.len())
            .filter(usable)
            .map(|i| (strsim::levenshtein(&vocab.entries[i].text, original), i))
            .collect();
        scored.sort_unstable();
        let best = scored.first().map(|s| s.0).ok_or_else(empty)?;
        let mut nearest: Vec<usize> = scored.iter().take_while(|s| s.0 == best).map(|s| s.1).collect();
        nearest.shuffle(rng);
        // later candidates only matter if fitting one collides with the original
        for i in nearest.into_iter().chain(scored.iter().map(|s| s.1)) {
            let fitted = fit_length(&vocab.entries[i].text, target);
            if normalize(&fitted, false) != orig_key {
                return Ok(fitted);
            }
        }
        return Err(empty());
    }

    let mut scored: Vec<(usize, usize)> = (0..vocab.entries.len())
        .filter(usable)
        .map(|i| (strsim::levenshtein(&vocab.entries[i].text, original), i))
        .collect();
    scored.sort_unstable();
    scored.truncate(FREE_MODE_POOL);
    scored
        .choose(rng)
        .map(|&(_, i)| vocab.entries[i].text.clone())
        .ok_or_else(empty)
}

/// Titles such as `Dr.` at the start of a name, longest first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TitleList {
    titles: Vec<String>,
}

impl TitleList {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(titles: I) -> Self {
        let mut titles: Vec<String> = titles
            .into_iter()
            .map(|t| t.as_ref().trim().to_string())
            .filter(|t| !t.is_empty())
            .collect();
        titles.sort_by(|a, b| char_len(b).cmp(&char_len(a)).then(a.cmp(b)));
        titles.dedup();
        TitleList { titles }
    }

    pub fn parse(source: &str) -> Self {
        Self::new(source.lines().map(|l| l.split('#').next().unwrap_or("").trim()))
    }

    /// Split a leading title (with the whitespace after it) from the name.
    pub fn split<'a>(&self, name: &'a str) -> (&'a str, &'a str) {
        let folded = fold(name);
        for t in &self.titles {
            let ft = fold(t);
            if folded.starts_with(&ft) {
                let byte = name.char_indices().nth(char_len(t)).map_or(name.len(), |(b, _)| b);
                let rest = &name[byte..];
                if rest.starts_with(char::is_whitespace) {
                    let trimmed = rest.trim_start();
                    let cut = name.len() - trimmed.len();
                    return (&name[..cut], trimmed);
                }
            }
        }
        ("", name)
    }
}

static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\S+").unwrap());

/// Replace a person name component-wise, reusing earlier assignments for the
/// same patient. Titles are kept as written.
pub fn fake_name(
    original: &str,
    ctx: &mut PatientContext,
    gender: Gender,
    vocab: &NameVocabulary,
    titles: &TitleList,
    length_mode: LengthMode,
) -> Result<String, FakerError> {
    let (title, rest) = titles.split(original);
    let words: Vec<regex::Match> = WORD.find_iter(rest).collect();
    if words.is_empty() {
        return Ok(original.to_string());
    }
    let roles = name_roles(&words.iter().map(|m| m.as_str()).collect::<Vec<_>>(), ctx, vocab);

    let gender = if gender != Gender::Unknown {
        gender
    } else {
        words
            .iter()
            .zip(&roles)
            .filter(|(_, r)| **r == NameComponent::First)
            .map(|(w, _)| vocab.gender_of(w.as_str()))
            .find(|g| *g != Gender::Unknown)
            .unwrap_or(Gender::Unknown)
    };

    let mut out = String::with_capacity(original.len());
    out.push_str(title);
    let mut last = 0;
    for (m, role) in words.iter().zip(&roles) {
        out.push_str(&rest[last..m.start()]);
        let word = m.as_str();
        let key = (*role, name_key(word));
        let surrogate = match ctx.name_map.get(&key) {
            Some(s) => s.clone(),
            None => {
                let comp_vocab = vocab.component(*role);
                let admit =
                    |e: &VocabEntry| *role == NameComponent::Last || gender == Gender::Unknown || e.gender == gender;
                let mut rng = ctx.rng(
                    match role {
                        NameComponent::First => "name:first",
                        NameComponent::Last => "name:last",
                    },
                    &key.1,
                );
                let s = choose(comp_vocab, word, &admit, length_mode, &mut rng)?;
                ctx.name_map.insert(key, s.clone());
                s
            }
        };
        out.push_str(&with_case(&surrogate, case_of(word)));
        last = m.end();
    }
    out.push_str(&rest[last..]);
    Ok(out)
}

/// First word of a multi-word name is a first name, the last word a surname,
/// anything between a middle (first) name. A single word is a first name if
/// it has been used as one for this patient or is a known first name.
fn name_roles(words: &[&str], ctx: &PatientContext, vocab: &NameVocabulary) -> Vec<NameComponent> {
    match words.len() {
        0 => vec![],
        1 => {
            let key = name_key(words[0]);
            let role = if ctx.name_map.contains_key(&(NameComponent::First, key.clone())) {
                NameComponent::First
            } else if ctx.name_map.contains_key(&(NameComponent::Last, key)) {
                NameComponent::Last
            } else if vocab.first.lookup(words[0]).is_some() {
                NameComponent::First
            } else {
                NameComponent::Last
            };
            vec![role]
        }
        n => {
            let mut roles = vec![NameComponent::First; n];
            roles[n - 1] = NameComponent::Last;
            roles
        }
    }
}

/// A different age in the same age group, stable per (patient, age).
/// Singleton groups return the age unchanged.
pub fn fake_age(age: u32, table: &AgeGroupTable, ctx: &PatientContext) -> u32 {
    fake_age_with(age, table, ctx, false)
}

/// As [`fake_age`]; with `same_digits`, prefers values with as many digits
/// as the original so the surface length is kept.
pub fn fake_age_with(age: u32, table: &AgeGroupTable, ctx: &PatientContext, same_digits: bool) -> u32 {
    let (lo, hi) = table.group(age);
    let hi = hi.unwrap_or_else(|| (lo + 19).max(age + 10));
    let mut candidates: Vec<u32> = (lo..=hi).filter(|&a| a != age).collect();
    if candidates.is_empty() {
        return age;
    }
    if same_digits {
        let digits = |n: u32| n.to_string().len();
        let same: Vec<u32> = candidates
            .iter()
            .copied()
            .filter(|&a| digits(a) == digits(age))
            .collect();
        if !same.is_empty() {
            candidates = same;
        }
    }
    let mut rng = ctx.rng("age", &age.to_string());
    candidates[rng.gen_range(0..candidates.len())]
}

static DIGITS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());

/// Replace the first number in an age expression (`48-year-old`, `78 y.o.`).
/// `None` when the text holds no number.
pub fn fake_age_text(text: &str, ctx: &PatientContext, length_mode: LengthMode) -> Option<String> {
    let m = DIGITS.find(text)?;
    let age: u32 = m.as_str().parse().ok()?;
    let fake = fake_age_with(age, &ctx.age_table, ctx, length_mode == LengthMode::SameLength);
    let mut digits = fake.to_string();
    if length_mode == LengthMode::SameLength && digits.len() < m.len() {
        digits = format!("{fake:0>width$}", width = m.len());
    }
    Some(format!("{}{}{}", &text[..m.start()], digits, &text[m.end()..]))
}

/// Surrogate for a non-name chunk from its label's vocabulary, consistent
/// per patient.
pub fn pick_surrogate(
    chunk: &EntityChunk,
    vocab: &SurrogateVocabulary,
    ctx: &mut PatientContext,
    length_mode: LengthMode,
) -> Result<String, FakerError> {
    let key = (chunk.label, normalize(&chunk.text, false));
    if let Some(s) = ctx.value_map.get(&key) {
        return Ok(s.clone());
    }
    let mut rng = ctx.rng(&format!("value:{}", chunk.label), &key.1);
    let s = choose(vocab, &chunk.text, &|_| true, length_mode, &mut rng)?;
    let s = with_case(&s, case_of(&chunk.text));
    ctx.value_map.insert(key, s.clone());
    Ok(s)
}

/// Format-preserving random replacement for identifiers without a
/// vocabulary: digits stay digits, letters stay letters of the same case,
/// everything else is kept.
pub fn scramble(text: &str, label: EntityLabel, ctx: &PatientContext) -> String {
    if !text.chars().any(|c| c.is_ascii_alphanumeric()) {
        return "*".repeat(char_len(text));
    }
    let key = normalize(text, true);
    for attempt in 0u32.. {
        let mut rng = ctx.rng(&format!("scramble:{label}:{attempt}"), &key);
        let out: String = text
            .chars()
            .map(|c| match c {
                '0'..='9' => char::from(b'0' + rng.gen_range(0..10u8)),
                'a'..='z' => char::from(b'a' + rng.gen_range(0..26u8)),
                'A'..='Z' => char::from(b'A' + rng.gen_range(0..26u8)),
                other => other,
            })
            .collect();
        if out != text {
            return out;
        }
    }
    unreachable!("an alphanumeric string always has a distinct scramble")
}

/// User-supplied replacements. Keys are matched case-insensitively; a
/// label-specific entry wins over a label-free one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserDictionary {
    by_label: HashMap<(EntityLabel, String), String>,
    any: HashMap<String, String>,
}

impl UserDictionary {
    pub fn insert(&mut self, label: Option<EntityLabel>, original: &str, replacement: &str) {
        let key = normalize(original, false);
        match label {
            Some(l) => self.by_label.insert((l, key), replacement.to_string()),
            None => self.any.insert(key, replacement.to_string()),
        };
    }

    pub fn is_empty(&self) -> bool {
        self.by_label.is_empty() && self.any.is_empty()
    }

    /// Rows `original<TAB>replacement` or `label<TAB>original<TAB>replacement`.
    pub fn parse(source: &str) -> Result<Self, FakerError> {
        let mut d = UserDictionary::default();
        for (idx, row) in source.lines().enumerate() {
            if row.trim().is_empty() || row.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = row.split('\t').collect();
            let err = |message: String| FakerError::Parse { line: idx + 1, message };
            match cols.as_slice() {
                [orig, repl] if !repl.trim().is_empty() => d.insert(None, orig, repl.trim()),
                [label, orig, repl] if !repl.trim().is_empty() => {
                    let label = label.parse::<EntityLabel>().map_err(|e| err(e.to_string()))?;
                    d.insert(Some(label), orig, repl.trim());
                }
                _ => {
                    return Err(err(
                        "expected 2 or 3 tab-separated columns with a non-empty replacement".into(),
                    ))
                }
            }
        }
        Ok(d)
    }
}

pub fn lookup_override(chunk: &EntityChunk, dictionary: &UserDictionary) -> Option<String> {
    let key = normalize(&chunk.text, false);
    dictionary
        .by_label
        .get(&(chunk.label, key.clone()))
        .or_else(|| dictionary.any.get(&key))
        .cloned()
}

/// Labels replaced through the person-name machinery.
pub fn is_person_label(label: EntityLabel) -> bool {
    matches!(label, EntityLabel::Patient | EntityLabel::Doctor | EntityLabel::Name)
}

/// Record a dictionary replacement in the patient's maps so that later
/// generated surrogates agree with it (a dictionary entry for "Jane Doe"
/// also fixes what a bare "Jane" becomes).
pub fn record_override(
    chunk: &EntityChunk,
    replacement: &str,
    ctx: &mut PatientContext,
    vocab: Option<&NameVocabulary>,
    titles: &TitleList,
) {
    if is_person_label(chunk.label) {
        let (_, orig) = titles.split(&chunk.text);
        let (_, repl) = titles.split(replacement);
        let ow: Vec<&str> = orig.split_whitespace().collect();
        let rw: Vec<&str> = repl.split_whitespace().collect();
        if ow.len() == rw.len() && !ow.is_empty() {
            let roles = match vocab {
                Some(v) => name_roles(&ow, ctx, v),
                None if ow.len() == 1 => vec![NameComponent::First],
                None => {
                    let mut r = vec![NameComponent::First; ow.len()];
                    r[ow.len() - 1] = NameComponent::Last;
                    r
                }
            };
            for ((o, r), role) in ow.iter().zip(&rw).zip(roles) {
                ctx.name_map.insert((role, name_key(o)), r.to_string());
            }
        }
    } else {
        ctx.value_map
            .insert((chunk.label, normalize(&chunk.text, false)), replacement.to_string());
    }
}

/// Everything needed to obfuscate non-date chunks for one language.
#[derive(Debug, Clone, Default)]
pub struct Faker {
    pub names: Option<NameVocabulary>,
    pub vocabularies: BTreeMap<EntityLabel, SurrogateVocabulary>,
    pub titles: TitleList,
    pub dictionary: UserDictionary,
}

impl Faker {
    /// Surrogate for any non-date chunk. Dictionary entries win; person
    /// names go through [`fake_name`], ages through [`fake_age_text`], labels
    /// with a vocabulary through [`pick_surrogate`], the rest are scrambled.
    pub fn surrogate(
        &self,
        chunk: &EntityChunk,
        ctx: &mut PatientContext,
        gender: Gender,
        length_mode: LengthMode,
    ) -> Result<String, FakerError> {
        if let Some(r) = lookup_override(chunk, &self.dictionary) {
            record_override(chunk, &r, ctx, self.names.as_ref(), &self.titles);
            return Ok(r);
        }
        if is_person_label(chunk.label) {
            if let Some(names) = &self.names {
                return fake_name(&chunk.text, ctx, gender, names, &self.titles, length_mode);
            }
        }
        if chunk.label == EntityLabel::Age {
            if let Some(s) = fake_age_text(&chunk.text, ctx, length_mode) {
                return Ok(s);
            }
        }
        match self.vocabularies.get(&chunk.label) {
            Some(v) => pick_surrogate(chunk, v, ctx, length_mode),
            None => Ok(scramble(&chunk.text, chunk.label, ctx)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Source, Span};

    fn entry(text: &str, gender: Gender) -> VocabEntry {
        VocabEntry {
            text: text.into(),
            gender,
            locale: "en".into(),
        }
    }

    fn names() -> NameVocabulary {
        use Gender::*;
        let first = SurrogateVocabulary::new(
            EntityLabel::Patient,
            vec![
                entry("Jane", Feminine),
                entry("Nancy", Feminine),
                entry("Mary", Feminine),
                entry("Jen", Feminine),
                entry("Gina", Feminine),
                entry("John", Masculine),
                entry("Paul", Masculine),
                entry("Mark", Masculine),
            ],
        )
        .unwrap();
        let last = SurrogateVocabulary::from_strings(EntityLabel::Patient, ["Doe", "Smith", "Brown", "Lee"]).unwrap();
        NameVocabulary::new(first, last).unwrap()
    }

    fn ctx(id: &str) -> PatientContext {
        PatientContext::new(id, 42, 0, AgeGroupTable::default())
    }

    fn chunk(text: &str, label: EntityLabel) -> EntityChunk {
        EntityChunk {
            span: Span::new(0, char_len(text)),
            label,
            text: text.into(),
            source: Source::recognizer("t"),
            confidence: 1.0,
        }
    }

    #[test]
    fn full_name_then_bare_first_name() {
        let v = names();
        let mut c = ctx("patient-1");
        let titles = TitleList::default();
        let full = fake_name("Jane Doe", &mut c, Gender::Unknown, &v, &titles, LengthMode::Free).unwrap();
        let bare = fake_name("Jane", &mut c, Gender::Unknown, &v, &titles, LengthMode::Free).unwrap();
        assert_eq!(full.split(' ').next().unwrap(), bare);
        assert_ne!(bare, "Jane");
        assert_eq!(v.gender_of(&bare), Gender::Feminine);
        assert_ne!(full.split(' ').nth(1).unwrap(), "Doe");
    }

    #[test]
    fn patients_do_not_share_maps() {
        let v = names();
        let titles = TitleList::default();
        let mut p1 = ctx("patient-1");
        let alone = fake_name("Jane", &mut p1, Gender::Unknown, &v, &titles, LengthMode::Free).unwrap();
        let mut p1b = ctx("patient-1");
        let mut p2 = ctx("patient-2");
        fake_name("Jane", &mut p2, Gender::Unknown, &v, &titles, LengthMode::Free).unwrap();
        let after = fake_name("Jane", &mut p1b, Gender::Unknown, &v, &titles, LengthMode::Free).unwrap();
        assert_eq!(alone, after);
        assert!(p2.name_map.keys().all(|k| p1b.name_map.contains_key(k)));
    }

    #[test]
    fn titles_and_case_survive() {
        let v = names();
        let titles = TitleList::new(["Dr.", "Mrs."]);
        let mut c = ctx("p");
        let out = fake_name("Dr. Doe", &mut c, Gender::Unknown, &v, &titles, LengthMode::Free).unwrap();
        assert!(out.starts_with("Dr. "));
        assert_eq!(c.name_surrogate(NameComponent::Last, "doe").unwrap(), &out[4..]);
        let up = fake_name("JANE", &mut c, Gender::Unknown, &v, &titles, LengthMode::Free).unwrap();
        assert_eq!(up, up.to_uppercase());
    }

    #[test]
    fn same_length_names() {
        let v = names();
        let mut c = ctx("p");
        let out = fake_name(
            "Jane Doe",
            &mut c,
            Gender::Feminine,
            &v,
            &TitleList::default(),
            LengthMode::SameLength,
        )
        .unwrap();
        assert_eq!(char_len(&out), 8);
    }

    #[test]
    fn missing_gender_is_a_load_error() {
        let first = SurrogateVocabulary::new(
            EntityLabel::Patient,
            vec![
                entry("Jane", Gender::Feminine),
                entry("Mary", Gender::Feminine),
                entry("John", Gender::Masculine),
            ],
        )
        .unwrap();
        let last = SurrogateVocabulary::from_strings(EntityLabel::Patient, ["Doe", "Lee"]).unwrap();
        assert!(matches!(
            NameVocabulary::new(first, last),
            Err(FakerError::EmptyVocabulary { .. })
        ));
        assert!(SurrogateVocabulary::from_strings(EntityLabel::City, Vec::<&str>::new()).is_err());
    }

    #[test]
    fn age_stays_in_group() {
        let c = ctx("p");
        let t = AgeGroupTable::default();
        let a = fake_age(78, &t, &c);
        assert!((60..=79).contains(&a) && a != 78);
        assert_eq!(fake_age(78, &t, &c), a);
        let single = AgeGroupTable::new(vec![0, 1, 5]).unwrap();
        assert_eq!(fake_age(0, &single, &c), 0);
        assert_eq!(t.group(4), (0, Some(4)));
        assert_eq!(t.group(80), (80, None));
        assert!(AgeGroupTable::new(vec![1, 5]).is_err());
        assert!(AgeGroupTable::new(vec![0, 5, 5]).is_err());
        assert_eq!(AgeGroupTable::parse("0, 5,13,20,40,60,80").unwrap(), t);
    }

    #[test]
    fn age_text_keeps_surface() {
        let c = ctx("p");
        let out = fake_age_text("48-year-old", &c, LengthMode::SameLength).unwrap();
        assert_eq!(char_len(&out), 11);
        assert!(out.ends_with("-year-old"));
        let n: u32 = out[..2].parse().unwrap();
        assert!((40..=59).contains(&n) && n != 48);
        assert!(fake_age_text("forty", &c, LengthMode::Free).is_none());
    }

    #[test]
    fn same_length_pick_falls_back_to_nearest() {
        let cities = SurrogateVocabulary::from_strings(EntityLabel::City, ["Fresno", "Austin", "Memphis"]).unwrap();
        assert_eq!(cities.bucket(6).len(), 2);
        let mut c = ctx("p");
        let out = pick_surrogate(
            &chunk("Memphis", EntityLabel::City),
            &cities,
            &mut c,
            LengthMode::SameLength,
        )
        .unwrap();
        assert_eq!(char_len(&out), 7);
        assert!(out.starts_with("Fresno") || out.starts_with("Austin"));
        // consistent on repeat
        let again = pick_surrogate(
            &chunk("memphis", EntityLabel::City),
            &cities,
            &mut c,
            LengthMode::SameLength,
        )
        .unwrap();
        assert_eq!(again.to_lowercase(), out.to_lowercase());
    }

    #[test]
    fn surrogate_never_equals_original() {
        let v = SurrogateVocabulary::from_strings(EntityLabel::City, ["Memphis", "Boston"]).unwrap();
        for seed in 0..50 {
            let mut c = PatientContext::new("p", seed, 0, AgeGroupTable::default());
            let out = pick_surrogate(&chunk("Memphis", EntityLabel::City), &v, &mut c, LengthMode::Free).unwrap();
            assert_eq!(out, "Boston");
        }
        let only = SurrogateVocabulary::from_strings(EntityLabel::City, ["Memphis"]).unwrap();
        let mut c = ctx("p");
        assert!(pick_surrogate(&chunk("Memphis", EntityLabel::City), &only, &mut c, LengthMode::Free).is_err());
    }

    #[test]
    fn dictionary_overrides() {
        let mut d = UserDictionary::default();
        assert!(lookup_override(&chunk("Memphis", EntityLabel::City), &d).is_none());
        d.insert(None, "Memphis", "Springfield");
        assert_eq!(
            lookup_override(&chunk("Memphis", EntityLabel::City), &d).as_deref(),
            Some("Springfield")
        );
        let parsed = UserDictionary::parse("Memphis\tSpringfield\nPatient\tJane Doe\tAnn Lee\n").unwrap();
        assert_eq!(
            lookup_override(&chunk("Jane Doe", EntityLabel::Patient), &parsed).as_deref(),
            Some("Ann Lee")
        );
        assert!(lookup_override(&chunk("Jane Doe", EntityLabel::Doctor), &parsed).is_none());
        assert!(UserDictionary::parse("one-column\n").is_err());
    }

    #[test]
    fn dictionary_updates_name_map() {
        let v = names();
        let mut faker = Faker {
            names: Some(v.clone()),
            ..Faker::default()
        };
        faker.dictionary.insert(None, "Jane Doe", "Ann Lee");
        let mut c = ctx("p");
        // an earlier generated surrogate is overwritten by the dictionary
        fake_name("Jane", &mut c, Gender::Unknown, &v, &faker.titles, LengthMode::Free).unwrap();
        let out = faker
            .surrogate(
                &chunk("Jane Doe", EntityLabel::Patient),
                &mut c,
                Gender::Unknown,
                LengthMode::Free,
            )
            .unwrap();
        assert_eq!(out, "Ann Lee");
        let bare = fake_name("Jane", &mut c, Gender::Unknown, &v, &faker.titles, LengthMode::Free).unwrap();
        assert_eq!(bare, "Ann");
        let last = fake_name("Doe", &mut c, Gender::Unknown, &v, &faker.titles, LengthMode::Free).unwrap();
        assert_eq!(last, "Lee");
    }

    #[test]
    fn scramble_preserves_shape() {
        let c = ctx("p");
        let s = scramble("123-45-6789", EntityLabel::Id, &c);
        assert_eq!(s.len(), 11);
        assert_ne!(s, "123-45-6789");
        assert!(s
            .chars()
            .zip("123-45-6789".chars())
            .all(|(a, b)| a.is_ascii_digit() == b.is_ascii_digit()));
        assert_eq!(scramble("123-45-6789", EntityLabel::Id, &c), s);
        assert_eq!(scramble("--", EntityLabel::Id, &c), "**");
    }

    #[test]
    fn vocab_file_parsing() {
        let v = SurrogateVocabulary::parse("label=Patient;component=first\nJane\tF\ten\nJohn\tM\ten\nAlex\n").unwrap();
        assert_eq!(v.component, Some(NameComponent::First));
        assert_eq!(v.lookup("jane").unwrap().gender, Gender::Feminine);
        assert_eq!(v.lookup("Alex").unwrap().gender, Gender::Unknown);
        assert!(SurrogateVocabulary::parse("label=Patient\nJane\tX\n").is_err());
        let total: usize = v.buckets().values().map(Vec::len).sum();
        assert_eq!(total, v.len());
    }

    #[test]
    fn title_split() {
        let t = TitleList::new(["Dr.", "Dr", "Mrs."]);
        assert_eq!(t.split("Dr. Hopkins"), ("Dr. ", "Hopkins"));
        assert_eq!(t.split("Drake"), ("", "Drake"));
        assert_eq!(t.split("mrs.  Doe"), ("mrs.  ", "Doe"));
    }
}
