//! Domain types shared by every pipeline stage: the label taxonomy, character
//! spans, entity chunks and documents.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown entity label `{0}`")]
    UnknownLabel(String),
    #[error("invalid span {start}..{end} for text of length {len}")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("document id must not be empty")]
    EmptyDocumentId,
    #[error("label {0} is not a coarse label")]
    NotCoarse(EntityLabel),
    #[error("label {0} is not a granular label")]
    NotGranular(EntityLabel),
}

/// Which of the two label schemas a label belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    Coarse,
    Granular,
}

/// Entity labels. The PHI labels form two schemas (7 coarse, 13 granular)
/// that share `Date`, `Age` and `Organization`; the clinical labels are
/// non-PHI and exist so that clinical recognizers can suppress false PHI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityLabel {
    // coarse only
    Name,
    Location,
    Contact,
    Id,
    // shared by both schemas
    Date,
    Age,
    Organization,
    // granular only
    Patient,
    Doctor,
    Hospital,
    Profession,
    Street,
    City,
    Country,
    Phone,
    Username,
    Zip,
    // clinical, non-PHI
    Disease,
    Medication,
}

impl EntityLabel {
    pub const COARSE: [EntityLabel; 7] = [
        EntityLabel::Name,
        EntityLabel::Date,
        EntityLabel::Organization,
        EntityLabel::Location,
        EntityLabel::Age,
        EntityLabel::Contact,
        EntityLabel::Id,
    ];

    pub const GRANULAR: [EntityLabel; 13] = [
        EntityLabel::Patient,
        EntityLabel::Doctor,
        EntityLabel::Hospital,
        EntityLabel::Date,
        EntityLabel::Age,
        EntityLabel::Profession,
        EntityLabel::Organization,
        EntityLabel::Street,
        EntityLabel::City,
        EntityLabel::Country,
        EntityLabel::Phone,
        EntityLabel::Username,
        EntityLabel::Zip,
    ];

    pub const CLINICAL: [EntityLabel; 2] = [EntityLabel::Disease, EntityLabel::Medication];

    pub const ALL: [EntityLabel; 19] = [
        EntityLabel::Name,
        EntityLabel::Location,
        EntityLabel::Contact,
        EntityLabel::Id,
        EntityLabel::Date,
        EntityLabel::Age,
        EntityLabel::Organization,
        EntityLabel::Patient,
        EntityLabel::Doctor,
        EntityLabel::Hospital,
        EntityLabel::Profession,
        EntityLabel::Street,
        EntityLabel::City,
        EntityLabel::Country,
        EntityLabel::Phone,
        EntityLabel::Username,
        EntityLabel::Zip,
        EntityLabel::Disease,
        EntityLabel::Medication,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntityLabel::Name => "Name",
            EntityLabel::Location => "Location",
            EntityLabel::Contact => "Contact",
            EntityLabel::Id => "ID",
            EntityLabel::Date => "Date",
            EntityLabel::Age => "Age",
            EntityLabel::Organization => "Organization",
            EntityLabel::Patient => "Patient",
            EntityLabel::Doctor => "Doctor",
            EntityLabel::Hospital => "Hospital",
            EntityLabel::Profession => "Profession",
            EntityLabel::Street => "Street",
            EntityLabel::City => "City",
            EntityLabel::Country => "Country",
            EntityLabel::Phone => "Phone",
            EntityLabel::Username => "Username",
            EntityLabel::Zip => "Zip",
            EntityLabel::Disease => "Disease",
            EntityLabel::Medication => "Medication",
        }
    }

    /// Upper-cased name used by entity masking (`PATIENT`, `AGE`, ...).
    pub fn mask_token(self) -> String {
        self.name().to_uppercase()
    }

    pub fn is_phi(self) -> bool {
        !Self::CLINICAL.contains(&self)
    }

    pub fn is_coarse(self) -> bool {
        Self::COARSE.contains(&self)
    }

    pub fn is_granular(self) -> bool {
        Self::GRANULAR.contains(&self)
    }

    pub fn granularities(self) -> Vec<Granularity> {
        let mut out = Vec::with_capacity(2);
        if self.is_coarse() {
            out.push(Granularity::Coarse);
        }
        if self.is_granular() {
            out.push(Granularity::Granular);
        }
        out
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntityLabel {
    type Err = ModelError;

    /// Case-insensitive; accepts the display name or the mask token.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim();
        EntityLabel::ALL
            .iter()
            .copied()
            .find(|l| l.name().eq_ignore_ascii_case(needle))
            .ok_or_else(|| ModelError::UnknownLabel(needle.to_string()))
    }
}

/// Granular to coarse label correspondence. The default table can be
/// overridden per language pack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseMap {
    table: BTreeMap<EntityLabel, EntityLabel>,
}

impl Default for CoarseMap {
    fn default() -> Self {
        use EntityLabel::*;
        let table = [
            (Patient, Name),
            (Doctor, Name),
            (Hospital, Organization),
            (Date, Date),
            (Age, Age),
            (Profession, Organization),
            (Organization, Organization),
            (Street, Location),
            (City, Location),
            (Country, Location),
            (Phone, Contact),
            (Username, Contact),
            (Zip, Location),
        ]
        .into_iter()
        .collect();
        CoarseMap { table }
    }
}

impl CoarseMap {
    /// Replace the coarse parent of one granular label.
    pub fn set(&mut self, granular: EntityLabel, coarse: EntityLabel) -> Result<(), ModelError> {
        if !granular.is_granular() {
            return Err(ModelError::NotGranular(granular));
        }
        if !coarse.is_coarse() {
            return Err(ModelError::NotCoarse(coarse));
        }
        self.table.insert(granular, coarse);
        Ok(())
    }

    /// Coarse parent of a label. Coarse and clinical labels map to themselves.
    pub fn to_coarse(&self, label: EntityLabel) -> EntityLabel {
        self.table.get(&label).copied().unwrap_or(label)
    }

    pub fn entries(&self) -> impl Iterator<Item = (EntityLabel, EntityLabel)> + '_ {
        self.table.iter().map(|(g, c)| (*g, *c))
    }
}

/// Coarse parent under the default table.
pub fn to_coarse(label: EntityLabel) -> EntityLabel {
    CoarseMap::default().to_coarse(label)
}

/// Half-open character span, counted in Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end, "empty or inverted span {start}..{end}");
        Span { start, end }
    }

    /// Checked constructor against a text length.
    pub fn checked(start: usize, end: usize, len: usize) -> Result<Self, ModelError> {
        if start < end && end <= len {
            Ok(Span { start, end })
        } else {
            Err(ModelError::InvalidSpan { start, end, len })
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn intersection_len(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceKind {
    Recognizer,
    Rule,
}

impl SourceKind {
    pub fn class_name(self) -> &'static str {
        match self {
            SourceKind::Recognizer => "recognizer",
            SourceKind::Rule => "rule",
        }
    }
}

/// Which recognizer or rule produced a chunk.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Source {
    pub kind: SourceKind,
    pub id: String,
}

impl Source {
    pub fn recognizer(id: impl Into<String>) -> Self {
        Source {
            kind: SourceKind::Recognizer,
            id: id.into(),
        }
    }

    pub fn rule(id: impl Into<String>) -> Self {
        Source {
            kind: SourceKind::Rule,
            id: id.into(),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.class_name(), self.id)
    }
}

/// A labeled span of a document, with attribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityChunk {
    pub span: Span,
    pub label: EntityLabel,
    pub text: String,
    pub source: Source,
    pub confidence: f64,
}

impl EntityChunk {
    /// Build a chunk from a document span; the covered text is copied out.
    pub fn from_doc(doc: &Document, span: Span, label: EntityLabel, source: Source) -> Self {
        EntityChunk {
            span,
            label,
            text: doc.slice(span).to_string(),
            source,
            confidence: 1.0,
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence.clamp(0.0, 1.0);
        self
    }

    /// Total order used wherever chunk lists must be canonical.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.span
            .cmp(&other.span)
            .then_with(|| self.label.cmp(&other.label))
            .then_with(|| self.source.cmp(&other.source))
            .then_with(|| self.confidence.total_cmp(&other.confidence))
    }
}

/// A plain-text document. Keeps a char-to-byte offset table so that spans,
/// which count scalar values, can be sliced in O(1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub patient_id: Option<String>,
    pub text: String,
    pub language: String,
    offsets: Vec<usize>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        patient_id: Option<String>,
        text: impl Into<String>,
        language: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ModelError::EmptyDocumentId);
        }
        let text = text.into();
        let offsets = char_offsets(&text);
        Ok(Document {
            id,
            patient_id,
            text,
            language: language.into(),
            offsets,
        })
    }

    /// Length in characters.
    pub fn char_len(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Byte offset of a character position (`char_len()` maps to the text length).
    pub fn byte_offset(&self, char_pos: usize) -> usize {
        self.offsets[char_pos]
    }

    /// Character position of a byte offset that lies on a char boundary.
    pub fn char_offset(&self, byte_pos: usize) -> usize {
        match self.offsets.binary_search(&byte_pos) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
    }

    pub fn slice(&self, span: Span) -> &str {
        &self.text[self.offsets[span.start]..self.offsets[span.end]]
    }

    pub fn check_span(&self, span: Span) -> Result<Span, ModelError> {
        Span::checked(span.start, span.end, self.char_len())
    }

    /// Key used for per-patient state; documents without a patient id are
    /// scoped to themselves.
    pub fn patient_key(&self) -> String {
        match &self.patient_id {
            Some(p) => format!("patient:{p}"),
            None => format!("doc:{}", self.id),
        }
    }
}

/// Byte offsets of every char boundary, including the end of the string.
pub fn char_offsets(text: &str) -> Vec<usize> {
    let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    offsets.push(text.len());
    offsets
}
