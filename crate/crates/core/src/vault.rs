//! Re-identification vault: an append-only JSON-lines file recording every
//! replacement, so authorized users can restore the original text.
//!
//! Layout: one header line, then per document its replacement records
//! followed by a document line. The document line acts as the commit marker;
//! records without one (an interrupted run) are ignored on read.
//!
//! ```text
//! {"type":"header","format":"deid-vault","version":1,"seed_hash":"9a…"}
//! {"type":"record","doc_id":"a.txt","input_span":{"start":0,"end":4},...}
//! {"type":"doc","doc_id":"a.txt","records":1,"source_sha256":"…","output_sha256":"…"}
//! ```

use std::collections::{BTreeMap, HashSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Document, EntityLabel, Span};
use crate::rewrite::RewriteResult;
use crate::seeding::sha256_hex;

pub const VAULT_FORMAT: &str = "deid-vault";
pub const VAULT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum VaultError {
    #[error("vault I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("vault line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("duplicate vault record for document `{doc_id}` span {span:?}")]
    Duplicate { doc_id: String, span: Span },
    #[error("document `{0}` is already in the vault")]
    DuplicateDocument(String),
    #[error("document `{0}` not found in the vault")]
    NotFound(String),
    #[error("document `{doc_id}`: record {index} ({label} at output {span:?}) does not match the text: expected `{expected}`, found `{found}`")]
    Integrity {
        doc_id: String,
        index: usize,
        label: EntityLabel,
        span: Span,
        expected: String,
        found: String,
    },
    #[error("document `{doc_id}`: restored text does not match the recorded source digest")]
    DigestMismatch { doc_id: String },
    #[error("document `{doc_id}`: empty original or replacement in record {index}")]
    EmptyField { doc_id: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaultHeader {
    pub format: String,
    pub version: u32,
    /// SHA-256 of the global seed; absent for runs without a seed.
    pub seed_hash: Option<String>,
}

impl VaultHeader {
    pub fn new(seed: Option<u64>) -> Self {
        VaultHeader {
            format: VAULT_FORMAT.into(),
            version: VAULT_VERSION,
            seed_hash: seed.map(|s| sha256_hex(&s.to_le_bytes())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaultRecord {
    pub doc_id: String,
    pub patient_id: Option<String>,
    pub input_span: Span,
    pub label: EntityLabel,
    pub original: String,
    pub replacement: String,
    pub output_span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocEntry {
    pub doc_id: String,
    pub patient_id: Option<String>,
    pub records: usize,
    pub source_sha256: String,
    pub output_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header(VaultHeader),
    Record(VaultRecord),
    Doc(DocEntry),
}

/// Vault records for one rewritten document.
pub fn vault_records(result: &RewriteResult, doc: &Document) -> Vec<VaultRecord> {
    result
        .replacements
        .iter()
        .map(|r| VaultRecord {
            doc_id: doc.id.clone(),
            patient_id: doc.patient_id.clone(),
            input_span: r.chunk.span,
            label: r.chunk.label,
            original: r.chunk.text.clone(),
            replacement: r.replacement.clone(),
            output_span: r.output_span,
        })
        .collect()
}

/// Single writer over any byte sink.
pub struct VaultWriter<W: Write> {
    out: W,
    seen: HashSet<(String, Span)>,
    docs: HashSet<String>,
    written: usize,
}

impl<W: Write> VaultWriter<W> {
    pub fn new(mut out: W, header: &VaultHeader) -> Result<Self, VaultError> {
        let line = serde_json::to_string(&Line::Header(header.clone())).expect("header serializes");
        writeln!(out, "{line}")?;
        out.flush()?;
        Ok(VaultWriter {
            out,
            seen: HashSet::new(),
            docs: HashSet::new(),
            written: 0,
        })
    }

    /// Append one document. Everything for the document is written in one
    /// call and flushed, so a failure leaves at most an uncommitted tail.
    pub fn append(&mut self, result: &RewriteResult, doc: &Document) -> Result<usize, VaultError> {
        if self.docs.contains(&doc.id) {
            return Err(VaultError::DuplicateDocument(doc.id.clone()));
        }
        let records = vault_records(result, doc);
        let mut keys = Vec::with_capacity(records.len());
        for (index, r) in records.iter().enumerate() {
            if r.original.is_empty() || r.replacement.is_empty() {
                return Err(VaultError::EmptyField {
                    doc_id: r.doc_id.clone(),
                    index,
                });
            }
            let key = (r.doc_id.clone(), r.input_span);
            if self.seen.contains(&key) || keys.contains(&key) {
                return Err(VaultError::Duplicate {
                    doc_id: r.doc_id.clone(),
                    span: r.input_span,
                });
            }
            keys.push(key);
        }
        let entry = DocEntry {
            doc_id: doc.id.clone(),
            patient_id: doc.patient_id.clone(),
            records: records.len(),
            source_sha256: sha256_hex(doc.text.as_bytes()),
            output_sha256: sha256_hex(result.text.as_bytes()),
        };
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(&Line::Record(r)).expect("record serializes"));
            buf.push('\n');
        }
        buf.push_str(&serde_json::to_string(&Line::Doc(entry)).expect("entry serializes"));
        buf.push('\n');
        self.out.write_all(buf.as_bytes())?;
        self.out.flush()?;

        let n = keys.len();
        self.seen.extend(keys);
        self.docs.insert(doc.id.clone());
        self.written += n;
        Ok(n)
    }

    pub fn records_written(&self) -> usize {
        self.written
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// A vault read back into memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vault {
    pub header: VaultHeader,
    pub docs: BTreeMap<String, DocEntry>,
    records: BTreeMap<String, Vec<VaultRecord>>,
}

impl Vault {
    pub fn read<R: BufRead>(reader: R) -> Result<Vault, VaultError> {
        let mut header = None;
        let mut docs = BTreeMap::new();
        let mut records: BTreeMap<String, Vec<VaultRecord>> = BTreeMap::new();
        let mut pending: Vec<VaultRecord> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| VaultError::Format { line: line_no, message };
            let parsed: Line = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            match parsed {
                Line::Header(h) => {
                    if header.is_some() || line_no != 1 {
                        return Err(err("header must be the first and only header line".into()));
                    }
                    if h.format != VAULT_FORMAT || h.version != VAULT_VERSION {
                        return Err(err(format!("unsupported vault format {} v{}", h.format, h.version)));
                    }
                    header = Some(h);
                }
                _ if header.is_none() => return Err(err("missing header".into())),
                Line::Record(r) => pending.push(r),
                Line::Doc(d) => {
                    let mine: Vec<VaultRecord> = pending.drain(..).filter(|r| r.doc_id == d.doc_id).collect();
                    if mine.len() != d.records {
                        return Err(err(format!(
                            "document `{}` declares {} records, found {}",
                            d.doc_id,
                            d.records,
                            mine.len()
                        )));
                    }
                    if docs.contains_key(&d.doc_id) {
                        return Err(err(format!("document `{}` appears twice", d.doc_id)));
                    }
                    records.insert(d.doc_id.clone(), mine);
                    docs.insert(d.doc_id.clone(), d);
                }
            }
        }
        let header = header.ok_or_else(|| VaultError::Format {
            line: 0,
            message: "empty vault".into(),
        })?;
        Ok(Vault { header, docs, records })
    }

    pub fn parse(source: &str) -> Result<Vault, VaultError> {
        Vault::read(source.as_bytes())
    }

    pub fn records(&self, doc_id: &str) -> Option<&[VaultRecord]> {
        self.records.get(doc_id).map(Vec::as_slice)
    }

    pub fn record_count(&self) -> usize {
        self.records.values().map(Vec::len).sum()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }
}

/// Restore the original text of a de-identified document.
pub fn reidentify(deidentified: &str, doc_id: &str, vault: &Vault) -> Result<String, VaultError> {
    let entry = vault
        .docs
        .get(doc_id)
        .ok_or_else(|| VaultError::NotFound(doc_id.to_string()))?;
    let records = vault.records(doc_id).unwrap_or(&[]);
    let chars: Vec<char> = deidentified.chars().collect();
    let mut out = String::with_capacity(deidentified.len());
    let mut cursor = 0;
    for (index, r) in records.iter().enumerate() {
        let span = r.output_span;
        let found: String = if span.start >= cursor && span.end <= chars.len() {
            chars[span.start..span.end].iter().collect()
        } else {
            String::new()
        };
        if found != r.replacement {
            return Err(VaultError::Integrity {
                doc_id: doc_id.to_string(),
                index,
                label: r.label,
                span,
                expected: r.replacement.clone(),
                found,
            });
        }
        out.extend(&chars[cursor..span.start]);
        out.push_str(&r.original);
        cursor = span.end;
    }
    out.extend(&chars[cursor..]);
    if sha256_hex(out.as_bytes()) != entry.source_sha256 {
        return Err(VaultError::DigestMismatch {
            doc_id: doc_id.to_string(),
        });
    }
    Ok(out)
}
