//! Reading a note directory and writing output files atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use regex::Regex;
use walkdir::WalkDir;

use deid_core::model::Document;

/// Sidecar file naming the patient of `<file>`.
pub const PATIENT_SUFFIX: &str = ".patient";

/// How patient ids are found.
pub struct PatientIds {
    pattern: Option<Regex>,
}

impl PatientIds {
    pub fn new(pattern: Option<&str>) -> Result<Self> {
        let pattern = pattern
            .map(Regex::new)
            .transpose()
            .context("invalid --patient-id-from regex")?;
        Ok(PatientIds { pattern })
    }

    fn lookup(&self, rel: &str, path: &Path) -> Result<Option<String>> {
        if let Some(re) = &self.pattern {
            return Ok(re
                .captures(rel)
                .map(|c| c.get(1).unwrap_or_else(|| c.get(0).unwrap()).as_str().to_string()));
        }
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(PATIENT_SUFFIX);
        match fs::read_to_string(&sidecar) {
            Ok(s) => Ok(Some(s.trim().to_string()).filter(|s| !s.is_empty())),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e).with_context(|| format!("reading {}", Path::new(&sidecar).display())),
        }
    }
}

/// Documents read, and `(doc id, reason)` for files that could not be.
pub type Corpus = (Vec<Document>, Vec<(String, String)>);

/// Every regular file under `dir` (except patient sidecars), as documents
/// whose ids are `/`-separated relative paths. Unreadable or non-UTF-8
/// files are reported as failures rather than aborting the run.
pub fn read_corpus(dir: &Path, language: &str, patients: &PatientIds) -> Result<Corpus> {
    if !dir.is_dir() {
        anyhow::bail!("input {} is not a directory", dir.display());
    }
    let mut docs = Vec::new();
    let mut failures = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.with_context(|| format!("walking {}", dir.display()))?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let rel = path.strip_prefix(dir).expect("walkdir yields children");
        let id = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if id.ends_with(PATIENT_SUFFIX) {
            continue;
        }
        let loaded = fs::read(path)
            .map_err(anyhow::Error::from)
            .and_then(|b| String::from_utf8(b).context("not valid UTF-8"))
            .and_then(|text| {
                let patient = patients.lookup(&id, path)?;
                Ok(Document::new(id.clone(), patient, text, language)?)
            });
        match loaded {
            Ok(d) => docs.push(d),
            Err(e) => failures.push((id, format!("{e:#}"))),
        }
    }
    docs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((docs, failures))
}

/// Write through a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent).with_context(|| format!("writing {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
