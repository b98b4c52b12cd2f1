//! End-to-end orchestration: preprocess → recognize → rules → merge →
//! rewrite, over single documents or whole corpora.
//!
//! Documents are grouped by patient. Groups run in parallel; documents of
//! one patient run in doc-id order on one thread so the patient's surrogate
//! maps evolve deterministically. Results always come back sorted by doc id.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::datetime::{shift_for_patient, DayShiftPolicy};
use crate::faker::{Faker, PatientContext, UserDictionary};
use crate::langpack::LanguagePack;
use crate::merge::{merge, MergedChunks};
use crate::model::{Document, EntityChunk, EntityLabel};
use crate::preprocess::{detect_sentences, tokenize_all, SentenceSpan, Token};
use crate::recognize::RecognizerOutput;
use crate::rewrite::{rewrite, RewriteError, RewritePolicy, RewriteResult, Surrogates};
use crate::rules::apply_rules;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("document `{doc_id}`: {source}")]
    Rewrite { doc_id: String, source: RewriteError },
    #[error("cannot build a thread pool: {0}")]
    ThreadPool(String),
}

/// Which detection stages run; switching one off is for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub recognizers: bool,
    pub rules: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        recognizers: true,
        rules: true,
    };
    pub const RECOGNIZERS_ONLY: Stages = Stages {
        recognizers: true,
        rules: false,
    };
}

impl Default for Stages {
    fn default() -> Self {
        Stages::ALL
    }
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub sentences: Vec<SentenceSpan>,
    pub tokens: Vec<Token>,
    pub outputs: Vec<RecognizerOutput>,
    pub rule_chunks: Vec<EntityChunk>,
    pub merged: MergedChunks,
}

pub fn detect(doc: &Document, pack: &LanguagePack, stages: Stages) -> Detection {
    let sentences = detect_sentences(&doc.text, &pack.sentences);
    let tokens = tokenize_all(&doc.text, &sentences);
    let outputs: Vec<RecognizerOutput> = if stages.recognizers {
        pack.recognizers.iter().map(|r| r.recognize(doc, &tokens)).collect()
    } else {
        Vec::new()
    };
    let rule_chunks = if stages.rules {
        apply_rules(doc, &pack.rules)
    } else {
        Vec::new()
    };
    let all = outputs
        .iter()
        .flat_map(|o| o.chunks.iter().cloned())
        .chain(rule_chunks.iter().cloned());
    let merged = merge(all, &pack.merge_policy);
    Detection {
        sentences,
        tokens,
        outputs,
        rule_chunks,
        merged,
    }
}

/// Run-wide de-identification settings.
#[derive(Debug, Clone)]
pub struct DeidConfig {
    pub rewrite: RewritePolicy,
    pub seed: u64,
    pub day_shift: DayShiftPolicy,
    pub dictionary: UserDictionary,
    pub stages: Stages,
}

impl DeidConfig {
    pub fn new(rewrite: RewritePolicy, seed: u64) -> Self {
        DeidConfig {
            rewrite,
            seed,
            day_shift: DayShiftPolicy {
                seed,
                ..DayShiftPolicy::default()
            },
            dictionary: UserDictionary::default(),
            stages: Stages::ALL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DocOutcome {
    pub doc_id: String,
    pub merged: MergedChunks,
    pub result: RewriteResult,
}

/// A pack plus run settings, ready to process documents.
pub struct Pipeline<'a> {
    pub pack: &'a LanguagePack,
    pub config: DeidConfig,
    faker: Faker,
}

impl<'a> Pipeline<'a> {
    pub fn new(pack: &'a LanguagePack, config: DeidConfig) -> Self {
        let mut faker = pack.faker.clone();
        if !config.dictionary.is_empty() {
            faker.dictionary = config.dictionary.clone();
        }
        Pipeline { pack, config, faker }
    }

    /// Fresh surrogate state for the patient (or document) owning `doc`.
    pub fn context_for(&self, doc: &Document) -> PatientContext {
        let key = doc.patient_key();
        let shift = shift_for_patient(&key, &self.config.day_shift);
        PatientContext::new(key, self.config.seed, shift, self.pack.age_groups.clone())
    }

    pub fn process(&self, doc: &Document, ctx: &mut PatientContext) -> Result<DocOutcome, PipelineError> {
        let detection = detect(doc, self.pack, self.config.stages);
        let surrogates = Surrogates {
            faker: &self.faker,
            locale: &self.pack.date_locale,
        };
        let result = rewrite(doc, &detection.merged, &self.config.rewrite, ctx, surrogates).map_err(|source| {
            PipelineError::Rewrite {
                doc_id: doc.id.clone(),
                source,
            }
        })?;
        Ok(DocOutcome {
            doc_id: doc.id.clone(),
            merged: detection.merged,
            result,
        })
    }

    /// One document with its own fresh context.
    pub fn process_one(&self, doc: &Document) -> Result<DocOutcome, PipelineError> {
        let mut ctx = self.context_for(doc);
        self.process(doc, &mut ctx)
    }

    /// Process a corpus on `jobs` threads (0 = all cores). The output is in
    /// doc-id order and does not depend on `jobs`.
    pub fn process_corpus(
        &self,
        docs: &[Document],
        jobs: usize,
    ) -> Result<Vec<Result<DocOutcome, PipelineError>>, PipelineError> {
        let mut groups: BTreeMap<String, Vec<&Document>> = BTreeMap::new();
        for d in docs {
            groups.entry(d.patient_key()).or_default().push(d);
        }
        let groups: Vec<Vec<&Document>> = groups
            .into_values()
            .map(|mut g| {
                g.sort_by(|a, b| a.id.cmp(&b.id));
                g
            })
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
        let results: Vec<Vec<(String, Result<DocOutcome, PipelineError>)>> = pool.install(|| {
            groups
                .par_iter()
                .map(|group| {
                    let mut ctx = self.context_for(group[0]);
                    group
                        .iter()
                        .map(|d| (d.id.clone(), self.process(d, &mut ctx)))
                        .collect()
                })
                .collect()
        });
        let mut flat: Vec<(String, Result<DocOutcome, PipelineError>)> = results.into_iter().flatten().collect();
        flat.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(flat.into_iter().map(|(_, r)| r).collect())
    }
}

/// PHI chunk counts per label.
pub fn count_labels<'a>(outcomes: impl IntoIterator<Item = &'a DocOutcome>) -> BTreeMap<EntityLabel, usize> {
    let mut counts = BTreeMap::new();
    for o in outcomes {
        for c in &o.merged.chunks {
            *counts.entry(c.label).or_default() += 1;
        }
    }
    counts
}
