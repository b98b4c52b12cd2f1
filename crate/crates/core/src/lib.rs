//! Clinical text de-identification engine.
//!
//! Documents flow through five stages: [`preprocess`] (sentences and
//! tokens), [`recognize`] (gazetteer, name and pattern recognizers),
//! [`rules`] (contextual regex rules), [`merge`] (priority-based overlap
//! resolution) and [`rewrite`] (masking or consistent obfuscation backed by
//! [`faker`] and [`datetime`]). [`vault`] records every replacement so the
//! original text can be restored, and [`eval`] scores predictions against
//! gold annotations.

pub mod datetime;
pub mod eval;
pub mod faker;
pub mod langpack;
pub mod merge;
pub mod model;
pub mod pipeline;
pub mod preprocess;
pub mod recognize;
pub mod rewrite;
pub mod rules;
pub mod seeding;
pub mod synth;
pub mod text;
pub mod vault;
