//! Entity-level evaluation: chunk matching under a coverage threshold or the
//! looser shared-token rule, per-label precision/recall/F1, micro and macro
//! averages, and label-blind binary PHI scores.
//!
//! Matching is maximum-cardinality: a greedy pass by descending coverage,
//! then augmenting paths for any gold chunk the greedy pass stranded. Since
//! only same-label pairs are eligible, per-label counts do not depend on
//! which maximum matching is found.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{to_coarse, EntityLabel, Span};

pub const DEFAULT_COVERAGE: f64 = 0.6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("threshold must lie in (0, 1], got {0}")]
    Threshold(String),
    #[error("document `{doc_id}`: gold spans {a:?} and {b:?} overlap")]
    OverlappingGold { doc_id: String, a: Span, b: Span },
}

/// One labeled span of one document, gold or predicted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Annotation {
    pub doc_id: String,
    pub span: Span,
    pub label: EntityLabel,
}

pub type GoldAnnotation = Annotation;

impl Annotation {
    pub fn new(doc_id: impl Into<String>, start: usize, end: usize, label: EntityLabel) -> Self {
        Annotation {
            doc_id: doc_id.into(),
            span: Span::new(start, end),
            label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchMode {
    /// |pred ∩ gold| / |gold| ≥ threshold.
    Coverage(f64),
    /// Any shared character, hence any shared token for token-aligned spans.
    TokenOverlap,
}

impl MatchMode {
    /// `coverage:<t>`, `coverage` or `token`.
    pub fn parse(s: &str) -> Result<MatchMode, EvalError> {
        match s.trim() {
            "token" => Ok(MatchMode::TokenOverlap),
            "coverage" => Ok(MatchMode::Coverage(DEFAULT_COVERAGE)),
            other => {
                let t = other
                    .strip_prefix("coverage:")
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| EvalError::Threshold(other.to_string()))?;
                check_threshold(t)?;
                Ok(MatchMode::Coverage(t))
            }
        }
    }
}

fn check_threshold(t: f64) -> Result<(), EvalError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(EvalError::Threshold(t.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchSpec {
    pub mode: MatchMode,
    /// External label name (case-insensitive) → internal label, applied
    /// when annotation files are read.
    pub label_mapping: BTreeMap<String, EntityLabel>,
    /// Removed before counting; a coarse label also removes its granular
    /// labels.
    pub excluded_labels: BTreeSet<EntityLabel>,
    /// Compare labels after collapsing to the coarse schema.
    pub coarse: bool,
    /// Optional pred-side bound: |pred ∩ gold| / |pred| must also reach it.
    pub pred_ratio: Option<f64>,
    /// Ignore labels entirely (binary PHI scoring).
    pub ignore_labels: bool,
}

impl Default for MatchSpec {
    fn default() -> Self {
        MatchSpec {
            mode: MatchMode::Coverage(DEFAULT_COVERAGE),
            label_mapping: BTreeMap::new(),
            excluded_labels: BTreeSet::new(),
            coarse: false,
            pred_ratio: None,
            ignore_labels: false,
        }
    }
}

impl MatchSpec {
    pub fn coverage(threshold: f64) -> Result<Self, EvalError> {
        check_threshold(threshold)?;
        Ok(MatchSpec {
            mode: MatchMode::Coverage(threshold),
            ..MatchSpec::default()
        })
    }

    pub fn token() -> Self {
        MatchSpec {
            mode: MatchMode::TokenOverlap,
            ..MatchSpec::default()
        }
    }

    fn effective(&self, label: EntityLabel) -> EntityLabel {
        if self.coarse {
            to_coarse(label)
        } else {
            label
        }
    }

    fn counted(&self, label: EntityLabel) -> bool {
        label.is_phi() && !self.excluded_labels.contains(&label) && !self.excluded_labels.contains(&to_coarse(label))
    }

    fn labels_agree(&self, a: EntityLabel, b: EntityLabel) -> bool {
        self.ignore_labels || self.effective(a) == self.effective(b)
    }

    /// Does `pred` count as a detection of `gold`?
    pub fn is_match(&self, pred: &Annotation, gold: &Annotation) -> bool {
        if !self.labels_agree(pred.label, gold.label) {
            return false;
        }
        let inter = pred.span.intersection_len(&gold.span);
        if inter == 0 {
            return false;
        }
        let covered = match self.mode {
            MatchMode::Coverage(t) => inter as f64 >= t * gold.span.len() as f64,
            MatchMode::TokenOverlap => true,
        };
        covered
            && self
                .pred_ratio
                .is_none_or(|r| inter as f64 >= r * pred.span.len() as f64)
    }
}

/// Fraction of the gold span covered by the prediction.
pub fn coverage(pred: Span, gold: Span) -> f64 {
    pred.intersection_len(&gold) as f64 / gold.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocMatches {
    /// Every gold chunk with its matched prediction, in gold order.
    pub pairs: Vec<(Annotation, Option<Annotation>)>,
    /// Predictions left unmatched.
    pub false_positives: Vec<Annotation>,
}

impl DocMatches {
    pub fn matched(&self) -> usize {
        self.pairs.iter().filter(|(_, p)| p.is_some()).count()
    }
}

/// Match the predictions of one document against its gold chunks. Labels
/// excluded by the `MatchSpec` are dropped from both sides first.
pub fn match_chunks(pred: &[Annotation], gold: &[Annotation], spec: &MatchSpec) -> DocMatches {
    let mut gold: Vec<Annotation> = gold.iter().filter(|a| spec.counted(a.label)).cloned().collect();
    let mut pred: Vec<Annotation> = pred.iter().filter(|a| spec.counted(a.label)).cloned().collect();
    gold.sort();
    pred.sort();

    // eligible edges per gold
    let edges: Vec<Vec<usize>> = gold
        .iter()
        .map(|g| (0..pred.len()).filter(|&j| spec.is_match(&pred[j], g)).collect())
        .collect();

    let mut gold_to: Vec<Option<usize>> = vec![None; gold.len()];
    let mut pred_to: Vec<Option<usize>> = vec![None; pred.len()];

    let mut candidates: Vec<(usize, usize)> = edges
        .iter()
        .enumerate()
        .flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
        .collect();
    candidates.sort_by(|&(i, j), &(k, l)| {
        coverage(pred[l].span, gold[k].span)
            .total_cmp(&coverage(pred[j].span, gold[i].span))
            .then(gold[i].span.start.cmp(&gold[k].span.start))
            .then(pred[j].span.start.cmp(&pred[l].span.start))
            .then((i, j).cmp(&(k, l)))
    });
    for (i, j) in candidates {
        if gold_to[i].is_none() && pred_to[j].is_none() {
            gold_to[i] = Some(j);
            pred_to[j] = Some(i);
        }
    }

    // augmenting paths make the matching maximum
    fn augment(
        i: usize,
        edges: &[Vec<usize>],
        seen: &mut [bool],
        gold_to: &mut [Option<usize>],
        pred_to: &mut [Option<usize>],
    ) -> bool {
        for &j in &edges[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            let free = match pred_to[j] {
                None => true,
                Some(k) => augment(k, edges, seen, gold_to, pred_to),
            };
            if free {
                gold_to[i] = Some(j);
                pred_to[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in 0..gold.len() {
        if gold_to[i].is_none() && !edges[i].is_empty() {
            let mut seen = vec![false; pred.len()];
            augment(i, &edges, &mut seen, &mut gold_to, &mut pred_to);
        }
    }

    let false_positives = pred
        .iter()
        .zip(&pred_to)
        .filter(|(_, m)| m.is_none())
        .map(|(p, _)| p.clone())
        .collect();
    let pairs = gold
        .into_iter()
        .zip(gold_to)
        .map(|(g, m)| (g, m.map(|j| pred[j].clone())))
        .collect();
    DocMatches { pairs, false_positives }
}

/// Match a whole corpus, grouping annotations by document.
pub fn match_corpus(pred: &[Annotation], gold: &[Annotation], spec: &MatchSpec) -> Vec<DocMatches> {
    let mut by_doc: BTreeMap<&str, (Vec<Annotation>, Vec<Annotation>)> = BTreeMap::new();
    for p in pred {
        by_doc.entry(&p.doc_id).or_default().0.push(p.clone());
    }
    for g in gold {
        by_doc.entry(&g.doc_id).or_default().1.push(g.clone());
    }
    by_doc.values().map(|(p, g)| match_chunks(p, g, spec)).collect()
}

/// A ratio that may be undefined (zero denominator); undefined values are
/// reported as 0 with the flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub undefined: bool,
}

impl Score {
    fn ratio(num: usize, den: usize) -> Score {
        if den == 0 {
            Score {
                value: 0.0,
                undefined: true,
            }
        } else {
            Score {
                value: num as f64 / den as f64,
                undefined: false,
            }
        }
    }

    fn f1(p: Score, r: Score) -> Score {
        if p.value + r.value == 0.0 {
            Score {
                value: 0.0,
                undefined: p.undefined || r.undefined,
            }
        } else {
            Score {
                value: 2.0 * p.value * r.value / (p.value + r.value),
                undefined: false,
            }
        }
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}{}", self.value, if self.undefined { "*" } else { "" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn precision(&self) -> Score {
        Score::ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Score {
        Score::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> Score {
        Score::f1(self.precision(), self.recall())
    }

    fn add(&mut self, o: &Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: EntityLabel,
    pub counts: Counts,
    pub precision: Score,
    pub recall: Score,
    pub f1: Score,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub counts: Counts,
    pub precision: Score,
    pub recall: Score,
    pub f1: Score,
}

impl BinaryMetrics {
    fn from_counts(counts: Counts) -> Self {
        BinaryMetrics {
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_label: Vec<LabelMetrics>,
    pub micro: BinaryMetrics,
    /// Mean F1 over labels with support.
    pub macro_f1: Score,
    pub binary: Option<BinaryMetrics>,
}

/// Per-label counts from completed matches. TPs and FNs count under the
/// gold label, FPs under the predicted label.
pub fn compute_metrics(matches: &[DocMatches], spec: &MatchSpec) -> MetricsReport {
    let mut counts: BTreeMap<EntityLabel, Counts> = BTreeMap::new();
    for m in matches {
        for (g, p) in &m.pairs {
            let c = counts.entry(spec.effective(g.label)).or_default();
            if p.is_some() {
                c.tp += 1;
            } else {
                c.fn_ += 1;
            }
        }
        for p in &m.false_positives {
            counts.entry(spec.effective(p.label)).or_default().fp += 1;
        }
    }
    let mut pooled = Counts::default();
    for c in counts.values() {
        pooled.add(c);
    }
    let per_label: Vec<LabelMetrics> = counts
        .into_iter()
        .map(|(label, c)| LabelMetrics {
            label,
            counts: c,
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            support: c.support(),
        })
        .collect();
    let supported: Vec<f64> = per_label.iter().filter(|l| l.support > 0).map(|l| l.f1.value).collect();
    let macro_f1 = if supported.is_empty() {
        Score {
            value: 0.0,
            undefined: true,
        }
    } else {
        Score {
            value: supported.iter().sum::<f64>() / supported.len() as f64,
            undefined: false,
        }
    };
    MetricsReport {
        per_label,
        micro: BinaryMetrics::from_counts(pooled),
        macro_f1,
        binary: None,
    }
}

/// Label-blind scores: every PHI label collapses into one class.
pub fn binary_phi_metrics(pred: &[Annotation], gold: &[Annotation], spec: &MatchSpec) -> BinaryMetrics {
    let blind = MatchSpec {
        ignore_labels: true,
        ..spec.clone()
    };
    let mut counts = Counts::default();
    for m in match_corpus(pred, gold, &blind) {
        let tp = m.matched();
        counts.add(&Counts {
            tp,
            fp: m.false_positives.len(),
            fn_: m.pairs.len() - tp,
        });
    }
    BinaryMetrics::from_counts(counts)
}

/// Labeled report plus binary scores for a corpus.
pub fn evaluate(pred: &[Annotation], gold: &[Annotation], spec: &MatchSpec) -> MetricsReport {
    let mut report = compute_metrics(&match_corpus(pred, gold, spec), spec);
    report.binary = Some(binary_phi_metrics(pred, gold, spec));
    report
}

impl MetricsReport {
    /// Aligned text table; `*` marks values with a zero denominator.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<14} {:>9} {:>9} {:>9} {:>8} {:>6} {:>6} {:>6}",
            "label", "precision", "recall", "f1", "support", "tp", "fp", "fn"
        );
        let row = |s: &mut String, name: &str, p: Score, r: Score, f: Score, c: Counts| {
            let _ = writeln!(
                s,
                "{:<14} {:>9} {:>9} {:>9} {:>8} {:>6} {:>6} {:>6}",
                name,
                p.to_string(),
                r.to_string(),
                f.to_string(),
                c.support(),
                c.tp,
                c.fp,
                c.fn_
            );
        };
        for l in &self.per_label {
            row(&mut s, l.label.name(), l.precision, l.recall, l.f1, l.counts);
        }
        row(
            &mut s,
            "micro-avg",
            self.micro.precision,
            self.micro.recall,
            self.micro.f1,
            self.micro.counts,
        );
        let _ = writeln!(
            s,
            "{:<14} {:>9} {:>9} {:>9}",
            "macro-avg",
            "",
            "",
            self.macro_f1.to_string()
        );
        if let Some(b) = &self.binary {
            row(&mut s, "binary-phi", b.precision, b.recall, b.f1, b.counts);
        }
        s
    }

    /// One `key=value` line per row, for scripts.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        let line = |s: &mut String, kind: &str, name: &str, c: Counts, p: Score, r: Score, f: Score| {
            let _ = writeln!(
                s,
                "{kind} name={name} tp={} fp={} fn={} support={} precision={:.6} recall={:.6} f1={:.6} undefined={}",
                c.tp,
                c.fp,
                c.fn_,
                c.support(),
                p.value,
                r.value,
                f.value,
                [p, r, f].iter().any(|x| x.undefined)
            );
        };
        for l in &self.per_label {
            line(&mut s, "label", l.label.name(), l.counts, l.precision, l.recall, l.f1);
        }
        line(
            &mut s,
            "micro",
            "all",
            self.micro.counts,
            self.micro.precision,
            self.micro.recall,
            self.micro.f1,
        );
        let _ = writeln!(
            s,
            "macro name=all f1={:.6} undefined={}",
            self.macro_f1.value, self.macro_f1.undefined
        );
        if let Some(b) = &self.binary {
            line(&mut s, "binary", "phi", b.counts, b.precision, b.recall, b.f1);
        }
        s
    }
}

/// Parse `doc_id<TAB>start<TAB>end<TAB>label` rows; `#` starts a comment
/// line. Labels go through the mapping first, then the built-in names.
pub fn parse_annotations(source: &str, mapping: &BTreeMap<String, EntityLabel>) -> Result<Vec<Annotation>, EvalError> {
    let mapping: BTreeMap<String, EntityLabel> = mapping.iter().map(|(k, v)| (k.to_lowercase(), *v)).collect();
    let mut out = Vec::new();
    for (idx, row) in source.lines().enumerate() {
        if row.trim().is_empty() || row.starts_with('#') {
            continue;
        }
        let err = |message: String| EvalError::Parse { line: idx + 1, message };
        let cols: Vec<&str> = row.split('\t').collect();
        let [doc_id, start, end, label] = cols.as_slice() else {
            return Err(err(format!("expected 4 tab-separated columns, got {}", cols.len())));
        };
        let start: usize = start.trim().parse().map_err(|_| err(format!("bad start `{start}`")))?;
        let end: usize = end.trim().parse().map_err(|_| err(format!("bad end `{end}`")))?;
        if start >= end {
            return Err(err(format!("empty or inverted span {start}..{end}")));
        }
        let label = label.trim();
        let label = match mapping.get(&label.to_lowercase()) {
            Some(l) => *l,
            None => label.parse::<EntityLabel>().map_err(|e| err(e.to_string()))?,
        };
        out.push(Annotation::new(*doc_id, start, end, label));
    }
    Ok(out)
}

pub fn format_annotations(annotations: &[Annotation]) -> String {
    let mut s = String::new();
    for a in annotations {
        let _ = writeln!(s, "{}\t{}\t{}\t{}", a.doc_id, a.span.start, a.span.end, a.label.name());
    }
    s
}

/// Gold spans within one document must not overlap.
pub fn validate_gold(gold: &[Annotation]) -> Result<(), EvalError> {
    let mut sorted: Vec<&Annotation> = gold.iter().collect();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[0].doc_id == w[1].doc_id && w[0].span.overlaps(&w[1].span) {
            return Err(EvalError::OverlappingGold {
                doc_id: w[0].doc_id.clone(),
                a: w[0].span,
                b: w[1].span,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use EntityLabel::*;

    fn a(s: usize, e: usize, l: EntityLabel) -> Annotation {
        Annotation::new("d", s, e, l)
    }

    #[test]
    fn childrens_hospital_covers_boston_childrens_hospital() {
        // "Boston Children's Hospital" = 26 chars, pred starts at "Children's"
        let gold = a(0, 26, Hospital);
        let pred = a(7, 26, Hospital);
        assert!((coverage(pred.span, gold.span) - 19.0 / 26.0).abs() < 1e-12);
        let m = match_chunks(&[pred], &[gold], &MatchSpec::default());
        assert_eq!(m.matched(), 1);
    }

    #[test]
    fn half_coverage_depends_on_mode() {
        let gold = a(0, 10, City);
        let pred = a(5, 10, City);
        assert_eq!(
            match_chunks(
                std::slice::from_ref(&pred),
                std::slice::from_ref(&gold),
                &MatchSpec::default()
            )
            .matched(),
            0
        );
        assert_eq!(match_chunks(&[pred], &[gold], &MatchSpec::token()).matched(), 1);
    }

    #[test]
    fn pred_ratio_bounds_overshoot() {
        let gold = a(10, 14, City);
        let pred = a(0, 40, City);
        assert_eq!(
            match_chunks(
                std::slice::from_ref(&pred),
                std::slice::from_ref(&gold),
                &MatchSpec::default()
            )
            .matched(),
            1
        );
        let strict = MatchSpec {
            pred_ratio: Some(0.5),
            ..MatchSpec::default()
        };
        assert_eq!(match_chunks(&[pred], &[gold], &strict).matched(), 0);
    }

    #[test]
    fn greedy_repair_reaches_maximum() {
        // greedy hands the straddling pred to gold 0 (higher coverage) and
        // strands gold 1; augmentation fixes it
        let gold = [a(0, 10, City), a(20, 30, City)];
        let pred = [a(5, 25, City), a(0, 4, City)];
        let spec = MatchSpec::token();
        assert_eq!(match_chunks(&pred, &gold, &spec).matched(), 2);
    }

    #[test]
    fn perfect_and_empty() {
        let gold = vec![a(0, 4, Patient), a(10, 12, Age)];
        let r = evaluate(&gold, &gold, &MatchSpec::default());
        assert_eq!(r.micro.f1.value, 1.0);
        assert_eq!(r.macro_f1.value, 1.0);
        let r = evaluate(&[], &gold, &MatchSpec::default());
        assert!(r.micro.precision.undefined);
        assert_eq!(r.micro.precision.value, 0.0);
        assert_eq!(r.micro.recall.value, 0.0);
        let r = evaluate(&[], &[], &MatchSpec::default());
        assert!(r.binary.unwrap().f1.undefined);
        assert!(r.macro_f1.undefined);
    }

    #[test]
    fn binary_ignores_label_confusion() {
        let gold = [a(0, 4, Patient)];
        let pred = [a(0, 4, Doctor)];
        let r = evaluate(&pred, &gold, &MatchSpec::default());
        assert_eq!(r.micro.counts.tp, 0);
        assert_eq!(r.binary.unwrap().counts.tp, 1);
    }

    #[test]
    fn excluded_and_coarse() {
        let gold = [a(0, 4, Patient), a(5, 9, Id)];
        let pred = [a(0, 4, Doctor)];
        let spec = MatchSpec {
            coarse: true,
            excluded_labels: [Id].into(),
            ..MatchSpec::default()
        };
        let r = evaluate(&pred, &gold, &spec);
        assert_eq!(r.per_label.len(), 1);
        assert_eq!(r.per_label[0].label, Name);
        assert_eq!(r.micro.f1.value, 1.0);
    }

    #[test]
    fn tsv_round_trip_and_mapping() {
        let src = "# gold\nn1\t0\t4\tPATIENT\nn1\t10\t12\tPHONE_NUMBER\n";
        let mapping = [("phone_number".to_string(), Phone)].into();
        let got = parse_annotations(src, &mapping).unwrap();
        assert_eq!(
            got,
            vec![
                Annotation::new("n1", 0, 4, Patient),
                Annotation::new("n1", 10, 12, Phone)
            ]
        );
        assert_eq!(
            parse_annotations(&format_annotations(&got), &BTreeMap::new()).unwrap(),
            got
        );
        assert!(parse_annotations("n1\t4\t4\tCity", &BTreeMap::new()).is_err());
        assert!(parse_annotations("n1\t0\t4", &BTreeMap::new()).is_err());
        assert!(parse_annotations("n1\t0\t4\tNonsense", &BTreeMap::new()).is_err());
    }

    #[test]
    fn threshold_parsing() {
        assert_eq!(MatchMode::parse("token").unwrap(), MatchMode::TokenOverlap);
        assert_eq!(MatchMode::parse("coverage:0.5").unwrap(), MatchMode::Coverage(0.5));
        assert!(MatchMode::parse("coverage:0").is_err());
        assert!(MatchMode::parse("coverage:1.5").is_err());
        assert!(MatchSpec::coverage(1.0).is_ok());
    }

    #[test]
    fn overlapping_gold_rejected() {
        assert!(validate_gold(&[a(0, 5, City), a(4, 8, City)]).is_err());
        assert!(validate_gold(&[a(0, 5, City), a(5, 8, City)]).is_ok());
    }

    #[test]
    fn report_renders() {
        let gold = vec![a(0, 4, Patient)];
        let r = evaluate(&gold, &gold, &MatchSpec::default());
        assert!(r.to_table().contains("micro-avg"));
        assert!(r.to_lines().contains("label name=Patient tp=1 fp=0 fn=0"));
    }
}
