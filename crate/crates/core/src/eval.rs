//! Answer parsing and scoring: accuracy/F1, MAE/RMSE, BLEU, ROUGE, METEOR.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Label, TaskKind, TaskSpec};
use crate::prompt::{ExpectedFormat, QM9_TARGETS};
use crate::scalar::Scalar;
use crate::transcript::Transcript;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no scored items")]
    EmptyScoredSet,
    #[error("prediction and gold lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("transcript for target {0} has no gold label")]
    UnknownTarget(u64),
    #[error("gold label for target {0} does not fit the task kind")]
    LabelMismatch(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsedAnswer {
    YesNo(bool),
    Number(f64),
    Vector(Vec<f64>),
    Text(String),
    Unparsed,
}

impl ParsedAnswer {
    pub fn is_parsed(&self) -> bool {
        !matches!(self, ParsedAnswer::Unparsed)
    }
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:^|[^\w.])([-+\x{2212}]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)").expect("valid regex")
});
static ANSWER_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\banswer\b").expect("valid regex"));

/// Text after the last "answer" marker, if there is one. Chain-of-thought
/// replies reason first and conclude with "Answer: ...", so the conclusion
/// is searched before the full text.
fn after_marker(text: &str) -> Option<&str> {
    ANSWER_MARKER.find_iter(text).last().map(|m| &text[m.end()..])
}

fn scan_binary(text: &str) -> Option<bool> {
    text.split(|c: char| !c.is_alphanumeric())
        .find_map(|w| match w.to_lowercase().as_str() {
            "yes" | "true" => Some(true),
            "no" | "false" => Some(false),
            _ => None,
        })
}

/// First "yes"/"true" or "no"/"false" word, case-insensitive, searched after
/// the last "answer" marker first and then in the whole text.
pub fn parse_binary(text: &str) -> ParsedAnswer {
    after_marker(text)
        .and_then(scan_binary)
        .or_else(|| scan_binary(text))
        .map_or(ParsedAnswer::Unparsed, ParsedAnswer::YesNo)
}

fn literals(text: &str) -> Vec<f64> {
    NUMBER
        .captures_iter(text)
        .filter_map(|c| c[1].replace('\u{2212}', "-").parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .collect()
}

/// First decimal or scientific literal.
pub fn parse_numeric(text: &str) -> ParsedAnswer {
    after_marker(text)
        .and_then(|t| literals(t).first().copied())
        .or_else(|| literals(text).first().copied())
        .map_or(ParsedAnswer::Unparsed, ParsedAnswer::Number)
}

/// First `n` literals in order; fewer than `n` is unparsed. Literals glued to
/// letters (`u0`, `h298`) are names, not values.
pub fn parse_vector(text: &str, n: usize) -> ParsedAnswer {
    let pick = |t: &str| {
        let vs = literals(t);
        (vs.len() >= n).then(|| vs[..n].to_vec())
    };
    after_marker(text)
        .and_then(pick)
        .or_else(|| pick(text))
        .map_or(ParsedAnswer::Unparsed, ParsedAnswer::Vector)
}

pub fn parse_text(text: &str) -> ParsedAnswer {
    let t = text.trim();
    let t = match t.get(..12) {
        Some(p) if p.eq_ignore_ascii_case("description:") => t[12..].trim(),
        _ => t,
    };
    if t.is_empty() {
        ParsedAnswer::Unparsed
    } else {
        ParsedAnswer::Text(t.to_string())
    }
}

pub fn parse_answer(text: &str, format: ExpectedFormat) -> ParsedAnswer {
    match format {
        ExpectedFormat::YesNo => parse_binary(text),
        ExpectedFormat::Number => parse_numeric(text),
        ExpectedFormat::NumberVector(n) => parse_vector(text, n),
        ExpectedFormat::FreeText => parse_text(text),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics<T> {
    pub accuracy: T,
    pub f1: T,
    pub confusion: Confusion,
    pub n_unparsed: usize,
    pub diagnostics: Vec<String>,
}

/// Unparsed predictions (`None`) are wrong for accuracy and count as "No"
/// for F1. Positive class is "Yes".
pub fn classification_metrics<T: Scalar>(
    preds: &[Option<bool>],
    golds: &[bool],
) -> Result<ClassificationMetrics<T>, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch(preds.len(), golds.len()));
    }
    if golds.is_empty() {
        return Err(EvalError::EmptyScoredSet);
    }
    let mut c = Confusion { tp: 0, fp: 0, fn_: 0, tn: 0 };
    let mut correct = 0;
    for (p, &g) in preds.iter().zip(golds) {
        if *p == Some(g) {
            correct += 1;
        }
        match (p.unwrap_or(false), g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    let mut diagnostics = Vec::new();
    let f1 = if c.tp + c.fp == 0 {
        diagnostics.push("precision undefined (no positive predictions); F1 set to 0".to_string());
        T::zero()
    } else if c.tp + c.fn_ == 0 {
        diagnostics.push("recall undefined (no positive gold labels); F1 set to 0".to_string());
        T::zero()
    } else if c.tp == 0 {
        T::zero()
    } else {
        let p = T::of_usize(c.tp) / T::of_usize(c.tp + c.fp);
        let r = T::of_usize(c.tp) / T::of_usize(c.tp + c.fn_);
        T::of(2.0) * p * r / (p + r)
    };
    Ok(ClassificationMetrics {
        accuracy: T::of_usize(correct) / T::of_usize(golds.len()),
        f1,
        confusion: c,
        n_unparsed: preds.iter().filter(|p| p.is_none()).count(),
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics<T> {
    pub mae: T,
    pub rmse: T,
    pub n_scored: usize,
    pub n_unparsed: usize,
}

/// MAE and RMSE over pairs whose prediction parsed; unparsed pairs are
/// excluded and counted.
pub fn regression_metrics<T: Scalar>(preds: &[Option<T>], golds: &[T]) -> Result<RegressionMetrics<T>, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch(preds.len(), golds.len()));
    }
    let errors: Vec<T> = preds
        .iter()
        .zip(golds)
        .filter_map(|(p, &g)| p.map(|p| p - g))
        .collect();
    if errors.is_empty() {
        return Err(EvalError::EmptyScoredSet);
    }
    let n = T::of_usize(errors.len());
    let mae = errors.iter().map(|e| e.abs()).sum::<T>() / n;
    let rmse = (errors.iter().map(|&e| e * e).sum::<T>() / n).sqrt();
    Ok(RegressionMetrics {
        mae,
        rmse,
        n_scored: errors.len(),
        n_unparsed: preds.len() - errors.len(),
    })
}

/// Lowercase, split on whitespace, strip trailing punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| w.trim_end_matches(|c: char| c.is_ascii_punctuation()).to_string())
        .filter(|w| !w.is_empty())
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total.
fn clipped_matches(cand: &[String], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    let cand_counts = ngram_counts(cand, n);
    let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
    let matched = cand_counts
        .iter()
        .map(|(g, &c)| {
            let max_ref = ref_counts.iter().map(|rc| rc.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
            c.min(max_ref)
        })
        .sum();
    (matched, cand.len().saturating_sub(n - 1))
}

/// Reference length closest to `c`, shorter on ties.
fn closest_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

fn bleu_from_counts(matches: &[usize], totals: &[usize], c: usize, r: usize) -> f64 {
    if c == 0 || matches.iter().zip(totals).any(|(&m, &t)| m == 0 || t == 0) {
        return 0.0;
    }
    let n = matches.len() as f64;
    let log_p: f64 = matches
        .iter()
        .zip(totals)
        .map(|(&m, &t)| (m as f64 / t as f64).ln())
        .sum::<f64>()
        / n;
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * log_p.exp()
}

/// Sentence BLEU-n with uniform weights and no smoothing.
pub fn bleu_n(candidate: &str, references: &[&str], n: usize) -> f64 {
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    let (matches, totals): (Vec<usize>, Vec<usize>) = (1..=n).map(|k| clipped_matches(&cand, &refs, k)).unzip();
    bleu_from_counts(&matches, &totals, cand.len(), closest_ref_len(cand.len(), &refs))
}

/// Corpus BLEU-n: n-gram matches and lengths are summed over all segments
/// before the precisions are combined.
pub fn corpus_bleu(segments: &[(String, Vec<String>)], n: usize) -> f64 {
    let mut matches = vec![0; n];
    let mut totals = vec![0; n];
    let (mut c, mut r) = (0, 0);
    for (cand, refs) in segments {
        let cand = tokenize(cand);
        let refs: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
        for k in 1..=n {
            let (m, t) = clipped_matches(&cand, &refs, k);
            matches[k - 1] += m;
            totals[k - 1] += t;
        }
        c += cand.len();
        r += closest_ref_len(cand.len(), &refs);
    }
    bleu_from_counts(&matches, &totals, c, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    One,
    Two,
    L,
}

fn f1_of(overlap: usize, cand_len: usize, ref_len: usize) -> f64 {
    if overlap == 0 || cand_len == 0 || ref_len == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_len as f64;
    let r = overlap as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0; b.len() + 1];
    let mut cur = vec![0; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE F1.
pub fn rouge(candidate: &str, reference: &str, variant: RougeVariant) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    match variant {
        RougeVariant::L => f1_of(lcs_len(&cand, &refr), cand.len(), refr.len()),
        RougeVariant::One | RougeVariant::Two => {
            let n = if variant == RougeVariant::One { 1 } else { 2 };
            let cc = ngram_counts(&cand, n);
            let rc = ngram_counts(&refr, n);
            let overlap = cc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum();
            f1_of(overlap, cand.len().saturating_sub(n - 1), refr.len().saturating_sub(n - 1))
        }
    }
}

/// Exact-match unigram alignment. Each candidate token, left to right,
/// continues the previous token's chunk when the next reference position
/// matches, otherwise takes the earliest unused matching position.
fn meteor_alignment(cand: &[String], refr: &[String]) -> Vec<Option<usize>> {
    let mut used = vec![false; refr.len()];
    let mut out: Vec<Option<usize>> = Vec::with_capacity(cand.len());
    for (i, tok) in cand.iter().enumerate() {
        let continued = i
            .checked_sub(1)
            .and_then(|p| out[p])
            .map(|r| r + 1)
            .filter(|&r| r < refr.len() && !used[r] && refr[r] == *tok);
        let pos = continued.or_else(|| (0..refr.len()).find(|&r| !used[r] && refr[r] == *tok));
        if let Some(r) = pos {
            used[r] = true;
        }
        out.push(pos);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteorDetail {
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_mean: f64,
    pub penalty: f64,
    pub score: f64,
}

pub fn meteor_detail(candidate: &str, reference: &str) -> MeteorDetail {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    let align = meteor_alignment(&cand, &refr);
    let matches = align.iter().flatten().count();
    if matches == 0 {
        return MeteorDetail {
            matches: 0,
            chunks: 0,
            precision: 0.0,
            recall: 0.0,
            f_mean: 0.0,
            penalty: 0.0,
            score: 0.0,
        };
    }
    let mut chunks = 0;
    for (i, a) in align.iter().enumerate() {
        let Some(r) = a else { continue };
        let extends = i > 0 && align[i - 1].is_some_and(|p| p + 1 == *r);
        if !extends {
            chunks += 1;
        }
    }
    let precision = matches as f64 / cand.len() as f64;
    let recall = matches as f64 / refr.len() as f64;
    let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    MeteorDetail {
        matches,
        chunks,
        precision,
        recall,
        f_mean,
        penalty,
        score: f_mean * (1.0 - penalty),
    }
}

pub fn meteor(candidate: &str, reference: &str) -> f64 {
    meteor_detail(candidate, reference).score
}

/// Scores for one (dataset, model, mode) cell. Only the block matching the
/// task kind is filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub model: String,
    pub mode: String,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub bleu2: Option<f64>,
    pub bleu4: Option<f64>,
    pub rouge1: Option<f64>,
    pub rouge2: Option<f64>,
    #[serde(rename = "rougeL")]
    pub rouge_l: Option<f64>,
    pub meteor: Option<f64>,
    pub parse_failure_rate: f64,
    pub n_scored: usize,
    pub n_unparsed: usize,
    pub n_total: usize,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl MetricReport {
    pub fn empty(dataset: &str, model: &str, mode: &str) -> MetricReport {
        MetricReport {
            dataset: dataset.to_string(),
            model: model.to_string(),
            mode: mode.to_string(),
            accuracy: None,
            f1: None,
            mae: None,
            rmse: None,
            bleu2: None,
            bleu4: None,
            rouge1: None,
            rouge2: None,
            rouge_l: None,
            meteor: None,
            parse_failure_rate: 0.0,
            n_scored: 0,
            n_unparsed: 0,
            n_total: 0,
            diagnostics: Vec::new(),
        }
    }

    /// Named metric values that are present, in a fixed order.
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        [
            ("accuracy", self.accuracy),
            ("f1", self.f1),
            ("mae", self.mae),
            ("rmse", self.rmse),
            ("bleu2", self.bleu2),
            ("bleu4", self.bleu4),
            ("rouge1", self.rouge1),
            ("rouge2", self.rouge2),
            ("rougeL", self.rouge_l),
            ("meteor", self.meteor),
        ]
        .into_iter()
        .filter_map(|(n, v)| v.map(|v| (n, v)))
        .collect()
    }

    pub fn set_metric(&mut self, name: &str, value: f64) -> bool {
        let slot = match name {
            "accuracy" => &mut self.accuracy,
            "f1" => &mut self.f1,
            "mae" => &mut self.mae,
            "rmse" => &mut self.rmse,
            "bleu2" => &mut self.bleu2,
            "bleu4" => &mut self.bleu4,
            "rouge1" => &mut self.rouge1,
            "rouge2" => &mut self.rouge2,
            "rougeL" => &mut self.rouge_l,
            "meteor" => &mut self.meteor,
            _ => return false,
        };
        *slot = Some(value);
        true
    }
}

/// Scores transcripts against gold labels keyed by target id. Transport
/// failures (no response) count as unparsed answers.
pub fn evaluate(
    task: &TaskSpec,
    model: &str,
    mode: &str,
    transcripts: &[Transcript],
    golds: &HashMap<u64, Label>,
) -> Result<MetricReport, EvalError> {
    let format = ExpectedFormat::for_task(task.kind);
    let mut report = MetricReport::empty(&task.name, model, mode);
    let mut pairs = Vec::with_capacity(transcripts.len());
    for t in transcripts {
        let gold = golds.get(&t.target_id).ok_or(EvalError::UnknownTarget(t.target_id))?;
        let parsed = t
            .response
            .as_deref()
            .map_or(ParsedAnswer::Unparsed, |r| parse_answer(r, format));
        pairs.push((t.target_id, parsed, gold));
    }
    report.n_total = pairs.len();
    report.n_unparsed = pairs.iter().filter(|(_, p, _)| !p.is_parsed()).count();
    report.n_scored = report.n_total - report.n_unparsed;
    if report.n_total == 0 {
        return Err(EvalError::EmptyScoredSet);
    }
    report.parse_failure_rate = report.n_unparsed as f64 / report.n_total as f64;

    match task.kind {
        TaskKind::Classification => {
            let mut preds = Vec::new();
            let mut gs = Vec::new();
            for (id, p, g) in &pairs {
                gs.push(g.as_binary().ok_or(EvalError::LabelMismatch(*id))?);
                preds.push(match p {
                    ParsedAnswer::YesNo(b) => Some(*b),
                    _ => None,
                });
            }
            let m = classification_metrics::<f64>(&preds, &gs)?;
            report.accuracy = Some(m.accuracy);
            report.f1 = Some(m.f1);
            report.diagnostics.extend(m.diagnostics);
        }
        TaskKind::Regression => {
            let mut preds = Vec::new();
            let mut gs = Vec::new();
            for (id, p, g) in &pairs {
                gs.push(g.as_number().ok_or(EvalError::LabelMismatch(*id))?);
                preds.push(match p {
                    ParsedAnswer::Number(v) => Some(*v),
                    _ => None,
                });
            }
            let m = regression_metrics::<f64>(&preds, &gs)?;
            report.mae = Some(m.mae);
            report.rmse = Some(m.rmse);
        }
        TaskKind::MultiRegression => {
            let mut preds = Vec::new();
            let mut gs = Vec::new();
            for (id, p, g) in &pairs {
                let Label::Vector(gv) = g else { return Err(EvalError::LabelMismatch(*id)) };
                if gv.len() != QM9_TARGETS.len() {
                    return Err(EvalError::LabelMismatch(*id));
                }
                for (k, &gk) in gv.iter().enumerate() {
                    gs.push(gk);
                    preds.push(match p {
                        ParsedAnswer::Vector(v) => Some(v[k]),
                        _ => None,
                    });
                }
            }
            let m = regression_metrics::<f64>(&preds, &gs)?;
            report.mae = Some(m.mae);
            report.rmse = Some(m.rmse);
            report
                .diagnostics
                .push("MAE/RMSE pooled over all twelve targets in raw units".to_string());
        }
        TaskKind::Description => {
            let mut segments = Vec::new();
            let mut sums = [0.0f64; 4];
            for (id, p, g) in &pairs {
                let Label::Text(reference) = g else { return Err(EvalError::LabelMismatch(*id)) };
                let cand = match p {
                    ParsedAnswer::Text(t) => t.clone(),
                    _ => String::new(),
                };
                sums[0] += rouge(&cand, reference, RougeVariant::One);
                sums[1] += rouge(&cand, reference, RougeVariant::Two);
                sums[2] += rouge(&cand, reference, RougeVariant::L);
                sums[3] += meteor(&cand, reference);
                segments.push((cand, vec![reference.clone()]));
            }
            let n = pairs.len() as f64;
            report.bleu2 = Some(corpus_bleu(&segments, 2));
            report.bleu4 = Some(corpus_bleu(&segments, 4));
            report.rouge1 = Some(sums[0] / n);
            report.rouge2 = Some(sums[1] / n);
            report.rouge_l = Some(sums[2] / n);
            report.meteor = Some(sums[3] / n);
        }
    }
    Ok(report)
}

/// Gold labels by id, for joining transcripts.
pub fn gold_map<'a>(records: impl IntoIterator<Item = &'a crate::dataset::MoleculeRecord>) -> HashMap<u64, Label> {
    records.into_iter().map(|r| (r.id, r.label.clone())).collect()
}

/// Description-task scores on the 0-100 scale used by published tables.
pub fn percent_scale(report: &MetricReport) -> BTreeMap<&'static str, f64> {
    report
        .metrics()
        .into_iter()
        .filter(|(n, _)| n.starts_with("bleu") || n.starts_with("rouge") || *n == "meteor")
        .map(|(n, v)| (n, v * 100.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_answers() {
        assert_eq!(parse_binary("Yes, this molecule inhibits BACE-1."), ParsedAnswer::YesNo(true));
        assert_eq!(parse_binary("no"), ParsedAnswer::YesNo(false));
        assert_eq!(parse_binary("The answer is unclear"), ParsedAnswer::Unparsed);
        assert_eq!(
            parse_binary("There is no charged amine here, but logP is low.\nAnswer: Yes"),
            ParsedAnswer::YesNo(true)
        );
    }

    #[test]
    fn numeric_answers() {
        assert_eq!(parse_numeric("-3.21 mol/L approximately"), ParsedAnswer::Number(-3.21));
        assert_eq!(parse_numeric("no idea"), ParsedAnswer::Unparsed);
        assert_eq!(parse_numeric("about 1.5e-2"), ParsedAnswer::Number(0.015));
        assert_eq!(parse_numeric("\u{2212}2.5"), ParsedAnswer::Number(-2.5));
    }

    #[test]
    fn vector_skips_names_with_digits() {
        let text: String = QM9_TARGETS
            .iter()
            .enumerate()
            .map(|(i, n)| format!("{n}: {}\n", i as f64 + 0.5))
            .collect();
        let expected: Vec<f64> = (0..12).map(|i| i as f64 + 0.5).collect();
        assert_eq!(parse_vector(&text, 12), ParsedAnswer::Vector(expected));
        assert_eq!(parse_vector("1 2 3", 12), ParsedAnswer::Unparsed);
    }

    #[test]
    fn classification_fixture() {
        let preds = [Some(true), Some(true), Some(false), Some(false)];
        let golds = [true, false, true, false];
        let m = classification_metrics::<f64>(&preds, &golds).unwrap();
        assert_eq!((m.accuracy, m.f1), (0.5, 0.5));
    }

    #[test]
    fn unparsed_counts_wrong_and_negative() {
        let m = classification_metrics::<f64>(&[None, Some(true)], &[false, true]).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.f1, 1.0);
    }

    #[test]
    fn regression_fixture() {
        let m = regression_metrics::<f64>(&[Some(0.0), Some(2.0), None], &[1.0, 1.0, 5.0]).unwrap();
        assert_eq!((m.mae, m.rmse, m.n_unparsed), (1.0, 1.0, 1));
        assert_eq!(regression_metrics::<f32>(&[None], &[1.0]), Err(EvalError::EmptyScoredSet));
    }

    #[test]
    fn text_metric_identities() {
        let s = "the molecule is a primary alcohol";
        assert_eq!(bleu_n(s, &[s], 4), 1.0);
        assert_eq!(bleu_n("a b c", &["x y z"], 2), 0.0);
        assert!((rouge("the cat sat", "the cat ran", RougeVariant::One) - 2.0 / 3.0).abs() < 1e-15);
        assert!((rouge("the cat sat", "the cat ran", RougeVariant::L) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(meteor("word", "word"), 0.5);
        assert_eq!(meteor("a", "b"), 0.0);
    }
}
