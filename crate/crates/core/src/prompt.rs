//! Prompt assembly: general outline, task instruction, Tanimoto-selected
//! examples and the question, for zero-shot, ICL and chain-of-thought modes.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem::parse_smiles;
use crate::dataset::{Label, MoleculeRecord, TaskKind, TaskSpec};
use crate::fingerprint::{default_fingerprint, FingerprintError, SimilarityIndex, DEFAULT_RADIUS, DEFAULT_WIDTH};

pub const PROMPT_SCHEMA_VERSION: u32 = 1;

/// Target names for the twelve-value regression task, in answer order.
pub const QM9_TARGETS: [&str; 12] = [
    "mu", "alpha", "homo", "lumo", "gap", "r2", "zpve", "u0", "u298", "h298", "g298", "cv",
];

macro_rules! builtin_templates {
    ($($ds:literal),*) => {
        &[$(
            ($ds, "zero_shot", include_str!(concat!("../assets/templates/", $ds, "/zero_shot.txt"))),
            ($ds, "icl", include_str!(concat!("../assets/templates/", $ds, "/icl.txt"))),
            ($ds, "cot", include_str!(concat!("../assets/templates/", $ds, "/cot.txt"))),
        )*]
    };
}

const BUILTIN_TEMPLATES: &[(&str, &str, &str)] =
    builtin_templates!("bace", "bbbp", "chebi", "clintox", "esol", "hiv", "ld50", "pcqm4mv2", "qm9", "tox21");
const BUILTIN_MANIFEST: &str = include_str!("../assets/templates/MANIFEST.sha256");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("no template for dataset {dataset:?} in mode {mode}")]
    MissingTemplate { dataset: String, mode: String },
    #[error("template {template}: unknown placeholder {{{placeholder}}}")]
    UnknownPlaceholder { template: String, placeholder: String },
    #[error("template {template}: missing section [{section}]")]
    MissingSection { template: String, section: String },
    #[error("template {template}: checksum does not match the manifest")]
    ChecksumMismatch { template: String },
    #[error("need {needed} examples but only {available} training molecules are available")]
    InsufficientExamples { needed: usize, available: usize },
    #[error("record {0} has no SELFIES string")]
    MissingSelfies(u64),
    #[error("record {id}: {reason}")]
    BadRecord { id: u64, reason: String },
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    Icl(usize),
    Cot(usize),
}

impl PromptMode {
    pub fn k(self) -> usize {
        match self {
            PromptMode::ZeroShot => 0,
            PromptMode::Icl(k) | PromptMode::Cot(k) => k,
        }
    }

    fn template_key(self) -> &'static str {
        match self {
            PromptMode::ZeroShot => "zero_shot",
            PromptMode::Icl(_) => "icl",
            PromptMode::Cot(_) => "cot",
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptMode::ZeroShot => f.write_str("zero_shot"),
            PromptMode::Icl(k) => write!(f, "icl{k}"),
            PromptMode::Cot(k) => write!(f, "cot{k}"),
        }
    }
}

impl FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "zero_shot" || s == "zeroshot" || s == "zero-shot" {
            return Ok(PromptMode::ZeroShot);
        }
        let parse_k = |rest: &str| rest.trim_start_matches(['-', '_', ':']).parse::<usize>();
        if let Some(rest) = s.strip_prefix("icl") {
            return parse_k(rest).map(PromptMode::Icl).map_err(|_| format!("bad mode {s:?}"));
        }
        if let Some(rest) = s.strip_prefix("cot") {
            return parse_k(rest).map(PromptMode::Cot).map_err(|_| format!("bad mode {s:?}"));
        }
        Err(format!("unknown prompt mode {s:?} (expected zero_shot, iclK or cotK)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Smiles,
    Selfies,
}

impl Representation {
    pub fn display_name(self) -> &'static str {
        match self {
            Representation::Smiles => "SMILES",
            Representation::Selfies => "SELFIES",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::Smiles => "smiles",
            Representation::Selfies => "selfies",
        })
    }
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "smiles" => Ok(Representation::Smiles),
            "selfies" => Ok(Representation::Selfies),
            _ => Err(format!("unknown representation {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedFormat {
    YesNo,
    Number,
    NumberVector(usize),
    FreeText,
}

impl ExpectedFormat {
    pub fn for_task(kind: TaskKind) -> ExpectedFormat {
        match kind {
            TaskKind::Classification => ExpectedFormat::YesNo,
            TaskKind::Regression => ExpectedFormat::Number,
            TaskKind::MultiRegression => ExpectedFormat::NumberVector(QM9_TARGETS.len()),
            TaskKind::Description => ExpectedFormat::FreeText,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub schema_version: u32,
    pub prompt_id: String,
    pub dataset: String,
    pub target_id: u64,
    pub text: String,
    pub image_path: String,
    pub mode: PromptMode,
    pub representation: Representation,
    pub example_ids: Vec<u64>,
    pub expected_format: ExpectedFormat,
}

/// `<dataset>:<target id>:<mode>:<representation>`
pub fn prompt_id(dataset: &str, target_id: u64, mode: PromptMode, repr: Representation) -> String {
    format!("{dataset}:{target_id}:{mode}:{repr}")
}

/// One parsed template file: named sections in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub sections: BTreeMap<String, String>,
}

impl Template {
    pub fn parse(name: &str, text: &str) -> Template {
        let mut sections = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        for line in text.lines() {
            if current.is_none() && line.starts_with("# ") {
                continue;
            }
            let trimmed = line.trim_end();
            if trimmed.starts_with('[') && trimmed.ends_with(']') && !trimmed.contains(' ') {
                if let Some((n, body)) = current.take() {
                    sections.insert(n, body.join("\n").trim_end().to_string());
                }
                current = Some((trimmed[1..trimmed.len() - 1].to_string(), Vec::new()));
            } else if let Some((_, body)) = current.as_mut() {
                body.push(line);
            }
        }
        if let Some((n, body)) = current {
            sections.insert(n, body.join("\n").trim_end().to_string());
        }
        Template {
            name: name.to_string(),
            sections,
        }
    }

    fn section(&self, name: &str) -> Result<&str, PromptError> {
        self.sections
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| PromptError::MissingSection {
                template: self.name.clone(),
                section: name.to_string(),
            })
    }
}

/// Templates keyed by (dataset, mode key).
#[derive(Debug, Clone, Default)]
pub struct TemplateStore {
    templates: HashMap<(String, String), Template>,
}

impl TemplateStore {
    /// The bundled templates, verified against the bundled checksum manifest.
    pub fn builtin() -> Result<TemplateStore, PromptError> {
        let manifest = parse_manifest(BUILTIN_MANIFEST);
        let mut store = TemplateStore::default();
        for (ds, mode, text) in BUILTIN_TEMPLATES {
            let rel = format!("{ds}/{mode}.txt");
            verify_checksum(&manifest, &rel, text.as_bytes())?;
            store.insert(ds, mode, text);
        }
        Ok(store)
    }

    /// Loads `<dir>/<dataset>/<mode>.txt` files listed in `<dir>/MANIFEST.sha256`.
    pub fn from_dir(dir: &Path) -> Result<TemplateStore, PromptError> {
        let manifest_text = std::fs::read_to_string(dir.join("MANIFEST.sha256"))?;
        let manifest = parse_manifest(&manifest_text);
        let mut store = TemplateStore::default();
        for rel in manifest.keys() {
            let bytes = std::fs::read(dir.join(rel))?;
            verify_checksum(&manifest, rel, &bytes)?;
            let text = String::from_utf8_lossy(&bytes);
            let Some((ds, file)) = rel.split_once('/') else { continue };
            store.insert(ds, file.trim_end_matches(".txt"), &text);
        }
        Ok(store)
    }

    pub fn insert(&mut self, dataset: &str, mode_key: &str, text: &str) {
        let name = format!("{dataset}/{mode_key}");
        self.templates
            .insert((dataset.to_string(), mode_key.to_string()), Template::parse(&name, text));
    }

    pub fn get(&self, dataset: &str, mode: PromptMode) -> Result<&Template, PromptError> {
        self.templates
            .get(&(dataset.to_string(), mode.template_key().to_string()))
            .ok_or_else(|| PromptError::MissingTemplate {
                dataset: dataset.to_string(),
                mode: mode.template_key().to_string(),
            })
    }
}

fn parse_manifest(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once("  "))
        .map(|(hash, path)| (path.trim().to_string(), hash.trim().to_string()))
        .collect()
}

fn verify_checksum(manifest: &BTreeMap<String, String>, rel: &str, bytes: &[u8]) -> Result<(), PromptError> {
    let actual: String = Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect();
    match manifest.get(rel) {
        Some(expected) if *expected == actual => Ok(()),
        _ => Err(PromptError::ChecksumMismatch {
            template: rel.to_string(),
        }),
    }
}

/// Replaces `{name}` placeholders. Every placeholder must be in `values`.
fn interpolate(template: &str, text: &str, values: &BTreeMap<&str, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if after[..close].chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && close > 0 => {
                let key = &after[..close];
                let value = values.get(key).ok_or_else(|| PromptError::UnknownPlaceholder {
                    template: template.to_string(),
                    placeholder: key.to_string(),
                })?;
                out.push_str(value);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Rounds to three significant digits and prints without exponent.
pub fn format_sig3(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".to_string() } else { v.to_string() };
    }
    let magnitude = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(2 - magnitude);
    let rounded = (v * scale).round() / scale;
    // rounding can carry into the next decade (9.996 -> 10.0)
    let magnitude = if rounded.abs() >= 10f64.powi(magnitude + 1) { magnitude + 1 } else { magnitude };
    let decimals = (2 - magnitude).max(0) as usize;
    let s = format!("{rounded:.decimals$}");
    if s.starts_with("-") && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

/// Gold answer text as shown in example blocks.
pub fn format_answer(label: &Label) -> String {
    match label {
        Label::Binary(true) => "Yes".to_string(),
        Label::Binary(false) => "No".to_string(),
        Label::Number(v) => format_sig3(*v),
        Label::Vector(vs) => QM9_TARGETS
            .iter()
            .zip(vs)
            .map(|(n, v)| format!("{n}: {}", format_sig3(*v)))
            .collect::<Vec<_>>()
            .join("\n"),
        Label::Text(t) => t.clone(),
    }
}

/// Training molecules available as in-context examples.
#[derive(Debug, Clone)]
pub struct ExamplePool {
    index: SimilarityIndex,
    records: HashMap<u64, MoleculeRecord>,
}

impl ExamplePool {
    pub fn build(train: &[MoleculeRecord]) -> Result<ExamplePool, PromptError> {
        let fps = train
            .par_iter()
            .map(|r| {
                parse_smiles(&r.canonical)
                    .map(|g| (r.id, default_fingerprint(&g)))
                    .map_err(|e| PromptError::BadRecord {
                        id: r.id,
                        reason: e.to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let index = SimilarityIndex::new(DEFAULT_WIDTH, DEFAULT_RADIUS, fps)?;
        Ok(ExamplePool {
            index,
            records: train.iter().map(|r| (r.id, r.clone())).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.records.contains_key(&id)
    }

    pub fn index(&self) -> &SimilarityIndex {
        &self.index
    }
}

/// The `k` training molecules most similar to `target` (its own id excluded),
/// best first, ties by ascending id.
pub fn select_icl_examples(target: &MoleculeRecord, pool: &ExamplePool, k: usize) -> Result<Vec<u64>, PromptError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let available = pool.len() - usize::from(pool.contains(target.id));
    if available < k {
        return Err(PromptError::InsufficientExamples { needed: k, available });
    }
    let g = parse_smiles(&target.canonical).map_err(|e| PromptError::BadRecord {
        id: target.id,
        reason: e.to_string(),
    })?;
    let hits = pool.index.top_k(&default_fingerprint(&g), Some(target.id), k)?;
    Ok(hits.into_iter().map(|(id, _)| id).collect())
}

fn molecule_text(record: &MoleculeRecord, repr: Representation) -> Result<String, PromptError> {
    match repr {
        Representation::Smiles => Ok(record.canonical.clone()),
        Representation::Selfies => record.selfies.clone().ok_or(PromptError::MissingSelfies(record.id)),
    }
}

fn base_values(task: &TaskSpec, repr: Representation) -> BTreeMap<&'static str, String> {
    let mut v = BTreeMap::new();
    v.insert("repr_name", repr.display_name().to_string());
    v.insert("dataset", task.display_name.clone());
    v.insert("property", task.property.clone());
    v.insert("units", task.units.clone().unwrap_or_default());
    v.insert(
        "positive_meaning",
        task.positive_label_meaning.clone().unwrap_or_default(),
    );
    v
}

/// Assembles the prompt for `record`. Sections appear in the order: general
/// outline, task instruction (not in zero-shot), reasoning instruction (CoT
/// only), example block (when k > 0), question.
pub fn build_prompt(
    record: &MoleculeRecord,
    task: &TaskSpec,
    mode: PromptMode,
    repr: Representation,
    pool: &ExamplePool,
    templates: &TemplateStore,
) -> Result<PromptRecord, PromptError> {
    let template = templates.get(&task.name, mode)?;
    let tname = template.name.as_str();
    let base = base_values(task, repr);
    let mut parts = vec![interpolate(tname, template.section("outline")?, &base)?];
    if mode != PromptMode::ZeroShot {
        parts.push(interpolate(tname, template.section("instruction")?, &base)?);
    }
    if matches!(mode, PromptMode::Cot(_)) {
        parts.push(interpolate(tname, template.section("reasoning")?, &base)?);
    }

    let example_ids = select_icl_examples(record, pool, mode.k())?;
    if !example_ids.is_empty() {
        parts.push(interpolate(tname, template.section("examples_header")?, &base)?);
        for (i, id) in example_ids.iter().enumerate() {
            let ex = &pool.records[id];
            let mut values = base.clone();
            values.insert("example_index", (i + 1).to_string());
            values.insert("example_molecule", molecule_text(ex, repr)?);
            values.insert("example_answer", format_answer(&ex.label));
            if matches!(mode, PromptMode::Cot(_)) {
                let section = match ex.label {
                    Label::Binary(true) => "rationale_yes",
                    Label::Binary(false) => "rationale_no",
                    _ => "rationale",
                };
                let rationale = interpolate(tname, template.section(section)?, &values)?;
                values.insert("rationale", rationale);
            }
            parts.push(interpolate(tname, template.section("example")?, &values)?);
        }
    }

    let mut q = base.clone();
    q.insert("molecule", molecule_text(record, repr)?);
    match repr {
        Representation::Smiles => q.insert("smiles", record.canonical.clone()),
        Representation::Selfies => q.insert("selfies", molecule_text(record, repr)?),
    };
    parts.push(interpolate(tname, template.section("question")?, &q)?);

    Ok(PromptRecord {
        schema_version: PROMPT_SCHEMA_VERSION,
        prompt_id: prompt_id(&task.name, record.id, mode, repr),
        dataset: task.name.clone(),
        target_id: record.id,
        text: parts.join("\n\n") + "\n",
        image_path: record.image_path.clone(),
        mode,
        representation: repr,
        example_ids,
        expected_format: ExpectedFormat::for_task(task.kind),
    })
}

/// Builds prompts for every target in parallel; output follows input order.
pub fn build_prompts(
    targets: &[MoleculeRecord],
    task: &TaskSpec,
    mode: PromptMode,
    repr: Representation,
    pool: &ExamplePool,
    templates: &TemplateStore,
) -> Result<Vec<PromptRecord>, PromptError> {
    targets
        .par_iter()
        .map(|r| build_prompt(r, task, mode, repr, pool, templates))
        .collect()
}

pub fn write_prompts_jsonl(path: &Path, prompts: &[PromptRecord]) -> Result<(), PromptError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for p in prompts {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_prompts_jsonl(path: &Path) -> Result<Vec<PromptRecord>, PromptError> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig3_formatting() {
        assert_eq!(format_sig3(-3.14159), "-3.14");
        assert_eq!(format_sig3(0.0123456), "0.0123");
        assert_eq!(format_sig3(12345.0), "12300");
        assert_eq!(format_sig3(9.996), "10.0");
        assert_eq!(format_sig3(0.0), "0");
        assert_eq!(format_sig3(-0.0004), "-0.000400");
    }

    #[test]
    fn modes_parse_and_print() {
        for m in [PromptMode::ZeroShot, PromptMode::Icl(0), PromptMode::Icl(2), PromptMode::Cot(4)] {
            assert_eq!(m.to_string().parse::<PromptMode>().unwrap(), m);
        }
        assert!("icl".parse::<PromptMode>().is_err());
    }

    #[test]
    fn interpolation_rejects_unknown() {
        let mut v = BTreeMap::new();
        v.insert("a", "1".to_string());
        assert_eq!(interpolate("t", "x{a}y {not closed", &v).unwrap(), "x1y {not closed");
        assert!(matches!(
            interpolate("t", "{b}", &v),
            Err(PromptError::UnknownPlaceholder { placeholder, .. }) if placeholder == "b"
        ));
    }

    #[test]
    fn builtin_templates_verify() {
        let store = TemplateStore::builtin().unwrap();
        for ds in TaskSpec::builtin_names() {
            for m in [PromptMode::ZeroShot, PromptMode::Icl(2), PromptMode::Cot(2)] {
                let t = store.get(ds, m).unwrap();
                assert!(t.sections.contains_key("outline") && t.sections.contains_key("question"));
                assert_eq!(t.sections.contains_key("instruction"), m != PromptMode::ZeroShot);
            }
        }
    }

    #[test]
    fn template_sections_parse() {
        let t = Template::parse("x", "# header\n[outline]\nhello\n\n[question]\nq {molecule}\n");
        assert_eq!(t.sections["outline"], "hello");
        assert_eq!(t.sections["question"], "q {molecule}");
    }
}
