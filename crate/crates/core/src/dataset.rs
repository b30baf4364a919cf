//! Dataset ingestion, curation and train/test splitting.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::chem::{encode_selfies, parse_smiles, write_canonical_smiles};
use crate::depict::{depict, DepictStyle};

pub const RECORD_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SPLIT_SEED: u64 = 42;
pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;

const BUILTIN_TASKS: [(&str, &str); 10] = [
    ("bace", include_str!("../assets/tasks/bace.toml")),
    ("bbbp", include_str!("../assets/tasks/bbbp.toml")),
    ("hiv", include_str!("../assets/tasks/hiv.toml")),
    ("clintox", include_str!("../assets/tasks/clintox.toml")),
    ("tox21", include_str!("../assets/tasks/tox21.toml")),
    ("esol", include_str!("../assets/tasks/esol.toml")),
    ("ld50", include_str!("../assets/tasks/ld50.toml")),
    ("qm9", include_str!("../assets/tasks/qm9.toml")),
    ("pcqm4mv2", include_str!("../assets/tasks/pcqm4mv2.toml")),
    ("chebi", include_str!("../assets/tasks/chebi.toml")),
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("{0}: no data rows")]
    EmptyFile(String),
    #[error("unknown dataset {0:?}")]
    UnknownTask(String),
    #[error("task definition: {0}")]
    BadTask(String),
    #[error("need at least 2 records to split, got {0}")]
    TooFewRecords(usize),
    #[error("split ratio {0} outside (0, 1)")]
    BadRatio(f64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
    Description,
    MultiRegression,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
            TaskKind::Description => "description",
            TaskKind::MultiRegression => "multi_regression",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub display_name: String,
    pub kind: TaskKind,
    pub source_file: String,
    #[serde(default)]
    pub delimiter: Option<String>,
    pub smiles_column: String,
    pub label_columns: Vec<String>,
    pub property: String,
    #[serde(default)]
    pub units: Option<String>,
    #[serde(default)]
    pub positive_label_meaning: Option<String>,
    /// Source row count the published split sizes were computed from.
    #[serde(default)]
    pub expected_total: Option<usize>,
}

impl TaskSpec {
    pub fn from_toml(text: &str) -> Result<TaskSpec, DatasetError> {
        let spec: TaskSpec = toml::from_str(text).map_err(|e| DatasetError::BadTask(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn builtin(name: &str) -> Result<TaskSpec, DatasetError> {
        let key = name.to_ascii_lowercase();
        BUILTIN_TASKS
            .iter()
            .find(|(n, _)| *n == key)
            .map(|(_, text)| TaskSpec::from_toml(text))
            .unwrap_or_else(|| Err(DatasetError::UnknownTask(name.to_string())))
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN_TASKS.iter().map(|(n, _)| *n)
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::BadTask(format!("{}: {m}", self.name)));
        match self.kind {
            TaskKind::MultiRegression if self.label_columns.len() < 2 => bad("multi_regression needs several label columns"),
            TaskKind::Classification | TaskKind::Regression | TaskKind::Description if self.label_columns.len() != 1 => {
                bad("exactly one label column expected")
            }
            _ => Ok(()),
        }
    }

    fn delimiter_byte(&self) -> u8 {
        match self.delimiter.as_deref() {
            Some("\t") => b'\t',
            Some(d) if d.len() == 1 => d.as_bytes()[0],
            _ => b',',
        }
    }
}

/// A gold label in the shape required by the task kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Binary(bool),
    Number(f64),
    Vector(Vec<f64>),
    Text(String),
}

impl Label {
    pub fn as_binary(&self) -> Option<bool> {
        match self {
            Label::Binary(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Label::Number(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    /// Zero-based data row in the source file.
    pub row: usize,
    pub smiles: String,
    pub label: Label,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub dropped_missing_label: usize,
    pub dropped_empty_smiles: usize,
}

fn parse_label(kind: TaskKind, fields: &[&str]) -> Option<Label> {
    let num = |s: &str| -> Option<f64> {
        let v: f64 = s.trim().parse().ok()?;
        v.is_finite().then_some(v)
    };
    match kind {
        TaskKind::Classification => match fields[0].trim().to_ascii_lowercase().as_str() {
            "1" | "1.0" | "true" | "yes" => Some(Label::Binary(true)),
            "0" | "0.0" | "false" | "no" => Some(Label::Binary(false)),
            _ => None,
        },
        TaskKind::Regression => num(fields[0]).map(Label::Number),
        TaskKind::MultiRegression => fields.iter().map(|f| num(f)).collect::<Option<Vec<_>>>().map(Label::Vector),
        TaskKind::Description => {
            let t = fields[0].trim();
            (!t.is_empty()).then(|| Label::Text(t.to_string()))
        }
    }
}

/// Reads a delimited source file; rows without a usable label or SMILES are
/// dropped and counted. `limit` caps the number of data rows read.
pub fn ingest_csv(path: &Path, task: &TaskSpec, limit: Option<usize>) -> Result<(Vec<RawRecord>, IngestReport), DatasetError> {
    let file = File::open(path)?;
    ingest_reader(file, &path.display().to_string(), task, limit)
}

pub fn ingest_reader(
    reader: impl Read,
    source_name: &str,
    task: &TaskSpec,
    limit: Option<usize>,
) -> Result<(Vec<RawRecord>, IngestReport), DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(task.delimiter_byte())
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let smiles_col = column(&task.smiles_column)?;
    let label_cols = task.label_columns.iter().map(|c| column(c)).collect::<Result<Vec<_>, _>>()?;

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for (row, result) in rdr.records().enumerate() {
        if limit.is_some_and(|l| row >= l) {
            break;
        }
        let rec = result?;
        report.rows += 1;
        let smiles = rec.get(smiles_col).unwrap_or("").trim();
        if smiles.is_empty() {
            report.dropped_empty_smiles += 1;
            continue;
        }
        let fields: Vec<&str> = label_cols.iter().map(|&c| rec.get(c).unwrap_or("")).collect();
        match parse_label(task.kind, &fields) {
            Some(label) => records.push(RawRecord {
                row,
                smiles: smiles.to_string(),
                label,
            }),
            None => report.dropped_missing_label += 1,
        }
    }
    if report.rows == 0 {
        return Err(DatasetError::EmptyFile(source_name.to_string()));
    }
    Ok((records, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeRecord {
    pub schema_version: u32,
    pub id: u64,
    pub smiles: String,
    pub selfies: Option<String>,
    pub canonical: String,
    pub label: Label,
    pub image_path: String,
    /// A later duplicate of this molecule carried a different label.
    #[serde(default)]
    pub label_conflict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub row: usize,
    pub smiles: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelConflict {
    pub kept_id: u64,
    pub duplicate_row: usize,
    pub canonical: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub dataset: String,
    pub input_records: usize,
    pub curated: usize,
    pub unparseable: Vec<Exclusion>,
    pub duplicates_merged: usize,
    pub label_conflicts: Vec<LabelConflict>,
    /// Molecules kept without a SELFIES string.
    pub selfies_failures: Vec<Exclusion>,
    /// Set when the task declares an expected source size that differs from
    /// the number of records read.
    pub source_count_mismatch: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurateOptions {
    pub attach_selfies: bool,
}

impl Default for CurateOptions {
    fn default() -> Self {
        CurateOptions { attach_selfies: true }
    }
}

/// `<dataset>/<first 16 hex digits of sha256(canonical)>.png`
pub fn image_path_for(dataset: &str, canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    format!("{dataset}/{hex}.png")
}

/// Parses, canonicalizes and deduplicates records. Ids are assigned in
/// first-occurrence order.
pub fn curate(raw: &[RawRecord], task: &TaskSpec, opts: CurateOptions) -> (Vec<MoleculeRecord>, CurationReport) {
    let parsed: Vec<Result<(String, Option<Result<String, String>>), String>> = raw
        .par_iter()
        .map(|r| {
            let g = parse_smiles(&r.smiles).map_err(|e| e.to_string())?;
            let canonical = write_canonical_smiles(&g);
            let selfies = opts.attach_selfies.then(|| encode_selfies(&g).map_err(|e| e.to_string()));
            Ok((canonical, selfies))
        })
        .collect();

    let mut report = CurationReport {
        dataset: task.name.clone(),
        input_records: raw.len(),
        ..CurationReport::default()
    };
    let mut records: Vec<MoleculeRecord> = Vec::new();
    let mut by_canonical: HashMap<String, usize> = HashMap::new();
    for (r, p) in raw.iter().zip(parsed) {
        let (canonical, selfies) = match p {
            Ok(v) => v,
            Err(reason) => {
                report.unparseable.push(Exclusion {
                    row: r.row,
                    smiles: r.smiles.clone(),
                    reason,
                });
                continue;
            }
        };
        if let Some(&i) = by_canonical.get(&canonical) {
            report.duplicates_merged += 1;
            if records[i].label != r.label {
                records[i].label_conflict = true;
                log::warn!("{}: row {} duplicates {} with a different label", task.name, r.row, canonical);
                report.label_conflicts.push(LabelConflict {
                    kept_id: records[i].id,
                    duplicate_row: r.row,
                    canonical,
                });
            }
            continue;
        }
        let selfies = match selfies {
            Some(Ok(s)) => Some(s),
            Some(Err(reason)) => {
                report.selfies_failures.push(Exclusion {
                    row: r.row,
                    smiles: r.smiles.clone(),
                    reason,
                });
                None
            }
            None => None,
        };
        by_canonical.insert(canonical.clone(), records.len());
        records.push(MoleculeRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            id: records.len() as u64,
            smiles: r.smiles.clone(),
            selfies,
            image_path: image_path_for(&task.name, &canonical),
            canonical,
            label: r.label.clone(),
            label_conflict: false,
        });
    }
    report.curated = records.len();
    (records, report)
}

/// Notes a mismatch between the rows read and the task's expected source
/// size, without failing.
pub fn check_source_count(task: &TaskSpec, ingest: &IngestReport, report: &mut CurationReport) {
    if let Some(expected) = task.expected_total {
        if ingest.rows != expected {
            report.source_count_mismatch = Some(format!(
                "{} source has {} rows; published split sizes assume {}",
                task.name, ingest.rows, expected
            ));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub ratio: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratio: DEFAULT_TRAIN_RATIO,
            seed: DEFAULT_SPLIT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub dataset: String,
    pub seed: u64,
    pub ratio: String,
    pub train: Vec<u64>,
    pub test: Vec<u64>,
}

/// Number of training records for `n` records: `ratio * n` rounded half away
/// from zero.
pub fn train_count(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).round() as usize
}

/// Fisher-Yates over `items` driven by xoshiro256** seeded through
/// SplitMix64 (`seed_from_u64`). Position `i` swaps with
/// `floor(next_u64 * (i + 1) / 2^64)`.
pub fn seeded_shuffle<T>(items: &mut [T], seed: u64) {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    for i in (1..items.len()).rev() {
        let j = ((u128::from(rng.next_u64()) * (i as u128 + 1)) >> 64) as usize;
        items.swap(i, j);
    }
}

/// Deterministic train/test partition. Records are ordered by id, shuffled,
/// and the first `train_count` go to train. Records flagged with a label
/// conflict are moved ahead of the cut so they never land in test (sizes are
/// unchanged).
pub fn split(records: &[MoleculeRecord], dataset: &str, cfg: SplitConfig) -> Result<SplitManifest, DatasetError> {
    if !(cfg.ratio > 0.0 && cfg.ratio < 1.0) {
        return Err(DatasetError::BadRatio(cfg.ratio));
    }
    if records.len() < 2 {
        return Err(DatasetError::TooFewRecords(records.len()));
    }
    let mut order: Vec<&MoleculeRecord> = records.iter().collect();
    order.sort_by_key(|r| r.id);
    seeded_shuffle(&mut order, cfg.seed);
    let (conflicting, clean): (Vec<_>, Vec<_>) = order.into_iter().partition(|r| r.label_conflict);
    let ordered: Vec<u64> = conflicting.iter().chain(&clean).map(|r| r.id).collect();
    let cut = train_count(ordered.len(), cfg.ratio);
    if conflicting.len() > cut {
        log::warn!("{dataset}: more conflicting records than training slots; some reach test");
    }
    Ok(SplitManifest {
        dataset: dataset.to_string(),
        seed: cfg.seed,
        ratio: cfg.ratio.to_string(),
        train: ordered[..cut].to_vec(),
        test: ordered[cut..].to_vec(),
    })
}

pub fn write_records_jsonl(path: &Path, records: &[MoleculeRecord]) -> Result<(), DatasetError> {
    let mut w = std::io::BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<MoleculeRecord>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Renders a PNG for every record under `root`, in parallel. Returns the ids
/// that could not be depicted, with the reason; those records stay in the
/// manifest but have no image file.
pub fn render_images(records: &[MoleculeRecord], root: &Path, style: &DepictStyle) -> Result<Vec<(u64, String)>, DatasetError> {
    let failures: Vec<Result<Option<(u64, String)>, DatasetError>> = records
        .par_iter()
        .map(|r| {
            let target = root.join(&r.image_path);
            let graph = match parse_smiles(&r.canonical) {
                Ok(g) => g,
                Err(e) => return Ok(Some((r.id, e.to_string()))),
            };
            match depict(&graph, style).and_then(|d| d.image.to_png()) {
                Ok(png) => {
                    if let Some(dir) = target.parent() {
                        std::fs::create_dir_all(dir)?;
                    }
                    std::fs::write(&target, png)?;
                    Ok(None)
                }
                Err(e) => Ok(Some((r.id, e.to_string()))),
            }
        })
        .collect();
    let mut out = Vec::new();
    for f in failures {
        if let Some(fail) = f? {
            out.push(fail);
        }
    }
    Ok(out)
}
