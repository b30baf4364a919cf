//! Results grid, paper-style tables and per-family model ranking.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::TaskKind;
use crate::eval::MetricReport;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("duplicate cell ({model}, {dataset}, {mode})")]
    DuplicateCell { model: String, dataset: String, mode: String },
    #[error("dataset {dataset} registered as {existing:?} and {new:?}")]
    KindConflict { dataset: String, existing: TaskKind, new: TaskKind },
    #[error("ranking needs at least two models, found {0}")]
    TooFewModels(usize),
    #[error("csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    Classification,
    Regression,
    Description,
}

impl TaskFamily {
    pub fn of(kind: TaskKind) -> TaskFamily {
        match kind {
            TaskKind::Classification => TaskFamily::Classification,
            TaskKind::Regression | TaskKind::MultiRegression => TaskFamily::Regression,
            TaskKind::Description => TaskFamily::Description,
        }
    }

    pub const ALL: [TaskFamily; 3] = [TaskFamily::Classification, TaskFamily::Regression, TaskFamily::Description];
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub model: String,
    pub dataset: String,
    pub mode: String,
}

/// Metric reports keyed by (model, dataset, mode). Models and datasets keep
/// first-insertion order for table layout.
#[derive(Debug, Clone, Default)]
pub struct ResultsGrid {
    cells: BTreeMap<CellKey, MetricReport>,
    kinds: BTreeMap<String, TaskKind>,
    models: Vec<String>,
    datasets: Vec<String>,
}

/// Grids are equal when their cells and task kinds are; layout order is not
/// compared.
impl PartialEq for ResultsGrid {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells && self.kinds == other.kinds
    }
}

impl ResultsGrid {
    pub fn new() -> ResultsGrid {
        ResultsGrid::default()
    }

    pub fn insert(&mut self, kind: TaskKind, report: MetricReport) -> Result<(), ReportError> {
        if let Some(&existing) = self.kinds.get(&report.dataset) {
            if existing != kind {
                return Err(ReportError::KindConflict {
                    dataset: report.dataset.clone(),
                    existing,
                    new: kind,
                });
            }
        }
        let key = CellKey {
            model: report.model.clone(),
            dataset: report.dataset.clone(),
            mode: report.mode.clone(),
        };
        if self.cells.contains_key(&key) {
            return Err(ReportError::DuplicateCell {
                model: key.model,
                dataset: key.dataset,
                mode: key.mode,
            });
        }
        self.kinds.insert(report.dataset.clone(), kind);
        if !self.models.contains(&key.model) {
            self.models.push(key.model.clone());
        }
        if !self.datasets.contains(&key.dataset) {
            self.datasets.push(key.dataset.clone());
        }
        self.cells.insert(key, report);
        Ok(())
    }

    pub fn get(&self, model: &str, dataset: &str, mode: &str) -> Option<&MetricReport> {
        self.cells.get(&CellKey {
            model: model.to_string(),
            dataset: dataset.to_string(),
            mode: mode.to_string(),
        })
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &MetricReport)> {
        self.cells.iter()
    }

    pub fn kind(&self, dataset: &str) -> Option<TaskKind> {
        self.kinds.get(dataset).copied()
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn modes(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|k| k.mode.as_str()).collect()
    }

    pub fn datasets_in(&self, family: TaskFamily) -> Vec<&str> {
        self.datasets
            .iter()
            .filter(|d| TaskFamily::of(self.kinds[*d]) == family)
            .map(String::as_str)
            .collect()
    }

    fn models_in(&self, mode: &str) -> Vec<&str> {
        self.models
            .iter()
            .filter(|m| self.cells.keys().any(|k| &k.model == *m && k.mode == mode))
            .map(String::as_str)
            .collect()
    }
}

/// Regression error used for tables and ranking: RMSE for ESOL, MAE
/// elsewhere.
pub fn regression_metric_name(dataset: &str) -> &'static str {
    if dataset.eq_ignore_ascii_case("esol") {
        "rmse"
    } else {
        "mae"
    }
}

const DESCRIPTION_METRICS: [(&str, &str); 6] = [
    ("bleu2", "BLEU-2"),
    ("bleu4", "BLEU-4"),
    ("rouge1", "ROUGE-1"),
    ("rouge2", "ROUGE-2"),
    ("rougeL", "ROUGE-L"),
    ("meteor", "METEOR"),
];

fn metric(report: &MetricReport, name: &str) -> Option<f64> {
    report.metrics().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v)
}

/// Mean of the six text metrics; `None` if any is missing.
pub fn description_average(report: &MetricReport) -> Option<f64> {
    let vals: Option<Vec<f64>> = DESCRIPTION_METRICS.iter().map(|(n, _)| metric(report, n)).collect();
    vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// The number a model is ranked by on one dataset, and whether higher is
/// better.
pub fn primary_score(kind: TaskKind, report: &MetricReport) -> Option<(f64, bool)> {
    match TaskFamily::of(kind) {
        TaskFamily::Classification => report.accuracy.map(|a| (a, true)),
        TaskFamily::Regression => metric(report, regression_metric_name(&report.dataset)).map(|e| (e, false)),
        TaskFamily::Description => description_average(report).map(|d| (d, true)),
    }
}

pub fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

const MISSING: &str = "—";

fn mean(vals: &[f64]) -> Option<f64> {
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTable {
    pub markdown: String,
    pub csv: String,
    pub warnings: Vec<String>,
}

fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per model, one column per dataset of `family`, and an Average
/// column holding the unweighted mean over the model's present cells.
pub fn render_table(grid: &ResultsGrid, family: TaskFamily, mode: &str) -> RenderedTable {
    let datasets = grid.datasets_in(family);
    let models = grid.models_in(mode);
    let mut warnings = Vec::new();
    let mut header: Vec<String> = vec!["Model".to_string()];
    let mut csv_header: Vec<String> = vec!["model".to_string()];
    match family {
        TaskFamily::Classification => {
            for d in &datasets {
                header.push(d.to_string());
                csv_header.push(format!("{d}_accuracy"));
                csv_header.push(format!("{d}_f1"));
            }
            csv_header.extend(["average_accuracy".to_string(), "average_f1".to_string()]);
        }
        TaskFamily::Regression => {
            for d in &datasets {
                let m = regression_metric_name(d);
                header.push(format!("{d} ({})", m.to_uppercase()));
                csv_header.push(format!("{d}_{m}"));
            }
            csv_header.push("average".to_string());
            if datasets.len() > 1 {
                warnings.push("regression Average mixes errors in different units".to_string());
            }
        }
        TaskFamily::Description => {
            for d in &datasets {
                for (key, label) in DESCRIPTION_METRICS {
                    header.push(format!("{d} {label}"));
                    csv_header.push(format!("{d}_{key}"));
                    csv_header.push(format!("{d}_{key}_x100"));
                }
            }
            csv_header.push("average".to_string());
        }
    }
    header.push("Average".to_string());

    let mut md = String::new();
    let _ = writeln!(md, "| {} |", header.join(" | "));
    let _ = writeln!(md, "|{}|", header.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    let mut csv = csv_line(&csv_header);

    for model in &models {
        let mut row = vec![model.to_string()];
        let mut csv_row = vec![model.to_string()];
        let mut firsts = Vec::new();
        let mut seconds = Vec::new();
        for d in &datasets {
            let cell = grid.get(model, d, mode);
            if cell.is_none() {
                warnings.push(format!("missing cell ({model}, {d}, {mode})"));
            }
            match family {
                TaskFamily::Classification => {
                    let (acc, f1) = (cell.and_then(|c| c.accuracy), cell.and_then(|c| c.f1));
                    row.push(match (acc, f1) {
                        (Some(a), Some(f)) => format!("{}({})", fmt2(a), fmt2(f)),
                        (Some(a), None) => fmt2(a),
                        _ => MISSING.to_string(),
                    });
                    csv_row.push(opt_num(acc));
                    csv_row.push(opt_num(f1));
                    firsts.extend(acc);
                    seconds.extend(f1);
                }
                TaskFamily::Regression => {
                    let v = cell.and_then(|c| metric(c, regression_metric_name(d)));
                    row.push(v.map_or(MISSING.to_string(), fmt2));
                    csv_row.push(opt_num(v));
                    firsts.extend(v);
                }
                TaskFamily::Description => {
                    for (key, _) in DESCRIPTION_METRICS {
                        let v = cell.and_then(|c| metric(c, key));
                        row.push(v.map_or(MISSING.to_string(), fmt2));
                        csv_row.push(opt_num(v));
                        csv_row.push(opt_num(v.map(|v| v * 100.0)));
                    }
                    firsts.extend(cell.and_then(description_average));
                }
            }
        }
        let (a, b) = (mean(&firsts), mean(&seconds));
        row.push(match (family, a, b) {
            (TaskFamily::Classification, Some(a), Some(b)) => format!("{}({})", fmt2(a), fmt2(b)),
            (_, Some(a), _) => fmt2(a),
            _ => MISSING.to_string(),
        });
        csv_row.push(opt_num(a));
        if family == TaskFamily::Classification {
            csv_row.push(opt_num(b));
        }
        let _ = writeln!(md, "| {} |", row.join(" | "));
        csv.push_str(&csv_line(&csv_row));
    }
    if warnings.iter().any(|w| w.starts_with("missing")) {
        warnings.push("table is incomplete".to_string());
    }
    RenderedTable {
        markdown: md,
        csv,
        warnings,
    }
}

/// Competition ranks ("1224"): tied scores share the best rank.
pub fn competition_ranks(scores: &[f64], higher_is_better: bool) -> Vec<usize> {
    scores
        .iter()
        .map(|&s| {
            1 + scores
                .iter()
                .filter(|&&o| if higher_is_better { o > s } else { o < s })
                .count()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub mode: String,
    /// Dataset -> model -> rank.
    pub per_dataset: BTreeMap<String, BTreeMap<String, usize>>,
    /// Family -> model -> mean rank over the family's datasets.
    pub average: BTreeMap<TaskFamily, BTreeMap<String, f64>>,
}

/// Ranks models per dataset by the primary score, then averages ranks per
/// task family. Models without a cell on a dataset are left out of that
/// dataset's ranking.
pub fn rank_models(grid: &ResultsGrid, mode: &str) -> Result<RankTable, ReportError> {
    let models = grid.models_in(mode);
    if models.len() < 2 {
        return Err(ReportError::TooFewModels(models.len()));
    }
    let mut per_dataset = BTreeMap::new();
    let mut collected: BTreeMap<TaskFamily, BTreeMap<String, Vec<usize>>> = BTreeMap::new();
    for family in TaskFamily::ALL {
        for d in grid.datasets_in(family) {
            let kind = grid.kinds[d];
            let scored: Vec<(&str, f64, bool)> = models
                .iter()
                .filter_map(|m| grid.get(m, d, mode).and_then(|c| primary_score(kind, c)).map(|(s, hb)| (*m, s, hb)))
                .collect();
            if scored.is_empty() {
                continue;
            }
            let higher = scored[0].2;
            let scores: Vec<f64> = scored.iter().map(|x| x.1).collect();
            let ranks = competition_ranks(&scores, higher);
            let mut col = BTreeMap::new();
            for ((m, _, _), r) in scored.iter().zip(ranks) {
                col.insert(m.to_string(), r);
                collected.entry(family).or_default().entry(m.to_string()).or_default().push(r);
            }
            per_dataset.insert(d.to_string(), col);
        }
    }
    let average = collected
        .into_iter()
        .map(|(f, by_model)| {
            let avg = by_model
                .into_iter()
                .map(|(m, rs)| (m, rs.iter().sum::<usize>() as f64 / rs.len() as f64))
                .collect();
            (f, avg)
        })
        .collect();
    Ok(RankTable {
        mode: mode.to_string(),
        per_dataset,
        average,
    })
}

/// Markdown of average ranks, "c/r/d" per model like the overall ranking
/// table; families without data print "-".
pub fn render_rank_table(table: &RankTable, models: &[String]) -> String {
    let mut md = String::from("| Model | Rank (classification/regression/description) |\n|---|---|\n");
    for m in models {
        let parts: Vec<String> = TaskFamily::ALL
            .iter()
            .map(|f| {
                table
                    .average
                    .get(f)
                    .and_then(|a| a.get(m))
                    .map_or("-".to_string(), |v| format!("{v:.2}"))
            })
            .collect();
        let _ = writeln!(md, "| {m} | {} |", parts.join("/"));
    }
    md
}

const TIDY_HEADER: [&str; 6] = ["model", "dataset", "mode", "kind", "metric", "value"];

fn kind_name(kind: TaskKind) -> &'static str {
    match kind {
        TaskKind::Classification => "classification",
        TaskKind::Regression => "regression",
        TaskKind::MultiRegression => "multi_regression",
        TaskKind::Description => "description",
    }
}

fn kind_from_name(s: &str) -> Option<TaskKind> {
    Some(match s {
        "classification" => TaskKind::Classification,
        "regression" => TaskKind::Regression,
        "multi_regression" => TaskKind::MultiRegression,
        "description" => TaskKind::Description,
        _ => return None,
    })
}

/// Long-format CSV: one row per (cell, metric), plus the count fields.
/// Values use shortest round-trip formatting so re-reading is exact.
pub fn grid_to_csv(grid: &ResultsGrid) -> String {
    let mut out = csv_line(&TIDY_HEADER.map(String::from));
    for (key, r) in &grid.cells {
        let kind = kind_name(grid.kinds[&key.dataset]);
        let mut rows: Vec<(&str, String)> = r.metrics().into_iter().map(|(n, v)| (n, v.to_string())).collect();
        rows.push(("parse_failure_rate", r.parse_failure_rate.to_string()));
        rows.push(("n_scored", r.n_scored.to_string()));
        rows.push(("n_unparsed", r.n_unparsed.to_string()));
        rows.push(("n_total", r.n_total.to_string()));
        for (name, value) in rows {
            out.push_str(&csv_line(&[
                key.model.clone(),
                key.dataset.clone(),
                key.mode.clone(),
                kind.to_string(),
                name.to_string(),
                value,
            ]));
        }
    }
    out
}

/// Inverse of [`grid_to_csv`]. Diagnostics are not carried by the CSV.
pub fn grid_from_csv(text: &str) -> Result<ResultsGrid, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut cells: BTreeMap<CellKey, (TaskKind, MetricReport)> = BTreeMap::new();
    let mut order: Vec<CellKey> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let bad = |reason: String| ReportError::Csv { line, reason };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != TIDY_HEADER.len() {
            return Err(bad(format!("expected {} fields", TIDY_HEADER.len())));
        }
        let key = CellKey {
            model: rec[0].to_string(),
            dataset: rec[1].to_string(),
            mode: rec[2].to_string(),
        };
        let kind = kind_from_name(&rec[3]).ok_or_else(|| bad(format!("unknown kind {:?}", &rec[3])))?;
        if !cells.contains_key(&key) {
            order.push(key.clone());
        }
        let (_, report) = cells
            .entry(key.clone())
            .or_insert_with(|| (kind, MetricReport::empty(&key.dataset, &key.model, &key.mode)));
        let value = &rec[5];
        let count = || value.parse::<usize>().map_err(|e| bad(e.to_string()));
        match &rec[4] {
            "n_scored" => report.n_scored = count()?,
            "n_unparsed" => report.n_unparsed = count()?,
            "n_total" => report.n_total = count()?,
            name => {
                let v: f64 = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?;
                if name == "parse_failure_rate" {
                    report.parse_failure_rate = v;
                } else if !report.set_metric(name, v) {
                    return Err(bad(format!("unknown metric {name:?}")));
                }
            }
        }
    }
    // rebuild in row order so model/dataset ordering survives the round trip
    let mut grid = ResultsGrid::new();
    for key in order {
        let (kind, report) = cells.remove(&key).expect("key recorded");
        grid.insert(kind, report)?;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc_report(model: &str, dataset: &str, acc: f64, f1: f64) -> MetricReport {
        let mut r = MetricReport::empty(dataset, model, "icl2");
        r.accuracy = Some(acc);
        r.f1 = Some(f1);
        r
    }

    #[test]
    fn single_cell_table() {
        let mut g = ResultsGrid::new();
        g.insert(TaskKind::Classification, acc_report("m", "bace", 0.781, 0.714)).unwrap();
        let t = render_table(&g, TaskFamily::Classification, "icl2");
        assert!(t.markdown.contains("| m | 0.78(0.71) | 0.78(0.71) |"), "{}", t.markdown);
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn duplicate_cells_rejected() {
        let mut g = ResultsGrid::new();
        g.insert(TaskKind::Classification, acc_report("m", "bace", 0.5, 0.5)).unwrap();
        assert!(matches!(
            g.insert(TaskKind::Classification, acc_report("m", "bace", 0.6, 0.5)),
            Err(ReportError::DuplicateCell { .. })
        ));
    }

    #[test]
    fn competition_ties() {
        assert_eq!(competition_ranks(&[0.9, 0.8, 0.9, 0.1], true), vec![1, 3, 1, 4]);
        assert_eq!(competition_ranks(&[2.0, 1.0, 1.0], false), vec![3, 1, 1]);
    }

    #[test]
    fn missing_cell_dash() {
        let mut g = ResultsGrid::new();
        g.insert(TaskKind::Classification, acc_report("a", "bace", 0.5, 0.5)).unwrap();
        g.insert(TaskKind::Classification, acc_report("b", "bbbp", 0.7, 0.6)).unwrap();
        let t = render_table(&g, TaskFamily::Classification, "icl2");
        assert!(t.markdown.contains("| a | 0.50(0.50) | — | 0.50(0.50) |"), "{}", t.markdown);
        assert!(t.warnings.iter().any(|w| w == "table is incomplete"));
    }
}
