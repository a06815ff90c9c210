//! Aggregating judgments into benchmark accuracies, score tables with an
//! average column, and base-vs-tuned delta tables; rendering as Markdown,
//! CSV, or JSON.

use std::collections::BTreeMap;
use std::path::Path;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::ingest::Language;
use crate::inference::RunManifest;
use crate::metrics::ItemJudgment;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Gestalt,
    Exact,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gestalt" => Ok(Metric::Gestalt),
            "exact" => Ok(Metric::Exact),
            other => Err(format!("unknown metric {other:?}, expected \"gestalt\" or \"exact\"")),
        }
    }
}

/// Canonical column order for known benchmarks.
pub const BENCHMARK_ORDER: &[&str] = &["igakuqa", "medqa", "medmcqa", "mmlu", "jmmlu"];

/// Judgments of one model on one benchmark in one language.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_id: String,
    pub model_label: String,
    pub benchmark: String,
    pub language: Language,
    pub judgments: Vec<ItemJudgment>,
    pub manifest: Option<RunManifest>,
    /// Per-subject tallies, from `scores.json`, for the subject appendix.
    pub subjects: BTreeMap<String, SubjectTally>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectTally {
    pub items: usize,
    pub gestalt_correct: usize,
    pub exact_correct: usize,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("run has no judgments")]
    EmptyRun,
    #[error("duplicate cell for model {model:?}, benchmark {benchmark:?}")]
    DuplicateCell { model: String, benchmark: String },
    #[error("column sets differ: {0:?} vs {1:?}")]
    ColumnMismatch(Vec<String>, Vec<String>),
    #[error("reading run dir {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Accuracy as an exact fraction, converted to a float only on demand.
pub fn percent<F: Float>(correct: usize, total: usize) -> F {
    let hundred = F::from(100).unwrap();
    hundred * F::from(correct).unwrap() / F::from(total).unwrap()
}

/// Unrounded accuracy percentage of a run under a metric; rounding happens
/// only at render time.
pub fn accuracy(run: &RunResult, metric: Metric) -> Result<Real, ReportError> {
    if run.judgments.is_empty() {
        return Err(ReportError::EmptyRun);
    }
    let correct = run
        .judgments
        .iter()
        .filter(|j| match metric {
            Metric::Gestalt => j.gestalt_correct,
            Metric::Exact => j.exact_correct,
        })
        .count();
    Ok(percent(correct, run.judgments.len()))
}

/// Per-model accuracies across benchmark columns plus an average.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    /// Benchmark column labels, without the trailing "Ave.".
    pub columns: Vec<String>,
    pub rows: Vec<ScoreRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub label: String,
    pub cells: Vec<Option<Real>>,
    /// Unweighted mean of the present benchmark cells, unrounded.
    pub average: Option<Real>,
    pub incomplete: bool,
}

impl ScoreTable {
    /// Builds a table from raw cell values, recomputing averages. Columns
    /// absent for every row are excluded from the average; a row missing a
    /// cell that others have is flagged incomplete.
    pub fn from_cells(columns: Vec<String>, rows: Vec<(String, Vec<Option<Real>>)>) -> Self {
        let column_present: Vec<bool> = (0..columns.len())
            .map(|c| rows.iter().any(|(_, cells)| cells.get(c).copied().flatten().is_some()))
            .collect();
        let mut out_rows = Vec::with_capacity(rows.len());
        let mut warnings = Vec::new();
        for (label, cells) in rows {
            let mut present = Vec::new();
            let mut incomplete = false;
            for (c, cell) in cells.iter().enumerate() {
                match cell {
                    Some(v) => present.push(*v),
                    None if column_present.get(c).copied().unwrap_or(false) => incomplete = true,
                    None => {}
                }
            }
            let average = if present.is_empty() {
                None
            } else {
                Some(present.iter().sum::<Real>() / present.len() as Real)
            };
            if incomplete {
                warnings.push(format!("row {label:?} is missing cells; average covers present columns only"));
            }
            out_rows.push(ScoreRow {
                label,
                cells,
                average,
                incomplete,
            });
        }
        Self {
            columns,
            rows: out_rows,
            warnings,
        }
    }
}

/// Aggregates runs into a score table. Rows are model labels (sorted for
/// order-independence), columns follow `benchmark_order`. Benchmarks that
/// span subjects contribute one pooled micro-average cell.
pub fn aggregate(
    runs: &[RunResult],
    benchmark_order: &[String],
    metric: Metric,
) -> Result<ScoreTable, ReportError> {
    let mut cells: BTreeMap<String, BTreeMap<String, Real>> = BTreeMap::new();
    for run in runs {
        let value = accuracy(run, metric)?;
        let row = cells.entry(run.model_label.clone()).or_default();
        if row.insert(run.benchmark.clone(), value).is_some() {
            return Err(ReportError::DuplicateCell {
                model: run.model_label.clone(),
                benchmark: run.benchmark.clone(),
            });
        }
    }
    let rows = cells
        .into_iter()
        .map(|(label, row)| {
            let cells = benchmark_order
                .iter()
                .map(|b| row.get(b).copied())
                .collect();
            (label, cells)
        })
        .collect();
    Ok(ScoreTable::from_cells(benchmark_order.to_vec(), rows))
}

/// The canonical column order restricted to the benchmarks present.
pub fn present_benchmark_order(runs: &[RunResult]) -> Vec<String> {
    let mut order: Vec<String> = BENCHMARK_ORDER
        .iter()
        .filter(|b| runs.iter().any(|r| r.benchmark == **b))
        .map(|b| b.to_string())
        .collect();
    let mut extras: Vec<String> = runs
        .iter()
        .map(|r| r.benchmark.clone())
        .filter(|b| !order.contains(b))
        .collect();
    extras.sort();
    extras.dedup();
    order.extend(extras);
    order
}

/// Per-subject appendix: rows are model labels, columns are subjects, and
/// the average is the unweighted (macro) mean, complementing the pooled
/// micro-average in the main table.
pub fn subject_table(runs: &[RunResult], benchmark: &str, metric: Metric) -> Option<ScoreTable> {
    let relevant: Vec<&RunResult> = runs
        .iter()
        .filter(|r| r.benchmark == benchmark && !r.subjects.is_empty())
        .collect();
    if relevant.is_empty() {
        return None;
    }
    let mut subjects: Vec<String> = relevant
        .iter()
        .flat_map(|r| r.subjects.keys().cloned())
        .collect();
    subjects.sort();
    subjects.dedup();
    let mut rows: Vec<(String, Vec<Option<Real>>)> = Vec::new();
    for run in &relevant {
        let cells = subjects
            .iter()
            .map(|s| {
                run.subjects.get(s).map(|tally| {
                    let correct = match metric {
                        Metric::Gestalt => tally.gestalt_correct,
                        Metric::Exact => tally.exact_correct,
                    };
                    percent(correct, tally.items)
                })
            })
            .collect();
        rows.push((run.model_label.clone(), cells));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Some(ScoreTable::from_cells(subjects, rows))
}

/// Cellwise differences between two rows of a score table.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTable {
    pub columns: Vec<String>,
    pub rows: Vec<DeltaRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub base_label: String,
    pub tuned_label: String,
    /// tuned − base on unrounded values.
    pub cells: Vec<Option<Real>>,
}

/// tuned − base, cellwise on unrounded accuracies. Both rows must cover
/// the same columns.
pub fn diff(
    columns: &[String],
    base: &ScoreRow,
    tuned: &ScoreRow,
) -> Result<DeltaRow, ReportError> {
    let missing = |row: &ScoreRow| -> Vec<String> {
        columns
            .iter()
            .zip(&row.cells)
            .filter(|(_, c)| c.is_none())
            .map(|(name, _)| name.clone())
            .collect()
    };
    let base_missing = missing(base);
    let tuned_missing = missing(tuned);
    if base.cells.len() != tuned.cells.len() || base_missing != tuned_missing {
        return Err(ReportError::ColumnMismatch(base_missing, tuned_missing));
    }
    let cells = base
        .cells
        .iter()
        .zip(&tuned.cells)
        .map(|(b, t)| match (b, t) {
            (Some(b), Some(t)) => Some(t - b),
            _ => None,
        })
        .collect();
    Ok(DeltaRow {
        base_label: base.label.clone(),
        tuned_label: tuned.label.clone(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!(
                "unknown format {other:?}, expected \"markdown\", \"csv\", or \"json\""
            )),
        }
    }
}

/// One decimal place, rounding half away from zero; a rounded zero prints
/// as "0.0" with no sign.
pub fn format_score(value: Real) -> String {
    let tenths = (value * 10.0).round() as i64;
    if tenths == 0 {
        return "0.0".to_string();
    }
    let sign = if tenths < 0 { "-" } else { "" };
    format!("{sign}{}.{}", tenths.abs() / 10, tenths.abs() % 10)
}

/// Like [`format_score`] but with an explicit plus sign on positives.
pub fn format_delta(value: Real) -> String {
    let tenths = (value * 10.0).round() as i64;
    if tenths > 0 {
        format!("+{}", format_score(value))
    } else {
        format_score(value)
    }
}

fn cell_text(cell: &Option<Real>, signed: bool) -> String {
    match cell {
        Some(v) if signed => format_delta(*v),
        Some(v) => format_score(*v),
        None => "-".to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn markdown_table(header: &[String], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let render_row = |cells: &[String]| -> String {
        let padded: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:width$}", c, width = widths[i]))
            .collect();
        format!("| {} |", padded.join(" | "))
    };
    let mut out = String::new();
    out.push_str(&render_row(header));
    out.push('\n');
    let dashes: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&format!("|-{}-|", dashes.join("-|-")));
    out.push('\n');
    for row in body {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    out
}

/// Column indices of the top-k values per column, for bold marking.
fn top_k_by_column(rows: &[&Vec<Option<Real>>], column: usize, k: usize) -> Vec<usize> {
    let mut ranked: Vec<(usize, Real)> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, cells)| cells[column].map(|v| (i, v)))
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(i, _)| i).collect()
}

/// Renders a score table. `bold_top`, when set, bolds the top-k cells of
/// each column in Markdown output.
pub fn render_score_table(table: &ScoreTable, format: Format, bold_top: Option<usize>) -> String {
    let mut header = vec!["model".to_string()];
    header.extend(table.columns.iter().cloned());
    header.push("Ave.".to_string());

    let cell_sets: Vec<&Vec<Option<Real>>> = table.rows.iter().map(|r| &r.cells).collect();
    let bold: Vec<Vec<usize>> = match (format, bold_top) {
        (Format::Markdown, Some(k)) => (0..table.columns.len())
            .map(|c| top_k_by_column(&cell_sets, c, k))
            .collect(),
        _ => Vec::new(),
    };

    match format {
        Format::Markdown => {
            let body: Vec<Vec<String>> = table
                .rows
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    let mut line = vec![row.label.clone()];
                    for (c, cell) in row.cells.iter().enumerate() {
                        let mut text = cell_text(cell, false);
                        if bold.get(c).is_some_and(|top| top.contains(&r)) {
                            text = format!("**{text}**");
                        }
                        line.push(text);
                    }
                    line.push(cell_text(&row.average, false));
                    line
                })
                .collect();
            markdown_table(&header, &body)
        }
        Format::Csv => {
            let mut out = String::from("model");
            for column in &table.columns {
                out.push(',');
                out.push_str(&csv_field(column));
            }
            out.push_str(",ave\n");
            for row in &table.rows {
                out.push_str(&csv_field(&row.label));
                for cell in &row.cells {
                    out.push(',');
                    out.push_str(&cell_text(cell, false));
                }
                out.push(',');
                out.push_str(&cell_text(&row.average, false));
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let mut columns = table.columns.clone();
            columns.push("Ave.".to_string());
            let rows: Vec<&String> = table.rows.iter().map(|r| &r.label).collect();
            let raw: Vec<Vec<Option<Real>>> = table
                .rows
                .iter()
                .map(|r| {
                    let mut cells = r.cells.clone();
                    cells.push(r.average);
                    cells
                })
                .collect();
            let rendered: Vec<Vec<String>> = raw
                .iter()
                .map(|cells| cells.iter().map(|c| cell_text(c, false)).collect())
                .collect();
            let mut body = serde_json::to_string_pretty(&json!({
                "columns": columns,
                "rows": rows,
                "cells_raw": raw,
                "cells_rendered": rendered,
            }))
            .expect("table serializes");
            body.push('\n');
            body
        }
    }
}

/// Rebuilds a score table from its JSON rendering.
pub fn parse_score_table_json(text: &str) -> Result<ScoreTable, serde_json::Error> {
    #[derive(Deserialize)]
    struct Payload {
        columns: Vec<String>,
        rows: Vec<String>,
        cells_raw: Vec<Vec<Option<Real>>>,
    }
    let payload: Payload = serde_json::from_str(text)?;
    let n = payload.columns.len().saturating_sub(1);
    let columns = payload.columns.into_iter().take(n).collect();
    let rows = payload
        .rows
        .into_iter()
        .zip(payload.cells_raw)
        .map(|(label, mut cells)| {
            cells.truncate(n);
            (label, cells)
        })
        .collect();
    Ok(ScoreTable::from_cells(columns, rows))
}

/// Renders a delta table with explicit signs.
pub fn render_delta_table(table: &DeltaTable, format: Format) -> String {
    let label = |row: &DeltaRow| format!("{} -> {}", row.base_label, row.tuned_label);
    match format {
        Format::Markdown => {
            let mut header = vec!["model".to_string()];
            header.extend(table.columns.iter().cloned());
            let body: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|row| {
                    let mut line = vec![label(row)];
                    line.extend(row.cells.iter().map(|c| cell_text(c, true)));
                    line
                })
                .collect();
            markdown_table(&header, &body)
        }
        Format::Csv => {
            let mut out = String::from("model");
            for column in &table.columns {
                out.push(',');
                out.push_str(&csv_field(column));
            }
            out.push('\n');
            for row in &table.rows {
                out.push_str(&csv_field(&label(row)));
                for cell in &row.cells {
                    out.push(',');
                    out.push_str(&cell_text(cell, true));
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let rows: Vec<String> = table.rows.iter().map(label).collect();
            let raw: Vec<&Vec<Option<Real>>> = table.rows.iter().map(|r| &r.cells).collect();
            let rendered: Vec<Vec<String>> = table
                .rows
                .iter()
                .map(|r| r.cells.iter().map(|c| cell_text(c, true)).collect())
                .collect();
            let mut body = serde_json::to_string_pretty(&json!({
                "columns": table.columns,
                "rows": rows,
                "cells_raw": raw,
                "cells_rendered": rendered,
            }))
            .expect("table serializes");
            body.push('\n');
            body
        }
    }
}

/// Per-run score summary persisted as `scores.json`. Deterministic: no
/// timestamps, so rescoring unchanged inputs is byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub run_id: String,
    pub model_label: String,
    pub benchmark: String,
    pub language: Language,
    pub items: usize,
    pub gestalt_correct: usize,
    pub exact_correct: usize,
    pub gestalt_accuracy: Real,
    pub exact_accuracy: Real,
    pub extraction_fallbacks: usize,
    pub per_subject: BTreeMap<String, SubjectTally>,
}

impl ScoreSummary {
    pub fn compute(
        run_id: &str,
        model_label: &str,
        benchmark: &str,
        language: Language,
        judgments: &[ItemJudgment],
        subject_of: &BTreeMap<String, Option<String>>,
    ) -> Self {
        let items = judgments.len();
        let gestalt_correct = judgments.iter().filter(|j| j.gestalt_correct).count();
        let exact_correct = judgments.iter().filter(|j| j.exact_correct).count();
        let mut per_subject: BTreeMap<String, SubjectTally> = BTreeMap::new();
        for judgment in judgments {
            if let Some(Some(subject)) = subject_of.get(&judgment.item_id) {
                let tally = per_subject.entry(subject.clone()).or_insert(SubjectTally {
                    items: 0,
                    gestalt_correct: 0,
                    exact_correct: 0,
                });
                tally.items += 1;
                tally.gestalt_correct += judgment.gestalt_correct as usize;
                tally.exact_correct += judgment.exact_correct as usize;
            }
        }
        Self {
            run_id: run_id.to_string(),
            model_label: model_label.to_string(),
            benchmark: benchmark.to_string(),
            language,
            items,
            gestalt_correct,
            exact_correct,
            gestalt_accuracy: if items > 0 { percent(gestalt_correct, items) } else { 0.0 },
            exact_accuracy: if items > 0 { percent(exact_correct, items) } else { 0.0 },
            extraction_fallbacks: judgments.iter().filter(|j| j.extraction_fallback).count(),
            per_subject,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut body = serde_json::to_string_pretty(self).expect("summary serializes");
        body.push('\n');
        std::fs::write(dir.join("scores.json"), body)
    }

    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let bytes = std::fs::read(dir.join("scores.json"))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Writes `judgments.jsonl`, one judgment per line sorted by item id.
pub fn write_judgments(dir: &Path, judgments: &[ItemJudgment]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut sorted: Vec<&ItemJudgment> = judgments.iter().collect();
    sorted.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    let mut out = String::new();
    for judgment in sorted {
        out.push_str(&serde_json::to_string(judgment).expect("judgment serializes"));
        out.push('\n');
    }
    std::fs::write(dir.join("judgments.jsonl"), out)
}

/// Reads a `judgments.jsonl` file back.
pub fn read_judgments(path: &Path) -> std::io::Result<Vec<ItemJudgment>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        out.push(
            serde_json::from_str(line)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?,
        );
    }
    Ok(out)
}

impl RunResult {
    /// Loads one run directory (`run.json`, `judgments.jsonl`, and
    /// `scores.json` when present).
    pub fn load_dir(dir: &Path) -> Result<Self, ReportError> {
        let io_err = |source: std::io::Error| ReportError::Io {
            path: dir.display().to_string(),
            source,
        };
        let manifest = RunManifest::load(dir).map_err(io_err)?;
        let judgments = read_judgments(&dir.join("judgments.jsonl")).map_err(io_err)?;
        let subjects = ScoreSummary::load(dir)
            .map(|s| s.per_subject)
            .unwrap_or_default();
        Ok(Self {
            run_id: manifest.run_id.clone(),
            model_label: manifest.model_label.clone(),
            benchmark: manifest.benchmark.clone(),
            language: manifest.language,
            judgments,
            manifest: Some(manifest),
            subjects,
        })
    }
}
