//! Converters from upstream benchmark distributions into the canonical
//! JSONL format. These are best-effort adapters for the published file
//! layouts; items that are not pure multiple-choice are excluded and
//! counted in the conversion report, never dropped silently.

use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use crate::ingest::{record_violations, Language, QaRecord};

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// What happened during a conversion: every input item is either converted
/// or excluded with a reason.
#[derive(Debug, Default)]
pub struct ConversionReport {
    pub read: usize,
    pub converted: usize,
    pub excluded: Vec<(String, String)>,
}

impl ConversionReport {
    fn exclude(&mut self, id: impl Into<String>, reason: impl Into<String>) {
        self.excluded.push((id.into(), reason.into()));
    }

    pub fn summary(&self) -> String {
        format!(
            "read {}, converted {}, excluded {}",
            self.read,
            self.converted,
            self.excluded.len()
        )
    }
}

fn jsonl_values(path: &Path) -> Result<Vec<(usize, Value)>, ConvertError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConvertError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(line).map_err(|e| ConvertError::Malformed {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        out.push((idx + 1, value));
    }
    Ok(out)
}

/// Files to read for an input that may be a single file or a directory
/// (taken in name order).
fn input_files(input: &Path, extension: &str) -> Result<Vec<PathBuf>, ConvertError> {
    if input.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(input)
            .map_err(|source| ConvertError::Io {
                path: input.to_path_buf(),
                source,
            })?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == extension))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(ConvertError::Invalid(format!(
                "no .{extension} files under {}",
                input.display()
            )));
        }
        Ok(files)
    } else {
        Ok(vec![input.to_path_buf()])
    }
}

fn letter_index(letter: &str) -> Option<usize> {
    let c = letter.trim().chars().next()?;
    match c.to_ascii_lowercase() {
        'a'..='z' => Some(c.to_ascii_lowercase() as usize - 'a' as usize),
        _ => None,
    }
}

fn finish(mut record: QaRecord, report: &mut ConversionReport) -> Option<QaRecord> {
    record.gold.sort_unstable();
    record.gold.dedup();
    let issues = record_violations(&record);
    if let Some(reason) = issues.first() {
        report.exclude(record.id.clone(), reason.clone());
        return None;
    }
    report.converted += 1;
    Some(record)
}

/// IgakuQA repository files: JSONL with `problem_id`, `problem_text`,
/// `choices` (five strings for pure multiple-choice items), and `answer`
/// (one or more choice letters). Items without choices (free-text or
/// image-based) are excluded.
pub fn convert_igakuqa(
    input: &Path,
    language: Language,
) -> Result<(Vec<QaRecord>, ConversionReport), ConvertError> {
    let mut records = Vec::new();
    let mut report = ConversionReport::default();
    for path in input_files(input, "jsonl")? {
        for (line, value) in jsonl_values(&path)? {
            report.read += 1;
            let id = value
                .get("problem_id")
                .and_then(Value::as_str)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("{}:{line}", path.display()));
            let question = match value.get("problem_text").and_then(Value::as_str) {
                Some(q) if !q.trim().is_empty() => q.to_string(),
                _ => {
                    report.exclude(id, "no question text");
                    continue;
                }
            };
            let choices: Vec<String> = match value.get("choices").and_then(Value::as_array) {
                Some(list) if !list.is_empty() => list
                    .iter()
                    .filter_map(Value::as_str)
                    .map(|s| s.to_string())
                    .collect(),
                _ => {
                    report.exclude(id, "not multiple-choice (no choices)");
                    continue;
                }
            };
            let letters: Vec<String> = match value.get("answer") {
                Some(Value::Array(list)) => list
                    .iter()
                    .filter_map(Value::as_str)
                    .map(|s| s.to_string())
                    .collect(),
                Some(Value::String(s)) => {
                    // "a" or "ac" or "a,c"
                    s.chars()
                        .filter(|c| c.is_ascii_alphabetic())
                        .map(|c| c.to_string())
                        .collect()
                }
                _ => Vec::new(),
            };
            let gold: Vec<usize> = letters.iter().filter_map(|l| letter_index(l)).collect();
            if gold.is_empty() {
                report.exclude(id, "answer is not a choice label");
                continue;
            }
            let record = QaRecord {
                id,
                question,
                choices,
                gold,
                language,
                subject: None,
                benchmark: "igakuqa".to_string(),
            };
            records.extend(finish(record, &mut report));
        }
    }
    Ok((records, report))
}

/// MedQA (USMLE) JSONL: `question`, `options` keyed "A".."D", and
/// `answer_idx` with the gold letter.
pub fn convert_medqa(
    input: &Path,
    language: Language,
) -> Result<(Vec<QaRecord>, ConversionReport), ConvertError> {
    let mut records = Vec::new();
    let mut report = ConversionReport::default();
    for path in input_files(input, "jsonl")? {
        for (line, value) in jsonl_values(&path)? {
            report.read += 1;
            let id = format!("medqa-{language}-{:04}", report.read);
            let _ = line;
            let question = match value.get("question").and_then(Value::as_str) {
                Some(q) if !q.trim().is_empty() => q.to_string(),
                _ => {
                    report.exclude(id, "no question text");
                    continue;
                }
            };
            let options = match value.get("options").and_then(Value::as_object) {
                Some(map) => map,
                None => {
                    report.exclude(id, "no options object");
                    continue;
                }
            };
            let mut keys: Vec<&String> = options.keys().collect();
            keys.sort();
            let choices: Vec<String> = keys
                .iter()
                .filter_map(|k| options[*k].as_str().map(|s| s.to_string()))
                .collect();
            let gold = value
                .get("answer_idx")
                .and_then(Value::as_str)
                .and_then(letter_index);
            let Some(gold) = gold else {
                report.exclude(id, "no answer_idx letter");
                continue;
            };
            let record = QaRecord {
                id,
                question,
                choices,
                gold: vec![gold],
                language,
                subject: None,
                benchmark: "medqa".to_string(),
            };
            records.extend(finish(record, &mut report));
        }
    }
    Ok((records, report))
}

/// MedMCQA JSONL: `question`, options `opa`..`opd`, and `cop` (correct
/// option). The original release numbers options from 1; pass
/// `cop_base = 0` for re-exports that use zero-based labels.
pub fn convert_medmcqa(
    input: &Path,
    language: Language,
    cop_base: usize,
) -> Result<(Vec<QaRecord>, ConversionReport), ConvertError> {
    if cop_base > 1 {
        return Err(ConvertError::Invalid("cop base must be 0 or 1".to_string()));
    }
    let mut records = Vec::new();
    let mut report = ConversionReport::default();
    for path in input_files(input, "jsonl")? {
        for (_line, value) in jsonl_values(&path)? {
            report.read += 1;
            let id = value
                .get("id")
                .and_then(Value::as_str)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("medmcqa-{language}-{:04}", report.read));
            let question = match value.get("question").and_then(Value::as_str) {
                Some(q) if !q.trim().is_empty() => q.to_string(),
                _ => {
                    report.exclude(id, "no question text");
                    continue;
                }
            };
            let choices: Vec<String> = ["opa", "opb", "opc", "opd"]
                .iter()
                .filter_map(|k| value.get(*k).and_then(Value::as_str).map(|s| s.to_string()))
                .collect();
            if choices.len() != 4 {
                report.exclude(id, "missing option fields");
                continue;
            }
            let cop = value.get("cop").and_then(Value::as_u64);
            let Some(cop) = cop else {
                report.exclude(id, "no cop field");
                continue;
            };
            let gold = (cop as usize).checked_sub(cop_base);
            let Some(gold) = gold.filter(|g| *g < 4) else {
                report.exclude(id, format!("cop {cop} out of range for base {cop_base}"));
                continue;
            };
            let subject = value
                .get("subject_name")
                .and_then(Value::as_str)
                .map(|s| s.trim().to_lowercase().replace([' ', '-'], "_"));
            let record = QaRecord {
                id,
                question,
                choices,
                gold: vec![gold],
                language,
                subject,
                benchmark: "medmcqa".to_string(),
            };
            records.extend(finish(record, &mut report));
        }
    }
    Ok((records, report))
}

/// MMLU-style CSV: headerless rows `question,A,B,C,D,answer`. The subject
/// tag comes from the file name (`anatomy_test.csv` → `anatomy`) unless an
/// explicit subject is given. Use benchmark id "mmlu" or "jmmlu".
pub fn convert_mmlu_csv(
    input: &Path,
    language: Language,
    benchmark: &str,
    subject_override: Option<&str>,
) -> Result<(Vec<QaRecord>, ConversionReport), ConvertError> {
    let mut records = Vec::new();
    let mut report = ConversionReport::default();
    for path in input_files(input, "csv")? {
        let subject = subject_override.map(|s| s.to_string()).unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default()
                .trim_end_matches("_test")
                .trim_end_matches("_val")
                .trim_end_matches("_dev")
                .to_lowercase()
                .replace([' ', '-'], "_")
        });
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(&path)
            .map_err(|e| ConvertError::Invalid(format!("{}: {e}", path.display())))?;
        for (idx, row) in reader.records().enumerate() {
            report.read += 1;
            let id = format!("{benchmark}-{language}-{subject}-{:03}", idx + 1);
            let row = match row {
                Ok(row) => row,
                Err(e) => {
                    report.exclude(id, format!("bad csv row: {e}"));
                    continue;
                }
            };
            if row.len() < 6 {
                report.exclude(id, format!("expected 6 columns, got {}", row.len()));
                continue;
            }
            let gold = match letter_index(&row[5]) {
                Some(g) if g < 4 => g,
                _ => {
                    report.exclude(id, format!("answer {:?} is not A-D", &row[5]));
                    continue;
                }
            };
            let record = QaRecord {
                id,
                question: row[0].to_string(),
                choices: (1..=4).map(|i| row[i].to_string()).collect(),
                gold: vec![gold],
                language,
                subject: Some(subject.clone()),
                benchmark: benchmark.to_string(),
            };
            records.extend(finish(record, &mut report));
        }
    }
    Ok((records, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn igakuqa_conversion_and_exclusions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("igakuqa.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, r#"{{"problem_id":"112A1","problem_text":"質問1","choices":["い","ろ","は","に","ほ"],"answer":["a"]}}"#).unwrap();
        writeln!(f, r#"{{"problem_id":"112A2","problem_text":"質問2","choices":["い","ろ","は","に","ほ"],"answer":["b","d"]}}"#).unwrap();
        writeln!(f, r#"{{"problem_id":"112A3","problem_text":"自由記述","answer":["東京"]}}"#).unwrap();
        writeln!(f, r#"{{"problem_id":"112A4","problem_text":"3択","choices":["い","ろ","は"],"answer":"c"}}"#).unwrap();
        let (records, report) = convert_igakuqa(&path, Language::Ja).unwrap();
        assert_eq!(report.read, 4);
        assert_eq!(report.converted, 2);
        assert_eq!(report.excluded.len(), 2);
        assert_eq!(records[0].gold, vec![0]);
        assert_eq!(records[1].gold, vec![1, 3]);
        assert!(report.excluded.iter().any(|(id, _)| id == "112A3"));
        // 3-choice item violates the five-choice invariant
        assert!(report.excluded.iter().any(|(id, _)| id == "112A4"));
    }

    #[test]
    fn medqa_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("medqa.jsonl");
        std::fs::write(
            &path,
            r#"{"question":"Q1?","options":{"A":"w","B":"x","C":"y","D":"z"},"answer_idx":"C","answer":"y","meta_info":"step1"}"#,
        )
        .unwrap();
        let (records, report) = convert_medqa(&path, Language::En).unwrap();
        assert_eq!(report.converted, 1);
        assert_eq!(records[0].gold, vec![2]);
        assert_eq!(records[0].choices, vec!["w", "x", "y", "z"]);
    }

    #[test]
    fn medmcqa_cop_bases() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("medmcqa.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"x1","question":"Q?","opa":"a","opb":"b","opc":"c","opd":"d","cop":2,"subject_name":"Human Anatomy"}"#,
        )
        .unwrap();
        let (one_based, _) = convert_medmcqa(&path, Language::En, 1).unwrap();
        assert_eq!(one_based[0].gold, vec![1]);
        assert_eq!(one_based[0].subject.as_deref(), Some("human_anatomy"));
        let (zero_based, _) = convert_medmcqa(&path, Language::En, 0).unwrap();
        assert_eq!(zero_based[0].gold, vec![2]);
    }

    #[test]
    fn mmlu_csv_conversion_with_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("anatomy_test.csv");
        std::fs::write(
            &path,
            "\"What, with a comma?\",w,x,y,z,B\nPlain question,p,q,r,s,D\n",
        )
        .unwrap();
        let (records, report) = convert_mmlu_csv(&path, Language::En, "mmlu", None).unwrap();
        assert_eq!(report.converted, 2);
        assert_eq!(records[0].question, "What, with a comma?");
        assert_eq!(records[0].gold, vec![1]);
        assert_eq!(records[0].subject.as_deref(), Some("anatomy"));
        assert_eq!(records[1].gold, vec![3]);
    }

    #[test]
    fn mmlu_directory_input_reads_files_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b_test.csv"), "q2,a,b,c,d,A\n").unwrap();
        std::fs::write(dir.path().join("a_test.csv"), "q1,a,b,c,d,A\n").unwrap();
        let (records, _) = convert_mmlu_csv(dir.path(), Language::En, "mmlu", None).unwrap();
        assert_eq!(records[0].subject.as_deref(), Some("a"));
        assert_eq!(records[1].subject.as_deref(), Some("b"));
    }
}
