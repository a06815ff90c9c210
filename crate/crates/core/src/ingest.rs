//! Loading, validating, and partitioning canonical benchmark datasets.
//!
//! The canonical dataset format is UTF-8 newline-delimited JSON with one
//! question per line and exactly the [`QaRecord`] fields. Converters for
//! upstream distributions live in [`crate::convert`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Benchmark ids with a fixed choice count.
const FIVE_CHOICE_BENCHMARKS: &[&str] = &["igakuqa"];
const FOUR_CHOICE_BENCHMARKS: &[&str] = &["medqa", "medmcqa", "mmlu", "jmmlu"];

/// Partition key for records without a subject tag.
pub const UNSPECIFIED_SUBJECT: &str = "unspecified";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Ja,
}

impl Language {
    pub fn as_str(&self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Ja => "ja",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Language::En),
            "ja" => Ok(Language::Ja),
            other => Err(format!("unknown language {other:?}, expected \"en\" or \"ja\"")),
        }
    }
}

/// One benchmark item in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub question: String,
    pub choices: Vec<String>,
    /// Zero-based indices of the correct choices, kept sorted and unique.
    pub gold: Vec<usize>,
    pub language: Language,
    pub subject: Option<String>,
    pub benchmark: String,
}

impl QaRecord {
    /// Gold choice texts joined with ", " in choice order.
    pub fn gold_answer_text(&self) -> String {
        let parts: Vec<&str> = self
            .gold
            .iter()
            .filter_map(|&i| self.choices.get(i).map(|s| s.as_str()))
            .collect();
        parts.join(", ")
    }

    fn canonicalize(&mut self) {
        self.gold.sort_unstable();
        self.gold.dedup();
    }
}

/// Declared source and expectations for one benchmark dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub benchmark: String,
    pub language: Language,
    pub paths: Vec<PathBuf>,
    pub expected_count: Option<usize>,
    pub subjects: Option<Vec<SubjectExpectation>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectExpectation {
    pub subject: String,
    pub expected_count: usize,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}:{line}: malformed line: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("expected {expected} records, loaded {actual}")]
    CountMismatch { expected: usize, actual: usize },
    #[error("subject {subject:?}: expected {expected} records, loaded {actual}")]
    SubjectCountMismatch {
        subject: String,
        expected: usize,
        actual: usize,
    },
    #[error("record {id}: {reason}")]
    InvariantViolation { id: String, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// A single dataset finding: which record, and what is wrong with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub id: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.id, self.reason)
    }
}

/// How to treat fields outside the canonical schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownFields {
    Reject,
    Warn,
}

const CANONICAL_FIELDS: &[&str] = &[
    "id",
    "question",
    "choices",
    "gold",
    "language",
    "subject",
    "benchmark",
];

fn parse_line(
    line: &str,
    unknown: UnknownFields,
    warnings: &mut Vec<String>,
) -> Result<QaRecord, String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let object = value
        .as_object()
        .ok_or_else(|| "line is not a JSON object".to_string())?;
    for key in object.keys() {
        if !CANONICAL_FIELDS.contains(&key.as_str()) {
            match unknown {
                UnknownFields::Reject => return Err(format!("unknown field {key:?}")),
                UnknownFields::Warn => warnings.push(format!("unknown field {key:?}")),
            }
        }
    }
    let mut record: QaRecord =
        serde_json::from_value(value).map_err(|e| format!("schema mismatch: {e}"))?;
    record.canonicalize();
    Ok(record)
}

/// Invariant violations for one record; empty when the record is valid.
pub fn record_violations(record: &QaRecord) -> Vec<String> {
    let mut out = Vec::new();
    if record.choices.len() < 2 {
        out.push(format!("needs at least 2 choices, has {}", record.choices.len()));
    }
    for (i, choice) in record.choices.iter().enumerate() {
        if choice.trim().is_empty() {
            out.push(format!("empty choice at index {i}"));
        }
    }
    if record.gold.is_empty() {
        out.push("gold is empty".to_string());
    }
    for &g in &record.gold {
        if g >= record.choices.len() {
            out.push(format!(
                "gold index {g} out of range for {} choices",
                record.choices.len()
            ));
        }
    }
    let expected_choices = if FIVE_CHOICE_BENCHMARKS.contains(&record.benchmark.as_str()) {
        Some(5)
    } else if FOUR_CHOICE_BENCHMARKS.contains(&record.benchmark.as_str()) {
        Some(4)
    } else {
        None
    };
    if let Some(n) = expected_choices {
        if record.choices.len() != n {
            out.push(format!(
                "benchmark {:?} requires {n} choices, has {}",
                record.benchmark,
                record.choices.len()
            ));
        }
    }
    out
}

/// Checks every record against the schema invariants plus id uniqueness.
/// Violations are data, not failures; the input is never mutated.
pub fn validate_dataset(records: &[QaRecord]) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for record in records {
        if !seen.insert(record.id.as_str()) {
            out.push(Violation {
                id: record.id.clone(),
                reason: "duplicate id".to_string(),
            });
        }
        for reason in record_violations(record) {
            out.push(Violation {
                id: record.id.clone(),
                reason,
            });
        }
    }
    out
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, LoadError> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            LoadError::MissingFile(path.to_path_buf())
        } else {
            LoadError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| LoadError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((idx + 1, line));
    }
    Ok(out)
}

/// Loads a benchmark dataset, failing on the first problem. Records come
/// back in file order; declared counts must match exactly.
pub fn load_benchmark(
    manifest: &BenchmarkManifest,
    unknown: UnknownFields,
) -> Result<(Vec<QaRecord>, Vec<String>), LoadError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for path in &manifest.paths {
        for (line_no, line) in read_lines(path)? {
            let mut line_warnings = Vec::new();
            let record = parse_line(&line, unknown, &mut line_warnings).map_err(|reason| {
                LoadError::MalformedLine {
                    path: path.clone(),
                    line: line_no,
                    reason,
                }
            })?;
            warnings.extend(
                line_warnings
                    .into_iter()
                    .map(|w| format!("{}:{line_no}: {w}", path.display())),
            );
            let issues = record_violations(&record);
            if let Some(reason) = issues.into_iter().next() {
                return Err(LoadError::InvariantViolation {
                    id: record.id,
                    reason,
                });
            }
            if record.language != manifest.language {
                return Err(LoadError::InvariantViolation {
                    id: record.id,
                    reason: format!(
                        "language {} does not match manifest language {}",
                        record.language, manifest.language
                    ),
                });
            }
            records.push(record);
        }
    }
    if let Some(expected) = manifest.expected_count {
        if records.len() != expected {
            return Err(LoadError::CountMismatch {
                expected,
                actual: records.len(),
            });
        }
    }
    if let Some(subjects) = &manifest.subjects {
        let partitions = partition_by_subject(&records);
        for expectation in subjects {
            let actual = partitions
                .get(expectation.subject.as_str())
                .map_or(0, |v| v.len());
            if actual != expectation.expected_count {
                return Err(LoadError::SubjectCountMismatch {
                    subject: expectation.subject.clone(),
                    expected: expectation.expected_count,
                    actual,
                });
            }
        }
    }
    Ok((records, warnings))
}

/// Like [`load_benchmark`] but collects every finding instead of failing,
/// for `validate`-style reporting. IO errors still fail.
pub fn audit_benchmark(
    manifest: &BenchmarkManifest,
) -> Result<(Vec<QaRecord>, Vec<Violation>), LoadError> {
    let mut records = Vec::new();
    let mut violations = Vec::new();
    for path in &manifest.paths {
        for (line_no, line) in read_lines(path)? {
            let mut warnings = Vec::new();
            match parse_line(&line, UnknownFields::Reject, &mut warnings) {
                Ok(record) => {
                    if record.language != manifest.language {
                        violations.push(Violation {
                            id: record.id.clone(),
                            reason: format!(
                                "language {} does not match manifest language {}",
                                record.language, manifest.language
                            ),
                        });
                    }
                    records.push(record);
                }
                Err(reason) => violations.push(Violation {
                    id: format!("{}:{line_no}", path.display()),
                    reason,
                }),
            }
        }
    }
    violations.extend(validate_dataset(&records));
    if let Some(expected) = manifest.expected_count {
        if records.len() != expected {
            violations.push(Violation {
                id: manifest.benchmark.clone(),
                reason: format!("expected {expected} records, loaded {}", records.len()),
            });
        }
    }
    if let Some(subjects) = &manifest.subjects {
        let partitions = partition_by_subject(&records);
        for expectation in subjects {
            let actual = partitions
                .get(expectation.subject.as_str())
                .map_or(0, |v| v.len());
            if actual != expectation.expected_count {
                violations.push(Violation {
                    id: manifest.benchmark.clone(),
                    reason: format!(
                        "subject {:?}: expected {} records, loaded {actual}",
                        expectation.subject, expectation.expected_count
                    ),
                });
            }
        }
    }
    Ok((records, violations))
}

/// Groups records by subject tag, preserving input order within each
/// partition. Records without a subject go under [`UNSPECIFIED_SUBJECT`].
pub fn partition_by_subject(records: &[QaRecord]) -> BTreeMap<String, Vec<&QaRecord>> {
    let mut out: BTreeMap<String, Vec<&QaRecord>> = BTreeMap::new();
    for record in records {
        let key = record
            .subject
            .clone()
            .unwrap_or_else(|| UNSPECIFIED_SUBJECT.to_string());
        out.entry(key).or_default().push(record);
    }
    out
}

/// Serializes records to the canonical newline-delimited JSON form.
pub fn to_canonical_jsonl(records: &[QaRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Hex SHA-256 digest over the concatenated bytes of the given files.
pub fn dataset_digest(paths: &[PathBuf]) -> std::io::Result<String> {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    for path in paths {
        hasher.update(std::fs::read(path)?);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn record(id: &str) -> QaRecord {
        QaRecord {
            id: id.to_string(),
            question: "Which of the following?".to_string(),
            choices: vec!["a".to_string(), "b".to_string(), "c".to_string(), "d".to_string()],
            gold: vec![1],
            language: Language::En,
            subject: None,
            benchmark: "medqa".to_string(),
        }
    }

    fn write_jsonl(dir: &tempfile::TempDir, name: &str, records: &[QaRecord]) -> PathBuf {
        let path = dir.path().join(name);
        let mut file = File::create(&path).unwrap();
        file.write_all(to_canonical_jsonl(records).as_bytes()).unwrap();
        path
    }

    fn manifest(benchmark: &str, language: Language, path: PathBuf) -> BenchmarkManifest {
        BenchmarkManifest {
            benchmark: benchmark.to_string(),
            language,
            paths: vec![path],
            expected_count: None,
            subjects: None,
        }
    }

    #[test]
    fn all_valid_records_produce_no_violations() {
        let records = vec![record("q1"), record("q2")];
        assert!(validate_dataset(&records).is_empty());
    }

    #[test]
    fn gold_index_out_of_range_is_flagged() {
        let mut bad = record("q1");
        bad.gold = vec![5];
        bad.choices = vec!["a"; 5].into_iter().map(String::from).collect();
        bad.benchmark = "igakuqa".to_string();
        let violations = validate_dataset(&[bad]);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].reason.contains("out of range"));
    }

    #[test]
    fn empty_choice_is_flagged() {
        let mut bad = record("q1");
        bad.choices[2] = "   ".to_string();
        let violations = validate_dataset(&[bad]);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].reason.contains("empty choice"));
    }

    #[test]
    fn benchmark_choice_counts_are_enforced() {
        let mut five = record("q1");
        five.benchmark = "igakuqa".to_string();
        let violations = validate_dataset(&[five]);
        assert!(violations[0].reason.contains("requires 5 choices"));
    }

    #[test]
    fn duplicate_ids_are_flagged() {
        let violations = validate_dataset(&[record("q1"), record("q1")]);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].reason, "duplicate id");
    }

    #[test]
    fn empty_file_without_expected_count_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_jsonl(&dir, "empty.jsonl", &[]);
        let (records, warnings) =
            load_benchmark(&manifest("medqa", Language::En, path), UnknownFields::Reject).unwrap();
        assert!(records.is_empty());
        assert!(warnings.is_empty());
    }

    #[test]
    fn count_mismatch_fails_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_jsonl(&dir, "two.jsonl", &[record("q1"), record("q2")]);
        let mut m = manifest("medqa", Language::En, path);
        m.expected_count = Some(3);
        match load_benchmark(&m, UnknownFields::Reject) {
            Err(LoadError::CountMismatch { expected: 3, actual: 2 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_reported() {
        let m = manifest("medqa", Language::En, PathBuf::from("/nonexistent/x.jsonl"));
        assert!(matches!(
            load_benchmark(&m, UnknownFields::Reject),
            Err(LoadError::MissingFile(_))
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut file = File::create(&path).unwrap();
        writeln!(file, "{}", serde_json::to_string(&record("q1")).unwrap()).unwrap();
        writeln!(file, "{{not json").unwrap();
        let m = manifest("medqa", Language::En, path);
        match load_benchmark(&m, UnknownFields::Reject) {
            Err(LoadError::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected_or_warned() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.jsonl");
        let mut value = serde_json::to_value(record("q1")).unwrap();
        value["bogus"] = serde_json::json!(1);
        std::fs::write(&path, format!("{value}\n")).unwrap();
        let m = manifest("medqa", Language::En, path);
        assert!(load_benchmark(&m, UnknownFields::Reject).is_err());
        let (records, warnings) = load_benchmark(&m, UnknownFields::Warn).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("bogus"));
    }

    #[test]
    fn gold_is_canonicalized_to_sorted_unique() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gold.jsonl");
        let mut value = serde_json::to_value(record("q1")).unwrap();
        value["gold"] = serde_json::json!([2, 0, 2]);
        std::fs::write(&path, format!("{value}\n")).unwrap();
        let m = manifest("medqa", Language::En, path);
        let (records, _) = load_benchmark(&m, UnknownFields::Reject).unwrap();
        assert_eq!(records[0].gold, vec![0, 2]);
    }

    #[test]
    fn partition_covers_input_and_preserves_order() {
        let mut records = Vec::new();
        for i in 0..9 {
            let mut r = record(&format!("q{i}"));
            r.subject = match i % 3 {
                0 => Some("anatomy".to_string()),
                1 => Some("clinical_knowledge".to_string()),
                _ => None,
            };
            records.push(r);
        }
        let parts = partition_by_subject(&records);
        let total: usize = parts.values().map(|v| v.len()).sum();
        assert_eq!(total, records.len());
        assert_eq!(parts[UNSPECIFIED_SUBJECT].len(), 3);
        let anatomy_ids: Vec<&str> = parts["anatomy"].iter().map(|r| r.id.as_str()).collect();
        assert_eq!(anatomy_ids, vec!["q0", "q3", "q6"]);
    }

    #[test]
    fn partition_of_empty_input_is_empty() {
        assert!(partition_by_subject(&[]).is_empty());
    }

    #[test]
    fn canonical_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut r2 = record("q2");
        r2.subject = Some("anatomy".to_string());
        r2.gold = vec![0, 3];
        let records = vec![record("q1"), r2];
        let path = write_jsonl(&dir, "rt.jsonl", &records);
        let m = manifest("medqa", Language::En, path);
        let (loaded, _) = load_benchmark(&m, UnknownFields::Reject).unwrap();
        assert_eq!(loaded, records);
        let again = to_canonical_jsonl(&loaded);
        assert_eq!(again, to_canonical_jsonl(&records));
    }

    #[test]
    fn audit_collects_multiple_findings() {
        let dir = tempfile::tempdir().unwrap();
        let mut bad = record("q2");
        bad.gold = vec![9];
        let path = write_jsonl(&dir, "two.jsonl", &[record("q1"), bad]);
        let mut m = manifest("medqa", Language::En, path);
        m.expected_count = Some(5);
        let (records, violations) = audit_benchmark(&m).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(violations.len(), 2); // bad gold + count mismatch
    }
}
