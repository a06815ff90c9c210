//! Prompt rendering: chain-of-thought and Alpaca templates, zero- or
//! few-shot, in English or Japanese.
//!
//! Template texts are golden files with literal `{{instruction}}` and
//! `{{input}}` placeholders, laid out as `templates/<kind>.<language>.txt`.
//! The English texts are frozen; the Japanese texts ship as editable
//! defaults. The question goes into `{{instruction}}` and the comma-joined
//! choices into `{{input}}`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Language, QaRecord};

/// Default stop sequences; they keep a completion endpoint from
/// hallucinating further exemplar blocks in few-shot mode.
pub const DEFAULT_STOP_SEQUENCES: &[&str] = &["### Input:", "###"];

const COT_EN: &str = include_str!("../templates/cot.en.txt");
const COT_JA: &str = include_str!("../templates/cot.ja.txt");
const ALPACA_EN: &str = include_str!("../templates/alpaca.en.txt");
const ALPACA_JA: &str = include_str!("../templates/alpaca.ja.txt");
const EXEMPLARS_EN: &str = include_str!("../templates/exemplars.en.jsonl");
const EXEMPLARS_JA: &str = include_str!("../templates/exemplars.ja.jsonl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    #[default]
    Cot,
    Alpaca,
}

impl TemplateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateKind::Cot => "cot",
            TemplateKind::Alpaca => "alpaca",
        }
    }
}

impl std::fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cot" => Ok(TemplateKind::Cot),
            "alpaca" => Ok(TemplateKind::Alpaca),
            other => Err(format!("unknown template {other:?}, expected \"cot\" or \"alpaca\"")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("record {id} is {record_language} but the run renders {requested}")]
    LanguageMismatch {
        id: String,
        record_language: Language,
        requested: Language,
    },
    #[error("no exemplars available for language {0}; provide templates/exemplars.{0}.jsonl")]
    UnsupportedShotLanguage(Language),
    #[error("requested {requested} shots but only {available} exemplars are available")]
    NotEnoughExemplars { requested: usize, available: usize },
    #[error("exemplar {0}: {1}")]
    BadExemplar(String, String),
}

/// An in-context exemplar: a worked item plus its gold answer text, which
/// is always the gold choices joined with ", " in choice order.
#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub record: QaRecord,
    pub answer: String,
}

/// Ordered exemplars for few-shot rendering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShotSpec {
    pub exemplars: Vec<Exemplar>,
}

impl ShotSpec {
    pub fn zero_shot() -> Self {
        Self::default()
    }

    /// Builds exemplars from records, deriving each answer text from the
    /// gold choices.
    pub fn from_records(records: Vec<QaRecord>) -> Result<Self, PromptError> {
        let mut exemplars = Vec::with_capacity(records.len());
        for record in records {
            if record.gold.iter().any(|&g| g >= record.choices.len()) {
                return Err(PromptError::BadExemplar(
                    record.id.clone(),
                    "gold index out of range".to_string(),
                ));
            }
            let answer = record.gold_answer_text();
            exemplars.push(Exemplar { record, answer });
        }
        Ok(Self { exemplars })
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }
}

/// A fully rendered prompt ready to send to an endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub item_id: String,
    pub text: String,
    pub stop_sequences: Vec<String>,
    pub template: TemplateKind,
    pub shots: usize,
    pub language: Language,
}

/// The set of template texts and exemplar pools in use for a run.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    texts: HashMap<(TemplateKind, Language), String>,
    exemplars: HashMap<Language, Vec<QaRecord>>,
    /// When set, the choice-count word in the instruction is left exactly
    /// as written in the template file.
    pub verbatim_instruction: bool,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    /// The compiled-in golden templates and exemplar pools.
    pub fn builtin() -> Self {
        let mut texts = HashMap::new();
        texts.insert((TemplateKind::Cot, Language::En), COT_EN.to_string());
        texts.insert((TemplateKind::Cot, Language::Ja), COT_JA.to_string());
        texts.insert((TemplateKind::Alpaca, Language::En), ALPACA_EN.to_string());
        texts.insert((TemplateKind::Alpaca, Language::Ja), ALPACA_JA.to_string());
        let mut exemplars = HashMap::new();
        exemplars.insert(Language::En, parse_exemplars(EXEMPLARS_EN));
        exemplars.insert(Language::Ja, parse_exemplars(EXEMPLARS_JA));
        Self {
            texts,
            exemplars,
            verbatim_instruction: false,
        }
    }

    /// Builtin templates overridden by any files present in `dir`
    /// (`<kind>.<language>.txt`, `exemplars.<language>.jsonl`).
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut set = Self::builtin();
        for kind in [TemplateKind::Cot, TemplateKind::Alpaca] {
            for language in [Language::En, Language::Ja] {
                let path = dir.join(format!("{kind}.{language}.txt"));
                if path.is_file() {
                    set.texts.insert((kind, language), std::fs::read_to_string(path)?);
                }
            }
        }
        for language in [Language::En, Language::Ja] {
            let path = dir.join(format!("exemplars.{language}.jsonl"));
            if path.is_file() {
                set.exemplars
                    .insert(language, parse_exemplars(&std::fs::read_to_string(path)?));
            }
        }
        Ok(set)
    }

    pub fn text(&self, kind: TemplateKind, language: Language) -> &str {
        &self.texts[&(kind, language)]
    }

    /// The first `n` exemplars for a language.
    pub fn shots(&self, language: Language, n: usize) -> Result<ShotSpec, PromptError> {
        if n == 0 {
            return Ok(ShotSpec::zero_shot());
        }
        let pool = self.exemplars.get(&language).cloned().unwrap_or_default();
        if pool.is_empty() {
            return Err(PromptError::UnsupportedShotLanguage(language));
        }
        if pool.len() < n {
            return Err(PromptError::NotEnoughExemplars {
                requested: n,
                available: pool.len(),
            });
        }
        ShotSpec::from_records(pool.into_iter().take(n).collect())
    }
}

fn parse_exemplars(text: &str) -> Vec<QaRecord> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .filter_map(|l| serde_json::from_str(l).ok())
        .collect()
}

/// Choices joined in order with ", ".
pub fn render_choices(record: &QaRecord) -> String {
    record.choices.join(", ")
}

/// The instruction paragraph of a template, with the choice-count word
/// matching `n_choices` (4 or 5) unless verbatim mode is requested.
pub fn instruction_text(
    set: &TemplateSet,
    kind: TemplateKind,
    language: Language,
    n_choices: usize,
) -> String {
    let text = adjust_choice_count(set.text(kind, language), language, n_choices, set.verbatim_instruction);
    let section = match kind {
        TemplateKind::Cot => text
            .split_once("### Instruction:\n")
            .and_then(|(_, rest)| rest.split_once("\n### Input:"))
            .map(|(instr, _)| instr.to_string()),
        TemplateKind::Alpaca => text
            .split_once("\n### Instruction:")
            .map(|(preamble, _)| preamble.to_string()),
    };
    section.unwrap_or(text)
}

/// Swaps the choice-count wording so the instruction matches the item.
/// The golden templates are written for five-choice items; four-choice
/// benchmarks get the four-option wording.
fn adjust_choice_count(text: &str, language: Language, n_choices: usize, verbatim: bool) -> String {
    if verbatim {
        return text.to_string();
    }
    let (five, four) = match language {
        Language::En => ("the five options", "the four options"),
        Language::Ja => ("五つの選択肢", "四つの選択肢"),
    };
    match n_choices {
        4 => text.replace(five, four),
        5 => text.replace(four, five),
        _ => text.to_string(),
    }
}

/// Substitutes `{{instruction}}` and `{{input}}` in a single pass so that
/// placeholder-like text inside the values is never re-expanded.
fn fill_placeholders(template: &str, question: &str, choices: &str) -> String {
    let mut out = String::with_capacity(template.len() + question.len() + choices.len());
    let mut rest = template;
    loop {
        let q = rest.find("{{instruction}}");
        let c = rest.find("{{input}}");
        let (pos, token, value) = match (q, c) {
            (Some(a), Some(b)) => {
                if a < b {
                    (a, "{{instruction}}", question)
                } else {
                    (b, "{{input}}", choices)
                }
            }
            (Some(a), None) => (a, "{{instruction}}", question),
            (None, Some(b)) => (b, "{{input}}", choices),
            (None, None) => break,
        };
        out.push_str(&rest[..pos]);
        out.push_str(value);
        rest = &rest[pos + token.len()..];
    }
    out.push_str(rest);
    out
}

fn exemplar_block(kind: TemplateKind, exemplar: &Exemplar) -> String {
    let question = &exemplar.record.question;
    let choices = render_choices(&exemplar.record);
    match kind {
        TemplateKind::Cot => {
            format!("### Input:\n{question}\n{choices}\n### Response:\n{}\n", exemplar.answer)
        }
        TemplateKind::Alpaca => format!(
            "### Instruction:\n{question}\n### Input:\n{choices}\n### Response:\n{}\n",
            exemplar.answer
        ),
    }
}

/// Renders the full prompt for one item. Exemplar blocks are inserted
/// between the instruction block and the target item, in exemplar order.
pub fn render(
    record: &QaRecord,
    kind: TemplateKind,
    shots: &ShotSpec,
    language: Language,
    set: &TemplateSet,
) -> Result<RenderedPrompt, PromptError> {
    if record.language != language {
        return Err(PromptError::LanguageMismatch {
            id: record.id.clone(),
            record_language: record.language,
            requested: language,
        });
    }
    if shots.exemplars.iter().any(|e| e.record.language != language) {
        return Err(PromptError::UnsupportedShotLanguage(language));
    }

    let template = adjust_choice_count(
        set.text(kind, language),
        language,
        record.choices.len(),
        set.verbatim_instruction,
    );
    let target_marker = match kind {
        TemplateKind::Cot => "### Input:",
        TemplateKind::Alpaca => "### Instruction:",
    };
    let skeleton = if shots.is_empty() {
        template
    } else {
        // splice exemplar blocks just before the target item's block
        let pos = template.find(target_marker).unwrap_or(0);
        let mut with_shots = String::with_capacity(template.len() * (1 + shots.len()));
        with_shots.push_str(&template[..pos]);
        for exemplar in &shots.exemplars {
            with_shots.push_str(&exemplar_block(kind, exemplar));
        }
        with_shots.push_str(&template[pos..]);
        with_shots
    };
    let text = fill_placeholders(&skeleton, &record.question, &render_choices(record));
    Ok(RenderedPrompt {
        item_id: record.id.clone(),
        text,
        stop_sequences: DEFAULT_STOP_SEQUENCES.iter().map(|s| s.to_string()).collect(),
        template: kind,
        shots: shots.len(),
        language,
    })
}
