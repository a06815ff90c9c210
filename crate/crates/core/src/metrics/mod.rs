//! Scoring: text normalization, gestalt similarity, answer extraction,
//! choice prediction, and per-item judgments.

pub mod gestalt;
pub mod normalize;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::QaRecord;
use crate::Real;

pub use gestalt::{lcs_block, match_score, similarity, MatchScore, Matcher};
pub use normalize::normalize;

/// How the candidate answer is pulled out of a raw model response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionPolicy {
    /// Final non-empty line of the response; the CoT instruction puts the
    /// answer last.
    #[default]
    LastLine,
    /// The whole response.
    Full,
}

impl std::fmt::Display for ExtractionPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExtractionPolicy::LastLine => "last-line",
            ExtractionPolicy::Full => "full",
        })
    }
}

impl std::str::FromStr for ExtractionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last-line" | "last_line" => Ok(ExtractionPolicy::LastLine),
            "full" => Ok(ExtractionPolicy::Full),
            other => Err(format!(
                "unknown extraction policy {other:?}, expected \"last-line\" or \"full\""
            )),
        }
    }
}

/// Scoring outcome for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemJudgment {
    pub item_id: String,
    pub extracted_answer: String,
    pub per_choice_similarity: Vec<Real>,
    /// Predicted choice indices, ascending; always `|gold|` of them.
    pub predicted: Vec<usize>,
    pub exact_correct: bool,
    pub gestalt_correct: bool,
    /// Similarity of the extracted answer to the joined gold text; an
    /// auxiliary continuous score alongside the binary flags.
    pub gestalt_to_gold: Real,
    /// True when last-line extraction matched nothing and the judgment
    /// fell back to the full response text.
    pub extraction_fallback: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum JudgeError {
    #[error("record id {record} does not match response id {response}")]
    IdMismatch { record: String, response: String },
}

/// Pulls the candidate answer text out of a response.
pub fn extract_answer(response_text: &str, policy: ExtractionPolicy) -> &str {
    match policy {
        ExtractionPolicy::Full => response_text,
        ExtractionPolicy::LastLine => response_text
            .lines()
            .rev()
            .map(str::trim)
            .find(|l| !l.is_empty())
            .unwrap_or(""),
    }
}

/// Indices of the `k` largest values, ties broken toward the lower index;
/// returned ascending.
pub fn top_k_indices(values: &[Real], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .expect("similarities are finite")
            .then(i.cmp(&j))
    });
    order.truncate(k);
    order.sort_unstable();
    order
}

/// Splits a multi-answer response on its list separators (", " as in the
/// exemplar format, or the ideographic comma).
fn answer_parts(answer: &str) -> Vec<String> {
    answer
        .split('、')
        .flat_map(|segment| segment.split(", "))
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

/// Scores the extracted answer against every choice and picks the `k` most
/// similar ones. Similarities are computed on normalized text at character
/// granularity for both languages.
///
/// For multi-answer items (`k > 1`) the response is a joined list, so each
/// choice scores as the best of the whole-answer similarity and the
/// similarities of the individual list parts; otherwise a short gold
/// choice would be drowned out by the rest of the list.
pub fn predict(
    extracted: &str,
    choices: &[String],
    k: usize,
    language: crate::ingest::Language,
) -> (Vec<usize>, Vec<Real>) {
    let whole = normalize(extracted, language);
    let answer: Vec<char> = whole.chars().collect();
    let parts: Vec<Vec<char>> = if k > 1 {
        answer_parts(&whole)
            .iter()
            .map(|p| p.chars().collect())
            .collect()
    } else {
        Vec::new()
    };
    let mut matcher = Matcher::new();
    let similarities: Vec<Real> = choices
        .iter()
        .map(|choice| {
            let choice_chars: Vec<char> = normalize(choice, language).chars().collect();
            let mut best: Real = matcher.score(&answer, &choice_chars).ratio();
            for part in &parts {
                best = best.max(matcher.score(part, &choice_chars).ratio());
            }
            best
        })
        .collect();
    (top_k_indices(&similarities, k), similarities)
}

/// Normalized equality between the extracted answer and the gold text; for
/// multi-answer items any ordering of the gold choices is accepted.
pub fn exact_match(extracted: &str, record: &QaRecord) -> bool {
    let answer = normalize(extracted, record.language);
    let golds: Vec<&str> = record
        .gold
        .iter()
        .filter_map(|&i| record.choices.get(i).map(|s| s.as_str()))
        .collect();
    if golds.is_empty() {
        return false;
    }
    golds
        .iter()
        .permutations(golds.len())
        .any(|perm| normalize(&perm.iter().join(", "), record.language) == answer)
}

/// Builds the complete judgment for one item. With last-line extraction,
/// an answer that matches no choice at all (all similarities zero) is
/// retried against the full response before finalizing.
pub fn judge(
    record: &QaRecord,
    response_item_id: &str,
    response_text: &str,
    policy: ExtractionPolicy,
) -> Result<ItemJudgment, JudgeError> {
    if record.id != response_item_id {
        return Err(JudgeError::IdMismatch {
            record: record.id.clone(),
            response: response_item_id.to_string(),
        });
    }
    let k = record.gold.len();
    let mut extracted = extract_answer(response_text, policy).to_string();
    let (mut predicted, mut similarities) = predict(&extracted, &record.choices, k, record.language);
    let mut extraction_fallback = false;
    if policy == ExtractionPolicy::LastLine && similarities.iter().all(|&s| s == 0.0) {
        extraction_fallback = true;
        extracted = extract_answer(response_text, ExtractionPolicy::Full).to_string();
        (predicted, similarities) = predict(&extracted, &record.choices, k, record.language);
    }
    let gestalt_correct = predicted == record.gold;
    let exact_correct = exact_match(&extracted, record);
    let gestalt_to_gold = similarity(
        &normalize(&extracted, record.language),
        &normalize(&record.gold_answer_text(), record.language),
    );
    Ok(ItemJudgment {
        item_id: record.id.clone(),
        extracted_answer: extracted,
        per_choice_similarity: similarities,
        predicted,
        exact_correct,
        gestalt_correct,
        gestalt_to_gold,
        extraction_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Language;

    fn appendix_record() -> QaRecord {
        QaRecord {
            id: "item-1".to_string(),
            question: "What is the most likely condition in the fetus?".to_string(),
            choices: [
                "Esophageal atresia",
                "Ventricular septal defect",
                "Renal hypoplasia",
                "Anorectal malformation",
                "Fetal hydrops",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            gold: vec![2],
            language: Language::En,
            subject: None,
            benchmark: "igakuqa".to_string(),
        }
    }

    fn select_two_record() -> QaRecord {
        QaRecord {
            id: "item-2".to_string(),
            question: "Which of the following is the most likely cause? Select two.".to_string(),
            choices: [
                "Oxygen deficiency",
                "Hydrogen sulfide poisoning",
                "Carbon monoxide poisoning",
                "Carbon dioxide poisoning",
                "Nitrogen dioxide poisoning",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            gold: vec![0, 1],
            language: Language::En,
            subject: None,
            benchmark: "igakuqa".to_string(),
        }
    }

    #[test]
    fn extraction_last_line_and_full() {
        assert_eq!(
            extract_answer("…reasoning…\nRenal hypoplasia", ExtractionPolicy::LastLine),
            "Renal hypoplasia"
        );
        assert_eq!(extract_answer("Renal hypoplasia", ExtractionPolicy::Full), "Renal hypoplasia");
        assert_eq!(extract_answer("a\n\nb\n  \n", ExtractionPolicy::LastLine), "b");
        assert_eq!(extract_answer("", ExtractionPolicy::LastLine), "");
    }

    #[test]
    fn predict_picks_the_named_choice() {
        let record = appendix_record();
        let (predicted, sims) = predict("Renal hypoplasia", &record.choices, 1, Language::En);
        assert_eq!(predicted, vec![2]);
        assert_eq!(sims.len(), 5);
        assert_eq!(sims[2], 1.0);
    }

    #[test]
    fn predict_multi_answer() {
        let record = select_two_record();
        let (predicted, _) = predict(
            "Oxygen deficiency, Hydrogen sulfide poisoning",
            &record.choices,
            2,
            Language::En,
        );
        assert_eq!(predicted, vec![0, 1]);
    }

    #[test]
    fn all_equal_similarities_tie_break_to_lowest_index() {
        // identical choices make every similarity equal
        let choices: Vec<String> = vec!["same".into(), "same".into(), "same".into()];
        let (predicted, _) = predict("same", &choices, 1, Language::En);
        assert_eq!(predicted, vec![0]);
    }

    #[test]
    fn top_k_ties_prefer_lower_indices() {
        assert_eq!(top_k_indices(&[0.5, 0.9, 0.9, 0.1], 2), vec![1, 2]);
        assert_eq!(top_k_indices(&[0.9, 0.5, 0.9, 0.1], 1), vec![0]);
        assert_eq!(top_k_indices(&[0.0, 0.0, 0.0], 2), vec![0, 1]);
    }

    #[test]
    fn exact_match_normalizes_and_accepts_permutations() {
        let record = appendix_record();
        assert!(exact_match("Renal hypoplasia", &record));
        assert!(exact_match("renal hypoplasia.", &record));
        assert!(!exact_match("Fetal hydrops", &record));

        let multi = select_two_record();
        assert!(exact_match("Oxygen deficiency, Hydrogen sulfide poisoning", &multi));
        assert!(exact_match("Hydrogen sulfide poisoning, Oxygen deficiency", &multi));
        assert!(!exact_match("Oxygen deficiency", &multi));
    }

    #[test]
    fn judge_gold_verbatim_response() {
        let record = appendix_record();
        let j = judge(&record, "item-1", "Let me think.\nRenal hypoplasia", ExtractionPolicy::LastLine).unwrap();
        assert!(j.exact_correct);
        assert!(j.gestalt_correct);
        assert_eq!(j.predicted, vec![2]);
        assert_eq!(j.gestalt_to_gold, 1.0);
        assert!(!j.extraction_fallback);
    }

    #[test]
    fn judge_wrong_choice_verbatim() {
        let record = appendix_record();
        let j = judge(&record, "item-1", "Fetal hydrops", ExtractionPolicy::LastLine).unwrap();
        assert!(!j.exact_correct);
        assert!(!j.gestalt_correct);
        assert_eq!(j.predicted, vec![4]);
    }

    #[test]
    fn judge_truncated_answer_is_gestalt_correct_only() {
        let record = appendix_record();
        let j = judge(&record, "item-1", "Renal hypoplasi", ExtractionPolicy::LastLine).unwrap();
        assert_eq!(j.predicted, vec![2]);
        assert!(j.gestalt_correct);
        assert!(!j.exact_correct);
        // the winning similarity stays strictly ahead of the others
        for (i, &s) in j.per_choice_similarity.iter().enumerate() {
            if i != 2 {
                assert!(s < j.per_choice_similarity[2]);
            }
        }
    }

    #[test]
    fn judge_falls_back_to_full_extraction() {
        let record = appendix_record();
        // last line shares no character with any choice (digits only);
        // the inline answer is picked up by the fallback
        let text = "The answer is Renal hypoplasia\n42";
        let j = judge(&record, "item-1", text, ExtractionPolicy::LastLine).unwrap();
        assert!(j.extraction_fallback);
        assert_eq!(j.predicted, vec![2]);
        assert!(j.gestalt_correct);
    }

    #[test]
    fn judge_id_mismatch() {
        let record = appendix_record();
        let err = judge(&record, "other", "x", ExtractionPolicy::LastLine).unwrap_err();
        assert_eq!(
            err,
            JudgeError::IdMismatch { record: "item-1".to_string(), response: "other".to_string() }
        );
    }

    #[test]
    fn gestalt_correct_implies_gold_similarity_dominates() {
        let record = select_two_record();
        let j = judge(
            &record,
            "item-2",
            "Hydrogen sulfide poisoning, Oxygen deficiency",
            ExtractionPolicy::LastLine,
        )
        .unwrap();
        assert!(j.gestalt_correct);
        let min_gold = record
            .gold
            .iter()
            .map(|&g| j.per_choice_similarity[g])
            .fold(f64::INFINITY, f64::min);
        for (i, &s) in j.per_choice_similarity.iter().enumerate() {
            if !record.gold.contains(&i) {
                assert!(min_gold >= s);
            }
        }
    }
}
