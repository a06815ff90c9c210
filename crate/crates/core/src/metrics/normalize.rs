//! Text normalization applied before any similarity or equality check.

use unicode_normalization::UnicodeNormalization;

use crate::ingest::Language;

/// Normalizes text in a fixed order: Unicode NFKC, trim, collapse internal
/// whitespace runs to a single space, casefold (English only), then strip
/// terminal periods (`.` or `。`).
///
/// The stripping step removes the whole trailing run of periods and
/// whitespace rather than a single character, which keeps the pipeline
/// idempotent: `normalize(normalize(x)) == normalize(x)`.
pub fn normalize(text: &str, language: Language) -> String {
    let nfkc: String = text.nfkc().collect();
    let collapsed: String = nfkc.split_whitespace().collect::<Vec<_>>().join(" ");
    let folded = match language {
        Language::En => collapsed.to_lowercase(),
        Language::Ja => collapsed,
    };
    folded
        .trim_end_matches(|c: char| c == '.' || c == '。' || c.is_whitespace())
        .to_string()
}
