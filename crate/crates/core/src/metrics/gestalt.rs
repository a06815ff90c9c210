//! Ratcliff-Obershelp (gestalt) pattern matching at character granularity.
//!
//! The similarity of two strings is `2*M / T`, where `T` is the combined
//! length and `M` is the number of characters matched by recursive block
//! matching: find the longest common contiguous block, then recurse on the
//! unmatched slices to its left and to its right. Two empty strings have
//! similarity 1 by convention.

use num_traits::Float;

use crate::Real;

/// Longest common contiguous block between two sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LcsBlock {
    pub start_a: usize,
    pub start_b: usize,
    pub len: usize,
}

impl LcsBlock {
    fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Match statistics kept in exact integer form: `matched` characters out of
/// a combined `total`. The ratio `2*matched / total` is materialized on
/// demand, so equality checks can stay in integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchScore {
    pub matched: usize,
    pub total: usize,
}

impl MatchScore {
    /// `2*matched / total`; 1 when both inputs were empty.
    pub fn ratio<F: Float>(&self) -> F {
        if self.total == 0 {
            F::one()
        } else {
            F::from(2 * self.matched).unwrap() / F::from(self.total).unwrap()
        }
    }
}

#[derive(Clone, Copy)]
struct Span {
    a_lo: usize,
    a_hi: usize,
    b_lo: usize,
    b_hi: usize,
}

/// Block matcher with reusable scratch buffers. The per-choice scoring path
/// and the equivalence sweeps call this millions of times; reusing the DP
/// row and the work list keeps those loops allocation-free.
#[derive(Default)]
pub struct Matcher {
    row: Vec<usize>,
    work: Vec<Span>,
}

impl Matcher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total number of characters matched by recursive block matching.
    pub fn match_total<T: PartialEq>(&mut self, a: &[T], b: &[T]) -> usize {
        self.work.clear();
        self.work.push(Span {
            a_lo: 0,
            a_hi: a.len(),
            b_lo: 0,
            b_hi: b.len(),
        });
        let mut matched = 0;
        while let Some(span) = self.work.pop() {
            if span.a_lo == span.a_hi || span.b_lo == span.b_hi {
                continue;
            }
            let block = longest_block(
                &mut self.row,
                &a[span.a_lo..span.a_hi],
                &b[span.b_lo..span.b_hi],
            );
            if block.is_empty() {
                continue;
            }
            matched += block.len;
            let start_a = span.a_lo + block.start_a;
            let start_b = span.b_lo + block.start_b;
            self.work.push(Span {
                a_lo: span.a_lo,
                a_hi: start_a,
                b_lo: span.b_lo,
                b_hi: start_b,
            });
            self.work.push(Span {
                a_lo: start_a + block.len,
                a_hi: span.a_hi,
                b_lo: start_b + block.len,
                b_hi: span.b_hi,
            });
        }
        matched
    }

    /// Match statistics for two already-decoded character sequences.
    pub fn score<T: PartialEq>(&mut self, a: &[T], b: &[T]) -> MatchScore {
        MatchScore {
            matched: self.match_total(a, b),
            total: a.len() + b.len(),
        }
    }
}

/// Longest common contiguous block, ties broken by the smallest start in
/// `a`, then the smallest start in `b`. Scanning end positions in ascending
/// order with a strictly-greater update realizes exactly that rule: among
/// maximal blocks, the one ending first starts first.
fn longest_block<T: PartialEq>(row: &mut Vec<usize>, a: &[T], b: &[T]) -> LcsBlock {
    row.clear();
    row.resize(b.len(), 0);
    let mut best = LcsBlock {
        start_a: 0,
        start_b: 0,
        len: 0,
    };
    for (i, ca) in a.iter().enumerate() {
        let mut diag = 0; // run length ending at (i-1, j-1)
        for (j, cb) in b.iter().enumerate() {
            let above = row[j];
            let run = if ca == cb { diag + 1 } else { 0 };
            row[j] = run;
            diag = above;
            if run > best.len {
                best = LcsBlock {
                    start_a: i + 1 - run,
                    start_b: j + 1 - run,
                    len: run,
                };
            }
        }
    }
    best
}

/// Longest common contiguous substring of `a` and `b` in character indices,
/// as `(start_a, start_b, length)`; length 0 when no character is shared.
pub fn lcs_block(a: &str, b: &str) -> (usize, usize, usize) {
    let av: Vec<char> = a.chars().collect();
    let bv: Vec<char> = b.chars().collect();
    let block = longest_block(&mut Vec::new(), &av, &bv);
    (block.start_a, block.start_b, block.len)
}

/// Match statistics for two strings at character granularity.
pub fn match_score(a: &str, b: &str) -> MatchScore {
    let av: Vec<char> = a.chars().collect();
    let bv: Vec<char> = b.chars().collect();
    Matcher::new().score(&av, &bv)
}

/// Gestalt similarity in `[0, 1]`.
pub fn similarity(a: &str, b: &str) -> Real {
    match_score(a, b).ratio()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lcs_prefers_smallest_starts() {
        assert_eq!(lcs_block("apple", "ape"), (0, 0, 2));
        assert_eq!(lcs_block("aa", "aa"), (0, 0, 2));
        // "bcd" beats the shorter "a" match
        assert_eq!(lcs_block("abcd", "bcda"), (1, 0, 3));
    }

    #[test]
    fn lcs_disjoint_alphabets_is_empty() {
        let (_, _, len) = lcs_block("abc", "xyz");
        assert_eq!(len, 0);
    }

    #[test]
    fn lcs_empty_inputs() {
        assert_eq!(lcs_block("", "kitten").2, 0);
        assert_eq!(lcs_block("", "").2, 0);
    }

    #[test]
    fn worked_match_scores() {
        // "ap" + "e" matched out of 5 + 3
        assert_eq!(match_score("apple", "ape"), MatchScore { matched: 3, total: 8 });
        // "apple" out of 5 + 10
        assert_eq!(
            match_score("apple", "applesauce"),
            MatchScore { matched: 5, total: 15 }
        );
        // "bcd" out of 4 + 4
        assert_eq!(match_score("abcd", "bcda"), MatchScore { matched: 3, total: 8 });
    }

    #[test]
    fn worked_similarities() {
        assert_eq!(similarity("apple", "ape"), 0.75);
        assert_eq!(similarity("apple", "applesauce"), 10.0 / 15.0);
        assert_eq!(similarity("abcd", "bcda"), 0.75);
        assert_eq!(similarity("abc", "abc"), 1.0);
        assert_eq!(similarity("abc", "xyz"), 0.0);
    }

    #[test]
    fn empty_string_conventions() {
        assert_eq!(similarity("", ""), 1.0);
        assert_eq!(similarity("", "abc"), 0.0);
        assert_eq!(similarity("abc", ""), 0.0);
    }

    #[test]
    fn multibyte_counts_characters_not_bytes() {
        // 3 matched characters out of 3 + 4
        let s = match_score("低酸素", "低酸素症");
        assert_eq!(s, MatchScore { matched: 3, total: 7 });
    }

    #[test]
    fn ratio_is_generic_over_float_width() {
        let s = match_score("apple", "ape");
        let x32: f32 = s.ratio();
        let x64: f64 = s.ratio();
        assert_eq!(x32, 0.75f32);
        assert_eq!(x64, 0.75f64);
    }

    #[test]
    fn similarity_bounds() {
        let cases = [
            ("apple", "ape"),
            ("abcd", "bcda"),
            ("renal hypoplasia", "renal hypoplasi"),
            ("酸素欠乏", "硫化水素中毒"),
        ];
        for (a, b) in cases {
            let (_, _, lcs) = lcs_block(a, b);
            let t = a.chars().count() + b.chars().count();
            let sim = similarity(a, b);
            let lower = 2.0 * lcs as f64 / t as f64;
            let upper = 2.0 * a.chars().count().min(b.chars().count()) as f64 / t as f64;
            assert!(sim >= lower && sim <= upper, "{a} vs {b}");
        }
    }
}
