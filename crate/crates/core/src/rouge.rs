//! ROUGE-L over a fixed, simple tokenization.
//!
//! Text is lowercased and split into maximal runs of alphanumeric
//! characters; everything else separates tokens. No stemming.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeL {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Length of the longest common subsequence of two token sequences.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // single rolling row over `b`
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_tokens<T: PartialEq>(candidate: &[T], reference: &[T]) -> RougeL {
    let lcs = lcs_len(candidate, reference) as f64;
    let ratio = |n: usize| if n == 0 { 0.0 } else { lcs / n as f64 };
    let precision = ratio(candidate.len());
    let recall = ratio(reference.len());
    let f_measure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    RougeL {
        precision,
        recall,
        f_measure,
    }
}

pub fn rouge_l(candidate: &str, reference: &str) -> RougeL {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Longest common subsequence by enumerating every subsequence of `a`.
    fn lcs_brute(a: &[u8], b: &[u8]) -> usize {
        let mut best = 0;
        for mask in 0u32..(1 << a.len()) {
            let sub: Vec<u8> = (0..a.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| a[i])
                .collect();
            let mut it = b.iter();
            if sub.iter().all(|s| it.any(|x| x == s)) {
                best = best.max(sub.len());
            }
        }
        best
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("The cat sat."), vec!["the", "cat", "sat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("in 1969"), vec!["in", "1969"]);
        assert_eq!(tokenize("prince-electors"), vec!["prince", "electors"]);
        assert_eq!(tokenize("  California, "), vec!["california"]);
    }

    #[test]
    fn identical_and_disjoint() {
        assert_eq!(rouge_l("the cat", "The cat").f_measure, 1.0);
        assert_eq!(rouge_l("dog", "cat").f_measure, 0.0);
        assert_eq!(rouge_l("", "cat").f_measure, 0.0);
        assert_eq!(rouge_l("", "").f_measure, 0.0);
    }

    #[test]
    fn partial_overlap() {
        let r = rouge_l("the cat", "the cat sat");
        assert_eq!(r.precision, 1.0);
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.f_measure - 0.8).abs() < 1e-15);
    }

    #[test]
    fn lcs_matches_enumeration_exhaustively_small() {
        // every pair of sequences of length <= 4 over a 3-letter alphabet
        let mut seqs: Vec<Vec<u8>> = vec![vec![]];
        for len in 1..=4 {
            for code in 0..3usize.pow(len) {
                let mut c = code;
                let mut s = Vec::new();
                for _ in 0..len {
                    s.push((c % 3) as u8);
                    c /= 3;
                }
                seqs.push(s);
            }
        }
        for a in &seqs {
            for b in &seqs {
                assert_eq!(lcs_len(a, b), lcs_brute(a, b), "{a:?} {b:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn lcs_matches_brute_force(a in proptest::collection::vec(0u8..4, 0..=8),
                                   b in proptest::collection::vec(0u8..4, 0..=8)) {
            prop_assert_eq!(lcs_len(&a, &b), lcs_brute(&a, &b));
        }

        #[test]
        fn self_similarity_is_one(a in proptest::collection::vec(0u8..6, 1..12)) {
            prop_assert_eq!(rouge_l_tokens(&a, &a).f_measure, 1.0);
        }

        #[test]
        fn equal_length_f_is_symmetric(a in proptest::collection::vec(0u8..4, 1..10),
                                       seed in proptest::collection::vec(0u8..4, 10)) {
            let b: Vec<u8> = seed[..a.len()].to_vec();
            prop_assert_eq!(rouge_l_tokens(&a, &b).f_measure, rouge_l_tokens(&b, &a).f_measure);
        }

        #[test]
        fn appending_reference_token_never_shrinks_lcs(a in proptest::collection::vec(0u8..4, 0..10),
                                                       b in proptest::collection::vec(0u8..4, 0..10),
                                                       x in 0u8..4) {
            let mut longer = b.clone();
            longer.push(x);
            prop_assert!(lcs_len(&a, &longer) >= lcs_len(&a, &b));
        }

        #[test]
        fn scores_are_bounded(a in "[a-c ]{0,20}", b in "[a-c ]{0,20}") {
            let r = rouge_l(&a, &b);
            for v in [r.precision, r.recall, r.f_measure] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!(r.f_measure <= r.precision.max(r.recall) + 1e-12);
        }
    }
}
