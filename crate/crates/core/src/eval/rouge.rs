use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn new(recall: f64, precision: f64) -> Self {
        let f1 = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * recall * precision / (recall + precision)
        };
        RougeScore { recall, precision, f1 }
    }

    fn from_counts(hits: usize, reference_total: usize, candidate_total: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        RougeScore::new(ratio(hits, reference_total), ratio(hits, candidate_total))
    }

    /// Ordering for picking among references: recall, then f1.
    fn better_than(&self, other: &RougeScore) -> bool {
        (self.recall, self.f1) > (other.recall, other.f1)
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

fn best_of<R>(references: &[R], score: impl Fn(&R) -> RougeScore) -> Result<RougeScore> {
    if references.is_empty() {
        return Err(Error::EmptyInput("references"));
    }
    Ok(references.iter().map(score).fold(RougeScore::default(), |best, s| {
        if s.better_than(&best) {
            s
        } else {
            best
        }
    }))
}

/// Clipped n-gram overlap. With several references the one with the
/// highest recall (then f1) is scored.
pub fn rouge_n<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], references: &[Vec<T>], n: usize) -> Result<RougeScore> {
    if n == 0 {
        return Err(Error::InvalidArgument("rouge n must be at least 1".into()));
    }
    let cand = ngram_counts(candidate, n);
    let cand_total = candidate.len().saturating_sub(n - 1);
    best_of(references, |reference| {
        if reference.len() < n {
            return RougeScore::default();
        }
        let hits = ngram_counts(reference, n)
            .iter()
            .map(|(g, &c)| c.min(cand.get(g).copied().unwrap_or(0)))
            .sum();
        RougeScore::from_counts(hits, reference.len() + 1 - n, cand_total)
    })
}

pub fn lcs_length<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Longest-common-subsequence recall and precision.
pub fn rouge_l<S: AsRef<str>, T: AsRef<str>>(candidate: &[S], references: &[Vec<T>]) -> Result<RougeScore> {
    best_of(references, |reference| {
        RougeScore::from_counts(lcs_length(candidate, reference), reference.len(), candidate.len())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn worked_examples() {
        let r = rouge_n(&t("a b c"), &[t("a x c")], 1).unwrap();
        assert!((r.recall - 2.0 / 3.0).abs() < 1e-12);
        let r = rouge_l(&t("a b c d"), &[t("a c d")]).unwrap();
        assert_eq!((r.recall, r.precision), (1.0, 0.75));
        assert_eq!(lcs_length(&t("a b c"), &t("c b a")), 1);
        assert_eq!(rouge_n(&t("a b"), &[t("c d")], 1).unwrap(), RougeScore::default());
        assert_eq!(rouge_l(&Vec::<&str>::new(), &[t("a")]).unwrap(), RougeScore::default());
    }

    #[test]
    fn short_reference_scores_zero_and_max_is_taken() {
        let r = rouge_n(&t("a b"), &[t("a")], 2).unwrap();
        assert_eq!(r, RougeScore::default());
        let r = rouge_n(&t("a b"), &[t("a"), t("a b")], 2).unwrap();
        assert_eq!(r.recall, 1.0);
        assert!(rouge_n(&t("a"), &Vec::<Vec<&str>>::new(), 1).is_err());
        assert!(rouge_n(&t("a"), &[t("a")], 0).is_err());
    }

    #[test]
    fn clipping_limits_repeated_ngrams() {
        let r = rouge_n(&t("the the the"), &[t("the cat")], 1).unwrap();
        assert_eq!((r.recall, r.precision), (0.5, 1.0 / 3.0));
    }

    /// Contiguous bigram matches need not line up into one subsequence.
    #[test]
    fn bigram_overlap_can_exceed_lcs() {
        let (c, r) = (t("a b c d e f"), t("e f c d a b"));
        let bigram = rouge_n(&c, std::slice::from_ref(&r), 2).unwrap().recall * 5.0;
        assert_eq!(bigram.round() as usize, 3);
        assert_eq!(lcs_length(&c, &r), 2);
    }

    proptest! {
        #[test]
        fn identity_and_range(words in prop::collection::vec(0u8..6, 2..15), other in prop::collection::vec(0u8..6, 0..15)) {
            let c: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
            let o: Vec<String> = other.iter().map(|w| format!("w{w}")).collect();
            for n in [1, 2] {
                let s = rouge_n(&c, std::slice::from_ref(&c), n).unwrap();
                prop_assert_eq!((s.recall, s.precision, s.f1), (1.0, 1.0, 1.0));
                let s = rouge_n(&o, std::slice::from_ref(&c), n).unwrap();
                for v in [s.recall, s.precision, s.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            let s = rouge_l(&o, std::slice::from_ref(&c)).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.recall) && (0.0..=1.0).contains(&s.precision));
        }
    }
}
