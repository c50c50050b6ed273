//! Synthetic templated corpus.
//!
//! A sentence is `NP verb [NP] [prep NP] [adverb]` where every noun phrase is
//! `det adj{0,2} noun`. Nouns and verbs are short words; adjectives and
//! adverbs are long ones, so dropping modifiers shortens the byte length far
//! more than the word count.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_ADJECTIVES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyGrammar {
    pub determiners: Vec<String>,
    pub nouns: Vec<String>,
    pub verbs: Vec<String>,
    pub adjectives: Vec<String>,
    pub adverbs: Vec<String>,
    pub prepositions: Vec<String>,
    pub min_words: usize,
    pub max_words: usize,
}

fn words(list: &str) -> Vec<String> {
    list.split_whitespace().map(str::to_string).collect()
}

impl Default for ToyGrammar {
    fn default() -> Self {
        ToyGrammar {
            determiners: words("the a one this that"),
            nouns: words(
                "cat dog man boy girl fox owl cow pig hen king bird fish duck wolf bear frog goat lion crab",
            ),
            verbs: words("saw met ate hit fed led hid got bit hugs sees finds likes takes helps"),
            adjectives: words(
                "enormous beautiful mysterious magnificent ridiculous courageous delightful \
                 tremendous suspicious remarkable wonderful marvelous ferocious adventurous melancholy",
            ),
            adverbs: words(
                "quickly silently carefully happily patiently gracefully nervously cheerfully \
                 reluctantly furiously",
            ),
            prepositions: words("near with under by at on"),
            min_words: 4,
            max_words: 12,
        }
    }
}

/// Shape of one sentence: adjective counts per noun phrase and which
/// optional constituents are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub subject_adjectives: usize,
    pub object: Option<usize>,
    pub prepositional: Option<usize>,
    pub adverb: bool,
}

impl Template {
    pub fn word_count(&self) -> usize {
        let np = |adj: usize| 2 + adj;
        np(self.subject_adjectives)
            + 1
            + self.object.map_or(0, np)
            + self.prepositional.map_or(0, |a| 1 + np(a))
            + usize::from(self.adverb)
    }
}

impl ToyGrammar {
    /// Every template the productions allow, before the length window.
    pub fn all_templates() -> Vec<Template> {
        let optional_np = || std::iter::once(None).chain((0..=MAX_ADJECTIVES).map(Some));
        let mut out = Vec::new();
        for subject_adjectives in 0..=MAX_ADJECTIVES {
            for object in optional_np() {
                for prepositional in optional_np() {
                    for adverb in [false, true] {
                        out.push(Template {
                            subject_adjectives,
                            object,
                            prepositional,
                            adverb,
                        });
                    }
                }
            }
        }
        out
    }

    /// Templates whose word count lies in `[min_words, max_words]`.
    pub fn templates(&self) -> Vec<Template> {
        Self::all_templates()
            .into_iter()
            .filter(|t| (self.min_words..=self.max_words).contains(&t.word_count()))
            .collect()
    }

    pub fn vocabulary(&self) -> Vec<&str> {
        [
            &self.determiners,
            &self.nouns,
            &self.verbs,
            &self.adjectives,
            &self.adverbs,
            &self.prepositions,
        ]
        .into_iter()
        .flatten()
        .map(String::as_str)
        .collect()
    }

    fn noun_phrase(&self, adjectives: usize, rng: &mut ChaCha8Rng, out: &mut Vec<String>) {
        out.push(self.determiners.choose(rng).unwrap().clone());
        for _ in 0..adjectives {
            out.push(self.adjectives.choose(rng).unwrap().clone());
        }
        out.push(self.nouns.choose(rng).unwrap().clone());
    }

    pub fn realize(&self, template: &Template, rng: &mut ChaCha8Rng) -> Vec<String> {
        let mut out = Vec::with_capacity(template.word_count());
        self.noun_phrase(template.subject_adjectives, rng, &mut out);
        out.push(self.verbs.choose(rng).unwrap().clone());
        if let Some(adj) = template.object {
            self.noun_phrase(adj, rng, &mut out);
        }
        if let Some(adj) = template.prepositional {
            out.push(self.prepositions.choose(rng).unwrap().clone());
            self.noun_phrase(adj, rng, &mut out);
        }
        if template.adverb {
            out.push(self.adverbs.choose(rng).unwrap().clone());
        }
        out
    }
}

/// Deterministic corpus of `size` surface lines. Lengths are drawn uniformly
/// over the reachable word counts, then a template of that length, then the
/// words. The first letter is capitalized.
pub fn generate_toy_corpus(grammar: &ToyGrammar, size: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates = grammar.templates();
    let mut lengths: Vec<usize> = templates.iter().map(Template::word_count).collect();
    lengths.sort_unstable();
    lengths.dedup();
    if lengths.is_empty() {
        return Vec::new();
    }
    (0..size)
        .map(|_| {
            let len = lengths[rng.random_range(0..lengths.len())];
            let pool: Vec<&Template> = templates.iter().filter(|t| t.word_count() == len).collect();
            let template = pool[rng.random_range(0..pool.len())];
            let mut line = grammar.realize(template, &mut rng).join(" ");
            if let Some(first) = line.get(0..1) {
                let upper = first.to_uppercase();
                line.replace_range(0..1, &upper);
            }
            line
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textpipe::normalize;
    use std::collections::BTreeSet;

    #[test]
    fn deterministic_given_seed() {
        let g = ToyGrammar::default();
        assert_eq!(generate_toy_corpus(&g, 10, 5), generate_toy_corpus(&g, 10, 5));
        assert_ne!(generate_toy_corpus(&g, 10, 5), generate_toy_corpus(&g, 10, 6));
        assert!(generate_toy_corpus(&g, 0, 5).is_empty());
    }

    #[test]
    fn covers_every_reachable_length() {
        let g = ToyGrammar::default();
        // Enumerate the productions directly: every combination of
        // adjective counts and optional constituents.
        let mut reachable = BTreeSet::new();
        for subj in 0..=2 {
            for obj in [None, Some(0), Some(1), Some(2)] {
                for pp in [None, Some(0), Some(1), Some(2)] {
                    for adv in [0, 1] {
                        let n = (2 + subj) + 1 + obj.map_or(0, |a| 2 + a) + pp.map_or(0, |a| 3 + a) + adv;
                        if (4..=12).contains(&n) {
                            reachable.insert(n);
                        }
                    }
                }
            }
        }
        assert_eq!(reachable, (4..=12).collect());
        let seen: BTreeSet<usize> = generate_toy_corpus(&g, 5000, 1)
            .iter()
            .map(|l| normalize(l).len())
            .collect();
        assert_eq!(seen, reachable);
    }

    #[test]
    fn tokens_stay_in_grammar_vocabulary() {
        let g = ToyGrammar::default();
        let vocab: BTreeSet<&str> = g.vocabulary().into_iter().collect();
        assert!(vocab.len() <= 100);
        for line in generate_toy_corpus(&g, 500, 9) {
            for token in normalize(&line) {
                assert!(vocab.contains(token.as_str()), "{token}");
            }
        }
    }
}
