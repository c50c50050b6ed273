use rand::seq::SliceRandom;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::textpipe::{normalize, Vocabulary, BOS, EOS, PAD};

/// An integer-encoded sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    pub ids: Vec<u32>,
    pub surface: String,
}

impl TokenizedSentence {
    pub fn new(ids: Vec<u32>, surface: impl Into<String>) -> Result<Self> {
        if ids.contains(&PAD) {
            return Err(Error::InvalidArgument("PAD inside sentence".into()));
        }
        Ok(TokenizedSentence {
            ids,
            surface: surface.into(),
        })
    }

    /// Normalizes and encodes a raw line.
    pub fn from_text(raw: &str, vocab: &Vocabulary) -> Self {
        let tokens = normalize(raw);
        TokenizedSentence {
            ids: vocab.encode(&tokens),
            surface: raw.to_string(),
        }
    }

    pub fn word_count(&self) -> usize {
        self.ids.len()
    }
}

/// Sparse bag-of-words target: sorted `(id, count)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagOfWords {
    pub counts: Vec<(u32, u32)>,
}

impl BagOfWords {
    pub fn from_ids(ids: &[u32]) -> Self {
        let mut sorted: Vec<u32> = ids
            .iter()
            .copied()
            .filter(|&id| id != PAD && id != BOS && id != EOS)
            .collect();
        sorted.sort_unstable();
        let mut counts: Vec<(u32, u32)> = Vec::new();
        for id in sorted {
            match counts.last_mut() {
                Some((last, n)) if *last == id => *n += 1,
                _ => counts.push((id, 1)),
            }
        }
        BagOfWords { counts }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().map(|&(_, n)| n).sum()
    }

    pub fn to_dense(&self, vocab_size: usize) -> Vec<f64> {
        let mut dense = vec![0.0; vocab_size];
        for &(id, n) in &self.counts {
            dense[id as usize] += f64::from(n);
        }
        dense
    }
}

/// Sentences padded to a common width, with decoder inputs/targets and
/// bag-of-words labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Content ids, PAD beyond each true length. Width = longest sentence.
    pub tokens: Vec<Vec<u32>>,
    pub lengths: Vec<usize>,
    /// `BOS x_1 .. x_n`, PAD-padded to width + 1.
    pub decoder_inputs: Vec<Vec<u32>>,
    /// `x_1 .. x_n EOS`, PAD-padded to width + 1.
    pub decoder_targets: Vec<Vec<u32>>,
    pub bows: Vec<BagOfWords>,
}

impl Batch {
    pub fn from_sentences<S: AsRef<[u32]>>(sentences: &[S]) -> Self {
        let width = sentences.iter().map(|s| s.as_ref().len()).max().unwrap_or(0);
        let mut batch = Batch {
            tokens: Vec::with_capacity(sentences.len()),
            lengths: Vec::with_capacity(sentences.len()),
            decoder_inputs: Vec::with_capacity(sentences.len()),
            decoder_targets: Vec::with_capacity(sentences.len()),
            bows: Vec::with_capacity(sentences.len()),
        };
        for s in sentences {
            let ids = s.as_ref();
            let n = ids.len();
            let mut tokens = ids.to_vec();
            tokens.resize(width, PAD);
            let mut inputs = Vec::with_capacity(width + 1);
            inputs.push(BOS);
            inputs.extend_from_slice(ids);
            inputs.resize(width + 1, PAD);
            let mut targets = ids.to_vec();
            targets.push(EOS);
            targets.resize(width + 1, PAD);
            batch.tokens.push(tokens);
            batch.lengths.push(n);
            batch.decoder_inputs.push(inputs);
            batch.decoder_targets.push(targets);
            batch.bows.push(BagOfWords::from_ids(ids));
        }
        batch
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Content ids of example `i` without padding.
    pub fn sentence(&self, i: usize) -> &[u32] {
        &self.tokens[i][..self.lengths[i]]
    }
}

/// Shuffles sentence order with `rng` and cuts it into batches. Every
/// sentence lands in exactly one batch; the last batch may be smaller.
pub fn encode_batches(
    sentences: &[TokenizedSentence],
    batch_size: usize,
    rng: &mut dyn RngCore,
) -> Vec<Batch> {
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size.max(1))
        .map(|chunk| {
            let ids: Vec<&[u32]> = chunk.iter().map(|&i| sentences[i].ids.as_slice()).collect();
            Batch::from_sentences(&ids)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bag_of_words_counts() {
        // V = 7: ids 5 and 6 are the two content words.
        let batch = Batch::from_sentences(&[vec![5u32, 6]]);
        assert_eq!(batch.bows[0].to_dense(7), vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let dup = Batch::from_sentences(&[vec![5u32, 5]]);
        assert_eq!(dup.bows[0].to_dense(7)[5], 2.0);
        assert_eq!(dup.bows[0].total(), 2);
    }

    #[test]
    fn padding_layout() {
        let batch = Batch::from_sentences(&[vec![5u32, 6, 7], vec![8, 9, 10, 11, 12]]);
        assert_eq!(batch.lengths, vec![3, 5]);
        assert_eq!(batch.tokens[0], vec![5, 6, 7, PAD, PAD]);
        assert_eq!(batch.decoder_inputs[0], vec![BOS, 5, 6, 7, PAD, PAD]);
        assert_eq!(batch.decoder_targets[0], vec![5, 6, 7, EOS, PAD, PAD]);
        assert_eq!(batch.decoder_targets[1], vec![8, 9, 10, 11, 12, EOS]);
        assert_eq!(batch.sentence(0), &[5, 6, 7]);
    }

    #[test]
    fn batching_partitions_the_corpus() {
        let sentences: Vec<TokenizedSentence> = (0..23u32)
            .map(|i| TokenizedSentence::new(vec![5 + i], format!("s{i}")).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batches = encode_batches(&sentences, 5, &mut rng);
        assert_eq!(batches.len(), 5);
        let mut seen: Vec<u32> = batches.iter().flat_map(|b| b.tokens.iter().map(|t| t[0])).collect();
        seen.sort_unstable();
        assert_eq!(seen, (5..28).collect::<Vec<_>>());

        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(batches, encode_batches(&sentences, 5, &mut rng2));
    }

    #[test]
    fn pad_inside_sentence_is_rejected() {
        assert!(TokenizedSentence::new(vec![5, PAD], "x").is_err());
    }
}
