use rand::{Rng, RngCore};

use crate::textpipe::{BOS, PAD, UNK};

/// Replaces each decoder input other than BOS/PAD by UNK with probability
/// `p`. Targets are a separate sequence and are never touched.
pub fn word_dropout(inputs: &[u32], p: f64, rng: &mut dyn RngCore) -> Vec<u32> {
    inputs
        .iter()
        .map(|&id| {
            if id == BOS || id == PAD || p <= 0.0 {
                id
            } else if p >= 1.0 || rng.random::<f64>() < p {
                UNK
            } else {
                id
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ids = [BOS, 7, 8, 9, PAD];
        assert_eq!(word_dropout(&ids, 0.0, &mut rng), ids);
        assert_eq!(word_dropout(&ids, 1.0, &mut rng), [BOS, UNK, UNK, UNK, PAD]);
    }

    #[test]
    fn replacement_rate_matches_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let ids: Vec<u32> = (0..100_000).map(|i| 5 + (i % 50)).collect();
        let out = word_dropout(&ids, 0.2, &mut rng);
        let rate = out.iter().filter(|&&id| id == UNK).count() as f64 / ids.len() as f64;
        assert!((rate - 0.2).abs() < 0.01, "{rate}");
    }
}
