use rand::RngCore;

use crate::error::{Error, Result};
use crate::numerics::ops::{dot, logsumexp};
use crate::numerics::Tensor;

/// `count` distinct negatives drawn uniformly from every id except `target`.
pub fn sample_negatives(vocab_size: usize, target: u32, count: usize, rng: &mut dyn RngCore) -> Result<Vec<u32>> {
    if count < 1 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if count > vocab_size.saturating_sub(1) {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {count} negatives from a vocabulary of {vocab_size}"
        )));
    }
    let picks = rand::seq::index::sample(rng, vocab_size - 1, count);
    Ok(picks
        .into_iter()
        .map(|i| {
            let i = i as u32;
            if i >= target {
                i + 1
            } else {
                i
            }
        })
        .collect())
}

/// Log of the inverse inclusion probability of a negative when `count` of
/// the `vocab_size - 1` non-targets are drawn. Adding it to every negative
/// logit makes the restricted partition sum an unbiased estimate of the
/// full one; it is zero when every non-target is drawn.
pub(crate) fn negative_logit_offset(vocab_size: usize, count: usize) -> f64 {
    ((vocab_size - 1) as f64 / count as f64).ln()
}

/// Cross-entropy of `candidates[0]` against the softmax restricted to
/// `candidates`, with `negative_offset` added to every negative's logit.
/// Returns the loss and the restricted probabilities.
pub(crate) fn candidate_cross_entropy(
    weight: &[f64],
    bias: &[f64],
    hidden: &[f64],
    candidates: &[u32],
    negative_offset: f64,
) -> (f64, Vec<f64>) {
    let h = hidden.len();
    let logits: Vec<f64> = candidates
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let c = c as usize;
            let offset = if k == 0 { 0.0 } else { negative_offset };
            dot(&weight[c * h..(c + 1) * h], hidden) + bias[c] + offset
        })
        .collect();
    let lse = logsumexp(&logits);
    let probs = logits.iter().map(|l| (l - lse).exp()).collect();
    (lse - logits[0], probs)
}

fn check_output_layer(weight: &Tensor, bias: &Tensor, hidden: &[f64], target: u32) -> Result<usize> {
    if weight.rank() != 2 {
        return Err(Error::shape("output weight", &[0, hidden.len()], weight.shape()));
    }
    let v = weight.shape()[0];
    weight.expect_shape("output weight", &[v, hidden.len()])?;
    bias.expect_shape("output bias", &[v])?;
    if target as usize >= v {
        return Err(Error::InvalidArgument(format!("target {target} outside vocabulary of {v}")));
    }
    Ok(v)
}

/// Softmax cross-entropy estimated over the target and `sample_count`
/// negatives drawn uniformly without replacement.
pub fn sampled_softmax_loss(
    output_weight: &Tensor,
    output_bias: &Tensor,
    hidden: &[f64],
    target: u32,
    sample_count: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let v = check_output_layer(output_weight, output_bias, hidden, target)?;
    let mut candidates = vec![target];
    candidates.extend(sample_negatives(v, target, sample_count, rng)?);
    let offset = negative_logit_offset(v, sample_count);
    Ok(candidate_cross_entropy(output_weight.data(), output_bias.data(), hidden, &candidates, offset).0)
}

/// Exact softmax cross-entropy over the whole vocabulary.
pub fn full_softmax_loss(output_weight: &Tensor, output_bias: &Tensor, hidden: &[f64], target: u32) -> Result<f64> {
    let v = check_output_layer(output_weight, output_bias, hidden, target)?;
    let mut candidates = vec![target];
    candidates.extend((0..v as u32).filter(|&c| c != target));
    Ok(candidate_cross_entropy(output_weight.data(), output_bias.data(), hidden, &candidates, 0.0).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_layer(rng: &mut ChaCha8Rng, v: usize, h: usize) -> (Tensor, Tensor, Vec<f64>) {
        let w = Tensor::new(vec![v, h], (0..v * h).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let b = Tensor::from_vec((0..v).map(|_| rng.random_range(-0.5..0.5)).collect());
        let x = (0..h).map(|_| rng.random_range(-1.0..1.0)).collect();
        (w, b, x)
    }

    #[test]
    fn exhaustive_sampling_equals_full_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (w, b, x) = random_layer(&mut rng, 9, 4);
        for target in 0..9 {
            let full = full_softmax_loss(&w, &b, &x, target).unwrap();
            let sampled = sampled_softmax_loss(&w, &b, &x, target, 8, &mut rng).unwrap();
            assert!((full - sampled).abs() < 1e-6);
            // Direct -log softmax oracle.
            let logits: Vec<f64> = (0..9).map(|r| dot(w.row(r), &x) + b.data()[r]).collect();
            let denom: f64 = logits.iter().map(|l| l.exp()).sum();
            let direct = -(logits[target as usize].exp() / denom).ln();
            assert!((full - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn two_way_cross_entropy_by_hand() {
        // V = 3, hidden = [1], logits = [2, -1, 5]; target 0 with sample {1}.
        let w = Tensor::new(vec![3, 1], vec![2.0, -1.0, 5.0]).unwrap();
        let b = Tensor::zeros(&[3]);
        let (loss, _) = candidate_cross_entropy(w.data(), b.data(), &[1.0], &[0, 1], 0.0);
        // -log(e^2 / (e^2 + e^-1)) = log(1 + e^-3)
        assert!((loss - (1.0 + (-3.0f64).exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn negatives_exclude_target_and_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let mut s = sample_negatives(20, 7, 10, &mut rng).unwrap();
            assert!(!s.contains(&7));
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 10);
            assert!(s.iter().all(|&i| i < 20));
        }
        assert!(sample_negatives(20, 7, 0, &mut rng).is_err());
        assert!(sample_negatives(20, 7, 20, &mut rng).is_err());
    }

    #[test]
    fn sampled_estimate_tracks_full_loss() {
        // Mean over resamplings stays within 5% of the exact loss on a
        // random 20-word vocabulary.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (w, b, x) = random_layer(&mut rng, 20, 6);
        let target = 3;
        let full = full_softmax_loss(&w, &b, &x, target).unwrap();
        let draws = 20_000;
        let mean: f64 = (0..draws)
            .map(|_| sampled_softmax_loss(&w, &b, &x, target, 8, &mut rng).unwrap())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - full).abs() / full < 0.05, "mean {mean} full {full}");
    }
}
