use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{BatchObjective, HyperParams, Mode, VaeModel};
use crate::numerics::{grad_check, GradCheckReport};
use crate::textpipe::Batch;

/// Weight range for gradient checks; wider than the init range so that
/// gradients sit well above finite-difference noise.
const CHECK_WEIGHT_SCALE: f64 = 0.6;

impl HyperParams {
    /// Tiny sizes for gradient checks: V 7, cell 4, latent 3, two layers.
    pub fn tiny() -> Self {
        HyperParams {
            vocab_size: 7,
            embed_size: 3,
            cell_size: 4,
            latent_size: 3,
            bow_hidden: 5,
            length_embed_size: 2,
            decoder_layers: 2,
            max_length: 6,
            sample_count: 3,
            use_length_embedding: true,
        }
    }
}

/// Central-difference check of the full loss on a fixed three-sentence
/// batch, with weights drawn from `seed` and noise, dropout masks and
/// negatives frozen.
pub fn gradient_check(hp: HyperParams, seed: u64, mode: Mode, eps: f64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (model, mut store) = VaeModel::init(hp, &mut rng)?;
    for id in store.ids().collect::<Vec<_>>() {
        for v in store.value_mut(id).data_mut() {
            *v = rng.random_range(-CHECK_WEIGHT_SCALE..CHECK_WEIGHT_SCALE);
        }
    }
    let v = model.hp.vocab_size as u32;
    let sentences = [vec![5 % v, 6 % v, 5 % v], vec![4 % v, 6 % v], vec![1]];
    let batch = Batch::from_sentences(&sentences);
    let mut objective = BatchObjective {
        model: &model,
        batch: &batch,
        kl_weight: 0.7,
        mode,
        seed: 100 + seed,
    };
    grad_check(&mut objective, &mut store, eps)
}
