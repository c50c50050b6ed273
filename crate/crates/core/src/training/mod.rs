//! Training loop with KL annealing and word dropout, per-step metrics and
//! checkpoints.

mod anneal;
mod checkpoint;
mod metrics;
mod word_dropout;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{HyperParams, LossBreakdown, Mode, VaeModel};
use crate::numerics::{AdamConfig, AdamState, ParamStore};
use crate::textpipe::{encode_batches, Batch, TokenizedSentence, Vocabulary};

pub use anneal::{kl_anneal_weight, AnnealKind};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use metrics::{MetricsLog, MetricsRecord};
pub use word_dropout::word_dropout;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub anneal: AnnealKind,
    /// Step at which the KL weight reaches 1.
    pub anneal_horizon: usize,
    /// Probability of replacing a previous-word decoder input with UNK.
    pub word_drop: f64,
    /// Dropout keep rate on the decoder's output layer input.
    pub keep_rate: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Save a checkpoint every this many steps (0 disables).
    pub checkpoint_interval: usize,
    pub use_length_embedding: bool,
    /// Global gradient-norm clipping threshold.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            steps: 30_000,
            anneal: AnnealKind::Linear,
            anneal_horizon: 15_000,
            word_drop: 0.2,
            keep_rate: 0.87,
            adam: AdamConfig {
                learning_rate: 3e-3,
                ..AdamConfig::default()
            },
            seed: 1,
            checkpoint_interval: 0,
            use_length_embedding: true,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.anneal_horizon == 0 || self.anneal_horizon > self.steps.max(1) {
            return bad(format!(
                "anneal_horizon must be in 1..={} (steps), got {}",
                self.steps, self.anneal_horizon
            ));
        }
        if !(0.0..=1.0).contains(&self.word_drop) {
            return bad(format!("word_drop {} not in [0, 1]", self.word_drop));
        }
        if !(self.keep_rate > 0.0 && self.keep_rate <= 1.0) {
            return bad(format!("keep_rate {} not in (0, 1]", self.keep_rate));
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive".into());
        }
        Ok(())
    }
}

pub struct TrainOutput {
    pub model: VaeModel,
    pub params: ParamStore,
    pub metrics: MetricsLog,
    pub checkpoints: Vec<PathBuf>,
}

/// Trains a model from scratch. Deterministic in `(corpus, hp, config)`.
///
/// The length schedule of every training example starts at the example's
/// true word count. `hp.use_length_embedding` is taken from the config and
/// `hp.max_length` is raised to the longest sentence if needed.
pub fn train(
    corpus: &[TokenizedSentence],
    vocab: &Vocabulary,
    mut hp: HyperParams,
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutput> {
    config.validate()?;
    let corpus: Vec<TokenizedSentence> = corpus.iter().filter(|s| s.word_count() > 0).cloned().collect();
    if corpus.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }
    if hp.vocab_size != vocab.len() {
        return Err(Error::Config(format!(
            "vocab_size {} does not match vocabulary of {}",
            hp.vocab_size,
            vocab.len()
        )));
    }
    hp.use_length_embedding = config.use_length_embedding;
    let longest = corpus.iter().map(TokenizedSentence::word_count).max().unwrap_or(0);
    hp.max_length = hp.max_length.max(longest);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (model, mut params) = VaeModel::init(hp, &mut rng)?;
    let mut adam = AdamState::new(&params, config.adam);
    let mut metrics = MetricsLog::default();
    let mut checkpoints = Vec::new();
    let mut epoch: Vec<Batch> = Vec::new();

    for step in 0..config.steps {
        if epoch.is_empty() {
            epoch = encode_batches(&corpus, config.batch_size, &mut rng);
            epoch.reverse();
        }
        let mut batch = epoch.pop().expect("refilled above");
        for row in &mut batch.decoder_inputs {
            *row = word_dropout(row, config.word_drop, &mut rng);
        }
        let kl_weight = kl_anneal_weight(step, config);
        params.zero_grads();
        let loss = model.total_loss_and_grad(
            &mut params,
            &batch,
            kl_weight,
            Mode::Train {
                keep_rate: config.keep_rate,
            },
            &mut rng,
        )?;
        if let Some(component) = loss.non_finite_component() {
            return Err(Error::NonFinite(format!("{component} loss at step {step}")));
        }
        let norm = params.grad_norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite(format!("gradient at step {step}")));
        }
        if norm > config.clip_norm {
            params.scale_grads(config.clip_norm / norm);
        }
        adam.step(&mut params)?;
        metrics.push(MetricsRecord::new(step as u64, kl_weight, &loss))?;

        let done = step + 1;
        if let Some(dir) = checkpoint_dir {
            if config.checkpoint_interval > 0 && done % config.checkpoint_interval == 0 {
                let path = dir.join(format!("checkpoint-{done:06}.lvae"));
                Checkpoint::new(model.hp.clone(), done as u64, vocab.clone(), params.clone()).save(&path)?;
                checkpoints.push(path);
            }
        }
    }
    Ok(TrainOutput {
        model,
        params,
        metrics,
        checkpoints,
    })
}

/// Eval-mode loss (full softmax, no dropout) averaged over `sentences`,
/// with latent noise from a fixed seed.
pub fn evaluate_loss(
    model: &VaeModel,
    params: &ParamStore,
    sentences: &[TokenizedSentence],
    kl_weight: f64,
    seed: u64,
) -> Result<LossBreakdown> {
    let ids: Vec<&[u32]> = sentences
        .iter()
        .filter(|s| s.word_count() > 0)
        .map(|s| s.ids.as_slice())
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptyInput("evaluation sentences"));
    }
    let batch = Batch::from_sentences(&ids);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    model.total_loss(params, &batch, kl_weight, Mode::Eval, &mut rng)
}
