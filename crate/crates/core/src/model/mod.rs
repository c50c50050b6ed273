//! The sentence VAE with a learned remaining-length embedding.
//!
//! Encoder: bidirectional LSTM over word embeddings; the per-step states
//! `[fh_i; bh_i]` are averaged and mapped affinely to `mu` and `logvar`.
//! Decoder: stacked LSTM whose input at every step is
//! `[emb(prev word); z; len_emb(l_t)]` (upper layers additionally see the
//! state of the layer below). The first layer's initial cell state is an
//! affine map of `z`. A bag-of-words head predicts the input's words from
//! `z` alone.

mod bow;
mod check;
mod decoder;
mod encoder;
mod latent;
mod length;
mod softmax_loss;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{Grads, LstmCell, ParamId, ParamStore, Tensor, Values};
use crate::textpipe::Batch;

pub use bow::bow_loss;
pub use check::gradient_check;
pub use decoder::DecoderState;
pub use encoder::EncoderOutput;
pub use latent::{kl_divergence, reparameterize, LatentParams};
pub use length::LengthSchedule;
pub use softmax_loss::{full_softmax_loss, sample_negatives, sampled_softmax_loss};

const INIT_SCALE: f64 = 0.08;
const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub vocab_size: usize,
    pub embed_size: usize,
    pub cell_size: usize,
    pub latent_size: usize,
    pub bow_hidden: usize,
    pub length_embed_size: usize,
    pub decoder_layers: usize,
    /// Last row of the length table (remaining lengths 0..=max_length).
    pub max_length: usize,
    /// Negatives per decoding step for the sampled softmax.
    pub sample_count: usize,
    /// When false the length input is a constant zero vector.
    pub use_length_embedding: bool,
}

impl HyperParams {
    /// Desk-scale defaults.
    pub fn desk(vocab_size: usize) -> Self {
        HyperParams {
            vocab_size,
            embed_size: 32,
            cell_size: 32,
            latent_size: 16,
            bow_hidden: 32,
            length_embed_size: 16,
            decoder_layers: 1,
            max_length: 30,
            sample_count: 1000,
            use_length_embedding: true,
        }
    }

    /// Sizes of the original large-scale configuration.
    pub fn full(vocab_size: usize) -> Self {
        HyperParams {
            vocab_size,
            embed_size: 254,
            cell_size: 243,
            latent_size: 124,
            bow_hidden: 236,
            length_embed_size: 50,
            decoder_layers: 2,
            max_length: 30,
            sample_count: 1000,
            use_length_embedding: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("vocab_size", self.vocab_size),
            ("embed_size", self.embed_size),
            ("cell_size", self.cell_size),
            ("latent_size", self.latent_size),
            ("bow_hidden", self.bow_hidden),
            ("length_embed_size", self.length_embed_size),
            ("decoder_layers", self.decoder_layers),
            ("max_length", self.max_length),
            ("sample_count", self.sample_count),
        ];
        for (name, value) in sizes {
            if value == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidArgument("vocab_size must be at least 2".into()));
        }
        Ok(())
    }

    /// Width of the per-step decoder input `[emb; z; len]`.
    pub fn decoder_input_size(&self) -> usize {
        self.embed_size + self.latent_size + self.length_embed_size
    }

    /// Negatives actually drawn per step: at most every non-target word.
    pub fn effective_samples(&self) -> usize {
        self.sample_count.min(self.vocab_size - 1)
    }
}

/// Whether the decoder runs with training-time regularization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Sampled softmax and output-layer dropout with the given keep rate.
    Train { keep_rate: f64 },
    /// Full softmax, no dropout.
    Eval,
}

/// Batch-averaged loss terms. `total = reconstruction + kl_weight * kl + bow`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
    pub bow: f64,
}

impl LossBreakdown {
    /// Name of the first non-finite component, if any.
    pub fn non_finite_component(&self) -> Option<&'static str> {
        [
            ("reconstruction", self.reconstruction),
            ("kl", self.kl),
            ("bow", self.bow),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    embedding: ParamId,
    enc_fwd: LstmCell,
    enc_bwd: LstmCell,
    mu_w: ParamId,
    mu_b: ParamId,
    logvar_w: ParamId,
    logvar_b: ParamId,
    init_w: ParamId,
    init_b: ParamId,
    length_table: Option<ParamId>,
    decoder: Vec<LstmCell>,
    out_w: ParamId,
    out_b: ParamId,
    bow_hidden_w: ParamId,
    bow_hidden_b: ParamId,
    bow_out_w: ParamId,
    bow_out_b: ParamId,
}

#[derive(Clone, Copy)]
enum Init {
    Uniform,
    Zero,
    LstmBias,
}

fn param_specs(hp: &HyperParams) -> Vec<(String, Vec<usize>, Init)> {
    let (v, e, h, z) = (hp.vocab_size, hp.embed_size, hp.cell_size, hp.latent_size);
    let mut specs = vec![
        ("embedding".to_string(), vec![v, e], Init::Uniform),
        ("encoder.fwd.weight".into(), vec![4 * h, e + h], Init::Uniform),
        ("encoder.fwd.bias".into(), vec![4 * h], Init::LstmBias),
        ("encoder.bwd.weight".into(), vec![4 * h, e + h], Init::Uniform),
        ("encoder.bwd.bias".into(), vec![4 * h], Init::LstmBias),
        ("latent.mu.weight".into(), vec![z, 2 * h], Init::Uniform),
        ("latent.mu.bias".into(), vec![z], Init::Zero),
        ("latent.logvar.weight".into(), vec![z, 2 * h], Init::Uniform),
        ("latent.logvar.bias".into(), vec![z], Init::Zero),
        ("decoder.init.weight".into(), vec![h, z], Init::Uniform),
        ("decoder.init.bias".into(), vec![h], Init::Zero),
    ];
    if hp.use_length_embedding {
        specs.push((
            "length.table".into(),
            vec![hp.max_length + 1, hp.length_embed_size],
            Init::Uniform,
        ));
    }
    let x = hp.decoder_input_size();
    for layer in 0..hp.decoder_layers {
        let input = if layer == 0 { x } else { h + x };
        specs.push((format!("decoder.l{layer}.weight"), vec![4 * h, input + h], Init::Uniform));
        specs.push((format!("decoder.l{layer}.bias"), vec![4 * h], Init::LstmBias));
    }
    specs.extend([
        ("output.weight".to_string(), vec![v, h], Init::Uniform),
        ("output.bias".into(), vec![v], Init::Zero),
        ("bow.hidden.weight".into(), vec![hp.bow_hidden, z], Init::Uniform),
        ("bow.hidden.bias".into(), vec![hp.bow_hidden], Init::Zero),
        ("bow.output.weight".into(), vec![v, hp.bow_hidden], Init::Uniform),
        ("bow.output.bias".into(), vec![v], Init::Zero),
    ]);
    specs
}

/// Model structure bound to parameter ids of a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct VaeModel {
    pub hp: HyperParams,
    layout: Layout,
}

impl VaeModel {
    /// Creates the parameters: weights uniform in +-0.08, LSTM forget-gate
    /// biases 1, other biases 0.
    pub fn init(hp: HyperParams, rng: &mut dyn RngCore) -> Result<(Self, ParamStore)> {
        hp.validate()?;
        let mut store = ParamStore::new();
        for (name, shape, init) in param_specs(&hp) {
            let n: usize = shape.iter().product();
            let data = match init {
                Init::Uniform => (0..n).map(|_| rng.random_range(-INIT_SCALE..INIT_SCALE)).collect(),
                Init::Zero => vec![0.0; n],
                Init::LstmBias => {
                    let h = n / 4;
                    (0..n)
                        .map(|k| if (h..2 * h).contains(&k) { FORGET_BIAS } else { 0.0 })
                        .collect()
                }
            };
            store.insert(name, Tensor::new(shape, data)?)?;
        }
        let model = Self::bind(hp, &store)?;
        Ok((model, store))
    }

    /// Binds to an existing store, checking every expected tensor.
    pub fn bind(hp: HyperParams, store: &ParamStore) -> Result<Self> {
        hp.validate()?;
        let specs = param_specs(&hp);
        if specs.len() != store.len() {
            return Err(Error::Incompatible(format!(
                "expected {} parameter tensors, found {}",
                specs.len(),
                store.len()
            )));
        }
        for (name, shape, _) in &specs {
            let id = store.id(name)?;
            store.value(id).expect_shape(name, shape)?;
        }
        let id = |name: &str| store.id(name);
        let (e, h) = (hp.embed_size, hp.cell_size);
        let cell = |prefix: &str, input_size: usize| -> Result<LstmCell> {
            Ok(LstmCell {
                weight: id(&format!("{prefix}.weight"))?,
                bias: id(&format!("{prefix}.bias"))?,
                input_size,
                hidden_size: h,
            })
        };
        let x = hp.decoder_input_size();
        let decoder = (0..hp.decoder_layers)
            .map(|l| cell(&format!("decoder.l{l}"), if l == 0 { x } else { h + x }))
            .collect::<Result<Vec<_>>>()?;
        let layout = Layout {
            embedding: id("embedding")?,
            enc_fwd: cell("encoder.fwd", e)?,
            enc_bwd: cell("encoder.bwd", e)?,
            mu_w: id("latent.mu.weight")?,
            mu_b: id("latent.mu.bias")?,
            logvar_w: id("latent.logvar.weight")?,
            logvar_b: id("latent.logvar.bias")?,
            init_w: id("decoder.init.weight")?,
            init_b: id("decoder.init.bias")?,
            length_table: if hp.use_length_embedding {
                Some(id("length.table")?)
            } else {
                None
            },
            decoder,
            out_w: id("output.weight")?,
            out_b: id("output.bias")?,
            bow_hidden_w: id("bow.hidden.weight")?,
            bow_hidden_b: id("bow.hidden.bias")?,
            bow_out_w: id("bow.output.weight")?,
            bow_out_b: id("bow.output.bias")?,
        };
        Ok(VaeModel { hp, layout })
    }

    /// Standard-normal noise for every example of a batch.
    pub fn draw_noise(&self, batch_len: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
        (0..batch_len)
            .map(|_| {
                (0..self.hp.latent_size)
                    .map(|_| rng.sample(StandardNormal))
                    .collect()
            })
            .collect()
    }

    /// Batch loss with latent noise drawn from `rng` before anything else.
    pub fn total_loss(
        &self,
        params: &ParamStore,
        batch: &Batch,
        kl_weight: f64,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<LossBreakdown> {
        let noise = self.draw_noise(batch.len(), rng);
        self.batch_loss(params.values(), None, batch, kl_weight, mode, &noise, rng)
    }

    /// Like [`total_loss`](Self::total_loss) but accumulates the gradient of
    /// the batch-mean total into the store's gradient slots.
    pub fn total_loss_and_grad(
        &self,
        params: &mut ParamStore,
        batch: &Batch,
        kl_weight: f64,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<LossBreakdown> {
        let noise = self.draw_noise(batch.len(), rng);
        let (values, mut grads) = params.split_mut();
        self.batch_loss(values, Some(&mut grads), batch, kl_weight, mode, &noise, rng)
    }

    /// Batch loss with explicitly supplied latent noise (one vector per
    /// example). `rng` still drives negative sampling and dropout.
    pub fn total_loss_with_noise(
        &self,
        params: &ParamStore,
        batch: &Batch,
        kl_weight: f64,
        mode: Mode,
        noise: &[Vec<f64>],
        rng: &mut dyn RngCore,
    ) -> Result<LossBreakdown> {
        self.batch_loss(params.values(), None, batch, kl_weight, mode, noise, rng)
    }

    #[allow(clippy::too_many_arguments)]
    fn batch_loss(
        &self,
        values: Values<'_>,
        mut grads: Option<&mut Grads<'_>>,
        batch: &Batch,
        kl_weight: f64,
        mode: Mode,
        noise: &[Vec<f64>],
        rng: &mut dyn RngCore,
    ) -> Result<LossBreakdown> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        if noise.len() != batch.len() {
            return Err(Error::InvalidArgument(format!(
                "{} noise vectors for {} examples",
                noise.len(),
                batch.len()
            )));
        }
        if let Mode::Train { keep_rate } = mode {
            if !(keep_rate > 0.0 && keep_rate <= 1.0) {
                return Err(Error::InvalidArgument(format!("keep rate {keep_rate} not in (0, 1]")));
            }
        }
        let scale = 1.0 / batch.len() as f64;
        let mut sum = LossBreakdown::default();
        for i in 0..batch.len() {
            let n = batch.lengths[i];
            let example = Example {
                tokens: batch.sentence(i),
                decoder_inputs: &batch.decoder_inputs[i][..=n],
                targets: &batch.decoder_targets[i][..=n],
                bow: &batch.bows[i],
                eps: &noise[i],
                initial_length: n,
            };
            let terms = self.example_loss(values, grads.as_deref_mut(), &example, kl_weight, mode, scale, rng)?;
            sum.reconstruction += terms.reconstruction;
            sum.kl += terms.kl;
            sum.bow += terms.bow;
        }
        sum.reconstruction *= scale;
        sum.kl *= scale;
        sum.bow *= scale;
        sum.total = sum.reconstruction + kl_weight * sum.kl + sum.bow;
        Ok(sum)
    }

    /// Forward (and optionally backward) pass over one sentence. Gradients
    /// are those of `scale * (recon + kl_weight * kl + bow)`.
    #[allow(clippy::too_many_arguments)]
    fn example_loss(
        &self,
        values: Values<'_>,
        grads: Option<&mut Grads<'_>>,
        ex: &Example<'_>,
        kl_weight: f64,
        mode: Mode,
        scale: f64,
        rng: &mut dyn RngCore,
    ) -> Result<LossBreakdown> {
        let (mut latent, enc_cache) = self.encode_forward(values, ex.tokens)?;
        latent.z = reparameterize(&latent.mu, &latent.logvar, ex.eps);
        let kl = kl_divergence(&latent.mu, &latent.logvar);
        let bow_cache = self.bow_forward(values, &latent.z, ex.bow);
        let dec = self.decoder_forward(values, &latent.z, ex.decoder_inputs, ex.targets, ex.initial_length, mode, rng)?;

        let terms = LossBreakdown {
            total: dec.loss + kl_weight * kl + bow_cache.loss,
            reconstruction: dec.loss,
            kl,
            bow: bow_cache.loss,
        };
        let Some(grads) = grads else {
            return Ok(terms);
        };

        let z_dim = self.hp.latent_size;
        let mut dz = vec![0.0; z_dim];
        self.decoder_backward(values, grads, &latent.z, ex.decoder_inputs, &dec, scale, &mut dz);
        self.bow_backward(values, grads, &latent.z, &bow_cache, scale, &mut dz);

        let mut dmu = dz.clone();
        let mut dlogvar: Vec<f64> = (0..z_dim)
            .map(|d| dz[d] * ex.eps[d] * 0.5 * (0.5 * latent.logvar[d]).exp())
            .collect();
        latent::kl_backward(&latent.mu, &latent.logvar, scale * kl_weight, &mut dmu, &mut dlogvar);
        self.encode_backward(values, grads, ex.tokens, &enc_cache, &dmu, &dlogvar);
        Ok(terms)
    }

    /// Row of the length table for the schedule's current step, or the
    /// constant zero vector when length embeddings are disabled.
    pub fn length_embed(&self, params: &ParamStore, schedule: &LengthSchedule) -> Vec<f64> {
        self.length_input(params.values(), schedule.index()).to_vec()
    }

    fn length_input<'a>(&self, values: Values<'a>, index: usize) -> std::borrow::Cow<'a, [f64]> {
        match self.layout.length_table {
            Some(table) => std::borrow::Cow::Borrowed(values.get(table).row(index.min(self.hp.max_length))),
            None => std::borrow::Cow::Owned(vec![0.0; self.hp.length_embed_size]),
        }
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }
}

struct Example<'a> {
    tokens: &'a [u32],
    decoder_inputs: &'a [u32],
    targets: &'a [u32],
    bow: &'a crate::textpipe::BagOfWords,
    eps: &'a [f64],
    initial_length: usize,
}


/// Batch loss as a [`Differentiable`](crate::numerics::Differentiable)
/// function of the parameters. Every evaluation re-seeds its random stream,
/// so noise, dropout masks and negative samples are frozen.
pub struct BatchObjective<'a> {
    pub model: &'a VaeModel,
    pub batch: &'a Batch,
    pub kl_weight: f64,
    pub mode: Mode,
    pub seed: u64,
}

impl crate::numerics::Differentiable for BatchObjective<'_> {
    fn loss(&mut self, params: &ParamStore) -> Result<f64> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(self.seed);
        Ok(self
            .model
            .total_loss(params, self.batch, self.kl_weight, self.mode, &mut rng)?
            .total)
    }

    fn loss_and_grad(&mut self, params: &mut ParamStore) -> Result<f64> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(self.seed);
        params.zero_grads();
        Ok(self
            .model
            .total_loss_and_grad(params, self.batch, self.kl_weight, self.mode, &mut rng)?
            .total)
    }
}
