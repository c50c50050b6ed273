use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::model::softmax_loss::{candidate_cross_entropy, negative_logit_offset, sample_negatives};
use crate::model::{LengthSchedule, Mode, VaeModel};
use crate::numerics::ops::{add_assign, matvec_acc, matvec_t_acc, outer_acc};
use crate::numerics::{Grads, LstmCache, ParamStore, Values};

/// Hidden and cell state of every decoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

struct StepCache {
    layers: Vec<LstmCache>,
    length_index: usize,
    /// Top hidden state after dropout.
    output_input: Vec<f64>,
    /// Inverted-dropout multipliers (0 or 1/keep), absent without dropout.
    mask: Option<Vec<f64>>,
    candidates: Vec<u32>,
    probs: Vec<f64>,
}

pub(crate) struct DecoderCache {
    steps: Vec<StepCache>,
    pub loss: f64,
}

impl VaeModel {
    /// Layer-1 cell state from an affine map of `z`; all else zero.
    pub fn initial_decoder_state(&self, params: &ParamStore, z: &[f64]) -> DecoderState {
        self.init_state(params.values(), z)
    }

    fn init_state(&self, values: Values<'_>, z: &[f64]) -> DecoderState {
        let (h, zd, layers) = (self.hp.cell_size, self.hp.latent_size, self.hp.decoder_layers);
        let lay = self.layout();
        let mut c0 = values.data(lay.init_b).to_vec();
        matvec_acc(values.data(lay.init_w), h, zd, z, &mut c0);
        let mut c = vec![vec![0.0; h]; layers];
        c[0] = c0;
        DecoderState {
            h: vec![vec![0.0; h]; layers],
            c,
        }
    }

    /// `[emb(token); z; len_emb(index)]`
    fn step_input(&self, values: Values<'_>, z: &[f64], token: u32, length_index: usize) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.hp.decoder_input_size());
        x.extend_from_slice(values.get(self.layout().embedding).row(token as usize));
        x.extend_from_slice(z);
        x.extend_from_slice(&self.length_input(values, length_index));
        x
    }

    fn run_layers(&self, values: Values<'_>, x: &[f64], state: &DecoderState) -> Vec<LstmCache> {
        let lay = self.layout();
        let mut caches: Vec<LstmCache> = Vec::with_capacity(lay.decoder.len());
        for (k, cell) in lay.decoder.iter().enumerate() {
            let input = match caches.last() {
                None => x.to_vec(),
                Some(below) => {
                    let mut v = below.h.clone();
                    v.extend_from_slice(x);
                    v
                }
            };
            caches.push(cell.forward(values, &input, &state.h[k], &state.c[k]));
        }
        caches
    }

    fn output_logits(&self, values: Values<'_>, top: &[f64]) -> Vec<f64> {
        let lay = self.layout();
        let mut logits = values.data(lay.out_b).to_vec();
        matvec_acc(values.data(lay.out_w), self.hp.vocab_size, self.hp.cell_size, top, &mut logits);
        logits
    }

    /// One decoder step from explicit input vectors. In training mode the
    /// top hidden state passes through inverted dropout drawn from `rng`.
    #[allow(clippy::too_many_arguments)]
    pub fn decode_step(
        &self,
        params: &ParamStore,
        z: &[f64],
        prev_embedding: &[f64],
        length_embedding: &[f64],
        state: &DecoderState,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, DecoderState)> {
        let hp = &self.hp;
        for (name, got, want) in [
            ("z", z.len(), hp.latent_size),
            ("prev_embedding", prev_embedding.len(), hp.embed_size),
            ("length_embedding", length_embedding.len(), hp.length_embed_size),
        ] {
            if got != want {
                return Err(Error::shape(name, &[want], &[got]));
            }
        }
        if state.h.len() != hp.decoder_layers
            || state.c.len() != hp.decoder_layers
            || state.h.iter().chain(&state.c).any(|v| v.len() != hp.cell_size)
        {
            return Err(Error::shape(
                "recurrent_state",
                &[hp.decoder_layers, hp.cell_size],
                &[state.h.len(), state.h.first().map_or(0, Vec::len)],
            ));
        }
        let mut x = prev_embedding.to_vec();
        x.extend_from_slice(z);
        x.extend_from_slice(length_embedding);
        let values = params.values();
        let caches = self.run_layers(values, &x, state);
        let mut top = caches.last().expect("at least one layer").h.clone();
        if let Some(mask) = dropout_mask(mode, top.len(), rng) {
            top.iter_mut().zip(&mask).for_each(|(t, m)| *t *= m);
        }
        let logits = self.output_logits(values, &top);
        Ok((logits, state_from(&caches)))
    }

    /// Inference step by token id and length-table row.
    pub fn step_logits(
        &self,
        params: &ParamStore,
        z: &[f64],
        prev_token: u32,
        length_index: usize,
        state: &DecoderState,
    ) -> (Vec<f64>, DecoderState) {
        let values = params.values();
        let x = self.step_input(values, z, prev_token, length_index);
        let caches = self.run_layers(values, &x, state);
        let logits = self.output_logits(values, &caches.last().expect("at least one layer").h);
        (logits, state_from(&caches))
    }

    /// Teacher-forced pass; `inputs[t]` is fed to predict `targets[t]`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn decoder_forward(
        &self,
        values: Values<'_>,
        z: &[f64],
        inputs: &[u32],
        targets: &[u32],
        initial_length: usize,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<DecoderCache> {
        let v = self.hp.vocab_size;
        if let Some(&bad) = inputs.iter().chain(targets).find(|&&t| t as usize >= v) {
            return Err(Error::InvalidArgument(format!("token id {bad} outside vocabulary of {v}")));
        }
        let lay = self.layout();
        let mut state = self.init_state(values, z);
        let mut schedule = LengthSchedule::new(initial_length, self.hp.max_length);
        let mut steps = Vec::with_capacity(inputs.len());
        let mut loss = 0.0;
        for (&input, &target) in inputs.iter().zip(targets) {
            let length_index = schedule.next().expect("schedule is unbounded");
            let x = self.step_input(values, z, input, length_index);
            let layers = self.run_layers(values, &x, &state);
            let mut output_input = layers.last().expect("at least one layer").h.clone();
            let mask = dropout_mask(mode, output_input.len(), rng);
            if let Some(mask) = &mask {
                output_input.iter_mut().zip(mask).for_each(|(t, m)| *t *= m);
            }
            let (candidates, offset) = match mode {
                Mode::Train { .. } => {
                    let k = self.hp.effective_samples();
                    let mut c = vec![target];
                    c.extend(sample_negatives(v, target, k, rng)?);
                    (c, negative_logit_offset(v, k))
                }
                Mode::Eval => {
                    let mut c = vec![target];
                    c.extend((0..v as u32).filter(|&w| w != target));
                    (c, 0.0)
                }
            };
            let (step_loss, probs) = candidate_cross_entropy(
                values.data(lay.out_w),
                values.data(lay.out_b),
                &output_input,
                &candidates,
                offset,
            );
            loss += step_loss;
            state = state_from(&layers);
            steps.push(StepCache {
                layers,
                length_index,
                output_input,
                mask,
                candidates,
                probs,
            });
        }
        Ok(DecoderCache { steps, loss })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn decoder_backward(
        &self,
        values: Values<'_>,
        grads: &mut Grads<'_>,
        z: &[f64],
        inputs: &[u32],
        cache: &DecoderCache,
        scale: f64,
        dz: &mut [f64],
    ) {
        let lay = self.layout();
        let (h, e, zd) = (self.hp.cell_size, self.hp.embed_size, self.hp.latent_size);
        let layers = lay.decoder.len();
        let mut dh_carry = vec![vec![0.0; h]; layers];
        let mut dc_carry = vec![vec![0.0; h]; layers];

        for (t, step) in cache.steps.iter().enumerate().rev() {
            // Output layer.
            let mut dtop = vec![0.0; h];
            {
                let dw = grads.data_mut(lay.out_w);
                for (k, (&c, &p)) in step.candidates.iter().zip(&step.probs).enumerate() {
                    let dlogit = scale * (p - if k == 0 { 1.0 } else { 0.0 });
                    let c = c as usize;
                    crate::numerics::ops::axpy(dlogit, &step.output_input, &mut dw[c * h..(c + 1) * h]);
                    crate::numerics::ops::axpy(dlogit, &values.data(lay.out_w)[c * h..(c + 1) * h], &mut dtop);
                }
            }
            {
                let db = grads.data_mut(lay.out_b);
                for (k, (&c, &p)) in step.candidates.iter().zip(&step.probs).enumerate() {
                    db[c as usize] += scale * (p - if k == 0 { 1.0 } else { 0.0 });
                }
            }
            if let Some(mask) = &step.mask {
                dtop.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
            }

            let mut dx = vec![0.0; self.hp.decoder_input_size()];
            let mut dh_from_above = dtop;
            for k in (0..layers).rev() {
                let mut dh = std::mem::take(&mut dh_carry[k]);
                add_assign(&mut dh, &dh_from_above);
                let (dinput, dh_prev, dc_prev) =
                    lay.decoder[k].backward(values, grads, &step.layers[k], &dh, &dc_carry[k]);
                dh_carry[k] = dh_prev;
                dc_carry[k] = dc_prev;
                if k == 0 {
                    add_assign(&mut dx, &dinput);
                    dh_from_above = Vec::new();
                } else {
                    add_assign(&mut dx, &dinput[h..]);
                    dh_from_above = dinput[..h].to_vec();
                }
            }
            let token = inputs[t] as usize;
            add_assign(&mut grads.data_mut(lay.embedding)[token * e..(token + 1) * e], &dx[..e]);
            add_assign(dz, &dx[e..e + zd]);
            if let Some(table) = lay.length_table {
                let l = self.hp.length_embed_size;
                let row = step.length_index;
                add_assign(&mut grads.data_mut(table)[row * l..(row + 1) * l], &dx[e + zd..]);
            }
        }
        // Initial cell state of layer 1 came from z.
        let dc0 = &dc_carry[0];
        outer_acc(grads.data_mut(lay.init_w), h, zd, dc0, z);
        add_assign(grads.data_mut(lay.init_b), dc0);
        matvec_t_acc(values.data(lay.init_w), h, zd, dc0, dz);
    }
}

fn state_from(caches: &[LstmCache]) -> DecoderState {
    DecoderState {
        h: caches.iter().map(|c| c.h.clone()).collect(),
        c: caches.iter().map(|c| c.c.clone()).collect(),
    }
}

fn dropout_mask(mode: Mode, len: usize, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
    match mode {
        Mode::Train { keep_rate } if keep_rate < 1.0 => Some(
            (0..len)
                .map(|_| {
                    if rng.random::<f64>() < keep_rate {
                        1.0 / keep_rate
                    } else {
                        0.0
                    }
                })
                .collect(),
        ),
        _ => None,
    }
}
