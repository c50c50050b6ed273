use crate::error::{Error, Result};
use crate::model::{LatentParams, VaeModel};
use crate::numerics::ops::{add_assign, matvec_acc, matvec_t_acc, outer_acc};
use crate::numerics::{Grads, LstmCache, ParamStore, Values};
use crate::textpipe::Batch;

/// Bidirectional encoder states for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// `[fh_i; bh_i]` for every position.
    pub states: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

pub(crate) struct EncoderCache {
    fwd: Vec<LstmCache>,
    /// Backward-direction caches in processing order (last token first).
    bwd: Vec<LstmCache>,
    mean: Vec<f64>,
}

impl VaeModel {
    /// Runs both directions and averages the concatenated states.
    pub fn encoder_states(&self, params: &ParamStore, tokens: &[u32]) -> Result<EncoderOutput> {
        let cache = self.run_encoder(params.values(), tokens)?;
        let n = tokens.len();
        let states = (0..n)
            .map(|i| {
                let mut s = cache.fwd[i].h.clone();
                s.extend_from_slice(&cache.bwd[n - 1 - i].h);
                s
            })
            .collect();
        Ok(EncoderOutput {
            states,
            mean: cache.mean,
        })
    }

    /// `mu` and `logvar` for every sentence of the batch; `z` is set to `mu`.
    pub fn encode(&self, params: &ParamStore, batch: &Batch) -> Result<Vec<LatentParams>> {
        (0..batch.len())
            .map(|i| self.encode_sentence(params, batch.sentence(i)))
            .collect()
    }

    pub fn encode_sentence(&self, params: &ParamStore, tokens: &[u32]) -> Result<LatentParams> {
        Ok(self.encode_forward(params.values(), tokens)?.0)
    }

    fn run_encoder(&self, values: Values<'_>, tokens: &[u32]) -> Result<EncoderCache> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("sentence to encode"));
        }
        let v = self.hp.vocab_size as u32;
        if let Some(&bad) = tokens.iter().find(|&&t| t >= v) {
            return Err(Error::InvalidArgument(format!("token id {bad} outside vocabulary of {v}")));
        }
        let h = self.hp.cell_size;
        let lay = self.layout();
        let emb = values.get(lay.embedding);
        let zeros = vec![0.0; h];

        let mut fwd: Vec<LstmCache> = Vec::with_capacity(tokens.len());
        for &t in tokens {
            let (hp, cp) = fwd.last().map_or((&zeros, &zeros), |c| (&c.h, &c.c));
            let step = lay.enc_fwd.forward(values, emb.row(t as usize), hp, cp);
            fwd.push(step);
        }
        let mut bwd: Vec<LstmCache> = Vec::with_capacity(tokens.len());
        for &t in tokens.iter().rev() {
            let (hp, cp) = bwd.last().map_or((&zeros, &zeros), |c| (&c.h, &c.c));
            let step = lay.enc_bwd.forward(values, emb.row(t as usize), hp, cp);
            bwd.push(step);
        }
        let n = tokens.len() as f64;
        let mut mean = vec![0.0; 2 * h];
        for (f, b) in fwd.iter().zip(&bwd) {
            add_assign(&mut mean[..h], &f.h);
            add_assign(&mut mean[h..], &b.h);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(EncoderCache { fwd, bwd, mean })
    }

    pub(crate) fn encode_forward(&self, values: Values<'_>, tokens: &[u32]) -> Result<(LatentParams, EncoderCache)> {
        let cache = self.run_encoder(values, tokens)?;
        let lay = self.layout();
        let (z, h2) = (self.hp.latent_size, 2 * self.hp.cell_size);
        let mut mu = values.data(lay.mu_b).to_vec();
        matvec_acc(values.data(lay.mu_w), z, h2, &cache.mean, &mut mu);
        let mut logvar = values.data(lay.logvar_b).to_vec();
        matvec_acc(values.data(lay.logvar_w), z, h2, &cache.mean, &mut logvar);
        let latent = LatentParams {
            z: mu.clone(),
            mu,
            logvar,
        };
        Ok((latent, cache))
    }

    pub(crate) fn encode_backward(
        &self,
        values: Values<'_>,
        grads: &mut Grads<'_>,
        tokens: &[u32],
        cache: &EncoderCache,
        dmu: &[f64],
        dlogvar: &[f64],
    ) {
        let lay = self.layout();
        let (z, h) = (self.hp.latent_size, self.hp.cell_size);
        outer_acc(grads.data_mut(lay.mu_w), z, 2 * h, dmu, &cache.mean);
        add_assign(grads.data_mut(lay.mu_b), dmu);
        outer_acc(grads.data_mut(lay.logvar_w), z, 2 * h, dlogvar, &cache.mean);
        add_assign(grads.data_mut(lay.logvar_b), dlogvar);
        let mut dmean = vec![0.0; 2 * h];
        matvec_t_acc(values.data(lay.mu_w), z, 2 * h, dmu, &mut dmean);
        matvec_t_acc(values.data(lay.logvar_w), z, 2 * h, dlogvar, &mut dmean);

        let n = tokens.len();
        let inv_n = 1.0 / n as f64;
        let dstate_f: Vec<f64> = dmean[..h].iter().map(|d| d * inv_n).collect();
        let dstate_b: Vec<f64> = dmean[h..].iter().map(|d| d * inv_n).collect();
        let e = self.hp.embed_size;

        for (cell, caches, dstate, reversed) in [
            (&lay.enc_fwd, &cache.fwd, &dstate_f, false),
            (&lay.enc_bwd, &cache.bwd, &dstate_b, true),
        ] {
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            for j in (0..n).rev() {
                let mut dh = dstate.clone();
                add_assign(&mut dh, &dh_next);
                let (dx, dh_prev, dc_prev) = cell.backward(values, grads, &caches[j], &dh, &dc_next);
                let token = if reversed { tokens[n - 1 - j] } else { tokens[j] } as usize;
                add_assign(&mut grads.data_mut(lay.embedding)[token * e..(token + 1) * e], &dx);
                dh_next = dh_prev;
                dc_next = dc_prev;
            }
        }
    }
}
