use crate::model::VaeModel;
use crate::numerics::ops::{add_assign, log_softmax, matvec_acc, matvec_t_acc, outer_acc};
use crate::numerics::{Grads, ParamStore, Values};
use crate::textpipe::BagOfWords;

pub(crate) struct BowCache {
    hidden: Vec<f64>,
    log_probs: Vec<f64>,
    bow: BagOfWords,
    pub loss: f64,
}

/// `-sum_w count(w) * log p(w | z)` under the bag-of-words head.
pub fn bow_loss(model: &VaeModel, params: &ParamStore, z: &[f64], bow: &BagOfWords) -> f64 {
    model.bow_forward(params.values(), z, bow).loss
}

impl VaeModel {
    pub(crate) fn bow_forward(&self, values: Values<'_>, z: &[f64], bow: &BagOfWords) -> BowCache {
        let lay = self.layout();
        let (b, v, zd) = (self.hp.bow_hidden, self.hp.vocab_size, self.hp.latent_size);
        let mut hidden = values.data(lay.bow_hidden_b).to_vec();
        matvec_acc(values.data(lay.bow_hidden_w), b, zd, z, &mut hidden);
        hidden.iter_mut().for_each(|x| *x = x.tanh());
        let mut logits = values.data(lay.bow_out_b).to_vec();
        matvec_acc(values.data(lay.bow_out_w), v, b, &hidden, &mut logits);
        let log_probs = log_softmax(&logits).expect("vocabulary is non-empty");
        let loss = -bow
            .counts
            .iter()
            .map(|&(id, n)| f64::from(n) * log_probs[id as usize])
            .sum::<f64>();
        BowCache {
            hidden,
            log_probs,
            bow: bow.clone(),
            loss,
        }
    }

    pub(crate) fn bow_backward(
        &self,
        values: Values<'_>,
        grads: &mut Grads<'_>,
        z: &[f64],
        cache: &BowCache,
        scale: f64,
        dz: &mut [f64],
    ) {
        let total = f64::from(cache.bow.total());
        if total == 0.0 {
            return;
        }
        let lay = self.layout();
        let (b, v, zd) = (self.hp.bow_hidden, self.hp.vocab_size, self.hp.latent_size);
        let mut dlogits: Vec<f64> = cache.log_probs.iter().map(|lp| scale * total * lp.exp()).collect();
        for &(id, n) in &cache.bow.counts {
            dlogits[id as usize] -= scale * f64::from(n);
        }
        outer_acc(grads.data_mut(lay.bow_out_w), v, b, &dlogits, &cache.hidden);
        add_assign(grads.data_mut(lay.bow_out_b), &dlogits);
        let mut dhidden = vec![0.0; b];
        matvec_t_acc(values.data(lay.bow_out_w), v, b, &dlogits, &mut dhidden);
        for (d, h) in dhidden.iter_mut().zip(&cache.hidden) {
            *d *= 1.0 - h * h;
        }
        outer_acc(grads.data_mut(lay.bow_hidden_w), b, zd, &dhidden, z);
        add_assign(grads.data_mut(lay.bow_hidden_b), &dhidden);
        matvec_t_acc(values.data(lay.bow_hidden_w), b, zd, &dhidden, dz);
    }
}
