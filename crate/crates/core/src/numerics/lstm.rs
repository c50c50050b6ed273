//! LSTM cell with a fused gate matrix.
//!
//! The weight matrix has shape `(4H, I + H)` and multiplies the concatenated
//! `[x; h_prev]`. Gate blocks are stacked as input, forget, candidate, output.

use crate::error::{Error, Result};
use crate::numerics::ops::{matvec_acc, matvec_t_acc, outer_acc, sigmoid};
use crate::numerics::{Grads, ParamId, Tensor, Values};

#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_size: usize,
    pub hidden_size: usize,
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    /// `[x; h_prev]`
    xh: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmCell {
    pub fn forward(&self, values: Values<'_>, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmCache {
        let hs = self.hidden_size;
        let cols = self.input_size + hs;
        let mut xh = Vec::with_capacity(cols);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h_prev);
        let mut gates = values.data(self.bias).to_vec();
        matvec_acc(values.data(self.weight), 4 * hs, cols, &xh, &mut gates);
        let (ifg, o) = gates.split_at_mut(3 * hs);
        let (i_f, g) = ifg.split_at_mut(2 * hs);
        i_f.iter_mut().for_each(|v| *v = sigmoid(*v));
        g.iter_mut().for_each(|v| *v = v.tanh());
        o.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut c = vec![0.0; hs];
        let mut tanh_c = vec![0.0; hs];
        let mut h = vec![0.0; hs];
        for k in 0..hs {
            let (ig, fg, gg, og) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
            c[k] = fg * c_prev[k] + ig * gg;
            tanh_c[k] = c[k].tanh();
            h[k] = og * tanh_c[k];
        }
        LstmCache {
            xh,
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
            h,
            c,
        }
    }

    /// Backpropagates `dh`, `dc` (gradients w.r.t. this step's outputs)
    /// and returns `(dx, dh_prev, dc_prev)`. Weight gradients accumulate.
    pub fn backward(
        &self,
        values: Values<'_>,
        grads: &mut Grads<'_>,
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden_size;
        let cols = self.input_size + hs;
        let gates = &cache.gates;
        let mut da = vec![0.0; 4 * hs];
        let mut dc_prev = vec![0.0; hs];
        for k in 0..hs {
            let (ig, fg, gg, og) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
            let tc = cache.tanh_c[k];
            let d_o = dh[k] * tc;
            let dct = dc[k] + dh[k] * og * (1.0 - tc * tc);
            let di = dct * gg;
            let df = dct * cache.c_prev[k];
            let dg = dct * ig;
            dc_prev[k] = dct * fg;
            da[k] = di * ig * (1.0 - ig);
            da[hs + k] = df * fg * (1.0 - fg);
            da[2 * hs + k] = dg * (1.0 - gg * gg);
            da[3 * hs + k] = d_o * og * (1.0 - og);
        }
        outer_acc(grads.data_mut(self.weight), 4 * hs, cols, &da, &cache.xh);
        crate::numerics::ops::add_assign(grads.data_mut(self.bias), &da);
        let mut dxh = vec![0.0; cols];
        matvec_t_acc(values.data(self.weight), 4 * hs, cols, &da, &mut dxh);
        let dh_prev = dxh.split_off(self.input_size);
        (dxh, dh_prev, dc_prev)
    }
}

/// Single LSTM step on standalone tensors, with shape validation.
pub fn lstm_cell_forward(
    input: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
) -> Result<(Tensor, Tensor)> {
    if h_prev.rank() != 1 {
        return Err(Error::shape("h_prev", &[h_prev.len()], h_prev.shape()));
    }
    let hs = h_prev.len();
    if input.rank() != 1 {
        return Err(Error::shape("input", &[input.len()], input.shape()));
    }
    let is = input.len();
    c_prev.expect_shape("c_prev", &[hs])?;
    weight.expect_shape("weight", &[4 * hs, is + hs])?;
    bias.expect_shape("bias", &[4 * hs])?;

    let mut store = crate::numerics::ParamStore::new();
    let w = store.insert("weight", weight.clone())?;
    let b = store.insert("bias", bias.clone())?;
    let cell = LstmCell {
        weight: w,
        bias: b,
        input_size: is,
        hidden_size: hs,
    };
    let cache = cell.forward(store.values(), input.data(), h_prev.data(), c_prev.data());
    Ok((Tensor::from_vec(cache.h), Tensor::from_vec(cache.c)))
}
