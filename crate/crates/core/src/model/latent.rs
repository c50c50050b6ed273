/// Posterior parameters for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentParams {
    pub mu: Vec<f64>,
    /// log sigma^2
    pub logvar: Vec<f64>,
    pub z: Vec<f64>,
}

impl LatentParams {
    pub fn sigma(&self) -> Vec<f64> {
        self.logvar.iter().map(|lv| (0.5 * lv).exp()).collect()
    }
}

/// `z = mu + exp(logvar / 2) * eps`
pub fn reparameterize(mu: &[f64], logvar: &[f64], eps: &[f64]) -> Vec<f64> {
    mu.iter()
        .zip(logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect()
}

/// KL(N(mu, diag exp(logvar)) || N(0, I)) in closed form.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

/// Gradients of [`kl_divergence`] w.r.t. `mu` and `logvar`, scaled by `scale`.
pub(crate) fn kl_backward(mu: &[f64], logvar: &[f64], scale: f64, dmu: &mut [f64], dlogvar: &mut [f64]) {
    for d in 0..mu.len() {
        dmu[d] += scale * mu[d];
        dlogvar[d] += scale * 0.5 * (logvar[d].exp() - 1.0);
    }
}
