use crate::error::{Error, Result};
use crate::numerics::ParamStore;

/// A scalar function of a parameter store with an analytic gradient.
///
/// Implementations must be deterministic in `params`: any randomness has to
/// come from a stream that is re-seeded identically on every call.
pub trait Differentiable {
    fn loss(&mut self, params: &ParamStore) -> Result<f64>;

    /// Computes the loss and writes its gradient into the store's gradient
    /// slots (which are zeroed first).
    fn loss_and_grad(&mut self, params: &mut ParamStore) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Max over parameter tensors of
    /// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`, with `|.|`
    /// the Euclidean norm over the tensor.
    pub max_relative_error: f64,
    /// Tensor attaining `max_relative_error`.
    pub worst: Option<String>,
    /// Same ratio for the single worst scalar entry. Entries whose
    /// derivative is below ~1e-6 sit at the resolution of central
    /// differences in 64-bit, so this is a diagnostic only.
    pub max_entry_error: f64,
    pub worst_entry: Option<(String, usize)>,
    /// Analytic and numeric derivative at the worst entry.
    pub worst_entry_values: (f64, f64),
    pub checked: usize,
}

fn relative(diff: f64, a: f64, b: f64) -> f64 {
    diff / a.max(b).max(1e-8)
}

/// Compares analytic gradients against central differences
/// `(f(p + eps) - f(p - eps)) / 2eps` for every scalar in the store.
pub fn grad_check<F: Differentiable + ?Sized>(
    function: &mut F,
    params: &mut ParamStore,
    eps: f64,
) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {eps}")));
    }
    params.zero_grads();
    let base = function.loss_and_grad(params)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        max_entry_error: 0.0,
        worst_entry: None,
        worst_entry_values: (0.0, 0.0),
        checked: 0,
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let (mut diff2, mut analytic2, mut numeric2) = (0.0, 0.0, 0.0);
        for k in 0..params.value(id).len() {
            let analytic = params.grad(id).data()[k];
            let orig = params.value(id).data()[k];
            params.value_mut(id).data_mut()[k] = orig + eps;
            let plus = function.loss(params);
            params.value_mut(id).data_mut()[k] = orig - eps;
            let minus = function.loss(params);
            params.value_mut(id).data_mut()[k] = orig;
            let (plus, minus) = (plus?, minus?);
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("loss near {}[{k}]", params.name(id))));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            diff2 += (analytic - numeric).powi(2);
            analytic2 += analytic * analytic;
            numeric2 += numeric * numeric;
            report.checked += 1;

            let rel = relative((analytic - numeric).abs(), analytic.abs(), numeric.abs());
            if report.worst_entry.is_none() || rel > report.max_entry_error {
                report.max_entry_error = rel;
                report.worst_entry = Some((params.name(id).to_string(), k));
                report.worst_entry_values = (analytic, numeric);
            }
        }
        let rel = relative(diff2.sqrt(), analytic2.sqrt(), numeric2.sqrt());
        if report.worst.is_none() || rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst = Some(params.name(id).to_string());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    struct SumOfSquares {
        corrupt: bool,
    }

    impl Differentiable for SumOfSquares {
        fn loss(&mut self, params: &ParamStore) -> Result<f64> {
            Ok(params
                .iter()
                .flat_map(|(_, v, _)| v.data())
                .map(|p| p * p)
                .sum())
        }

        fn loss_and_grad(&mut self, params: &mut ParamStore) -> Result<f64> {
            let loss = self.loss(params)?;
            for id in params.ids().collect::<Vec<_>>() {
                let v = params.value(id).data().to_vec();
                let g = params.grad_mut(id).data_mut();
                for k in 0..v.len() {
                    g[k] = 2.0 * v[k];
                }
            }
            if self.corrupt {
                let id = params.ids().next().unwrap();
                params.grad_mut(id).data_mut()[1] *= 2.0;
            }
            Ok(loss)
        }
    }

    fn store() -> ParamStore {
        let mut store = ParamStore::new();
        store
            .insert("a", Tensor::from_vec(vec![0.5, -1.25, 3.0]))
            .unwrap();
        store.insert("b", Tensor::from_vec(vec![0.1])).unwrap();
        store
    }

    #[test]
    fn quadratic_is_exact() {
        let report = grad_check(&mut SumOfSquares { corrupt: false }, &mut store(), 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-8, "{report:?}");
        assert!(report.max_entry_error < 1e-8, "{report:?}");
        assert_eq!(report.checked, 4);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let report = grad_check(&mut SumOfSquares { corrupt: true }, &mut store(), 1e-5).unwrap();
        assert!(report.max_relative_error > 0.1, "{report:?}");
        assert_eq!(report.worst.as_deref(), Some("a"));
        assert_eq!(report.worst_entry, Some(("a".to_string(), 1)));
        assert!((report.max_entry_error - 0.5).abs() < 1e-6);
    }

    struct NotFinite;
    impl Differentiable for NotFinite {
        fn loss(&mut self, _: &ParamStore) -> Result<f64> {
            Ok(f64::NAN)
        }
        fn loss_and_grad(&mut self, _: &mut ParamStore) -> Result<f64> {
            Ok(f64::NAN)
        }
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        assert!(matches!(
            grad_check(&mut NotFinite, &mut store(), 1e-5),
            Err(Error::NonFinite(_))
        ));
    }
}
