//! Dense kernels over plain slices. Matrices are row-major `rows x cols`.

use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("softmax logits"));
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyInput("log_softmax logits"));
    }
    let lse = logsumexp(logits);
    Ok(logits.iter().map(|&x| x - lse).collect())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += W x`
pub fn matvec_acc(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(&w[r * cols..(r + 1) * cols], x);
    }
}

/// `dx += W^T dy`
pub fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    debug_assert_eq!(dy.len(), rows);
    debug_assert_eq!(dx.len(), cols);
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        axpy(g, &w[r * cols..(r + 1) * cols], dx);
    }
}

/// `dW += dy x^T`
pub fn outer_acc(dw: &mut [f64], rows: usize, cols: usize, dy: &[f64], x: &[f64]) {
    debug_assert_eq!(dw.len(), rows * cols);
    for (r, &g) in dy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        axpy(g, x, &mut dw[r * cols..(r + 1) * cols]);
    }
}

/// `y += a x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn add_assign(y: &mut [f64], x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_uniform() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_large_logits_do_not_overflow() {
        let p = softmax(&[1000.0, 1000.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_matches_direct_formula() {
        // Direct e^x / sum e^x on small logits where no overflow can happen.
        let xs = [1.0f64, 2.0, 3.0];
        let denom: f64 = xs.iter().map(|x| x.exp()).sum();
        let expected: Vec<f64> = xs.iter().map(|x| x.exp() / denom).collect();
        let got = softmax(&xs).unwrap();
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-15);
        }
        // Frozen values from an arbitrary-precision evaluation.
        let frozen = [0.09003057317038046, 0.24472847105479764, 0.6652409557748219];
        for (g, e) in got.iter().zip(&frozen) {
            assert!((g - e).abs() < 1e-15);
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_empty_is_error() {
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn matvec_and_transpose_agree() {
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut out = [0.0; 2];
        matvec_acc(&w, 2, 3, &[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, [-2.0, -2.0]);
        let mut dx = [0.0; 3];
        matvec_t_acc(&w, 2, 3, &[1.0, 1.0], &mut dx);
        assert_eq!(dx, [5.0, 7.0, 9.0]);
    }

    proptest::proptest! {
        #[test]
        fn softmax_shift_invariant(
            xs in proptest::collection::vec(-50.0f64..50.0, 1..20),
            shift in -500.0f64..500.0,
        ) {
            let a = softmax(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            let b = softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                proptest::prop_assert!((x - y).abs() < 1e-12);
            }
            proptest::prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
