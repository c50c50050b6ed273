//! Linear probe for sentence length on latent means.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::VaeModel;
use crate::numerics::ParamStore;
use crate::textpipe::TokenizedSentence;

const SINGULAR_TOLERANCE: f64 = 1e-10;
const RIDGE: f64 = 1e-8;
pub const PROBE_TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDataset {
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl ProbeDataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        if features.len() != targets.len() {
            return Err(Error::InvalidArgument(format!(
                "{} feature rows but {} targets",
                features.len(),
                targets.len()
            )));
        }
        if let Some(first) = features.first() {
            if let Some(bad) = features.iter().find(|r| r.len() != first.len()) {
                return Err(Error::shape("probe feature row", &[first.len()], &[bad.len()]));
            }
        }
        Ok(ProbeDataset { features, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Seeded shuffle, then the first `train_fraction` of rows for training.
    pub fn split(&self, train_fraction: f64, seed: u64) -> (ProbeDataset, ProbeDataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = (self.len() as f64 * train_fraction).round() as usize;
        let take = |ids: &[usize]| ProbeDataset {
            features: ids.iter().map(|&i| self.features[i].clone()).collect(),
            targets: ids.iter().map(|&i| self.targets[i]).collect(),
        };
        (take(&idx[..cut]), take(&idx[cut..]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// The normal matrix was singular and ridge regularization was added.
    pub ridge: bool,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_all(&self, data: &ProbeDataset) -> Vec<f64> {
        data.features.iter().map(|x| self.predict(x)).collect()
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting. Returns
/// `None` if a pivot falls below `tol` times the largest diagonal entry.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < tol * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Ordinary least squares with intercept via the normal equations.
pub fn fit_linear_regression(data: &ProbeDataset) -> Result<LinearFit> {
    let d = data.dim();
    if data.len() < d + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} examples cannot fit {} weights and an intercept",
            data.len(),
            d
        )));
    }
    let n = d + 1;
    let mut ata = vec![vec![0.0; n]; n];
    let mut aty = vec![0.0; n];
    for (x, &y) in data.features.iter().zip(&data.targets) {
        let row = |i: usize| if i < d { x[i] } else { 1.0 };
        for i in 0..n {
            aty[i] += row(i) * y;
            for j in 0..n {
                ata[i][j] += row(i) * row(j);
            }
        }
    }
    let (beta, ridge) = match solve(ata.clone(), aty.clone(), SINGULAR_TOLERANCE) {
        Some(beta) => (beta, false),
        None => {
            for (i, row) in ata.iter_mut().enumerate().take(d) {
                row[i] += RIDGE;
            }
            let beta = solve(ata, aty, 0.0).ok_or_else(|| Error::NonFinite("ridge-regularized normal equations".into()))?;
            (beta, true)
        }
    };
    Ok(LinearFit {
        weights: beta[..d].to_vec(),
        intercept: beta[d],
        ridge,
    })
}

/// `1 - SS_res / SS_tot`.
pub fn r_squared(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if targets.len() < 2 {
        return Err(Error::InvalidArgument("r squared needs at least two examples".into()));
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidArgument("r squared is undefined for constant targets".into()));
    }
    let ss_res: f64 = predictions.iter().zip(targets).map(|(p, y)| (p - y).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub train_r2: f64,
    pub test_r2: f64,
    pub ridge: bool,
}

/// Latent means of `sentences` paired with their word counts.
pub fn latent_length_dataset(model: &VaeModel, params: &ParamStore, sentences: &[TokenizedSentence]) -> Result<ProbeDataset> {
    let mut features = Vec::with_capacity(sentences.len());
    let mut targets = Vec::with_capacity(sentences.len());
    for s in sentences.iter().filter(|s| s.word_count() > 0) {
        features.push(model.encode_sentence(params, &s.ids)?.mu);
        targets.push(s.word_count() as f64);
    }
    ProbeDataset::new(features, targets)
}

/// Fits on a seeded 80% split and scores both splits.
pub fn probe_dataset(data: &ProbeDataset, seed: u64) -> Result<ProbeResult> {
    let (train, test) = data.split(PROBE_TRAIN_FRACTION, seed);
    let fit = fit_linear_regression(&train)?;
    Ok(ProbeResult {
        train_r2: r_squared(&fit.predict_all(&train), &train.targets)?,
        test_r2: r_squared(&fit.predict_all(&test), &test.targets)?,
        ridge: fit.ridge,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    pub with_length_embedding: ProbeResult,
    pub without_length_embedding: ProbeResult,
}

impl ProbeReport {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<16} {:>8} {:>9}\n", "model", "test R2", "train R2");
        for (name, r) in [
            ("with LenEmb", self.with_length_embedding),
            ("without LenEmb", self.without_length_embedding),
        ] {
            let note = if r.ridge { "  (ridge)" } else { "" };
            out.push_str(&format!("{:<16} {:>8.2} {:>9.2}{}\n", name, r.test_r2, r.train_r2, note));
        }
        out
    }
}

/// Probes the latent means of both models on the same sentences and split.
pub fn probe_experiment(
    with_length: (&VaeModel, &ParamStore),
    without_length: (&VaeModel, &ParamStore),
    sentences: &[TokenizedSentence],
    seed: u64,
) -> Result<ProbeReport> {
    let with = latent_length_dataset(with_length.0, with_length.1, sentences)?;
    let without = latent_length_dataset(without_length.0, without_length.1, sentences)?;
    Ok(ProbeReport {
        with_length_embedding: probe_dataset(&with, seed)?,
        without_length_embedding: probe_dataset(&without, seed)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    fn random_data(n: usize, d: usize, seed: u64) -> ProbeDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let targets = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        ProbeDataset::new(features, targets).unwrap()
    }

    #[test]
    fn realizable_targets_are_recovered() {
        let mut data = random_data(40, 3, 1);
        data.targets = data.features.iter().map(|x| 2.5 * x[1] - 1.0).collect();
        let fit = fit_linear_regression(&data).unwrap();
        assert!(!fit.ridge);
        assert!((fit.weights[1] - 2.5).abs() < 1e-10 && (fit.intercept + 1.0).abs() < 1e-10);
        let res: f64 = fit.predict_all(&data).iter().zip(&data.targets).map(|(p, y)| (p - y).powi(2)).sum();
        assert!(res < 1e-8);
        assert!((r_squared(&fit.predict_all(&data), &data.targets).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_give_zero_weights() {
        let mut data = random_data(30, 4, 2);
        data.targets = vec![7.0; 30];
        let fit = fit_linear_regression(&data).unwrap();
        assert!(fit.weights.iter().all(|w| w.abs() < 1e-10));
        assert!((fit.intercept - 7.0).abs() < 1e-10);
        assert!(r_squared(&fit.predict_all(&data), &data.targets).is_err());
    }

    #[test]
    fn matches_independent_normal_equations() {
        for seed in 0..5 {
            let data = random_data(60, 5, 10 + seed);
            let fit = fit_linear_regression(&data).unwrap();
            let a = DMatrix::from_fn(60, 6, |i, j| if j < 5 { data.features[i][j] } else { 1.0 });
            let y = DVector::from_vec(data.targets.clone());
            let beta = (a.transpose() * &a).lu().solve(&(a.transpose() * y)).unwrap();
            for j in 0..5 {
                assert!((fit.weights[j] - beta[j]).abs() < 1e-10);
            }
            assert!((fit.intercept - beta[5]).abs() < 1e-10);
        }
    }

    #[test]
    fn shifting_targets_only_moves_intercept() {
        let data = random_data(50, 3, 4);
        let shifted = ProbeDataset::new(data.features.clone(), data.targets.iter().map(|y| y + 100.0).collect()).unwrap();
        let (a, b) = (fit_linear_regression(&data).unwrap(), fit_linear_regression(&shifted).unwrap());
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!((b.intercept - a.intercept - 100.0).abs() < 1e-8);
    }

    #[test]
    fn degenerate_columns_engage_ridge() {
        let mut data = random_data(20, 3, 5);
        for row in &mut data.features {
            row[2] = row[0];
        }
        let fit = fit_linear_regression(&data).unwrap();
        assert!(fit.ridge);
        assert!(fit.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn errors_and_reference_points() {
        assert!(fit_linear_regression(&random_data(3, 3, 0)).is_err());
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&[2.5; 4], &y).unwrap(), 0.0);
        assert!(ProbeDataset::new(vec![vec![1.0]], vec![]).is_err());
    }

    #[test]
    fn train_split_r2_is_nonnegative_and_deterministic() {
        let data = random_data(100, 4, 8);
        let a = probe_dataset(&data, 3).unwrap();
        assert!(a.train_r2 >= 0.0);
        assert_eq!(a, probe_dataset(&data, 3).unwrap());
    }
}
