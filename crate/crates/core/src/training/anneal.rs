use std::str::FromStr;

use crate::error::Error;
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnealKind {
    Linear,
    Logistic,
}

impl FromStr for AnnealKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "linear" => Ok(AnnealKind::Linear),
            "logistic" => Ok(AnnealKind::Logistic),
            other => Err(Error::Config(format!("unknown anneal kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for AnnealKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AnnealKind::Linear => "linear",
            AnnealKind::Logistic => "logistic",
        })
    }
}

/// Logistic slope in units of the horizon.
const LOGISTIC_SHARPNESS: f64 = 10.0;

/// KL weight at `step`: 0 at step 0, 1 from the horizon on.
///
/// The logistic variant is a sigmoid centred on half the horizon, rescaled
/// so its endpoints are exactly 0 and 1.
pub fn kl_anneal_weight(step: usize, config: &TrainConfig) -> f64 {
    let horizon = config.anneal_horizon.max(1);
    if step >= horizon {
        return 1.0;
    }
    let x = step as f64 / horizon as f64;
    match config.anneal {
        AnnealKind::Linear => x,
        AnnealKind::Logistic => {
            let s = |u: f64| 1.0 / (1.0 + (-LOGISTIC_SHARPNESS * (u - 0.5)).exp());
            ((s(x) - s(0.0)) / (s(1.0) - s(0.0))).clamp(0.0, 1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: AnnealKind, horizon: usize) -> TrainConfig {
        TrainConfig {
            anneal: kind,
            anneal_horizon: horizon,
            steps: horizon * 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn endpoints_and_midpoint() {
        let c = config(AnnealKind::Linear, 100);
        assert_eq!(kl_anneal_weight(0, &c), 0.0);
        assert_eq!(kl_anneal_weight(50, &c), 0.5);
        assert_eq!(kl_anneal_weight(100, &c), 1.0);
        assert_eq!(kl_anneal_weight(10_000, &c), 1.0);
        let l = config(AnnealKind::Logistic, 100);
        assert_eq!(kl_anneal_weight(0, &l), 0.0);
        assert_eq!(kl_anneal_weight(100, &l), 1.0);
    }

    #[test]
    fn logistic_is_monotone_and_bounded() {
        let c = config(AnnealKind::Logistic, 700);
        let mut prev = 0.0;
        for step in 0..1000 {
            let w = kl_anneal_weight(step, &c);
            assert!((0.0..=1.0).contains(&w));
            assert!(w >= prev);
            prev = w;
        }
    }
}
