use std::cmp::Ordering;

use crate::error::{Error, Result};
/// An autoregressive scorer that beam search can drive.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;
    fn start_token(&self) -> u32;
    fn eos(&self) -> u32;

    /// Tokens that may never be emitted.
    fn is_banned(&self, _token: u32) -> bool {
        false
    }

    fn initial_state(&self) -> Self::State;

    /// Next-token log-probabilities after feeding `prev`, and the new state.
    fn step(&self, state: &Self::State, prev: u32) -> Result<(Vec<f64>, Self::State)>;
}

#[derive(Debug, Clone)]
pub struct Hypothesis<S> {
    /// Emitted ids, including a final EOS when finished.
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    pub state: S,
    pub finished: bool,
}

impl<S> Hypothesis<S> {
    fn last_token(&self, start: u32) -> u32 {
        self.tokens.last().copied().unwrap_or(start)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamResult {
    /// Emitted ids without the terminating EOS.
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    /// No hypothesis emitted EOS within the token budget.
    pub truncated: bool,
}

/// Standard beam search without length normalization.
///
/// Every live hypothesis is expanded over all non-banned tokens and the
/// candidates are ranked by cumulative log-probability. Walking down that
/// ranking, EOS candidates go to the completed pool and the rest fill the
/// next beam until it holds `width` entries. Search stops once the best
/// completed score is at least the best live score, or after `max_tokens`.
pub fn beam_search<M: StepModel>(model: &M, width: usize, max_tokens: usize) -> Result<BeamResult> {
    if width == 0 {
        return Err(Error::InvalidArgument("beam width must be at least 1".into()));
    }
    if max_tokens == 0 {
        return Err(Error::InvalidArgument("max tokens must be at least 1".into()));
    }
    let v = model.vocab_size();
    let eos = model.eos();
    let start = model.start_token();
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.initial_state(),
        finished: false,
    }];
    let mut completed: Vec<Hypothesis<M::State>> = Vec::new();

    for _ in 0..max_tokens {
        let mut expanded = Vec::with_capacity(live.len());
        let mut candidates: Vec<(f64, usize, u32)> = Vec::new();
        for (hi, hyp) in live.iter().enumerate() {
            let (logp, state) = model.step(&hyp.state, hyp.last_token(start))?;
            if logp.len() != v {
                return Err(Error::shape("step log-probabilities", &[v], &[logp.len()]));
            }
            for (tok, &lp) in logp.iter().enumerate() {
                let tok = tok as u32;
                if !model.is_banned(tok) {
                    candidates.push((hyp.log_prob + lp, hi, tok));
                }
            }
            expanded.push(state);
        }
        if candidates.iter().any(|c| c.0.is_nan()) {
            return Err(Error::NonFinite("beam candidate score".into()));
        }
        candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut next = Vec::with_capacity(width);
        for (score, hi, tok) in candidates {
            if next.len() == width {
                break;
            }
            let mut tokens = live[hi].tokens.clone();
            tokens.push(tok);
            let hyp = Hypothesis {
                tokens,
                log_prob: score,
                state: expanded[hi].clone(),
                finished: tok == eos,
            };
            if hyp.finished {
                completed.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        live = next;
        let best_done = completed.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
        let best_live = live.first().map_or(f64::NEG_INFINITY, |h| h.log_prob);
        if live.is_empty() || (!completed.is_empty() && best_done >= best_live) {
            break;
        }
    }

    let pick = |pool: &[Hypothesis<M::State>]| {
        pool.iter()
            .fold(None::<&Hypothesis<M::State>>, |best, h| match best {
                Some(b) if b.log_prob >= h.log_prob => Some(b),
                _ => Some(h),
            })
            .cloned()
    };
    if let Some(best) = pick(&completed) {
        let mut tokens = best.tokens;
        tokens.pop();
        return Ok(BeamResult {
            tokens,
            log_prob: best.log_prob,
            truncated: false,
        });
    }
    let best = pick(&live).ok_or(Error::EmptyInput("beam (every token banned)"))?;
    Ok(BeamResult {
        tokens: best.tokens,
        log_prob: best.log_prob,
        truncated: true,
    })
}

/// Greedy argmax decoding, the reference for width-1 beam search.
pub fn greedy_decode<M: StepModel>(model: &M, max_tokens: usize) -> Result<BeamResult> {
    let (eos, start) = (model.eos(), model.start_token());
    let mut state = model.initial_state();
    let mut tokens = Vec::new();
    let mut log_prob = 0.0;
    for _ in 0..max_tokens {
        let (logp, next) = model.step(&state, tokens.last().copied().unwrap_or(start))?;
        let (tok, lp) = logp
            .iter()
            .enumerate()
            .filter(|(t, _)| !model.is_banned(*t as u32))
            .fold(None::<(usize, f64)>, |best, (t, &lp)| match best {
                Some((_, b)) if b >= lp => best,
                _ => Some((t, lp)),
            })
            .ok_or(Error::EmptyInput("greedy decode (every token banned)"))?;
        log_prob += lp;
        if tok as u32 == eos {
            return Ok(BeamResult {
                tokens,
                log_prob,
                truncated: false,
            });
        }
        tokens.push(tok as u32);
        state = next;
    }
    Ok(BeamResult {
        tokens,
        log_prob,
        truncated: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::log_softmax;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Tiny recurrent scorer: `h' = tanh(A h + B[prev])`, logits `C h'`.
    struct ToyRnn {
        v: usize,
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
    }

    impl ToyRnn {
        fn random(v: usize, seed: u64, scale: f64) -> Self {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = 3;
            let mut m = |r: usize, c: usize| -> Vec<Vec<f64>> {
                (0..r).map(|_| (0..c).map(|_| rng.random_range(-scale..scale)).collect()).collect()
            };
            ToyRnn {
                v,
                a: m(h, h),
                b: m(v, h),
                c: m(v, h),
            }
        }
    }

    impl StepModel for ToyRnn {
        type State = Vec<f64>;
        fn vocab_size(&self) -> usize {
            self.v
        }
        fn start_token(&self) -> u32 {
            2
        }
        fn eos(&self) -> u32 {
            3
        }
        fn initial_state(&self) -> Vec<f64> {
            vec![0.1, -0.2, 0.3]
        }
        fn step(&self, state: &Vec<f64>, prev: u32) -> Result<(Vec<f64>, Vec<f64>)> {
            let h: Vec<f64> = (0..state.len())
                .map(|i| {
                    let s: f64 = self.a[i].iter().zip(state).map(|(a, x)| a * x).sum();
                    (s + self.b[prev as usize][i]).tanh()
                })
                .collect();
            let logits: Vec<f64> = self.c.iter().map(|row| row.iter().zip(&h).map(|(c, x)| c * x).sum()).collect();
            Ok((log_softmax(&logits)?, h))
        }
    }

    /// Best EOS-terminated sequence of at most `max` tokens by enumeration.
    fn brute_force<M: StepModel>(m: &M, max: usize) -> (Vec<u32>, f64) {
        fn go<M: StepModel>(m: &M, st: &M::State, prefix: &mut Vec<u32>, lp: f64, max: usize, best: &mut (Vec<u32>, f64)) {
            if prefix.len() == max {
                return;
            }
            let prev = prefix.last().copied().unwrap_or(m.start_token());
            let (logp, next) = m.step(st, prev).unwrap();
            for (t, &l) in logp.iter().enumerate() {
                let t = t as u32;
                if m.is_banned(t) {
                    continue;
                }
                if t == m.eos() {
                    if lp + l > best.1 {
                        *best = (prefix.clone(), lp + l);
                    }
                } else {
                    prefix.push(t);
                    go(m, &next, prefix, lp + l, max, best);
                    prefix.pop();
                }
            }
        }
        let mut best = (Vec::new(), f64::NEG_INFINITY);
        go(m, &m.initial_state(), &mut Vec::new(), 0.0, max, &mut best);
        best
    }

    #[test]
    fn exhaustive_width_matches_enumeration() {
        for seed in 0..20 {
            let m = ToyRnn::random(4, seed, 2.0);
            let (tokens, lp) = brute_force(&m, 3);
            let got = beam_search(&m, 64, 3).unwrap();
            assert!(!got.truncated);
            assert_eq!(got.tokens, tokens, "seed {seed}");
            assert!((got.log_prob - lp).abs() < 1e-12);
        }
    }

    #[test]
    fn width_one_is_greedy() {
        for seed in 0..20 {
            let m = ToyRnn::random(6, seed, 1.5);
            assert_eq!(beam_search(&m, 1, 8).unwrap(), greedy_decode(&m, 8).unwrap(), "seed {seed}");
        }
    }

    #[test]
    fn exhaustive_dominates_every_narrower_width() {
        for seed in 0..20 {
            let m = ToyRnn::random(4, 100 + seed, 2.5);
            let full = beam_search(&m, 64, 3).unwrap();
            for w in 1..64 {
                let r = beam_search(&m, w, 3).unwrap();
                if !r.truncated {
                    assert!(full.log_prob >= r.log_prob - 1e-12, "seed {seed} width {w}");
                }
            }
        }
    }

    #[test]
    fn deterministic_and_rejects_bad_requests() {
        let m = ToyRnn::random(5, 9, 1.0);
        assert_eq!(beam_search(&m, 4, 6).unwrap(), beam_search(&m, 4, 6).unwrap());
        assert!(beam_search(&m, 0, 6).is_err());
        assert!(beam_search(&m, 4, 0).is_err());
    }

    struct NeverEnds;
    impl StepModel for NeverEnds {
        type State = ();
        fn vocab_size(&self) -> usize {
            4
        }
        fn start_token(&self) -> u32 {
            2
        }
        fn eos(&self) -> u32 {
            3
        }
        fn initial_state(&self) {}
        fn step(&self, _: &(), _: u32) -> Result<(Vec<f64>, ())> {
            Ok((log_softmax(&[5.0, 0.0, 0.0, -50.0])?, ()))
        }
    }

    #[test]
    fn truncation_is_flagged() {
        let r = beam_search(&NeverEnds, 3, 5).unwrap();
        assert!(r.truncated);
        assert_eq!(r.tokens, vec![0; 5]);
    }
}
