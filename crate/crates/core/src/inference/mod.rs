//! Length-controlled decoding: encode to `z = mu`, seed the length countdown
//! with the desired length and beam-decode.

mod beam;

use crate::error::{Error, Result};
use crate::model::{DecoderState, LengthSchedule, VaeModel};
use crate::numerics::{log_softmax, ParamStore};
use crate::textpipe::{TokenizedSentence, Vocabulary, BOS, EOS, PAD};

pub use beam::{beam_search, greedy_decode, BeamResult, Hypothesis, StepModel};

/// Desired output length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetLength {
    Words(usize),
    /// The input's own word count.
    Natural,
}

impl std::str::FromStr for TargetLength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "natural" {
            return Ok(TargetLength::Natural);
        }
        s.parse()
            .map(TargetLength::Words)
            .map_err(|_| Error::InvalidArgument(format!("length must be a number or `natural`, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeRequest {
    pub input: String,
    pub length: TargetLength,
    pub beam_width: usize,
    pub max_tokens: usize,
}

impl DecodeRequest {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width == 0 {
            return Err(Error::InvalidArgument("beam width must be at least 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidArgument("max tokens must be at least 1".into()));
        }
        Ok(())
    }
}

/// The decoder conditioned on a fixed `z`, as a beam-search scorer.
pub struct LatentDecoder<'a> {
    model: &'a VaeModel,
    params: &'a ParamStore,
    z: Vec<f64>,
    desired_length: usize,
}

impl<'a> LatentDecoder<'a> {
    pub fn new(model: &'a VaeModel, params: &'a ParamStore, z: Vec<f64>, desired_length: usize) -> Result<Self> {
        if z.len() != model.hp.latent_size {
            return Err(Error::shape("z", &[model.hp.latent_size], &[z.len()]));
        }
        Ok(LatentDecoder {
            model,
            params,
            z,
            desired_length,
        })
    }
}

impl StepModel for LatentDecoder<'_> {
    type State = (DecoderState, LengthSchedule);

    fn vocab_size(&self) -> usize {
        self.model.hp.vocab_size
    }

    fn start_token(&self) -> u32 {
        BOS
    }

    fn eos(&self) -> u32 {
        EOS
    }

    fn is_banned(&self, token: u32) -> bool {
        token == PAD || token == BOS
    }

    fn initial_state(&self) -> Self::State {
        (
            self.model.initial_decoder_state(self.params, &self.z),
            LengthSchedule::new(self.desired_length, self.model.hp.max_length),
        )
    }

    fn step(&self, state: &Self::State, prev: u32) -> Result<(Vec<f64>, Self::State)> {
        let (dec, mut schedule) = state.clone();
        let (logits, dec) = self.model.step_logits(self.params, &self.z, prev, schedule.index(), &dec);
        schedule.advance();
        Ok((log_softmax(&logits)?, (dec, schedule)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub text: String,
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    pub truncated: bool,
}

/// A trained model plus its vocabulary, ready to decode.
pub struct Summarizer<'a> {
    pub model: &'a VaeModel,
    pub params: &'a ParamStore,
    pub vocab: &'a Vocabulary,
}

impl<'a> Summarizer<'a> {
    pub fn new(model: &'a VaeModel, params: &'a ParamStore, vocab: &'a Vocabulary) -> Result<Self> {
        if vocab.len() != model.hp.vocab_size {
            return Err(Error::Incompatible(format!(
                "vocabulary has {} entries, model expects {}",
                vocab.len(),
                model.hp.vocab_size
            )));
        }
        Ok(Summarizer { model, params, vocab })
    }

    pub fn decode(&self, request: &DecodeRequest) -> Result<Decoded> {
        request.validate()?;
        let sentence = TokenizedSentence::from_text(&request.input, self.vocab);
        if sentence.word_count() == 0 {
            return Err(Error::EmptyInput("sentence to decode"));
        }
        let desired = match request.length {
            TargetLength::Words(n) => n,
            TargetLength::Natural => sentence.word_count(),
        };
        let z = self.model.encode_sentence(self.params, &sentence.ids)?.mu;
        let scorer = LatentDecoder::new(self.model, self.params, z, desired)?;
        let best = beam_search(&scorer, request.beam_width, request.max_tokens)?;
        Ok(Decoded {
            text: self.vocab.decode(&best.tokens).join(" "),
            tokens: best.tokens,
            log_prob: best.log_prob,
            truncated: best.truncated,
        })
    }

    /// Decode to `desired_length` words.
    pub fn summarize(&self, sentence: &str, desired_length: usize, beam_width: usize, max_tokens: usize) -> Result<Decoded> {
        self.decode(&DecodeRequest {
            input: sentence.to_owned(),
            length: TargetLength::Words(desired_length),
            beam_width,
            max_tokens,
        })
    }

    /// Decode at the input's natural length.
    pub fn reconstruct(&self, sentence: &str, beam_width: usize, max_tokens: usize) -> Result<Decoded> {
        self.decode(&DecodeRequest {
            input: sentence.to_owned(),
            length: TargetLength::Natural,
            beam_width,
            max_tokens,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HyperParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn untrained(content: &[&str], seed: u64) -> (VaeModel, ParamStore, Vocabulary) {
        let vocab = Vocabulary::from_content_tokens(content.iter().copied()).unwrap();
        let mut hp = HyperParams::desk(vocab.len());
        hp.embed_size = 4;
        hp.cell_size = 5;
        hp.latent_size = 3;
        hp.bow_hidden = 4;
        hp.length_embed_size = 3;
        hp.max_length = 8;
        let (model, params) = VaeModel::init(hp, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        (model, params, vocab)
    }

    #[test]
    fn random_parameters_decode_within_budget() {
        let (model, params, vocab) = untrained(&["the", "cat", "sat", "on", "mat"], 5);
        let s = Summarizer::new(&model, &params, &vocab).unwrap();
        for len in [1, 3, 8, 20] {
            let out = s.summarize("The cat sat on the mat.", len, 5, 10).unwrap();
            assert!(out.tokens.len() <= 10);
            assert!(out.tokens.iter().all(|&t| t != PAD && t != BOS && t != EOS));
        }
        assert_eq!(
            s.reconstruct("the cat sat", 4, 10).unwrap(),
            s.reconstruct("the cat sat", 4, 10).unwrap()
        );
        assert!(matches!(s.summarize("   ", 3, 2, 5), Err(Error::EmptyInput(_))));
    }

    /// With one content word, PAD and BOS banned, four tokens remain.
    #[test]
    fn model_beam_matches_enumeration() {
        for seed in 0..20 {
            let (model, mut params, _) = untrained(&["w"], seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            for id in params.ids().collect::<Vec<_>>() {
                for x in params.value_mut(id).data_mut() {
                    *x = rand::Rng::random_range(&mut rng, -1.5..1.5);
                }
            }
            let z = vec![0.3, -0.7, 1.1];
            let dec = LatentDecoder::new(&model, &params, z, 2).unwrap();
            let mut best = (Vec::new(), f64::NEG_INFINITY);
            let allowed = [1u32, 3, 4, 5];
            for len in 1..=3usize {
                let mut idx = vec![0usize; len];
                loop {
                    let seq: Vec<u32> = idx.iter().map(|&i| allowed[i]).collect();
                    let eos_pos = seq.iter().position(|&t| t == EOS);
                    if eos_pos == Some(len - 1) {
                        let (mut st, mut prev, mut lp) = (dec.initial_state(), BOS, 0.0);
                        for &t in &seq {
                            let (logp, next) = dec.step(&st, prev).unwrap();
                            lp += logp[t as usize];
                            st = next;
                            prev = t;
                        }
                        if lp > best.1 {
                            best = (seq[..len - 1].to_vec(), lp);
                        }
                    }
                    let mut k = 0;
                    while k < len {
                        idx[k] += 1;
                        if idx[k] < allowed.len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                    if k == len {
                        break;
                    }
                }
            }
            let got = beam_search(&dec, 64, 3).unwrap();
            assert_eq!(got.tokens, best.0, "seed {seed}");
            assert!((got.log_prob - best.1).abs() < 1e-12);
        }
    }
}
