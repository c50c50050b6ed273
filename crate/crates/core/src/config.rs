//! Run configuration: `key = value` lines with `#` comments, applied on
//! top of a named preset.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::DUC_BYTE_LIMIT;
use crate::inference::TargetLength;
use crate::model::HyperParams;
use crate::training::{AnnealKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Full,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::Config(format!("unknown preset `{other}` (expected desk or full)"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeDefaults {
    pub beam_width: usize,
    pub max_tokens: usize,
    pub length: TargetLength,
}

/// Everything a run needs besides file paths, which come from flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    /// `vocab_size` is ignored here; it is fixed by the vocabulary file.
    pub hp: HyperParams,
    pub train: TrainConfig,
    pub decode: DecodeDefaults,
    /// Content tokens kept by the vocabulary builder.
    pub vocab_top_k: usize,
    /// Sentences longer than this are dropped in preprocessing.
    pub max_words: usize,
    pub byte_limit: usize,
    pub histogram_width: usize,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => RunConfig {
                preset,
                hp: HyperParams::desk(0),
                train: TrainConfig::default(),
                decode: DecodeDefaults {
                    beam_width: 8,
                    max_tokens: 40,
                    length: TargetLength::Words(20),
                },
                vocab_top_k: 10_000,
                max_words: 30,
                byte_limit: DUC_BYTE_LIMIT,
                histogram_width: 5,
            },
            Preset::Full => RunConfig {
                preset,
                hp: HyperParams::full(0),
                train: TrainConfig {
                    batch_size: 512,
                    steps: 100_000,
                    anneal_horizon: 50_000,
                    keep_rate: 0.87,
                    adam: crate::numerics::AdamConfig::default(),
                    ..TrainConfig::default()
                },
                decode: DecodeDefaults {
                    beam_width: 100,
                    max_tokens: 40,
                    length: TargetLength::Words(20),
                },
                vocab_top_k: 50_000,
                ..RunConfig::preset(Preset::Desk)
            },
        }
    }

    /// Parses config text. A `preset` line selects the base values wherever
    /// it appears; every other line overrides one field.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            entries.push((n + 1, key.trim().to_owned(), value.trim().to_owned()));
        }
        let presets: Vec<_> = entries.iter().filter(|e| e.1 == "preset").collect();
        if presets.len() > 1 {
            return Err(Error::Config("`preset` given more than once".into()));
        }
        let mut config = RunConfig::preset(match presets.first() {
            Some(e) => e.2.parse()?,
            None => Preset::Desk,
        });
        for (line, key, value) in entries.iter().filter(|e| e.1 != "preset") {
            config
                .set(key, value)
                .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        let (hp, tr) = (&mut self.hp, &mut self.train);
        match key {
            "embed_size" => hp.embed_size = num(key, value)?,
            "cell_size" => hp.cell_size = num(key, value)?,
            "latent_size" => hp.latent_size = num(key, value)?,
            "bow_hidden" => hp.bow_hidden = num(key, value)?,
            "length_embed_size" => hp.length_embed_size = num(key, value)?,
            "decoder_layers" => hp.decoder_layers = num(key, value)?,
            "max_length" => hp.max_length = num(key, value)?,
            "sample_count" => hp.sample_count = num(key, value)?,
            "lenemb" => {
                tr.use_length_embedding = num(key, value)?;
                hp.use_length_embedding = tr.use_length_embedding;
            }
            "batch_size" => tr.batch_size = num(key, value)?,
            "steps" => tr.steps = num(key, value)?,
            "anneal" => tr.anneal = value.parse()?,
            "anneal_horizon" => tr.anneal_horizon = num(key, value)?,
            "word_drop" => tr.word_drop = num(key, value)?,
            "keep_rate" => tr.keep_rate = num(key, value)?,
            "learning_rate" => tr.adam.learning_rate = num(key, value)?,
            "beta1" => tr.adam.beta1 = num(key, value)?,
            "beta2" => tr.adam.beta2 = num(key, value)?,
            "epsilon" => tr.adam.epsilon = num(key, value)?,
            "seed" => tr.seed = num(key, value)?,
            "checkpoint_interval" => tr.checkpoint_interval = num(key, value)?,
            "clip_norm" => tr.clip_norm = num(key, value)?,
            "beam_width" => self.decode.beam_width = num(key, value)?,
            "max_tokens" => self.decode.max_tokens = num(key, value)?,
            "length" => self.decode.length = value.parse()?,
            "vocab_top_k" => self.vocab_top_k = num(key, value)?,
            "max_words" => self.max_words = num(key, value)?,
            "byte_limit" => self.byte_limit = num(key, value)?,
            "histogram_width" => self.histogram_width = num(key, value)?,
            "preset" => return Err(Error::Config("`preset` can only be set in a config file".into())),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let mut hp = self.hp.clone();
        hp.vocab_size = 2;
        hp.validate().map_err(|e| Error::Config(e.to_string()))?;
        for (name, v) in [
            ("beam_width", self.decode.beam_width),
            ("max_tokens", self.decode.max_tokens),
            ("vocab_top_k", self.vocab_top_k),
            ("max_words", self.max_words),
            ("histogram_width", self.histogram_width),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Hyperparameters for a concrete vocabulary size.
    pub fn hyper_params(&self, vocab_size: usize) -> HyperParams {
        HyperParams {
            vocab_size,
            use_length_embedding: self.train.use_length_embedding,
            ..self.hp.clone()
        }
    }

    /// Full effective configuration in the file format.
    pub fn to_config_text(&self) -> String {
        let (hp, tr) = (&self.hp, &self.train);
        let length = match self.decode.length {
            TargetLength::Words(n) => n.to_string(),
            TargetLength::Natural => "natural".to_owned(),
        };
        let anneal: &AnnealKind = &tr.anneal;
        let pairs: [(&str, String); 30] = [
            ("preset", self.preset.to_string()),
            ("embed_size", hp.embed_size.to_string()),
            ("cell_size", hp.cell_size.to_string()),
            ("latent_size", hp.latent_size.to_string()),
            ("bow_hidden", hp.bow_hidden.to_string()),
            ("length_embed_size", hp.length_embed_size.to_string()),
            ("decoder_layers", hp.decoder_layers.to_string()),
            ("max_length", hp.max_length.to_string()),
            ("sample_count", hp.sample_count.to_string()),
            ("lenemb", tr.use_length_embedding.to_string()),
            ("batch_size", tr.batch_size.to_string()),
            ("steps", tr.steps.to_string()),
            ("anneal", anneal.to_string()),
            ("anneal_horizon", tr.anneal_horizon.to_string()),
            ("word_drop", tr.word_drop.to_string()),
            ("keep_rate", tr.keep_rate.to_string()),
            ("learning_rate", tr.adam.learning_rate.to_string()),
            ("beta1", tr.adam.beta1.to_string()),
            ("beta2", tr.adam.beta2.to_string()),
            ("epsilon", tr.adam.epsilon.to_string()),
            ("seed", tr.seed.to_string()),
            ("checkpoint_interval", tr.checkpoint_interval.to_string()),
            ("clip_norm", tr.clip_norm.to_string()),
            ("beam_width", self.decode.beam_width.to_string()),
            ("max_tokens", self.decode.max_tokens.to_string()),
            ("length", length),
            ("vocab_top_k", self.vocab_top_k.to_string()),
            ("max_words", self.max_words.to_string()),
            ("byte_limit", self.byte_limit.to_string()),
            ("histogram_width", self.histogram_width.to_string()),
        ];
        let mut out = String::from("# effective configuration\n");
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Desk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let c = RunConfig::parse("# comment\nsteps = 400 # trailing\n\nanneal_horizon=100\nlength = natural\nlenemb = false\n").unwrap();
        assert_eq!(c.train.steps, 400);
        assert_eq!(c.train.anneal_horizon, 100);
        assert_eq!(c.decode.length, TargetLength::Natural);
        assert!(!c.hyper_params(10).use_length_embedding);
        assert_eq!(c.hp.cell_size, 32);
    }

    #[test]
    fn preset_applies_wherever_it_appears() {
        let c = RunConfig::parse("beam_width = 5\npreset = full\n").unwrap();
        assert_eq!(c.hp.cell_size, 243);
        assert_eq!(c.train.batch_size, 512);
        assert_eq!(c.decode.beam_width, 5);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(RunConfig::parse("colour = blue"), Err(Error::Config(_))));
        assert!(RunConfig::parse("steps = many").is_err());
        assert!(RunConfig::parse("no equals sign").is_err());
        assert!(RunConfig::parse("word_drop = 1.5").is_err());
        assert!(RunConfig::parse("steps = 10\nanneal_horizon = 20").is_err());
        assert!(RunConfig::parse("preset = huge").is_err());
    }

    #[test]
    fn echo_round_trips() {
        for preset in [Preset::Desk, Preset::Full] {
            let mut c = RunConfig::preset(preset);
            c.set("learning_rate", "0.0025").unwrap();
            c.set("anneal", "logistic").unwrap();
            assert_eq!(RunConfig::parse(&c.to_config_text()).unwrap(), c);
        }
    }
}
