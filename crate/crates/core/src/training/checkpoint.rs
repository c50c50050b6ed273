//! Binary checkpoint format.
//!
//! ```text
//! "LVAE" | version u32 | config_len u64 | config text (key = value lines)
//!        | tensor_count u32
//!        | per tensor: name_len u32, name, rank u32, dims u64 * rank, f64 * n
//!        | sha256 of everything before
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{CheckpointError, Error, Result};
use crate::model::{HyperParams, VaeModel};
use crate::numerics::{ParamStore, Tensor};
use crate::textpipe::{Vocabulary, RESERVED_TOKENS};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LVAE";
pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hp: HyperParams,
    pub step: u64,
    pub vocab: Vocabulary,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn new(hp: HyperParams, step: u64, vocab: Vocabulary, params: ParamStore) -> Self {
        Checkpoint {
            hp,
            step,
            vocab,
            params,
        }
    }

    /// Binds the stored parameters to a model, checking every tensor shape.
    pub fn model(&self) -> Result<VaeModel> {
        VaeModel::bind(self.hp.clone(), &self.params)
    }

    /// Like [`Checkpoint::model`] but fails unless the model was trained with
    /// the length embedding.
    pub fn model_with_length_control(&self) -> Result<VaeModel> {
        if !self.hp.use_length_embedding {
            return Err(Error::Incompatible(
                "checkpoint was trained without the length embedding; length-controlled decoding is unavailable"
                    .into(),
            ));
        }
        self.model()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let config = self.config_text();
        out.extend_from_slice(&(config.len() as u64).to_le_bytes());
        out.extend_from_slice(config.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, value, _) in self.params.iter() {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(value.rank() as u32).to_le_bytes());
            for &d in value.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in value.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let config_len = r.len_u64()?;
        let config = std::str::from_utf8(r.take(config_len)?)
            .map_err(|_| CheckpointError::Malformed("config is not UTF-8".into()))?
            .to_owned();
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?
                .to_owned();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.len_u64()?);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|n| n.checked_mul(8).is_some())
                .ok_or_else(|| CheckpointError::Malformed(format!("tensor `{name}` is too large")))?;
            let raw = r.take(n * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            tensors.push((name, shape, data));
        }
        let body_end = r.pos;
        let stored = r.take(CHECKSUM_LEN)?;
        if r.pos != bytes.len() {
            return Err(CheckpointError::Malformed("trailing bytes after checksum".into()));
        }
        if Sha256::digest(&bytes[..body_end]).as_slice() != stored {
            return Err(CheckpointError::Checksum);
        }

        let (hp, step, vocab) = parse_config(&config)?;
        let mut params = ParamStore::new();
        for (name, shape, data) in tensors {
            let tensor = Tensor::new(shape, data).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
            params
                .insert(name, tensor)
                .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        }
        Ok(Checkpoint {
            hp,
            step,
            vocab,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_bytes(&bytes)?)
    }

    fn config_text(&self) -> String {
        let hp = &self.hp;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("step", self.step.to_string());
        kv("vocab_size", hp.vocab_size.to_string());
        kv("embed_size", hp.embed_size.to_string());
        kv("cell_size", hp.cell_size.to_string());
        kv("latent_size", hp.latent_size.to_string());
        kv("bow_hidden", hp.bow_hidden.to_string());
        kv("length_embed_size", hp.length_embed_size.to_string());
        kv("decoder_layers", hp.decoder_layers.to_string());
        kv("max_length", hp.max_length.to_string());
        kv("sample_count", hp.sample_count.to_string());
        kv("use_length_embedding", hp.use_length_embedding.to_string());
        for token in &self.vocab.tokens()[RESERVED_TOKENS.len()..] {
            kv("token", token.clone());
        }
        s
    }
}

fn parse_config(text: &str) -> std::result::Result<(HyperParams, u64, Vocabulary), CheckpointError> {
    let malformed = |m: String| CheckpointError::Malformed(m);
    let mut hp = HyperParams::desk(0);
    let mut step = None;
    let mut tokens = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for line in text.lines() {
        let (key, value) = line
            .split_once(" = ")
            .ok_or_else(|| malformed(format!("config line `{line}`")))?;
        if key != "token" && !seen.insert(key) {
            return Err(malformed(format!("duplicate config key `{key}`")));
        }
        let num = || {
            value
                .parse::<usize>()
                .map_err(|_| malformed(format!("`{key}` is not an integer: `{value}`")))
        };
        match key {
            "step" => step = Some(num()? as u64),
            "vocab_size" => hp.vocab_size = num()?,
            "embed_size" => hp.embed_size = num()?,
            "cell_size" => hp.cell_size = num()?,
            "latent_size" => hp.latent_size = num()?,
            "bow_hidden" => hp.bow_hidden = num()?,
            "length_embed_size" => hp.length_embed_size = num()?,
            "decoder_layers" => hp.decoder_layers = num()?,
            "max_length" => hp.max_length = num()?,
            "sample_count" => hp.sample_count = num()?,
            "use_length_embedding" => {
                hp.use_length_embedding = value
                    .parse()
                    .map_err(|_| malformed(format!("`{key}` is not a bool: `{value}`")))?
            }
            "token" => tokens.push(value.to_owned()),
            other => return Err(malformed(format!("unknown config key `{other}`"))),
        }
    }
    const REQUIRED: [&str; 11] = [
        "step",
        "vocab_size",
        "embed_size",
        "cell_size",
        "latent_size",
        "bow_hidden",
        "length_embed_size",
        "decoder_layers",
        "max_length",
        "sample_count",
        "use_length_embedding",
    ];
    if let Some(missing) = REQUIRED.iter().find(|k| !seen.contains(*k)) {
        return Err(malformed(format!("missing config key `{missing}`")));
    }
    let vocab = Vocabulary::from_content_tokens(tokens).map_err(|e| malformed(e.to_string()))?;
    if vocab.len() != hp.vocab_size {
        return Err(malformed(format!(
            "vocabulary has {} entries but vocab_size is {}",
            vocab.len(),
            hp.vocab_size
        )));
    }
    Ok((hp, step.expect("checked above"), vocab))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> std::result::Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn len_u64(&mut self) -> std::result::Result<usize, CheckpointError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| CheckpointError::Truncated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(use_len: bool) -> Checkpoint {
        let vocab = Vocabulary::from_content_tokens(["the", "cat", "sat"]).unwrap();
        let mut hp = HyperParams::desk(vocab.len());
        hp.embed_size = 3;
        hp.cell_size = 4;
        hp.latent_size = 2;
        hp.bow_hidden = 3;
        hp.length_embed_size = 2;
        hp.max_length = 5;
        hp.use_length_embedding = use_len;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, params) = VaeModel::init(hp.clone(), &mut rng).unwrap();
        Checkpoint::new(hp, 17, vocab, params)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample(true);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back.hp, ck.hp);
        assert_eq!(back.step, 17);
        assert_eq!(back.vocab, ck.vocab);
        for ((n1, v1, _), (n2, v2, _)) in ck.params.iter().zip(back.params.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(v1.shape(), v2.shape());
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(v1), bits(v2));
        }
        back.model().unwrap();
    }

    #[test]
    fn corruption_yields_typed_errors() {
        let bytes = sample(true).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::BadMagic)));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bad),
            Err(CheckpointError::Version { found: 9, expected: 1 })
        ));

        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                Checkpoint::from_bytes(&bytes[..cut]),
                Err(CheckpointError::Truncated)
            ));
        }

        let mut bad = bytes.clone();
        let i = bytes.len() - CHECKSUM_LEN - 3;
        bad[i] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::Checksum)));
    }

    #[test]
    fn every_single_byte_flip_is_rejected_without_panic() {
        let bytes = sample(true).to_bytes();
        for i in (0..bytes.len()).step_by(7) {
            let mut bad = bytes.clone();
            bad[i] ^= 0xff;
            assert!(Checkpoint::from_bytes(&bad).is_err(), "flip at {i} accepted");
        }
    }

    #[test]
    fn disabled_length_embedding_blocks_length_control() {
        let ck = sample(false);
        ck.model().unwrap();
        assert!(matches!(ck.model_with_length_control(), Err(Error::Incompatible(_))));
        sample(true).model_with_length_control().unwrap();
    }
}
