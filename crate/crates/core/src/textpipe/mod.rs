//! Corpus ingestion: normalization, vocabulary, batching and a synthetic
//! corpus generator for desk-scale experiments.

mod batch;
mod normalize;
mod toy;
mod vocab;

pub use batch::{encode_batches, BagOfWords, Batch, TokenizedSentence};
pub use normalize::{filter_by_length, normalize, NUMBER_TOKEN};
pub use toy::{generate_toy_corpus, ToyGrammar};
pub use vocab::{build_vocab, Vocabulary, BOS, EOS, NUM, PAD, RESERVED_TOKENS, UNK};

use std::path::Path;

use crate::error::{Error, Result};

/// Reads a UTF-8 corpus, one sentence per line.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn write_lines<S: AsRef<str>>(path: &Path, lines: &[S]) -> Result<()> {
    let mut out = String::new();
    for line in lines {
        out.push_str(line.as_ref());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
