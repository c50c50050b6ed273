use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;
pub const NUM: u32 = 4;

/// Reserved tokens in id order.
pub const RESERVED_TOKENS: [&str; 5] = ["<pad>", "<unk>", "<s>", "</s>", "#"];

/// Bidirectional token/id map. Ids 0..5 are the reserved tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from content tokens (reserved tokens are
    /// prepended and skipped if repeated).
    pub fn from_content_tokens<I, S>(content: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = RESERVED_TOKENS.iter().map(|t| t.to_string()).collect();
        let mut ids: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        for token in content {
            let token = token.into();
            if RESERVED_TOKENS.contains(&token.as_str()) {
                continue;
            }
            if ids.contains_key(&token) {
                return Err(Error::InvalidArgument(format!("duplicate token `{token}`")));
            }
            ids.insert(token.clone(), tokens.len() as u32);
            tokens.push(token);
        }
        Ok(Vocabulary { tokens, ids })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens
            .get(id as usize)
            .map(String::as_str)
            .unwrap_or(RESERVED_TOKENS[UNK as usize])
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Maps ids back to tokens, dropping PAD/BOS/EOS.
    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter()
            .filter(|&&id| id != PAD && id != BOS && id != EOS)
            .map(|&id| self.token(id))
            .collect()
    }

    /// One token per line, line number = id.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_file_string(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < RESERVED_TOKENS.len()
            || lines[..RESERVED_TOKENS.len()] != RESERVED_TOKENS[..]
        {
            return Err(Error::InvalidArgument(
                "vocabulary file must start with the reserved tokens".into(),
            ));
        }
        Self::from_content_tokens(lines[RESERVED_TOKENS.len()..].iter().copied())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_file_string(&text)
    }
}

/// Keeps the `top_k` most frequent tokens; ties go to the lexicographically
/// smaller token.
pub fn build_vocab<S: AsRef<str>>(corpus: &[Vec<S>], top_k: usize) -> Result<Vocabulary> {
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be at least 1".into()));
    }
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyInput("corpus"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for sentence in corpus {
        for token in sentence {
            let token = token.as_ref();
            if !RESERVED_TOKENS.contains(&token) {
                *counts.entry(token).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top_k);
    Vocabulary::from_content_tokens(ranked.into_iter().map(|(t, _)| t))
}
