//! Vocabulary and corpus reading.

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tree::{Action, TokenId};

pub const END_TOKEN: &str = "<end>";
pub const UNK_TOKEN: &str = "<unk>";
pub const UNK: TokenId = TokenId(1);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

/// One sentence per line, tokens separated by whitespace. Blank lines are
/// empty sentences.
pub fn read_corpus(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sentences: Vec<Vec<String>> = text
        .lines()
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect();
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus(path.to_path_buf()));
    }
    for (i, s) in sentences.iter().enumerate() {
        if let Some(t) = s.iter().find(|t| *t == END_TOKEN || *t == UNK_TOKEN) {
            return Err(Error::ReservedToken {
                line: i + 1,
                token: t.clone(),
            });
        }
    }
    Ok(sentences)
}

impl Vocab {
    /// Tokens seen at least `min_count` times, most frequent first and
    /// lexicographic among equals, after the reserved `<end>` and `<unk>`.
    pub fn build(sentences: &[Vec<String>], min_count: usize) -> Vocab {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in sentences.iter().flatten() {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
        let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count.max(1)).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens = [END_TOKEN, UNK_TOKEN]
            .into_iter()
            .chain(kept.into_iter().map(|(t, _)| t))
            .map(String::from)
            .collect();
        Vocab::from_tokens(tokens).expect("built vocabularies are well formed")
    }

    pub fn from_corpus(path: &Path, min_count: usize) -> Result<Vocab> {
        Ok(Vocab::build(&read_corpus(path)?, min_count))
    }

    /// A vocabulary from its full token list, reserved tokens included.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocab> {
        if tokens.len() < 2 || tokens[0] != END_TOKEN || tokens[1] != UNK_TOKEN {
            return Err(Error::Checkpoint("vocabulary must start with <end> and <unk>".into()));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Checkpoint(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Vocab { tokens, ids })
    }

    /// Size of the action set (`<end>` included).
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        match self.ids.get(token) {
            Some(0) | None => None,
            Some(&i) => Some(TokenId(i)),
        }
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id.index()]
    }

    /// Map words to ids; unknown words become `<unk>`.
    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Vec<TokenId> {
        words.iter().map(|w| self.id(w.as_ref()).unwrap_or(UNK)).collect()
    }

    /// Map words to ids, failing on unknown words.
    pub fn encode_strict<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<TokenId>> {
        words
            .iter()
            .map(|w| self.id(w.as_ref()).ok_or_else(|| Error::UnknownToken(w.as_ref().to_string())))
            .collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<&str> {
        ids.iter().map(|&t| self.token(t)).collect()
    }

    pub fn action_label(&self, a: Action) -> String {
        match a {
            Action::End => END_TOKEN.to_string(),
            Action::Token(t) => self.token(t).to_string(),
        }
    }

    /// Hex SHA-256 of the newline-joined token list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Split on whitespace and make every punctuation character its own token.
pub fn tokenize(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in line.chars() {
        if ch.is_whitespace() || ch.is_ascii_punctuation() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                out.push(ch.to_string());
            }
        } else {
            word.push(ch);
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}
