use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hash;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token to row-index map. Index 0 is padding, 1 is the unknown token; real
/// tokens start at 2 in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TokenVocab {
    /// Builds a vocabulary from real tokens, which must be distinct and must not
    /// use the reserved spellings.
    pub fn from_tokens<I, S>(real: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut index = HashMap::new();
        index.insert(PAD_TOKEN.to_string(), PAD);
        index.insert(UNK_TOKEN.to_string(), UNK);
        for token in real {
            let token = token.into();
            if index.contains_key(&token) {
                return Err(Error::Invalid(format!("duplicate or reserved token `{token}`")));
            }
            index.insert(token.clone(), tokens.len());
            tokens.push(token);
        }
        Ok(TokenVocab { tokens, index })
    }

    /// Total rows including the two reserved ones.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn real_len(&self) -> usize {
        self.tokens.len() - 2
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    /// Real tokens with their indices, in index order.
    pub fn real_tokens(&self) -> impl Iterator<Item = (usize, &str)> {
        self.tokens.iter().enumerate().skip(2).map(|(i, t)| (i, t.as_str()))
    }

    pub fn tokens_hash(&self) -> u64 {
        hash::hash_list(&self.tokens)
    }

    /// `<index>\t<token>` per line, reserved entries included.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            for (i, t) in self.tokens.iter().enumerate() {
                writeln!(out, "{i}\t{t}")?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut real = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let (idx, token) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `<index>\\t<token>`"))?;
            if idx.parse::<usize>().ok() != Some(i) {
                return Err(Error::parse(path, i + 1, format!("expected index {i}, found `{idx}`")));
            }
            let expected = match i {
                PAD => Some(PAD_TOKEN),
                UNK => Some(UNK_TOKEN),
                _ => None,
            };
            match expected {
                Some(reserved) if token != reserved => {
                    return Err(Error::parse(path, i + 1, format!("expected reserved `{reserved}`")))
                }
                Some(_) => {}
                None => real.push(token.to_string()),
            }
        }
        Self::from_tokens(real).map_err(|e| Error::parse(path, 0, e.to_string()))
    }
}

/// Tokens seen at least `min_freq` times get their own index.
pub fn build_token_vocab<S: AsRef<str>>(corpus: &[Vec<S>], min_freq: usize) -> TokenVocab {
    let min_freq = min_freq.max(1);
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        for t in doc {
            *freq.entry(t.as_ref()).or_default() += 1;
        }
    }
    let real: Vec<&str> = freq
        .into_iter()
        .filter(|&(t, c)| c >= min_freq && t != PAD_TOKEN && t != UNK_TOKEN)
        .map(|(t, _)| t)
        .collect();
    TokenVocab::from_tokens(real).expect("tally keys are distinct")
}

/// Maps tokens to indices and right-pads (or truncates) to `max_len`.
pub fn encode_sequence<S: AsRef<str>>(tokens: &[S], vocab: &TokenVocab, max_len: usize) -> Vec<usize> {
    let mut out: Vec<usize> = tokens
        .iter()
        .take(max_len)
        .map(|t| vocab.get(t.as_ref()).filter(|&i| i != PAD).unwrap_or(UNK))
        .collect();
    out.resize(max_len, PAD);
    out
}
