use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const START_TOKEN: &str = "##START##";
pub const END_TOKEN: &str = "##END##";
pub const UNK_TOKEN: &str = "##UNK##";

pub const START_INDEX: usize = 0;
pub const END_INDEX: usize = 1;
pub const UNK_INDEX: usize = 2;

const RESERVED: [&str; 3] = [START_TOKEN, END_TOKEN, UNK_TOKEN];

/// Lowercases, splits on whitespace and emits each punctuation character as
/// its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut current, &mut tokens);
        } else if c.is_ascii_punctuation() || (!c.is_alphanumeric() && !c.is_ascii()) {
            flush(&mut current, &mut tokens);
            tokens.push(c.to_lowercase().collect());
        } else {
            current.extend(c.to_lowercase());
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

fn flush(current: &mut String, tokens: &mut Vec<String>) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}

/// Bidirectional token/index map. Indices 0, 1, 2 are START, END and UNK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_index: HashMap<String, usize>,
    index_to_token: Vec<String>,
}

impl Vocabulary {
    /// Count tokens over `captions` and keep those seen at least `min_count`
    /// times, ordered by descending frequency then lexicographically.
    pub fn build<S: AsRef<str>>(captions: &[S], min_count: usize) -> Result<Self> {
        if captions.is_empty() {
            return Err(Error::EmptyInput("caption list"));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for caption in captions {
            for tok in tokenize(caption.as_ref()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(tok, n)| *n >= min_count.max(1) && !RESERVED.contains(&tok.as_str()))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_tokens(kept.into_iter().map(|(t, _)| t))
    }

    /// Build from content tokens in index order; the reserved tokens are
    /// prepended.
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Result<Self> {
        let mut vocab = Vocabulary {
            token_to_index: HashMap::new(),
            index_to_token: Vec::new(),
        };
        for tok in RESERVED.iter().map(|s| s.to_string()).chain(tokens) {
            if vocab.token_to_index.contains_key(&tok) {
                return Err(Error::Duplicate(tok));
            }
            vocab.token_to_index.insert(tok.clone(), vocab.index_to_token.len());
            vocab.index_to_token.push(tok);
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_to_token.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.token_to_index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.index_to_token.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text)
            .iter()
            .map(|t| self.index_of(t).unwrap_or(UNK_INDEX))
            .collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Vec<&str> {
        indices
            .iter()
            .map(|&i| self.token(i).unwrap_or(UNK_TOKEN))
            .collect()
    }

    pub fn decode_to_string(&self, indices: &[usize]) -> String {
        self.decode(indices).join(" ")
    }

    /// One token per line, in index order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for tok in &self.index_to_token {
            writeln!(w, "{tok}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = Vec::new();
        for line in r.lines() {
            lines.push(line?);
        }
        for (i, reserved) in RESERVED.iter().enumerate() {
            if lines.get(i).map(String::as_str) != Some(*reserved) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected reserved token {reserved}"),
                });
            }
        }
        Self::from_tokens(lines.into_iter().skip(RESERVED.len()))
    }
}
