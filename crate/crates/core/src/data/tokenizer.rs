use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::DataError;

pub const PAD_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const UNK_ID: usize = 2;
pub const BOS_ID: usize = 3;
const RESERVED: [&str; 4] = ["<pad>", "<eos>", "<unk>", "<bos>"];

/// Words (with inner apostrophes) and single punctuation marks. Case is kept.
pub fn split_words(text: &str) -> Vec<&str> {
    static WORD: OnceLock<Regex> = OnceLock::new();
    let re = WORD.get_or_init(|| Regex::new(r"[A-Za-z0-9]+(?:'[A-Za-z0-9]+)*|[^\sA-Za-z0-9]").expect("valid regex"));
    re.find_iter(text).map(|m| m.as_str()).collect()
}

/// Word-level vocabulary. Ids 0..4 are reserved for pad, eos, unk and bos.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    /// Builds from a corpus; words sorted by descending count, then bytewise.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for text in texts {
            for w in split_words(text) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut words: Vec<(&str, usize)> = counts.into_iter().filter(|(w, _)| !RESERVED.contains(w)).collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(words.into_iter().map(|(w, _)| w.to_string()))
            .collect();
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or("<unk>", String::as_str)
    }

    /// Fixed-length encoding: words, then eos, then padding up to `max_len`.
    /// Over-long input is truncated so that eos is always the final real token.
    pub fn tokenize(&self, text: &str, max_len: usize) -> (Vec<usize>, Vec<u8>) {
        assert!(max_len >= 2, "max_len must be at least 2");
        let mut ids: Vec<usize> = split_words(text).into_iter().map(|w| self.id(w)).collect();
        ids.truncate(max_len - 1);
        ids.push(EOS_ID);
        let mut mask = vec![1u8; ids.len()];
        ids.resize(max_len, PAD_ID);
        mask.resize(max_len, 0);
        (ids, mask)
    }

    /// Inverse of [`Vocab::tokenize`] up to whitespace; stops at eos.
    pub fn detokenize(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for &id in ids {
            match id {
                EOS_ID => break,
                PAD_ID | BOS_ID => continue,
                _ => {}
            }
            let tok = self.token(id);
            let punct = tok.chars().count() == 1 && !tok.chars().all(char::is_alphanumeric);
            if !out.is_empty() && !punct {
                out.push(' ');
            }
            out.push_str(tok);
        }
        out
    }

    /// One token per line; line number is the id.
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path)?;
        Self::from_lines(text.lines().map(str::to_string).collect())
    }

    pub fn from_lines(tokens: Vec<String>) -> Result<Self, DataError> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(DataError::Contract("vocabulary must start with <pad>, <eos>, <unk>, <bos>".into()));
        }
        Ok(Self::from_tokens(tokens))
    }
}
