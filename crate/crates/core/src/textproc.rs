//! Tokenization, vocabulary construction and integer encoding.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use crate::{Error, Result};

/// Lowercase word tokens. Every token is non-empty and whitespace-free.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Builds a sequence from tokens that already satisfy the invariants.
    ///
    /// Panics if a token is empty or contains whitespace.
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        for t in &tokens {
            assert!(
                !t.is_empty() && !t.chars().any(char::is_whitespace),
                "invalid token {t:?}"
            );
        }
        TokenSeq(tokens)
    }

    pub(crate) fn from_vec_unchecked(tokens: Vec<String>) -> Self {
        TokenSeq(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Single-space join.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

/// Lowercases, splits on Unicode whitespace and strips leading/trailing
/// punctuation from each token. Tokens left empty are dropped.
pub fn tokenize(text: &str) -> TokenSeq {
    let tokens = text
        .split_whitespace()
        .filter_map(|raw| {
            let word = raw
                .trim_matches(|c: char| c.is_ascii_punctuation() || is_unicode_punct(c))
                .to_lowercase();
            (!word.is_empty()).then_some(word)
        })
        .collect();
    TokenSeq(tokens)
}

fn is_unicode_punct(c: char) -> bool {
    matches!(
        c,
        '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{3001}'..='\u{3003}'
            | '\u{300C}'..='\u{300F}' | '\u{00A1}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}'
    )
}

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Word-to-id mapping. Ids are contiguous from 0; `PAD` and `UNK` are always
/// present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    min_count: usize,
}

impl Vocab {
    fn specials(min_count: usize) -> Self {
        let id_to_token = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab {
            token_to_id,
            id_to_token,
            min_count,
        }
    }

    /// Rebuilds a vocabulary from its tokens in id order. The first two
    /// entries must be the special tokens.
    pub fn from_tokens(tokens: Vec<String>, min_count: usize) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::Invalid(
                "vocabulary must start with <pad> and <unk>".into(),
            ));
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if token_to_id.insert(t.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate vocabulary entry `{t}`")));
            }
        }
        Ok(Vocab {
            token_to_id,
            id_to_token: tokens,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Tokens in id order, specials included.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Hex SHA-256 of the newline-joined tokens in id order.
    pub fn content_hash(&self) -> String {
        crate::seed::hex_digest(self.id_to_token.join("\n").as_bytes())
    }
}

/// Builds a vocabulary from a training corpus.
///
/// Ids are assigned by descending frequency with lexicographic tie-breaks,
/// so the result does not depend on corpus order. Words seen fewer than
/// `min_count` times are left out.
pub fn build_vocab<'a>(
    corpus: impl IntoIterator<Item = &'a TokenSeq>,
    min_count: usize,
) -> Result<Vocab> {
    if min_count == 0 {
        return Err(Error::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for seq in corpus {
        for t in seq.tokens() {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count && t != PAD_TOKEN && t != UNK_TOKEN)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut vocab = Vocab::specials(min_count);
    for (t, _) in entries {
        vocab
            .token_to_id
            .insert(t.to_string(), vocab.id_to_token.len());
        vocab.id_to_token.push(t.to_string());
    }
    Ok(vocab)
}

/// Maps tokens to ids; unknown words become `UNK`.
pub fn encode(seq: &TokenSeq, vocab: &Vocab) -> Vec<usize> {
    seq.tokens()
        .iter()
        .map(|t| vocab.id(t).unwrap_or(UNK))
        .collect()
}

/// Loads a word list: one lowercase word per line, `#` comments and blank
/// lines ignored.
pub fn load_word_list(path: &Path) -> Result<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_word_list(&text))
}

pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}
