//! Token-level EDA operations: synonym replacement, random insertion,
//! random swap and random deletion.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::textproc::{tokenize, TokenSeq};
use crate::{Error, Result};

/// Word to synonym list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Thesaurus {
    entries: HashMap<String, Vec<String>>,
}

impl Thesaurus {
    /// Parses `word<TAB>syn1,syn2,...` lines. Repeated head-words merge their
    /// lists. Blank lines and `#` comments are skipped. A word is never its
    /// own synonym.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Thesaurus::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (head, syns) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: "<thesaurus>".into(),
                line: i + 1,
                message: "expected `word<TAB>syn1,syn2,...`".into(),
            })?;
            t.insert(head, syns.split(','));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Thesaurus::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }

    /// Adds synonyms for `word`, skipping duplicates and the word itself.
    pub fn insert<'a>(&mut self, word: &str, synonyms: impl IntoIterator<Item = &'a str>) {
        let head = word.trim().to_lowercase();
        if head.is_empty() {
            return;
        }
        let list = self.entries.entry(head.clone()).or_default();
        for syn in synonyms {
            // multi-word synonyms are kept as a single joined token
            let syn = tokenize(syn).into_tokens().join("_");
            if !syn.is_empty() && syn != head && !list.contains(&syn) {
                list.push(syn);
            }
        }
        if list.is_empty() {
            self.entries.remove(&head);
        }
    }

    pub fn synonyms(&self, word: &str) -> &[String] {
        self.entries.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_synonyms(&self, word: &str) -> bool {
        !self.synonyms(word).is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Replaces up to `n` eligible tokens with a uniformly chosen synonym.
///
/// A token is eligible when it is not a stopword and has at least one
/// synonym. Token count is unchanged.
pub fn synonym_replace(
    seq: &TokenSeq,
    n: usize,
    thesaurus: &Thesaurus,
    stopwords: &HashSet<String>,
    rng: &mut impl Rng,
) -> TokenSeq {
    let mut tokens = seq.tokens().to_vec();
    let mut eligible: Vec<usize> = tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| !stopwords.contains(*t) && thesaurus.has_synonyms(t))
        .map(|(i, _)| i)
        .collect();
    eligible.shuffle(rng);
    for &pos in eligible.iter().take(n) {
        let syns = thesaurus.synonyms(&tokens[pos]);
        tokens[pos] = syns[rng.gen_range(0..syns.len())].clone();
    }
    TokenSeq::from_vec_unchecked(tokens)
}

/// `n` times, picks a random token that has synonyms and inserts one of its
/// synonyms at a random position. Returns the new sequence and the number of
/// insertions that succeeded.
pub fn random_insert(
    seq: &TokenSeq,
    n: usize,
    thesaurus: &Thesaurus,
    rng: &mut impl Rng,
) -> (TokenSeq, usize) {
    let mut tokens = seq.tokens().to_vec();
    let mut inserted = 0;
    for _ in 0..n {
        let candidates: Vec<usize> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| thesaurus.has_synonyms(t))
            .map(|(i, _)| i)
            .collect();
        let Some(&src) = candidates.choose(rng) else {
            break;
        };
        let syns = thesaurus.synonyms(&tokens[src]);
        let word = syns[rng.gen_range(0..syns.len())].clone();
        let at = rng.gen_range(0..=tokens.len());
        tokens.insert(at, word);
        inserted += 1;
    }
    (TokenSeq::from_vec_unchecked(tokens), inserted)
}

/// `n` times, exchanges the tokens at two distinct uniformly chosen positions.
pub fn random_swap(seq: &TokenSeq, n: usize, rng: &mut impl Rng) -> TokenSeq {
    let mut tokens = seq.tokens().to_vec();
    let len = tokens.len();
    if len < 2 {
        return seq.clone();
    }
    for _ in 0..n {
        let a = rng.gen_range(0..len);
        // uniform over the len-1 other positions
        let mut b = rng.gen_range(0..len - 1);
        if b >= a {
            b += 1;
        }
        tokens.swap(a, b);
    }
    TokenSeq::from_vec_unchecked(tokens)
}

/// Deletes each token independently with probability `p`. A non-empty input
/// never produces an empty output: if every token would go, one uniformly
/// chosen token is kept.
pub fn random_delete(seq: &TokenSeq, p: f64, rng: &mut impl Rng) -> TokenSeq {
    if seq.is_empty() {
        return seq.clone();
    }
    let kept: Vec<String> = seq
        .tokens()
        .iter()
        .filter(|_| rng.gen::<f64>() >= p)
        .cloned()
        .collect();
    if kept.is_empty() {
        let i = rng.gen_range(0..seq.len());
        return TokenSeq::from_vec_unchecked(vec![seq.tokens()[i].clone()]);
    }
    TokenSeq::from_vec_unchecked(kept)
}

/// Number of edits for an EDA operation on `len` tokens.
pub fn edit_count(alpha: f64, len: usize) -> usize {
    ((alpha * len as f64).round() as usize).max(1)
}

/// The EDA operation applied by a variant index (taken modulo 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdaOp {
    SynonymReplace,
    RandomInsert,
    RandomSwap,
    RandomDelete,
}

impl EdaOp {
    pub fn for_variant(variant_index: usize) -> Self {
        match variant_index % 4 {
            0 => EdaOp::SynonymReplace,
            1 => EdaOp::RandomInsert,
            2 => EdaOp::RandomSwap,
            _ => EdaOp::RandomDelete,
        }
    }
}

/// One EDA augmentation of `text`. Variants 0..3 map to synonym
/// replacement, insertion, swap and deletion; the result is the
/// space-joined token sequence. Empty (token-less) text is returned as is.
pub fn eda_variant(
    text: &str,
    variant_index: usize,
    alpha: f64,
    thesaurus: &Thesaurus,
    stopwords: &HashSet<String>,
    rng: &mut impl Rng,
) -> String {
    let seq = tokenize(text);
    if seq.is_empty() {
        return text.to_string();
    }
    let n = edit_count(alpha, seq.len());
    let out = match EdaOp::for_variant(variant_index) {
        EdaOp::SynonymReplace => synonym_replace(&seq, n, thesaurus, stopwords, rng),
        EdaOp::RandomInsert => random_insert(&seq, n, thesaurus, rng).0,
        EdaOp::RandomSwap => random_swap(&seq, n, rng),
        EdaOp::RandomDelete => random_delete(&seq, alpha, rng),
    };
    out.join()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(words: &[&str]) -> TokenSeq {
        TokenSeq::new(words.iter().copied())
    }

    fn thesaurus(pairs: &[(&str, &[&str])]) -> Thesaurus {
        let mut t = Thesaurus::default();
        for (w, syns) in pairs {
            t.insert(w, syns.iter().copied());
        }
        t
    }

    #[test]
    fn parse_merges_duplicate_heads() {
        let t = Thesaurus::parse("# c\nquick\tfast,rapid\nquick\tspeedy,fast\nslow\t\n").unwrap();
        assert_eq!(t.synonyms("quick"), &["fast", "rapid", "speedy"]);
        assert!(!t.has_synonyms("slow"));
        assert!(Thesaurus::parse("no tab here").is_err());
    }

    #[test]
    fn synonym_replace_only_touches_eligible() {
        let th = thesaurus(&[("quick", &["fast"])]);
        let stop: HashSet<String> = ["the".to_string()].into();
        for s in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let out = synonym_replace(&seq(&["the", "quick", "fox"]), 1, &th, &stop, &mut rng);
            assert_eq!(out, seq(&["the", "fast", "fox"]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let input = seq(&["a", "b"]);
        assert_eq!(
            synonym_replace(&input, 3, &Thesaurus::default(), &stop, &mut rng),
            input
        );
        assert!(synonym_replace(&seq(&[]), 1, &th, &stop, &mut rng).is_empty());
    }

    #[test]
    fn stopwords_are_protected_from_replacement() {
        let th = thesaurus(&[("the", &["a"]), ("fox", &["vixen"])]);
        let stop: HashSet<String> = ["the".to_string()].into();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = synonym_replace(&seq(&["the", "fox"]), 5, &th, &stop, &mut rng);
        assert_eq!(out, seq(&["the", "vixen"]));
    }

    #[test]
    fn random_insert_single_word() {
        let th = thesaurus(&[("quick", &["fast"])]);
        // both insertion positions are reachable
        let mut seen = HashSet::new();
        for s in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let (out, k) = random_insert(&seq(&["quick"]), 1, &th, &mut rng);
            assert_eq!(k, 1);
            assert_eq!(out.len(), 2);
            assert!(out.tokens().contains(&"quick".to_string()));
            assert!(out.tokens().contains(&"fast".to_string()));
            seen.insert(out);
        }
        assert_eq!(seen.len(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let input = seq(&["x", "y"]);
        assert_eq!(
            random_insert(&input, 2, &Thesaurus::default(), &mut rng),
            (input, 0)
        );
        assert_eq!(random_insert(&seq(&[]), 1, &th, &mut rng).0, seq(&[]));
    }

    #[test]
    fn random_swap_small_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(random_swap(&seq(&["a"]), 5, &mut rng), seq(&["a"]));
        assert_eq!(
            random_swap(&seq(&["a", "b"]), 1, &mut rng),
            seq(&["b", "a"])
        );
    }

    #[test]
    fn random_delete_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let input = seq(&["a", "b", "c"]);
        assert_eq!(random_delete(&input, 0.0, &mut rng), input);
        for p in [0.0, 0.5, 0.99] {
            assert_eq!(random_delete(&seq(&["a"]), p, &mut rng), seq(&["a"]));
        }
        assert!(random_delete(&seq(&[]), 0.5, &mut rng).is_empty());
    }

    #[test]
    fn eda_variant_edges() {
        let th = thesaurus(&[("good", &["fine"])]);
        let stop = HashSet::new();
        let mut rng = seed::stream(5, &[]);
        assert_eq!(eda_variant("word", 2, 0.1, &th, &stop, &mut rng), "word");
        assert_eq!(
            eda_variant("a b c d", 3, 1e-12, &th, &stop, &mut rng),
            "a b c d"
        );
        assert_eq!(eda_variant("", 0, 0.1, &th, &stop, &mut rng), "");
        let text = "a good day for a good walk";
        let run = |v| eda_variant(text, v, 0.1, &th, &stop, &mut seed::stream(9, &[v.into()]));
        for v in 0..4usize {
            assert_eq!(run(v), run(v));
        }
        assert_eq!(edit_count(0.1, 3), 1);
        assert_eq!(edit_count(0.1, 25), 3);
    }
}
