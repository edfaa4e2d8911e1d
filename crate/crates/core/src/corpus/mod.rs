//! Token normalization, capitalization features, vocabularies, tag sets
//! and the CoNLL / IOBES formats.

mod conll;
mod iobes;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use conll::{format_conll, parse_conll, read_conll, write_conll};
pub use iobes::{from_iobes, iobes_to_iob2, spans_to_iob2, spans_to_iobes, to_iobes, Span};

use crate::error::{Error, Result};

/// Reserved vocabulary entry for out-of-vocabulary words. Normalized words
/// are lowercase, so it cannot collide with a real entry.
pub const UNK: &str = "UNK";

/// Collapses every maximal run of ASCII digits to `#`, then lowercases.
pub fn normalize_token(token: &str) -> Result<String> {
    if token.is_empty() {
        return Err(Error::invalid("cannot normalize an empty token"));
    }
    let mut out = String::with_capacity(token.len());
    let mut in_digits = false;
    for ch in token.chars() {
        if ch.is_ascii_digit() {
            if !in_digits {
                out.push('#');
            }
            in_digits = true;
        } else {
            in_digits = false;
            out.extend(ch.to_lowercase());
        }
    }
    Ok(out)
}

/// Three-way capitalization class of a raw token, fed to the network as a
/// one-hot vector in the order (lowercase, uppercase, leading capital).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CapFeature {
    Lowercase,
    Uppercase,
    LeadingCapital,
}

impl CapFeature {
    pub const DIM: usize = 3;

    pub fn index(self) -> usize {
        match self {
            CapFeature::Lowercase => 0,
            CapFeature::Uppercase => 1,
            CapFeature::LeadingCapital => 2,
        }
    }

    pub fn flags(self) -> [f64; 3] {
        let mut f = [0.0; 3];
        f[self.index()] = 1.0;
        f
    }
}

/// Classifies the raw (un-normalized) token.
///
/// Uppercase when it has at least one letter and every letter is
/// uppercase; otherwise leading-capital when the first character is an
/// uppercase letter; everything else, including digit- or punctuation-only
/// tokens and mixed-case words like "iPhone", is lowercase.
pub fn cap_feature(token: &str) -> CapFeature {
    let mut letters = token.chars().filter(|c| c.is_alphabetic()).peekable();
    if letters.peek().is_some() && letters.all(|c| c.is_uppercase()) {
        return CapFeature::Uppercase;
    }
    match token.chars().next() {
        Some(c) if c.is_uppercase() => CapFeature::LeadingCapital,
        _ => CapFeature::Lowercase,
    }
}

/// A token sequence with optional gold tags of the same length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Option<Vec<String>>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<String>, tags: Option<Vec<String>>) -> Result<Self> {
        let s = TaggedSentence { tokens, tags };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::invalid("sentence contains an empty token"));
        }
        if let Some(tags) = &self.tags {
            if tags.len() != self.tokens.len() {
                return Err(Error::invalid(format!(
                    "{} tokens but {} tags",
                    self.tokens.len(),
                    tags.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Normalized word list with its inverse index and a reserved UNK entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
    unk_index: usize,
}

impl Vocabulary {
    /// Builds from explicit entries. `UNK` is appended when absent.
    pub fn from_entries(mut entries: Vec<String>) -> Result<Self> {
        if !entries.iter().any(|e| e == UNK) {
            entries.push(UNK.to_string());
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.is_empty() {
                return Err(Error::invalid(format!("vocabulary entry {i} is empty")));
            }
            if index.insert(e.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary entry {e:?}")));
            }
        }
        let unk_index = index[UNK];
        Ok(Vocabulary {
            entries,
            index,
            unk_index,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn unk_index(&self) -> usize {
        self.unk_index
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.entries[idx]
    }

    /// Index of an already-normalized entry.
    pub fn get(&self, normalized: &str) -> Option<usize> {
        self.index.get(normalized).copied()
    }

    /// Index of `normalize_token(token)`, or the UNK index.
    pub fn lookup(&self, token: &str) -> usize {
        normalize_token(token)
            .ok()
            .and_then(|n| self.get(&n))
            .unwrap_or(self.unk_index)
    }

    /// Real (non-UNK) word indices in order.
    pub fn word_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.entries.len()).filter(move |&i| i != self.unk_index)
    }

    /// Hex SHA-256 prefix of the newline-joined entries; ties a model file
    /// to the vocabulary it was trained with.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.as_bytes());
            h.update(b"\n");
        }
        h.finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// One entry per line; line number is the index.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(e);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut has_unk = false;
        for (i, line) in text.lines().enumerate() {
            let word = line.trim_end_matches('\r');
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(Error::parse(
                    i + 1,
                    format!("invalid vocabulary entry {word:?}"),
                ));
            }
            has_unk |= word == UNK;
            entries.push(word.to_string());
        }
        if !has_unk {
            return Err(Error::parse(
                entries.len(),
                format!("vocabulary has no {UNK} line"),
            ));
        }
        Vocabulary::from_entries(entries)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::parse(&text)
    }
}

/// Keeps the `max_size` most frequent normalized tokens (ties by first
/// occurrence) and appends `UNK`.
pub fn build_vocab<I, S>(corpus: I, max_size: usize) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if max_size == 0 {
        return Err(Error::invalid("vocabulary size must be at least 1"));
    }
    // word -> (count, first occurrence)
    let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
    let mut seen = 0usize;
    for tok in corpus {
        let norm = normalize_token(tok.as_ref())?;
        let slot = counts.entry(norm).or_insert((0, seen));
        slot.0 += 1;
        seen += 1;
    }
    if seen == 0 {
        return Err(Error::invalid(
            "cannot build a vocabulary from an empty corpus",
        ));
    }
    let mut ranked: Vec<(String, u64, usize)> = counts
        .into_iter()
        .map(|(w, (c, first))| (w, c, first))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let entries = ranked
        .into_iter()
        .take(max_size)
        .map(|(w, _, _)| w)
        .collect();
    Vocabulary::from_entries(entries)
}

/// Ordered unique tag names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSet {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagSet {
    pub fn new(tags: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tags.len());
        for (i, t) in tags.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate tag {t:?}")));
            }
        }
        Ok(TagSet { tags, index })
    }

    /// Tags in order of first appearance in the gold annotations.
    pub fn from_sentences(sentences: &[TaggedSentence]) -> Self {
        let mut tags: Vec<String> = Vec::new();
        let mut index = HashMap::new();
        for t in sentences.iter().filter_map(|s| s.tags.as_ref()).flatten() {
            if !index.contains_key(t) {
                index.insert(t.clone(), tags.len());
                tags.push(t.clone());
            }
        }
        TagSet { tags, index }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.tags[idx]
    }

    pub fn encode(&self, tags: &[String]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                self.index(t)
                    .ok_or_else(|| Error::invalid(format!("tag {t:?} is not in the tag set")))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn digit_runs_collapse() {
        assert_eq!(normalize_token("Tel192").unwrap(), "tel#");
        assert_eq!(normalize_token("Tel6").unwrap(), "tel#");
        assert_eq!(normalize_token("3.14").unwrap(), "#.#");
        assert!(normalize_token("").is_err());
    }

    #[test]
    fn capitalization_classes() {
        assert_eq!(cap_feature("they"), CapFeature::Lowercase);
        assert_eq!(cap_feature("USA"), CapFeature::Uppercase);
        assert_eq!(cap_feature("iPhone"), CapFeature::Lowercase);
        assert_eq!(cap_feature("London"), CapFeature::LeadingCapital);
        assert_eq!(cap_feature("McDonald"), CapFeature::LeadingCapital);
        assert_eq!(cap_feature("F-16"), CapFeature::Uppercase);
        assert_eq!(cap_feature("1984"), CapFeature::Lowercase);
        assert_eq!(cap_feature(","), CapFeature::Lowercase);
        assert_eq!(CapFeature::Uppercase.flags(), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn vocab_by_frequency() {
        let v = build_vocab("a a b".split(' '), 1).unwrap();
        assert_eq!(v.entries(), &["a", UNK]);
    }

    #[test]
    fn vocab_tie_breaks_by_first_occurrence() {
        let v = build_vocab("a b".split(' '), 1).unwrap();
        assert_eq!(v.entries(), &["a", UNK]);
        let v = build_vocab("b a".split(' '), 1).unwrap();
        assert_eq!(v.entries(), &["b", UNK]);
    }

    #[test]
    fn vocab_counts_normalized_forms() {
        let v = build_vocab("x Tel192 tel6 y y".split(' '), 1).unwrap();
        // "tel#" appears twice, ahead of "y" by first occurrence
        assert_eq!(v.entries(), &["tel#", UNK]);
    }

    #[test]
    fn vocab_errors() {
        assert!(build_vocab(Vec::<&str>::new(), 5).is_err());
        assert!(build_vocab(["a"], 0).is_err());
    }

    #[test]
    fn lookup_normalizes_and_falls_back() {
        let v = build_vocab("the tel# news".split(' '), 10).unwrap();
        assert_eq!(v.lookup("the"), 0);
        assert_eq!(v.lookup("The"), 0);
        assert_eq!(v.lookup("TEL42"), v.get("tel#").unwrap());
        assert_eq!(v.lookup("zyzzyva"), v.unk_index());
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = build_vocab("b a a c".split(' '), 2).unwrap();
        assert_eq!(v.to_text(), "a\nb\nUNK\n");
        let back = Vocabulary::parse(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
    }

    #[test]
    fn vocab_file_requires_unk() {
        assert!(Vocabulary::parse("a\nb\n").is_err());
        assert!(Vocabulary::parse("a\na\nUNK\n").is_err());
    }

    #[test]
    fn tagset_first_appearance() {
        let s = parse_conll("a X\nb Y\n\nc X\nd Z\n").unwrap();
        let ts = TagSet::from_sentences(&s);
        assert_eq!(ts.tags(), &["X", "Y", "Z"]);
        assert!(ts.encode(&["Q".to_string()]).is_err());
    }

    #[test]
    fn sentence_invariants() {
        assert!(TaggedSentence::new(vec!["a".into()], Some(vec![])).is_err());
        assert!(TaggedSentence::new(vec!["".into()], None).is_err());
    }

    fn iob2_sequences(len: usize) -> Vec<Vec<String>> {
        let alphabet = ["O", "B-A", "I-A", "B-B", "I-B"];
        let mut out = vec![vec![]];
        for _ in 0..len {
            let mut next = Vec::new();
            for seq in &out {
                for t in alphabet {
                    let mut s: Vec<String> = seq.clone();
                    // I-X must continue an X chunk in well-formed IOB2
                    if let Some(kind) = t.strip_prefix("I-") {
                        let ok = s.last().is_some_and(|p| p.ends_with(kind) && p != "O");
                        if !ok {
                            continue;
                        }
                    }
                    s.push(t.to_string());
                    next.push(s);
                }
            }
            out = next;
        }
        out
    }

    // Reference span reader for well-formed IOB2.
    fn iob2_spans(tags: &[String]) -> Vec<Span> {
        let mut spans: Vec<Span> = Vec::new();
        for (i, t) in tags.iter().enumerate() {
            if let Some(k) = t.strip_prefix("B-") {
                spans.push(Span::new(k, i, i));
            } else if t.starts_with("I-") {
                spans.last_mut().unwrap().end = i;
            }
        }
        spans
    }

    #[test]
    fn iobes_round_trip_exhaustive_small() {
        for len in 0..=4 {
            for seq in iob2_sequences(len) {
                assert_eq!(from_iobes(&to_iobes(&seq)), iob2_spans(&seq), "{seq:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(tok in "[A-Za-z0-9#.,Éé-]{1,12}") {
            let once = normalize_token(&tok).unwrap();
            prop_assert_eq!(normalize_token(&once).unwrap(), once);
        }

        #[test]
        fn cap_feature_one_hot(tok in "\\PC{1,10}") {
            let f = cap_feature(&tok).flags();
            prop_assert_eq!(f.iter().sum::<f64>(), 1.0);
        }

        #[test]
        fn vocab_size_bound(words in proptest::collection::vec("[a-e]{1,2}", 1..60), max in 1usize..10) {
            let v = build_vocab(&words, max).unwrap();
            prop_assert!(v.len() <= max + 1);
            prop_assert_eq!(v.word(v.unk_index()), UNK);
        }
    }
}
