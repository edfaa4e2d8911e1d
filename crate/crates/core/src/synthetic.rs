//! Small generated corpora with known structure, for tests and benchmarks.
//!
//! [`ClassLanguage`] emits words from a class-level Markov chain so that
//! context carries information about each word, and tags them by a rule
//! over the previous and current word. [`chunk_corpus`] emits IOB2-chunked
//! sentences from a tiny phrase grammar.

use crate::corpus::TaggedSentence;
use crate::numerics::SeededRng;

/// Words (two-letter strings `aa`, `ab`, ..., free of digits so that
/// normalization keeps them apart) partitioned into consecutive classes.
/// After class `k` the next class is `k + 1` or `k + 2` (mod the number of
/// classes) with equal probability, and a word is drawn uniformly within
/// its class. Every class is equally frequent, so words of small classes
/// are more frequent than words of large ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassLanguage {
    sizes: Vec<usize>,
    starts: Vec<usize>,
}

impl Default for ClassLanguage {
    /// Five classes, fifty words.
    fn default() -> Self {
        ClassLanguage::new(vec![4, 6, 10, 12, 18])
    }
}

/// The `id`-th two-letter lowercase word, for `id < 676`.
pub fn letter_word(id: usize) -> String {
    assert!(id < 26 * 26, "letter_word id {id} out of range");
    let letter = |i: usize| char::from(b'a' + i as u8);
    [letter(id / 26), letter(id % 26)].iter().collect()
}

/// Number of distinct tags emitted by [`ClassLanguage::tags`].
pub const WINDOW_TAGS: usize = 3;

impl ClassLanguage {
    /// # Panics
    /// With fewer than three classes, an empty class, or more than 676 words.
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(
            sizes.len() >= 3 && sizes.iter().all(|&s| s > 0),
            "bad class sizes {sizes:?}"
        );
        let starts = sizes
            .iter()
            .scan(0, |acc, &s| {
                let start = *acc;
                *acc += s;
                Some(start)
            })
            .collect();
        let lang = ClassLanguage { sizes, starts };
        assert!(lang.vocab_size() <= 26 * 26);
        lang
    }

    pub fn vocab_size(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn classes(&self) -> usize {
        self.sizes.len()
    }

    pub fn word(&self, id: usize) -> String {
        letter_word(id)
    }

    pub fn words(&self) -> Vec<String> {
        (0..self.vocab_size()).map(|w| self.word(w)).collect()
    }

    pub fn class(&self, id: usize) -> usize {
        self.starts.partition_point(|&s| s <= id) - 1
    }

    /// Word ids of one sentence of length `len`.
    pub fn sentence_ids(&self, len: usize, rng: &mut SeededRng) -> Vec<usize> {
        let k = self.classes();
        let mut class = rng.below(k);
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.starts[class] + rng.below(self.sizes[class]));
            class = (class + 1 + rng.below(2)) % k;
        }
        out
    }

    /// Tag of every position, a function of the classes of the previous
    /// and current word: `(class + jump) mod 3`, where `jump` is 1 when the
    /// class advanced by two from the previous word and 0 otherwise.
    pub fn tags(&self, ids: &[usize]) -> Vec<String> {
        (0..ids.len())
            .map(|i| {
                let k = self.classes();
                let jump = i > 0 && (self.class(ids[i]) + k - self.class(ids[i - 1])) % k == 2;
                format!(
                    "T{}",
                    (self.class(ids[i]) + usize::from(jump)) % WINDOW_TAGS
                )
            })
            .collect()
    }

    /// Unlabeled sentences with lengths uniform in `min_len..=max_len`.
    pub fn unlabeled(
        &self,
        n: usize,
        min_len: usize,
        max_len: usize,
        rng: &mut SeededRng,
    ) -> Vec<Vec<String>> {
        (0..n)
            .map(|_| {
                let len = min_len + rng.below(max_len - min_len + 1);
                self.sentence_ids(len, rng)
                    .into_iter()
                    .map(|w| self.word(w))
                    .collect()
            })
            .collect()
    }

    /// Tagged sentences with lengths uniform in `min_len..=max_len`.
    pub fn tagged(
        &self,
        n: usize,
        min_len: usize,
        max_len: usize,
        rng: &mut SeededRng,
    ) -> Vec<TaggedSentence> {
        (0..n)
            .map(|_| {
                let len = min_len + rng.below(max_len - min_len + 1);
                let ids = self.sentence_ids(len, rng);
                TaggedSentence {
                    tokens: ids.iter().map(|&w| self.word(w)).collect(),
                    tags: Some(self.tags(&ids)),
                }
            })
            .collect()
    }
}

const DETERMINERS: [&str; 3] = ["the", "a", "this"];
const ADJECTIVES: [&str; 5] = ["big", "old", "red", "quick", "small"];
const NOUNS: [&str; 8] = ["dog", "cat", "house", "tree", "river", "man", "car", "bird"];
const VERBS: [&str; 6] = ["saw", "runs", "ate", "likes", "found", "sees"];
const AUXILIARIES: [&str; 3] = ["will", "can", "did"];
const OUTSIDE: [&str; 4] = [",", "and", "but", "."];

fn pick(words: &[&str], rng: &mut SeededRng) -> String {
    words[rng.below(words.len())].to_string()
}

fn noun_phrase(rng: &mut SeededRng) -> Vec<String> {
    let mut out = Vec::new();
    if rng.bernoulli(0.6) {
        out.push(pick(&DETERMINERS, rng));
    }
    for _ in 0..rng.below(3) {
        out.push(pick(&ADJECTIVES, rng));
    }
    out.push(pick(&NOUNS, rng));
    out
}

fn verb_phrase(rng: &mut SeededRng) -> Vec<String> {
    let mut out = Vec::new();
    if rng.bernoulli(0.4) {
        out.push(pick(&AUXILIARIES, rng));
    }
    out.push(pick(&VERBS, rng));
    out
}

fn push_chunk(tokens: &mut Vec<String>, tags: &mut Vec<String>, words: Vec<String>, kind: &str) {
    for (i, w) in words.into_iter().enumerate() {
        tags.push(format!("{}-{kind}", if i == 0 { 'B' } else { 'I' }));
        tokens.push(w);
    }
}

/// `n` sentences of one to three `NP VP NP` clauses joined by outside
/// tokens, tagged in IOB2 with chunk types `NP` and `VP`.
pub fn chunk_corpus(n: usize, rng: &mut SeededRng) -> Vec<TaggedSentence> {
    (0..n)
        .map(|_| {
            let mut tokens = Vec::new();
            let mut tags = Vec::new();
            let clauses = 1 + rng.below(3);
            for c in 0..clauses {
                if c > 0 {
                    tokens.push(pick(&OUTSIDE[..3], rng));
                    tags.push("O".to_string());
                }
                push_chunk(&mut tokens, &mut tags, noun_phrase(rng), "NP");
                push_chunk(&mut tokens, &mut tags, verb_phrase(rng), "VP");
                if rng.bernoulli(0.7) {
                    push_chunk(&mut tokens, &mut tags, noun_phrase(rng), "NP");
                }
            }
            tokens.push(".".to_string());
            tags.push("O".to_string());
            TaggedSentence {
                tokens,
                tags: Some(tags),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::from_iobes;

    #[test]
    fn words_survive_normalization() {
        let lang = ClassLanguage::default();
        let normalized: std::collections::HashSet<_> = lang
            .words()
            .iter()
            .map(|w| crate::corpus::normalize_token(w).unwrap())
            .collect();
        assert_eq!(normalized.len(), lang.vocab_size());
        assert_eq!(letter_word(27), "bb");
    }

    #[test]
    fn class_boundaries() {
        let lang = ClassLanguage::default();
        let classes: Vec<usize> = [0, 3, 4, 9, 10, 19, 20, 31, 32, 49]
            .iter()
            .map(|&w| lang.class(w))
            .collect();
        assert_eq!(classes, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
    }

    #[test]
    fn class_steps_follow_the_chain() {
        let lang = ClassLanguage::default();
        let mut rng = SeededRng::new(1);
        for _ in 0..50 {
            let ids = lang.sentence_ids(12, &mut rng);
            for w in ids.windows(2) {
                let step = (lang.class(w[1]) + 5 - lang.class(w[0])) % 5;
                assert!(step == 1 || step == 2, "{ids:?}");
            }
        }
    }

    #[test]
    fn tags_depend_on_the_window_only() {
        let lang = ClassLanguage::default();
        // classes 0 -> 2 -> 3 -> 0: steps of 2, 1, 2
        let ids = [3, 11, 27, 1];
        assert_eq!(lang.tags(&ids), vec!["T0", "T0", "T0", "T1"]);
        assert_eq!(lang.tags(&ids[1..3]), vec!["T2", "T0"]);
    }

    #[test]
    fn lengths_in_range_and_deterministic() {
        let lang = ClassLanguage::default();
        let a = lang.tagged(40, 5, 15, &mut SeededRng::new(9));
        assert!(a.iter().all(|s| (5..=15).contains(&s.len())));
        assert_eq!(a, lang.tagged(40, 5, 15, &mut SeededRng::new(9)));
    }

    #[test]
    fn chunk_sentences_are_well_formed() {
        for s in chunk_corpus(100, &mut SeededRng::new(4)) {
            s.validate().unwrap();
            let tags = s.tags.unwrap();
            let spans = from_iobes(&tags);
            assert!(spans.iter().any(|sp| sp.kind == "NP"));
            assert!(spans.iter().any(|sp| sp.kind == "VP"));
            assert_eq!(tags.last().map(String::as_str), Some("O"));
        }
    }
}
