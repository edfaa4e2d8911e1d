//! Word-embedding pretraining on unlabeled text.
//!
//! Sentences are corrupted by replacing tokens with random vocabulary
//! words; the tagging network is trained to label every token as kept (1)
//! or replaced (0), and the learned lookup table becomes the embedding
//! table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;

use crate::corpus::{cap_feature, normalize_token, Vocabulary};
use crate::error::{Error, Result};
use crate::network::{EncodedSentence, ModelParams, TrainConfig, Trainer};
use crate::numerics::SeededRng;

/// Tag index of a replaced token.
pub const REPLACED: usize = 0;
/// Tag index of an original token.
pub const KEPT: usize = 1;
/// Tag names of the binary task, by index.
pub const PRETRAIN_TAGS: [&str; 2] = ["0", "1"];

/// ChaCha stream used for corruption draws.
const STREAM_CORRUPT: u64 = 2;

/// A sentence after corruption; `labels[i]` is [`KEPT`] or [`REPLACED`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptedSentence {
    pub words: Vec<String>,
    pub labels: Vec<usize>,
}

/// Per-token Bernoulli replacement from a fixed pool of vocabulary words.
#[derive(Debug, Clone)]
pub struct Corruptor {
    rate: f64,
    pool: Vec<String>,
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!(
            "replacement rate must be in [0, 1], got {rate}"
        )));
    }
    Ok(())
}

impl Corruptor {
    /// Replacements drawn uniformly from every non-UNK vocabulary word.
    pub fn uniform(vocab: &Vocabulary, rate: f64) -> Result<Self> {
        let pool = vocab
            .word_indices()
            .map(|i| vocab.word(i).to_string())
            .collect();
        Corruptor::with_pool(pool, rate)
    }

    /// Replacements drawn uniformly from `pool` (normalized words).
    pub fn with_pool(pool: Vec<String>, rate: f64) -> Result<Self> {
        check_rate(rate)?;
        let mut distinct = pool.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::invalid(
                "replacement pool needs at least 2 distinct words",
            ));
        }
        Ok(Corruptor { rate, pool })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Each position is replaced with probability `rate`; a replacement is
    /// redrawn until it differs from the normalized original.
    pub fn corrupt<S: AsRef<str>>(
        &self,
        sentence: &[S],
        rng: &mut SeededRng,
    ) -> Result<CorruptedSentence> {
        if sentence.is_empty() {
            return Err(Error::invalid("cannot corrupt an empty sentence"));
        }
        let mut words = Vec::with_capacity(sentence.len());
        let mut labels = Vec::with_capacity(sentence.len());
        for tok in sentence {
            let tok = tok.as_ref();
            let norm = normalize_token(tok)?;
            if rng.bernoulli(self.rate) {
                let replacement = loop {
                    let cand = &self.pool[rng.below(self.pool.len())];
                    if *cand != norm {
                        break cand.clone();
                    }
                };
                words.push(replacement);
                labels.push(REPLACED);
            } else {
                words.push(tok.to_string());
                labels.push(KEPT);
            }
        }
        Ok(CorruptedSentence { words, labels })
    }
}

/// Corrupts with replacements drawn uniformly from the whole vocabulary.
pub fn corrupt<S: AsRef<str>>(
    sentence: &[S],
    rate: f64,
    vocab: &Vocabulary,
    rng: &mut SeededRng,
) -> Result<CorruptedSentence> {
    Corruptor::uniform(vocab, rate)?.corrupt(sentence, rng)
}

/// Network inputs and binary gold labels for a corrupted sentence.
pub fn encode_corrupted(c: &CorruptedSentence, vocab: &Vocabulary) -> EncodedSentence {
    EncodedSentence {
        words: c.words.iter().map(|w| vocab.lookup(w)).collect(),
        caps: c.words.iter().map(|w| cap_feature(w)).collect(),
        gold: c.labels.clone(),
    }
}

/// Ordered word → vector map with a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: IndexMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: IndexMap::new(),
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(Error::shape(
                "EmbeddingTable::insert",
                format!(
                    "{word:?} has {} values, table dimension is {}",
                    vector.len(),
                    self.dim
                ),
            ));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding of {word:?}")));
        }
        if word.is_empty() || word.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("invalid embedding word {word:?}")));
        }
        self.vectors.insert(word, vector);
        Ok(())
    }

    /// Rows of the model's lookup table keyed by vocabulary entry.
    pub fn from_model(model: &ModelParams, vocab: &Vocabulary) -> Result<Self> {
        if vocab.len() != model.embedding.rows() {
            return Err(Error::shape(
                "EmbeddingTable::from_model",
                format!(
                    "vocabulary has {} entries, model {} rows",
                    vocab.len(),
                    model.embedding.rows()
                ),
            ));
        }
        let mut t = EmbeddingTable::new(model.embedding.cols());
        for (i, w) in vocab.entries().iter().enumerate() {
            t.vectors.insert(w.clone(), model.embedding.row(i).to_vec());
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(w, v)| (w.as_str(), v.as_slice()))
    }

    /// `"count dim"` header, then `word v1 … vd` per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.len(), self.dim);
        for (w, v) in &self.vectors {
            out.push_str(w);
            for x in v {
                let _ = write!(out, " {x:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing \"count dim\" header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (count, dim) = match h.as_slice() {
            [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
                (Ok(c), Ok(d)) if d > 0 => (c, d),
                _ => return Err(Error::parse(1, format!("bad header {header:?}"))),
            },
            _ => {
                return Err(Error::parse(
                    1,
                    format!("header must be \"count dim\", got {header:?}"),
                ))
            }
        };
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in lines {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut f = line.split_whitespace();
            let word = f.next().unwrap();
            let values = f
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::parse(lineno, format!("bad value {v:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != dim {
                return Err(Error::parse(
                    lineno,
                    format!("{word:?} has {} values, header says {dim}", values.len()),
                ));
            }
            if table.vectors.insert(word.to_string(), values).is_some() {
                return Err(Error::parse(lineno, format!("duplicate word {word:?}")));
            }
        }
        if table.len() != count {
            return Err(Error::parse(
                text.lines().count(),
                format!("header promises {count} rows, found {}", table.len()),
            ));
        }
        Ok(table)
    }
}

pub fn write_embeddings(table: &EmbeddingTable, path: &Path) -> Result<()> {
    fs::write(path, table.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse(&text)
}

/// Outcome of a pretraining run.
#[derive(Debug, Clone)]
pub struct Pretraining {
    pub model: ModelParams,
    pub losses: Vec<f64>,
}

impl Pretraining {
    pub fn table(&self, vocab: &Vocabulary) -> Result<EmbeddingTable> {
        EmbeddingTable::from_model(&self.model, vocab)
    }
}

/// Trains `model` (two output tags) on the corruption task, drawing a
/// fresh corruption of the whole corpus every epoch.
pub fn pretrain<S: AsRef<str>>(
    model: ModelParams,
    corpus: &[Vec<S>],
    vocab: &Vocabulary,
    config: &TrainConfig,
    corruptor: &Corruptor,
) -> Result<Pretraining> {
    config.validate()?;
    if corpus.is_empty() || corpus.iter().any(Vec::is_empty) {
        return Err(Error::invalid(
            "pretraining corpus must be non-empty with no empty sentences",
        ));
    }
    if model.num_tags() != 2 || model.dims().vocab_size != vocab.len() {
        return Err(Error::shape(
            "pretrain",
            format!(
                "model {:?} does not fit a 2-tag task over {} words",
                model.dims(),
                vocab.len()
            ),
        ));
    }
    let mut rng = SeededRng::with_stream(config.seed, STREAM_CORRUPT);
    let mut trainer = Trainer::new(model, Vec::new(), config)?;
    let mut losses = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let epoch = corpus
            .iter()
            .map(|s| {
                corruptor
                    .corrupt(s, &mut rng)
                    .map(|c| encode_corrupted(&c, vocab))
            })
            .collect::<Result<Vec<_>>>()?;
        trainer.set_corpus(epoch);
        losses.push(trainer.run_epoch()?);
    }
    Ok(Pretraining {
        model: trainer.into_model(),
        losses,
    })
}

/// Pretrains a freshly initialized network with uniform replacement at
/// `rate` and returns its lookup table.
pub fn pretrain_embeddings<S: AsRef<str>>(
    corpus: &[Vec<S>],
    vocab: &Vocabulary,
    config: &TrainConfig,
    rate: f64,
) -> Result<EmbeddingTable> {
    let corruptor = Corruptor::uniform(vocab, rate)?;
    let model = config.init_model(vocab.len(), 2)?;
    pretrain(model, corpus, vocab, config, &corruptor)?.table(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_vocab;

    fn vocab() -> Vocabulary {
        build_vocab("the cat sat on a mat with dogs".split(' '), 100).unwrap()
    }

    fn sentence() -> Vec<&'static str> {
        "The cat sat on a mat".split(' ').collect()
    }

    #[test]
    fn rate_zero_keeps_everything() {
        let c = corrupt(&sentence(), 0.0, &vocab(), &mut SeededRng::new(1)).unwrap();
        assert_eq!(c.words, sentence());
        assert!(c.labels.iter().all(|&l| l == KEPT));
    }

    #[test]
    fn rate_one_replaces_everything() {
        let s = sentence();
        let c = corrupt(&s, 1.0, &vocab(), &mut SeededRng::new(1)).unwrap();
        assert!(c.labels.iter().all(|&l| l == REPLACED));
        for (w, orig) in c.words.iter().zip(&s) {
            assert_ne!(w, &normalize_token(orig).unwrap());
            assert_ne!(w, "UNK");
        }
    }

    #[test]
    fn corruption_errors() {
        let tiny = build_vocab(["a"], 5).unwrap();
        assert!(corrupt(&["a"], 0.5, &tiny, &mut SeededRng::new(1)).is_err());
        assert!(corrupt(&["a"], 1.5, &vocab(), &mut SeededRng::new(1)).is_err());
        assert!(corrupt::<&str>(&[], 0.5, &vocab(), &mut SeededRng::new(1)).is_err());
    }

    #[test]
    fn corruption_is_seeded() {
        let s = sentence();
        let a = corrupt(&s, 0.5, &vocab(), &mut SeededRng::new(9)).unwrap();
        let b = corrupt(&s, 0.5, &vocab(), &mut SeededRng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn table_text_format() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", vec![0.5, -0.5]).unwrap();
        assert_eq!(t.to_text(), "1 2\na 0.5 -0.5\n");
        assert_eq!(EmbeddingTable::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn table_round_trip_random() {
        let mut rng = SeededRng::new(3);
        let mut t = EmbeddingTable::new(7);
        for w in ["x", "y", "tel#", "UNK"] {
            t.insert(w, (0..7).map(|_| rng.uniform(-3.0, 3.0)).collect())
                .unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        write_embeddings(&t, &path).unwrap();
        let back = read_embeddings(&path).unwrap();
        for (w, v) in t.iter() {
            let got = back.get(w).unwrap();
            for (a, b) in v.iter().zip(got) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn arity_mismatch_names_line() {
        let err = EmbeddingTable::parse("2 3\na 1 2 3\nb 1 2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
        assert!(EmbeddingTable::parse("3 1\na 1\n").is_err());
        assert!(EmbeddingTable::parse("").is_err());
        assert!(EmbeddingTable::parse("1 x\n").is_err());
    }

    fn corpus() -> Vec<Vec<String>> {
        [
            "the cat sat on a mat",
            "a dog sat",
            "the dogs sat on the mat",
        ]
        .iter()
        .map(|s| s.split(' ').map(String::from).collect())
        .collect()
    }

    fn config(epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 0.05,
            epochs,
            hidden_size: 4,
            embedding_dim: 3,
            layers: 1,
            seed: 17,
            shuffle: true,
        }
    }

    #[test]
    fn zero_epochs_returns_initial_table() {
        let v = vocab();
        let t = pretrain_embeddings(&corpus(), &v, &config(0), 0.2).unwrap();
        let init = config(0).init_model(v.len(), 2).unwrap();
        assert_eq!(t, EmbeddingTable::from_model(&init, &v).unwrap());
    }

    #[test]
    fn table_covers_vocabulary_exactly() {
        let v = vocab();
        let t = pretrain_embeddings(&corpus(), &v, &config(2), 0.2).unwrap();
        assert_eq!(t.len(), v.len());
        assert!(v.entries().iter().all(|w| t.get(w).is_some()));
    }

    #[test]
    fn pretraining_is_deterministic() {
        let v = vocab();
        let a = pretrain_embeddings(&corpus(), &v, &config(3), 0.2).unwrap();
        let b = pretrain_embeddings(&corpus(), &v, &config(3), 0.2).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn degenerate_task_loss_trends_down() {
        let v = vocab();
        let cfg = TrainConfig {
            epochs: 15,
            learning_rate: 0.1,
            ..config(0)
        };
        let model = cfg.init_model(v.len(), 2).unwrap();
        let run = pretrain(
            model,
            &corpus(),
            &v,
            &cfg,
            &Corruptor::uniform(&v, 0.0).unwrap(),
        )
        .unwrap();
        for w in run.losses.windows(2) {
            assert!(w[1] <= w[0] * 1.05, "{:?}", run.losses);
        }
        assert!(run.losses.last().unwrap() < &run.losses[0]);
    }
}
