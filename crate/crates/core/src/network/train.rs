use crate::corpus::{cap_feature, CapFeature, TagSet, TaggedSentence, Vocabulary};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use crate::pretrain::EmbeddingTable;

use super::{backward, forward, loss, ModelDims, ModelParams};

/// ChaCha stream used for parameter initialization.
pub(crate) const STREAM_INIT: u64 = 0;
/// ChaCha stream used for epoch shuffling.
pub(crate) const STREAM_SHUFFLE: u64 = 1;
/// ChaCha stream used to redraw embedding rows missing from an imported table.
pub(crate) const STREAM_EMBEDDINGS: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub hidden_size: usize,
    pub embedding_dim: usize,
    pub layers: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 20,
            hidden_size: 100,
            embedding_dim: 100,
            layers: 1,
            seed: 42,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.hidden_size == 0 || self.embedding_dim == 0 || self.layers == 0 {
            return Err(Error::invalid(
                "hidden size, embedding dim and layers must be at least 1",
            ));
        }
        Ok(())
    }

    pub fn dims(&self, vocab_size: usize, tags: usize) -> ModelDims {
        ModelDims {
            vocab_size,
            embedding_dim: self.embedding_dim,
            hidden_size: self.hidden_size,
            layers: self.layers,
            tags,
        }
    }

    /// Fresh model with the configured sizes, initialized from this
    /// config's seed.
    pub fn init_model(&self, vocab_size: usize, tags: usize) -> Result<ModelParams> {
        self.validate()?;
        ModelParams::random(
            self.dims(vocab_size, tags),
            &mut SeededRng::with_stream(self.seed, STREAM_INIT),
        )
    }

    /// Like [`TrainConfig::init_model`], then overwrites the lookup table
    /// from `table` (see [`ModelParams::load_embeddings`]). Returns the
    /// model and the number of rows taken from the table.
    pub fn init_model_with_embeddings(
        &self,
        vocab: &Vocabulary,
        tags: usize,
        table: &EmbeddingTable,
    ) -> Result<(ModelParams, usize)> {
        let mut model = self.init_model(vocab.len(), tags)?;
        let matched = model.load_embeddings(
            table,
            vocab,
            &mut SeededRng::with_stream(self.seed, STREAM_EMBEDDINGS),
        )?;
        Ok((model, matched))
    }
}

/// A sentence mapped to network inputs and gold tag indices.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSentence {
    pub words: Vec<usize>,
    pub caps: Vec<CapFeature>,
    pub gold: Vec<usize>,
}

pub fn encode_sentence(
    s: &TaggedSentence,
    vocab: &Vocabulary,
    tagset: &TagSet,
) -> Result<EncodedSentence> {
    s.validate()?;
    let tags = s
        .tags
        .as_ref()
        .ok_or_else(|| Error::invalid("training sentence has no gold tags"))?;
    Ok(EncodedSentence {
        words: s.tokens.iter().map(|t| vocab.lookup(t)).collect(),
        caps: s.tokens.iter().map(|t| cap_feature(t)).collect(),
        gold: tagset.encode(tags)?,
    })
}

/// Epoch-at-a-time SGD over a fixed encoded corpus.
#[derive(Debug, Clone)]
pub struct Trainer {
    model: ModelParams,
    corpus: Vec<EncodedSentence>,
    learning_rate: f64,
    shuffle: bool,
    rng: SeededRng,
    order: Vec<usize>,
}

impl Trainer {
    pub fn new(
        model: ModelParams,
        corpus: Vec<EncodedSentence>,
        config: &TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        let dims = model.dims();
        for (i, s) in corpus.iter().enumerate() {
            if s.words.is_empty() {
                return Err(Error::invalid(format!("sentence {i} is empty")));
            }
            if s.words.iter().any(|&w| w >= dims.vocab_size)
                || s.gold.iter().any(|&g| g >= dims.tags)
            {
                return Err(Error::invalid(format!(
                    "sentence {i} has indices outside the model"
                )));
            }
        }
        let order = (0..corpus.len()).collect();
        Ok(Trainer {
            model,
            corpus,
            learning_rate: config.learning_rate,
            shuffle: config.shuffle,
            rng: SeededRng::with_stream(config.seed, STREAM_SHUFFLE),
            order,
        })
    }

    /// One pass over every sentence: forward, backward, SGD update.
    /// Returns the mean per-sentence loss observed before each update.
    pub fn run_epoch(&mut self) -> Result<f64> {
        if self.shuffle {
            self.rng.shuffle(&mut self.order);
        }
        let mut total = 0.0;
        for &i in &self.order {
            let s = &self.corpus[i];
            let (probs, cache) = forward(&self.model, &s.words, &s.caps)?;
            total += loss(&probs, &s.gold)?;
            let grads = backward(&self.model, &cache, &s.gold)?;
            self.model.sgd_step(&grads, self.learning_rate);
        }
        Ok(total / self.corpus.len().max(1) as f64)
    }

    /// Swaps in a new corpus, keeping model and RNG state.
    pub fn set_corpus(&mut self, corpus: Vec<EncodedSentence>) {
        self.order = (0..corpus.len()).collect();
        self.corpus = corpus;
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn into_model(self) -> ModelParams {
        self.model
    }
}

/// Trains `model` for `config.epochs` epochs and returns it with the
/// per-epoch mean loss. Every gold tag is checked against `tagset` before
/// the first update.
pub fn train(
    model: ModelParams,
    corpus: &[TaggedSentence],
    vocab: &Vocabulary,
    tagset: &TagSet,
    config: &TrainConfig,
) -> Result<(ModelParams, Vec<f64>)> {
    if corpus.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    if model.dims().vocab_size != vocab.len() || model.num_tags() != tagset.len() {
        return Err(Error::shape(
            "train",
            format!(
                "model is {:?}, vocabulary has {} entries and tag set {} tags",
                model.dims(),
                vocab.len(),
                tagset.len()
            ),
        ));
    }
    let encoded = corpus
        .iter()
        .map(|s| encode_sentence(s, vocab, tagset))
        .collect::<Result<Vec<_>>>()?;
    let mut trainer = Trainer::new(model, encoded, config)?;
    let mut log = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        log.push(trainer.run_epoch()?);
    }
    Ok((trainer.into_model(), log))
}
