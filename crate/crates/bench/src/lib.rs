//! Benchmark fixtures: a generated chunking corpus and a model sized like a
//! small production tagger.

use blstm_core::corpus::{build_vocab, to_iobes};
use blstm_core::decoder::build_transitions;
use blstm_core::network::{encode_sentence, EncodedSentence};
use blstm_core::synthetic::chunk_corpus;
use blstm_core::{
    ModelParams, SeededRng, TagSet, TaggedSentence, TrainConfig, TransitionMatrix, Vocabulary,
};

pub struct Fixture {
    pub config: TrainConfig,
    pub sentences: Vec<TaggedSentence>,
    pub encoded: Vec<EncodedSentence>,
    pub vocab: Vocabulary,
    pub tags: TagSet,
    pub transitions: TransitionMatrix,
    pub model: ModelParams,
}

impl Fixture {
    /// `sentences` IOBES-tagged chunk sentences and a freshly initialized
    /// network with the given hidden size.
    pub fn new(sentences: usize, hidden_size: usize, layers: usize) -> Self {
        let sentences: Vec<TaggedSentence> = chunk_corpus(sentences, &mut SeededRng::new(5))
            .into_iter()
            .map(|s| TaggedSentence {
                tags: s.tags.as_deref().map(to_iobes),
                tokens: s.tokens,
            })
            .collect();
        let vocab = build_vocab(sentences.iter().flat_map(|s| s.tokens.iter()), 10_000).unwrap();
        let tags = TagSet::from_sentences(&sentences);
        let encoded: Vec<EncodedSentence> = sentences
            .iter()
            .map(|s| encode_sentence(s, &vocab, &tags).unwrap())
            .collect();
        let gold: Vec<Vec<usize>> = encoded.iter().map(|e| e.gold.clone()).collect();
        let transitions = build_transitions(&gold, tags.len()).unwrap();
        let config = TrainConfig {
            learning_rate: 0.05,
            epochs: 1,
            hidden_size,
            embedding_dim: 50,
            layers,
            seed: 1,
            shuffle: true,
        };
        let model = config.init_model(vocab.len(), tags.len()).unwrap();
        Fixture {
            config,
            sentences,
            encoded,
            vocab,
            tags,
            transitions,
            model,
        }
    }

    /// The longest sentence in the corpus.
    pub fn longest(&self) -> &EncodedSentence {
        self.encoded.iter().max_by_key(|e| e.words.len()).unwrap()
    }
}
