//! Bidirectional LSTM sequence tagging.
//!
//! * [`numerics`]: dense math, activations, the seeded generator and a
//!   finite-difference gradient oracle.
//! * [`corpus`]: token normalization, capitalization features, vocabularies,
//!   CoNLL I/O and IOBES conversion.
//! * [`network`]: the BLSTM tagger with exact BPTT gradients, SGD training
//!   and model files.
//! * [`decoder`]: binary tag-transition constraints and Viterbi decoding.
//! * [`pretrain`]: embedding pretraining on a token-corruption task.
//! * [`evaluation`]: token accuracy and chunk precision/recall/F1.
//! * [`tagger`]: a trained model bundled with everything needed to tag.
//! * [`synthetic`]: generated corpora with known structure.

pub mod corpus;
pub mod decoder;
mod error;
pub mod evaluation;
pub mod network;
pub mod numerics;
pub mod pretrain;
pub mod synthetic;
pub mod tagger;

pub use corpus::{CapFeature, TagSet, TaggedSentence, Vocabulary};
pub use decoder::TransitionMatrix;
pub use error::{Error, Result};
pub use evaluation::EvalReport;
pub use network::{ModelDims, ModelParams, ProbMatrix, TrainConfig};
pub use numerics::{Matrix, SeededRng};
pub use pretrain::EmbeddingTable;
pub use tagger::{DecodeMode, TagScheme, TaggerModel};
