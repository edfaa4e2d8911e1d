//! A trained tagger: network parameters bundled with the vocabulary, tag
//! set, transition matrix and tag scheme, stored as one model file.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{cap_feature, iobes_to_iob2, TagSet, Vocabulary};
use crate::decoder::{greedy_decode, viterbi, TransitionMatrix};
use crate::error::{Error, Result};
use crate::network::{parse_model_file, predict, write_model_file, ModelFile, ModelParams};

/// How gold tags were transformed before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagScheme {
    /// Tags used as given.
    Raw,
    /// IOB2 chunk tags converted to IOBES; output is converted back.
    Iobes,
}

impl fmt::Display for TagScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TagScheme::Raw => "raw",
            TagScheme::Iobes => "iobes",
        })
    }
}

impl FromStr for TagScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(TagScheme::Raw),
            "iobes" => Ok(TagScheme::Iobes),
            _ => Err(Error::invalid(format!(
                "unknown tag scheme {s:?} (raw|iobes)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Viterbi,
    Greedy,
}

impl FromStr for DecodeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "viterbi" => Ok(DecodeMode::Viterbi),
            "greedy" => Ok(DecodeMode::Greedy),
            _ => Err(Error::invalid(format!(
                "unknown decode mode {s:?} (viterbi|greedy)"
            ))),
        }
    }
}

/// Decoded tags for one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tagged {
    pub tags: Vec<String>,
    /// Viterbi found no admissible path and fell back to greedy decoding.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub params: ModelParams,
    pub tags: TagSet,
    pub vocab: Vocabulary,
    pub transitions: TransitionMatrix,
    pub scheme: TagScheme,
    /// Hyperparameters echoed into the file header.
    pub provenance: Vec<(String, String)>,
}

impl TaggerModel {
    pub fn new(
        params: ModelParams,
        tags: TagSet,
        vocab: Vocabulary,
        transitions: TransitionMatrix,
        scheme: TagScheme,
    ) -> Result<Self> {
        let d = params.dims();
        if d.vocab_size != vocab.len()
            || d.tags != tags.len()
            || transitions.num_tags() != tags.len()
        {
            return Err(Error::shape(
                "TaggerModel::new",
                format!(
                    "model {d:?} vs vocabulary {} / tags {} / transitions {}",
                    vocab.len(),
                    tags.len(),
                    transitions.num_tags()
                ),
            ));
        }
        Ok(TaggerModel {
            params,
            tags,
            vocab,
            transitions,
            scheme,
            provenance: Vec::new(),
        })
    }

    /// Tags a token sequence. Tag names are in the training scheme; see
    /// [`TaggerModel::output_tags`] for conversion back to IOB2.
    pub fn tag<S: AsRef<str>>(&self, tokens: &[S], mode: DecodeMode) -> Result<Tagged> {
        if tokens.is_empty() {
            return Ok(Tagged {
                tags: Vec::new(),
                fallback: false,
            });
        }
        let words: Vec<usize> = tokens
            .iter()
            .map(|t| self.vocab.lookup(t.as_ref()))
            .collect();
        let caps: Vec<_> = tokens.iter().map(|t| cap_feature(t.as_ref())).collect();
        let probs = predict(&self.params, &words, &caps)?;
        let (path, fallback) = match mode {
            DecodeMode::Greedy => (greedy_decode(&probs), false),
            DecodeMode::Viterbi => {
                let d = viterbi(&probs, &self.transitions);
                (d.path, d.fallback)
            }
        };
        Ok(Tagged {
            tags: path
                .into_iter()
                .map(|i| self.tags.name(i).to_string())
                .collect(),
            fallback,
        })
    }

    /// Converts decoded tags back to the corpus' original scheme.
    pub fn output_tags(&self, tags: Vec<String>) -> Vec<String> {
        match self.scheme {
            TagScheme::Raw => tags,
            TagScheme::Iobes => iobes_to_iob2(&tags),
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let mut file = ModelFile::new(self.params.clone());
        file.meta.push(("scheme".into(), self.scheme.to_string()));
        file.meta
            .push(("vocab_fingerprint".into(), self.vocab.fingerprint()));
        for (k, v) in &self.provenance {
            file.meta.push((format!("config.{k}"), v.clone()));
        }
        file.sections
            .push(("tags".into(), self.tags.tags().to_vec()));
        file.sections.push((
            "transitions".into(),
            self.transitions.to_text(self.tags.tags())?,
        ));
        file.sections
            .push(("vocab".into(), self.vocab.entries().to_vec()));
        write_model_file(&file)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file = parse_model_file(text)?;
        let section = |name: &str| {
            file.section(name)
                .ok_or_else(|| Error::Format(format!("missing section {name}")))
        };
        let tags = TagSet::new(section("tags")?.to_vec())?;
        let transitions = TransitionMatrix::parse(section("transitions")?, tags.tags())
            .map_err(|e| Error::Format(format!("section transitions: {e}")))?;
        let vocab = Vocabulary::parse(&section("vocab")?.join("\n"))
            .map_err(|e| Error::Format(format!("section vocab: {e}")))?;
        if let Some(fp) = file.meta("vocab_fingerprint") {
            if fp != vocab.fingerprint() {
                return Err(Error::Format(
                    "vocab_fingerprint does not match the stored vocabulary".into(),
                ));
            }
        }
        let scheme = file
            .meta("scheme")
            .ok_or_else(|| Error::Format("missing meta scheme".into()))?
            .parse()?;
        let provenance = file
            .meta
            .iter()
            .filter_map(|(k, v)| {
                k.strip_prefix("config.")
                    .map(|k| (k.to_string(), v.clone()))
            })
            .collect();
        let mut model = TaggerModel::new(file.params, tags, vocab, transitions, scheme)?;
        model.provenance = provenance;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TaggerModel::parse(&text)
    }
}
