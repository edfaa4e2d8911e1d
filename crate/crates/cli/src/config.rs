//! Effective settings: command-line flags over config file over defaults.

use std::fs;
use std::path::Path;

use blstm_core::{DecodeMode, TagScheme, TrainConfig};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_VOCAB_SIZE: usize = 100_000;
pub const DEFAULT_REPLACE_RATE: f64 = 0.2;

/// Keys accepted in a TOML config file. All optional.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub vocab_size: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub hidden_size: Option<usize>,
    pub layers: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub replace_rate: Option<f64>,
    pub scheme: Option<String>,
    pub decode: Option<String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config file: {e}")))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Settings given on the command line; `None` means not given.
#[derive(Debug, Default, Clone)]
pub struct FlagConfig {
    pub vocab_size: Option<usize>,
    pub embedding_dim: Option<usize>,
    pub hidden_size: Option<usize>,
    pub layers: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub replace_rate: Option<f64>,
    pub scheme: Option<TagScheme>,
    pub decode: Option<DecodeMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub vocab_size: usize,
    pub train: TrainConfig,
    pub replace_rate: f64,
    pub scheme: TagScheme,
    pub decode: DecodeMode,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            vocab_size: DEFAULT_VOCAB_SIZE,
            train: TrainConfig::default(),
            replace_rate: DEFAULT_REPLACE_RATE,
            scheme: TagScheme::Raw,
            decode: DecodeMode::Viterbi,
        }
    }
}

fn parse_named<T: std::str::FromStr<Err = blstm_core::Error>>(
    key: &str,
    value: &Option<String>,
) -> CliResult<Option<T>> {
    value
        .as_deref()
        .map(|v| {
            v.parse()
                .map_err(|e| CliError::Usage(format!("config file {key}: {e}")))
        })
        .transpose()
}

impl Settings {
    /// Merges the layers and validates the result.
    pub fn resolve(file: &FileConfig, flags: &FlagConfig) -> CliResult<Self> {
        let mut s = Settings::default();
        let file_scheme = parse_named::<TagScheme>("scheme", &file.scheme)?;
        let file_decode = parse_named::<DecodeMode>("decode", &file.decode)?;
        macro_rules! layer {
            ($target:expr, $key:ident) => {
                if let Some(v) = flags.$key.clone().or(file.$key.clone()) {
                    $target = v;
                }
            };
        }
        layer!(s.vocab_size, vocab_size);
        layer!(s.train.embedding_dim, embedding_dim);
        layer!(s.train.hidden_size, hidden_size);
        layer!(s.train.layers, layers);
        layer!(s.train.learning_rate, lr);
        layer!(s.train.epochs, epochs);
        layer!(s.train.seed, seed);
        layer!(s.replace_rate, replace_rate);
        if let Some(v) = flags.scheme.or(file_scheme) {
            s.scheme = v;
        }
        if let Some(v) = flags.decode.or(file_decode) {
            s.decode = v;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.vocab_size == 0 {
            return Err(CliError::Usage("vocab-size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.replace_rate) {
            return Err(CliError::Usage(format!(
                "replace-rate must lie in [0, 1], got {}",
                self.replace_rate
            )));
        }
        self.train
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))
    }

    /// `key=value` pairs recorded in model file headers. Paths are left
    /// out so that artifacts do not depend on where they were produced.
    pub fn provenance(&self) -> Vec<(String, String)> {
        let t = &self.train;
        vec![
            ("vocab_size".into(), self.vocab_size.to_string()),
            ("embedding_dim".into(), t.embedding_dim.to_string()),
            ("hidden_size".into(), t.hidden_size.to_string()),
            ("layers".into(), t.layers.to_string()),
            ("lr".into(), format!("{:?}", t.learning_rate)),
            ("epochs".into(), t.epochs.to_string()),
            ("seed".into(), t.seed.to_string()),
            ("scheme".into(), self.scheme.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = FileConfig::parse("hidden_size = 8\nlr = 0.5\nscheme = \"iobes\"\n").unwrap();
        let flags = FlagConfig {
            lr: Some(0.25),
            ..FlagConfig::default()
        };
        let s = Settings::resolve(&file, &flags).unwrap();
        assert_eq!(s.train.hidden_size, 8);
        assert_eq!(s.train.learning_rate, 0.25);
        assert_eq!(s.scheme, TagScheme::Iobes);
        assert_eq!(s.train.embedding_dim, 100);
        assert_eq!(s.vocab_size, DEFAULT_VOCAB_SIZE);
    }

    #[test]
    fn rejects_bad_values() {
        let rate = FlagConfig {
            replace_rate: Some(1.5),
            ..FlagConfig::default()
        };
        assert!(matches!(
            Settings::resolve(&FileConfig::default(), &rate),
            Err(CliError::Usage(_))
        ));
        assert!(FileConfig::parse("hiden_size = 3").is_err());
        assert!(FileConfig::parse("layers = \"two\"").is_err());
        let file = FileConfig::parse("decode = \"beam\"").unwrap();
        assert!(Settings::resolve(&file, &FlagConfig::default()).is_err());
        let file = FileConfig::parse("lr = -1.0").unwrap();
        assert!(Settings::resolve(&file, &FlagConfig::default()).is_err());
    }
}
