//! Command-line front end: `build-vocab`, `pretrain`, `train`, `tag` and
//! `eval` over plain-text corpora.

mod commands;
pub mod config;
mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use blstm_core::{DecodeMode, TagScheme};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::run;
pub use config::{FileConfig, FlagConfig, Settings};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "blstm", version, about = "Bidirectional LSTM sequence tagger")]
pub struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a vocabulary of the most frequent normalized tokens.
    BuildVocab {
        input: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = InputFormat::Raw)]
        format: InputFormat,
        /// Number of words kept, UNK excluded [default: 100000].
        #[arg(long)]
        vocab_size: Option<usize>,
    },
    /// Pretrain word embeddings on the token-corruption task.
    Pretrain {
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        vocab: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = InputFormat::Raw)]
        format: InputFormat,
        /// Per-token replacement probability [default: 0.2].
        #[arg(long)]
        replace_rate: Option<f64>,
        #[command(flatten)]
        net: NetFlags,
    },
    /// Train a tagger on a CoNLL file.
    Train {
        input: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
        /// Vocabulary file; built from the training tokens when absent.
        #[arg(long, value_name = "FILE")]
        vocab: Option<PathBuf>,
        /// Embedding file used to initialize the lookup table.
        #[arg(long, value_name = "FILE")]
        embeddings: Option<PathBuf>,
        /// Per-epoch mean loss, one `epoch loss` line each.
        #[arg(long, value_name = "FILE")]
        loss_log: Option<PathBuf>,
        /// Vocabulary size when building one [default: 100000].
        #[arg(long)]
        vocab_size: Option<usize>,
        /// Tag transformation before training: raw or iobes [default: raw].
        #[arg(long)]
        scheme: Option<TagScheme>,
        #[command(flatten)]
        net: NetFlags,
    },
    /// Tag the first column of a CoNLL file.
    Tag {
        model: PathBuf,
        input: PathBuf,
        /// Written to standard output when absent.
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// viterbi or greedy [default: viterbi].
        #[arg(long)]
        decode: Option<DecodeMode>,
        /// Let any tag end a sentence, as the unconstrained decoder would.
        #[arg(long)]
        no_end_constraint: bool,
    },
    /// Compare the last column of two CoNLL files.
    Eval {
        predicted: PathBuf,
        gold: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalMode::Chunk)]
        mode: EvalMode,
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        report: ReportFormat,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

/// Network and optimizer flags shared by `pretrain` and `train`.
#[derive(Debug, Default, Clone, Args)]
pub struct NetFlags {
    /// [default: 100]
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// [default: 100]
    #[arg(long)]
    pub hidden_size: Option<usize>,
    /// Stacked bidirectional layers [default: 1].
    #[arg(long)]
    pub layers: Option<usize>,
    /// [default: 0.01]
    #[arg(long)]
    pub lr: Option<f64>,
    /// [default: 20]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// One sentence per line, tokens separated by whitespace.
    Raw,
    /// CoNLL columns; the first column is the token.
    Conll,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Accuracy,
    Chunk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Kv,
}

impl Command {
    /// Settings given as flags on this subcommand.
    pub fn flags(&self) -> FlagConfig {
        let net = |n: &NetFlags| FlagConfig {
            embedding_dim: n.embedding_dim,
            hidden_size: n.hidden_size,
            layers: n.layers,
            lr: n.lr,
            epochs: n.epochs,
            seed: n.seed,
            ..FlagConfig::default()
        };
        match self {
            Command::BuildVocab { vocab_size, .. } => FlagConfig {
                vocab_size: *vocab_size,
                ..FlagConfig::default()
            },
            Command::Pretrain {
                replace_rate,
                net: n,
                ..
            } => FlagConfig {
                replace_rate: *replace_rate,
                ..net(n)
            },
            Command::Train {
                vocab_size,
                scheme,
                net: n,
                ..
            } => FlagConfig {
                vocab_size: *vocab_size,
                scheme: *scheme,
                ..net(n)
            },
            Command::Tag { decode, .. } => FlagConfig {
                decode: *decode,
                ..FlagConfig::default()
            },
            Command::Eval { .. } => FlagConfig::default(),
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
/// Messages go to standard error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("blstm: {e}");
            e.exit_code()
        }
    }
}
