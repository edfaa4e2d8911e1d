use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use blstm_core::corpus::{build_vocab, format_conll, parse_conll, to_iobes};
use blstm_core::decoder::build_transitions;
use blstm_core::evaluation::{chunk_prf, token_accuracy};
use blstm_core::network::{encode_sentence, train};
use blstm_core::pretrain::{pretrain, read_embeddings, write_embeddings, Corruptor};
use blstm_core::{TagScheme, TagSet, TaggedSentence, TaggerModel, Vocabulary};
use rayon::prelude::*;

use crate::config::{FileConfig, Settings};
use crate::error::{CliError, CliResult};
use crate::{Cli, Command, EvalMode, InputFormat, ReportFormat};

/// Runs a parsed command line. Settings are resolved and validated before
/// any input is read, and outputs are written only after all work succeeded.
pub fn run(cli: &Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::read(path)?,
        None => FileConfig::default(),
    };
    let settings = Settings::resolve(&file, &cli.command.flags())?;
    match &cli.command {
        Command::BuildVocab {
            input,
            output,
            format,
            ..
        } => {
            let corpus = read_tokens(input, *format)?;
            let vocab = build_vocab(corpus.iter().flatten(), settings.vocab_size)
                .map_err(|e| CliError::at(input, e))?;
            write_output(output, &vocab.to_text())
        }
        Command::Pretrain {
            corpus,
            vocab,
            output,
            format,
            ..
        } => {
            let sentences = read_tokens(corpus, *format)?;
            let vocab = Vocabulary::read(vocab).map_err(|e| CliError::at(vocab, e))?;
            cmd_pretrain(&sentences, &vocab, &settings, output)
        }
        Command::Train {
            input,
            output,
            vocab,
            embeddings,
            loss_log,
            ..
        } => {
            let sentences = read_conll(input)?;
            let vocab = vocab
                .as_ref()
                .map(|p| Vocabulary::read(p).map_err(|e| CliError::at(p, e)))
                .transpose()?;
            let table = embeddings
                .as_ref()
                .map(|p| read_embeddings(p).map_err(|e| CliError::at(p, e)))
                .transpose()?;
            let (model, log) = cmd_train(sentences, vocab, table.as_ref(), &settings)?;
            let text = model.to_text()?;
            let mut log_text = String::new();
            for (epoch, loss) in log.iter().enumerate() {
                let _ = writeln!(log_text, "{} {loss:?}", epoch + 1);
            }
            write_output(output, &text)?;
            if let Some(path) = loss_log {
                write_output(path, &log_text)?;
            }
            Ok(())
        }
        Command::Tag {
            model,
            input,
            output,
            no_end_constraint,
            ..
        } => {
            let mut tagger = TaggerModel::load(model).map_err(|e| CliError::at(model, e))?;
            if *no_end_constraint {
                tagger.transitions = tagger.transitions.without_end_constraint();
            }
            let sentences = read_conll(input)?;
            let (text, fallbacks) = cmd_tag(&tagger, &sentences, settings.decode)?;
            if fallbacks > 0 {
                eprintln!("blstm: {fallbacks} sentence(s) had no admissible tag path; used greedy decoding");
            }
            match output {
                Some(path) => write_output(path, &text),
                None => print_stdout(&text),
            }
        }
        Command::Eval {
            predicted,
            gold,
            mode,
            report,
            output,
        } => {
            let pred = read_tags(predicted)?;
            let gold = read_tags(gold)?;
            let text = cmd_eval(&pred, &gold, *mode, *report)?;
            match output {
                Some(path) => write_output(path, &text),
                None => print_stdout(&text),
            }
        }
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn print_stdout(text: &str) -> CliResult<()> {
    std::io::stdout()
        .lock()
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Data(format!("cannot write standard output: {e}")))
}

fn read_conll(path: &Path) -> CliResult<Vec<TaggedSentence>> {
    parse_conll(&read_text(path)?).map_err(|e| CliError::at(path, e))
}

fn read_tokens(path: &Path, format: InputFormat) -> CliResult<Vec<Vec<String>>> {
    Ok(match format {
        InputFormat::Raw => read_text(path)?
            .lines()
            .map(|l| l.split_whitespace().map(String::from).collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect(),
        InputFormat::Conll => read_conll(path)?.into_iter().map(|s| s.tokens).collect(),
    })
}

fn read_tags(path: &Path) -> CliResult<Vec<Vec<String>>> {
    read_conll(path)?
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.tags.ok_or_else(|| {
                CliError::Data(format!(
                    "{}: sentence {} has no tag column",
                    path.display(),
                    i + 1
                ))
            })
        })
        .collect()
}

fn cmd_pretrain(
    corpus: &[Vec<String>],
    vocab: &Vocabulary,
    settings: &Settings,
    output: &Path,
) -> CliResult<()> {
    if corpus.is_empty() {
        return Err(CliError::Data("pretraining corpus has no sentences".into()));
    }
    let corruptor = Corruptor::uniform(vocab, settings.replace_rate)?;
    let model = settings.train.init_model(vocab.len(), 2)?;
    let run = pretrain(model, corpus, vocab, &settings.train, &corruptor)?;
    check_losses(&run.losses)?;
    for (epoch, loss) in run.losses.iter().enumerate() {
        eprintln!("epoch {} loss {loss:.6}", epoch + 1);
    }
    let table = run.table(vocab)?;
    write_embeddings(&table, output).map_err(|e| CliError::at(output, e))
}

fn check_losses(losses: &[f64]) -> CliResult<()> {
    match losses.iter().position(|l| !l.is_finite()) {
        Some(epoch) => Err(CliError::Internal(format!(
            "loss became non-finite in epoch {}; lower the learning rate",
            epoch + 1
        ))),
        None => Ok(()),
    }
}

/// Trains a tagger. With no vocabulary one is built from the training
/// tokens. Returns the model and its per-epoch loss.
pub(crate) fn cmd_train(
    mut sentences: Vec<TaggedSentence>,
    vocab: Option<Vocabulary>,
    embeddings: Option<&blstm_core::EmbeddingTable>,
    settings: &Settings,
) -> CliResult<(TaggerModel, Vec<f64>)> {
    if sentences.is_empty() {
        return Err(CliError::Data("training file has no sentences".into()));
    }
    for (i, s) in sentences.iter_mut().enumerate() {
        let tags = s.tags.as_mut().ok_or_else(|| {
            CliError::Data(format!("training sentence {} has no tag column", i + 1))
        })?;
        if settings.scheme == TagScheme::Iobes {
            *tags = to_iobes(tags);
        }
    }
    let vocab = match vocab {
        Some(v) => v,
        None => build_vocab(
            sentences.iter().flat_map(|s| s.tokens.iter()),
            settings.vocab_size,
        )?,
    };
    let tagset = TagSet::from_sentences(&sentences);
    let config = &settings.train;
    let params = match embeddings {
        Some(table) => {
            let (params, matched) =
                config.init_model_with_embeddings(&vocab, tagset.len(), table)?;
            eprintln!(
                "initialized {matched} of {} embedding rows from file",
                vocab.len()
            );
            params
        }
        None => config.init_model(vocab.len(), tagset.len())?,
    };
    let gold = sentences
        .iter()
        .map(|s| encode_sentence(s, &vocab, &tagset).map(|e| e.gold))
        .collect::<blstm_core::Result<Vec<_>>>()?;
    let transitions = build_transitions(&gold, tagset.len())?;
    let (params, log) = train(params, &sentences, &vocab, &tagset, config)?;
    check_losses(&log)?;
    for (epoch, loss) in log.iter().enumerate() {
        eprintln!("epoch {} loss {loss:.6}", epoch + 1);
    }
    let mut model = TaggerModel::new(params, tagset, vocab, transitions, settings.scheme)?;
    model.provenance = settings.provenance();
    model.provenance.push((
        "pretrained_embeddings".into(),
        embeddings.is_some().to_string(),
    ));
    Ok((model, log))
}

/// Tags every sentence in parallel, keeping input order. Returns the CoNLL
/// text and the number of sentences decoded by the greedy fallback.
pub(crate) fn cmd_tag(
    model: &TaggerModel,
    sentences: &[TaggedSentence],
    mode: blstm_core::DecodeMode,
) -> CliResult<(String, usize)> {
    let tagged = sentences
        .par_iter()
        .map(|s| model.tag(&s.tokens, mode))
        .collect::<blstm_core::Result<Vec<_>>>()?;
    let fallbacks = tagged.iter().filter(|t| t.fallback).count();
    let out: Vec<TaggedSentence> = sentences
        .iter()
        .zip(tagged)
        .map(|(s, t)| TaggedSentence {
            tokens: s.tokens.clone(),
            tags: Some(model.output_tags(t.tags)),
        })
        .collect();
    Ok((format_conll(&out)?, fallbacks))
}

pub(crate) fn cmd_eval(
    pred: &[Vec<String>],
    gold: &[Vec<String>],
    mode: EvalMode,
    report: ReportFormat,
) -> CliResult<String> {
    match mode {
        EvalMode::Chunk => {
            let r = chunk_prf(pred, gold)?;
            Ok(match report {
                ReportFormat::Text => r.render_text(),
                ReportFormat::Kv => r.render_kv(),
            })
        }
        EvalMode::Accuracy => {
            let acc = token_accuracy(pred, gold)?;
            let tokens: usize = gold.iter().map(Vec::len).sum();
            Ok(match report {
                ReportFormat::Text => format!("tokens: {tokens}  accuracy: {:.2}%\n", 100.0 * acc),
                ReportFormat::Kv => format!("tokens={tokens}\naccuracy={acc}\n"),
            })
        }
    }
}
