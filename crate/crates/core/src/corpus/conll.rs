//! CoNLL column format: whitespace-separated columns, token in the first
//! column, tag in the last, one blank line between sentences. Lines
//! starting with `-DOCSTART-` are document separators and are skipped.

use std::fs;
use std::path::Path;

use super::TaggedSentence;
use crate::error::{Error, Result};

/// Parses CoNLL text. A sentence whose lines all have a single column is
/// read as untagged.
pub fn parse_conll(text: &str) -> Result<Vec<TaggedSentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut tags: Vec<String> = Vec::new();
    let mut columns: Option<usize> = None;

    let mut flush =
        |tokens: &mut Vec<String>, tags: &mut Vec<String>, columns: &mut Option<usize>| {
            if tokens.is_empty() {
                return;
            }
            let toks = std::mem::take(tokens);
            let tg = std::mem::take(tags);
            let tagged = columns.take().is_some_and(|c| c > 1);
            sentences.push(TaggedSentence {
                tokens: toks,
                tags: tagged.then_some(tg),
            });
        };

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            flush(&mut tokens, &mut tags, &mut columns);
            continue;
        }
        if line.starts_with("-DOCSTART-") {
            flush(&mut tokens, &mut tags, &mut columns);
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match columns {
            None => columns = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(Error::parse(
                    lineno + 1,
                    format!("expected {c} columns, found {}", fields.len()),
                ));
            }
            Some(_) => {}
        }
        tokens.push(fields[0].to_string());
        tags.push(fields[fields.len() - 1].to_string());
    }
    flush(&mut tokens, &mut tags, &mut columns);
    Ok(sentences)
}

pub fn read_conll(path: &Path) -> Result<Vec<TaggedSentence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conll(&text)
}

/// Renders sentences as two-column CoNLL (one column when untagged).
pub fn format_conll(sentences: &[TaggedSentence]) -> Result<String> {
    let mut out = String::new();
    for (s_idx, s) in sentences.iter().enumerate() {
        s.validate()?;
        for (i, tok) in s.tokens.iter().enumerate() {
            check_field(tok, s_idx)?;
            out.push_str(tok);
            if let Some(tags) = &s.tags {
                check_field(&tags[i], s_idx)?;
                out.push(' ');
                out.push_str(&tags[i]);
            }
            out.push('\n');
        }
        out.push('\n');
    }
    Ok(out)
}

fn check_field(field: &str, sentence: usize) -> Result<()> {
    if field.is_empty() || field.chars().any(char::is_whitespace) || field.starts_with("-DOCSTART-")
    {
        return Err(Error::invalid(format!(
            "sentence {sentence}: field {field:?} cannot be written as a CoNLL column"
        )));
    }
    Ok(())
}

pub fn write_conll(sentences: &[TaggedSentence], path: &Path) -> Result<()> {
    let text = format_conll(sentences)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_line_file() {
        let s = parse_conll("He PRP\nruns VBZ\n\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens, vec!["He", "runs"]);
        assert_eq!(
            s[0].tags.as_deref(),
            Some(&["PRP".to_string(), "VBZ".to_string()][..])
        );
    }

    #[test]
    fn empty_file() {
        assert!(parse_conll("").unwrap().is_empty());
        assert!(parse_conll("\n\n  \n").unwrap().is_empty());
    }

    #[test]
    fn last_column_is_tag() {
        let s = parse_conll("Confidence NN B-NP\nin IN B-PP\n").unwrap();
        assert_eq!(
            s[0].tags.as_ref().unwrap(),
            &vec!["B-NP".to_string(), "B-PP".to_string()]
        );
    }

    #[test]
    fn untagged_input() {
        let s = parse_conll("a\nb\n\nc\n").unwrap();
        assert_eq!(s.len(), 2);
        assert!(s[0].tags.is_none());
    }

    #[test]
    fn ragged_lines_report_line_number() {
        let err = parse_conll("a X\nb Y\n\nc X Z\nd Y\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn docstart_skipped() {
        let s = parse_conll("-DOCSTART- -X- O O\n\nEU B-ORG\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens, vec!["EU"]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.conll");
        let sents = parse_conll("He PRP\nruns VBZ\n\nok UH\n").unwrap();
        write_conll(&sents, &path).unwrap();
        assert_eq!(read_conll(&path).unwrap(), sents);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_conll(Path::new("/nonexistent/x.conll")),
            Err(Error::Io { .. })
        ));
    }

    fn field() -> impl Strategy<Value = String> {
        "[A-Za-z0-9.,#éß-]{1,8}".prop_filter("not a docstart", |s| !s.starts_with("-DOCSTART-"))
    }

    proptest! {
        #[test]
        fn write_then_read_is_identity(
            sents in proptest::collection::vec(
                proptest::collection::vec((field(), field()), 1..8), 0..6)
        ) {
            let sentences: Vec<TaggedSentence> = sents
                .into_iter()
                .map(|pairs| {
                    let (tokens, tags): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                    TaggedSentence { tokens, tags: Some(tags) }
                })
                .collect();
            let text = format_conll(&sentences).unwrap();
            prop_assert_eq!(parse_conll(&text).unwrap(), sentences);
        }
    }
}
