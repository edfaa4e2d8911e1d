//! IOB2 ⇄ IOBES conversion and span extraction.
//!
//! Span extraction is lenient in the same way the CoNLL evaluation script
//! is: a continuation tag (`I-X`, `E-X`) that does not continue an open
//! chunk of type `X` starts a new chunk instead of being rejected, and a
//! chunk left open by `O`, a different type, or the end of the sentence is
//! closed at the previous token. Tags that are neither `O` nor a
//! `B-`/`I-`/`E-`/`S-` prefixed label are treated as outside.

/// A chunk `kind` covering tokens `start..=end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub kind: String,
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(kind: impl Into<String>, start: usize, end: usize) -> Self {
        Span {
            kind: kind.into(),
            start,
            end,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Prefix {
    B,
    I,
    E,
    S,
}

fn split_tag(tag: &str) -> Option<(Prefix, &str)> {
    let (head, kind) = tag.split_once('-')?;
    let prefix = match head {
        "B" => Prefix::B,
        "I" => Prefix::I,
        "E" => Prefix::E,
        "S" => Prefix::S,
        _ => return None,
    };
    Some((prefix, kind))
}

fn iob_kind(tag: &str) -> Option<(Prefix, &str)> {
    split_tag(tag).filter(|(p, _)| matches!(p, Prefix::B | Prefix::I))
}

/// Converts IOB2 tags to IOBES. Tags that are not `B-`/`I-` labels are
/// copied through unchanged. An `I-X` that does not continue an `X` chunk
/// opens a new one.
pub fn to_iobes<S: AsRef<str>>(iob: &[S]) -> Vec<String> {
    let parsed: Vec<Option<(Prefix, &str)>> = iob.iter().map(|t| iob_kind(t.as_ref())).collect();
    let mut out = Vec::with_capacity(iob.len());
    for (i, tag) in iob.iter().enumerate() {
        let Some((prefix, kind)) = parsed[i] else {
            out.push(tag.as_ref().to_string());
            continue;
        };
        let starts = prefix == Prefix::B
            || !matches!(i.checked_sub(1).and_then(|p| parsed[p]), Some((_, k)) if k == kind);
        let continues =
            matches!(parsed.get(i + 1).copied().flatten(), Some((Prefix::I, k)) if k == kind);
        let head = match (starts, continues) {
            (true, false) => "S",
            (true, true) => "B",
            (false, true) => "I",
            (false, false) => "E",
        };
        out.push(format!("{head}-{kind}"));
    }
    out
}

/// Extracts maximal chunk spans from IOBES (or IOB2) tags, repairing
/// malformed sequences as described in the module docs.
pub fn from_iobes<S: AsRef<str>>(tags: &[S]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(&str, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let parsed = split_tag(tag.as_ref());
        let same_kind =
            |k: &str, open: &Option<(&str, usize)>| matches!(open, Some((o, _)) if *o == k);
        match parsed {
            None => {
                close(&mut spans, &mut open, i);
            }
            Some((Prefix::S, kind)) => {
                close(&mut spans, &mut open, i);
                spans.push(Span::new(kind, i, i));
            }
            Some((Prefix::B, kind)) => {
                close(&mut spans, &mut open, i);
                open = Some((kind, i));
            }
            Some((Prefix::I, kind)) => {
                if !same_kind(kind, &open) {
                    close(&mut spans, &mut open, i);
                    open = Some((kind, i));
                }
            }
            Some((Prefix::E, kind)) => {
                if same_kind(kind, &open) {
                    let (k, start) = open.take().unwrap();
                    spans.push(Span::new(k, start, i));
                } else {
                    close(&mut spans, &mut open, i);
                    spans.push(Span::new(kind, i, i));
                }
            }
        }
    }
    close(&mut spans, &mut open, tags.len());
    spans
}

fn close(spans: &mut Vec<Span>, open: &mut Option<(&str, usize)>, next: usize) {
    if let Some((kind, start)) = open.take() {
        spans.push(Span::new(kind, start, next - 1));
    }
}

/// Renders spans over `len` tokens as IOBES tags.
pub fn spans_to_iobes(spans: &[Span], len: usize) -> Vec<String> {
    let mut out = vec!["O".to_string(); len];
    for s in spans {
        if s.start == s.end {
            out[s.start] = format!("S-{}", s.kind);
        } else {
            out[s.start] = format!("B-{}", s.kind);
            for t in &mut out[s.start + 1..s.end] {
                *t = format!("I-{}", s.kind);
            }
            out[s.end] = format!("E-{}", s.kind);
        }
    }
    out
}

/// Renders spans over `len` tokens as IOB2 tags.
pub fn spans_to_iob2(spans: &[Span], len: usize) -> Vec<String> {
    let mut out = vec!["O".to_string(); len];
    for s in spans {
        out[s.start] = format!("B-{}", s.kind);
        for t in &mut out[s.start + 1..=s.end] {
            *t = format!("I-{}", s.kind);
        }
    }
    out
}

/// IOBES (possibly malformed) back to IOB2, via span extraction.
pub fn iobes_to_iob2<S: AsRef<str>>(tags: &[S]) -> Vec<String> {
    spans_to_iob2(&from_iobes(tags), tags.len())
}
