//! Tag-sequence decoding over network output.
//!
//! A path `y` through a sentence of `n` tokens scores
//!
//! ```text
//! start[y_0] · o_0[y_0] · Π_{t≥1} A[y_{t−1}][y_t] · o_t[y_t] · end[y_{n−1}]
//! ```
//!
//! where `A`, `start` and `end` are 0/1 indicators harvested from the
//! training tag sequences. Viterbi maximizes this product in log space.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::network::ProbMatrix;

/// Binary bigram validity plus sentence-initial and sentence-final masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMatrix {
    tags: usize,
    allowed: Vec<bool>,
    start: Vec<bool>,
    end: Vec<bool>,
}

impl TransitionMatrix {
    /// Every transition, start and end allowed.
    pub fn all_ones(tags: usize) -> Self {
        TransitionMatrix {
            tags,
            allowed: vec![true; tags * tags],
            start: vec![true; tags],
            end: vec![true; tags],
        }
    }

    pub fn from_parts(
        tags: usize,
        allowed: Vec<bool>,
        start: Vec<bool>,
        end: Vec<bool>,
    ) -> Result<Self> {
        if allowed.len() != tags * tags || start.len() != tags || end.len() != tags {
            return Err(Error::shape(
                "TransitionMatrix::from_parts",
                format!(
                    "{tags} tags need {} transitions and {tags}-long start/end",
                    tags * tags
                ),
            ));
        }
        Ok(TransitionMatrix {
            tags,
            allowed,
            start,
            end,
        })
    }

    pub fn num_tags(&self) -> usize {
        self.tags
    }

    #[inline]
    pub fn allowed(&self, from: usize, to: usize) -> bool {
        self.allowed[from * self.tags + to]
    }

    #[inline]
    pub fn start(&self, tag: usize) -> bool {
        self.start[tag]
    }

    #[inline]
    pub fn end(&self, tag: usize) -> bool {
        self.end[tag]
    }

    /// Drops the sentence-final constraint (every tag may end a sentence).
    pub fn without_end_constraint(mut self) -> Self {
        self.end.fill(true);
        self
    }

    /// Text dump: a header row of tag names, one 0/1 row per source tag,
    /// then `start` and `end` rows.
    pub fn to_text(&self, names: &[String]) -> Result<Vec<String>> {
        if names.len() != self.tags {
            return Err(Error::shape(
                "TransitionMatrix::to_text",
                format!("{} names for {} tags", names.len(), self.tags),
            ));
        }
        let bit = |b: bool| if b { '1' } else { '0' };
        let row = |label: &str, bits: &mut dyn Iterator<Item = bool>| {
            let mut s = label.to_string();
            for b in bits {
                s.push(' ');
                s.push(bit(b));
            }
            s
        };
        let mut lines = Vec::with_capacity(self.tags + 3);
        let mut header = String::from("-");
        for n in names {
            let _ = write!(header, " {n}");
        }
        lines.push(header);
        for (i, name) in names.iter().enumerate() {
            lines.push(row(name, &mut (0..self.tags).map(|j| self.allowed(i, j))));
        }
        lines.push(row("start", &mut self.start.iter().copied()));
        lines.push(row("end", &mut self.end.iter().copied()));
        Ok(lines)
    }

    /// Parses [`TransitionMatrix::to_text`] output; `names` must match the
    /// header.
    pub fn parse<S: AsRef<str>>(lines: &[S], names: &[String]) -> Result<Self> {
        let m = names.len();
        if lines.len() != m + 3 {
            return Err(Error::parse(
                lines.len(),
                format!(
                    "transition dump needs {} lines, found {}",
                    m + 3,
                    lines.len()
                ),
            ));
        }
        let header: Vec<&str> = lines[0].as_ref().split_whitespace().skip(1).collect();
        if header != names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::parse(
                1,
                "transition header does not match the tag set",
            ));
        }
        let parse_row = |idx: usize, label: &str| -> Result<Vec<bool>> {
            let mut f = lines[idx].as_ref().split_whitespace();
            if f.next() != Some(label) {
                return Err(Error::parse(idx + 1, format!("expected row {label:?}")));
            }
            let bits = f
                .map(|b| match b {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    _ => Err(Error::parse(
                        idx + 1,
                        format!("transition entry {b:?} is not 0/1"),
                    )),
                })
                .collect::<Result<Vec<_>>>()?;
            if bits.len() != m {
                return Err(Error::parse(idx + 1, format!("expected {m} entries")));
            }
            Ok(bits)
        };
        let mut allowed = Vec::with_capacity(m * m);
        for (i, name) in names.iter().enumerate() {
            allowed.extend(parse_row(i + 1, name)?);
        }
        let start = parse_row(m + 1, "start")?;
        let end = parse_row(m + 2, "end")?;
        TransitionMatrix::from_parts(m, allowed, start, end)
    }
}

/// Marks every observed bigram, sentence-initial tag and sentence-final tag.
pub fn build_transitions(sequences: &[Vec<usize>], tags: usize) -> Result<TransitionMatrix> {
    if sequences.iter().all(Vec::is_empty) {
        return Err(Error::invalid(
            "cannot build transitions from an empty corpus",
        ));
    }
    let mut tm = TransitionMatrix {
        tags,
        allowed: vec![false; tags * tags],
        start: vec![false; tags],
        end: vec![false; tags],
    };
    for seq in sequences.iter().filter(|s| !s.is_empty()) {
        if let Some(&bad) = seq.iter().find(|&&t| t >= tags) {
            return Err(Error::invalid(format!(
                "tag index {bad} out of range for {tags} tags"
            )));
        }
        tm.start[seq[0]] = true;
        tm.end[seq[seq.len() - 1]] = true;
        for w in seq.windows(2) {
            tm.allowed[w[0] * tags + w[1]] = true;
        }
    }
    Ok(tm)
}

/// Product-form score of `path`; 0 when any factor is 0.
pub fn sentence_score(probs: &ProbMatrix, path: &[usize], transitions: &TransitionMatrix) -> f64 {
    if path.len() != probs.len() || path.is_empty() {
        return 0.0;
    }
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let mut score = ind(transitions.start(path[0])) * probs.get(0, path[0]);
    for t in 1..path.len() {
        score *= ind(transitions.allowed(path[t - 1], path[t])) * probs.get(t, path[t]);
    }
    score * ind(transitions.end(path[path.len() - 1]))
}

/// Log of [`sentence_score`], `−∞` for zero scores.
pub fn log_sentence_score(
    probs: &ProbMatrix,
    path: &[usize],
    transitions: &TransitionMatrix,
) -> f64 {
    if path.len() != probs.len() || path.is_empty() {
        return f64::NEG_INFINITY;
    }
    let lg = |b: bool| if b { 0.0 } else { f64::NEG_INFINITY };
    let mut s = lg(transitions.start(path[0])) + probs.get(0, path[0]).ln();
    for t in 1..path.len() {
        s += lg(transitions.allowed(path[t - 1], path[t])) + probs.get(t, path[t]).ln();
    }
    s + lg(transitions.end(path[path.len() - 1]))
}

/// Result of [`viterbi`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub path: Vec<usize>,
    /// Set when no path had a non-zero score and greedy decoding was used.
    pub fallback: bool,
}

/// Per-row argmax; ties go to the lower index.
pub fn greedy_decode(probs: &ProbMatrix) -> Vec<usize> {
    (0..probs.len()).map(|t| argmax(probs.row(t))).collect()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Highest-scoring path under the transition constraints, or the greedy
/// path (flagged) when every path scores zero. Ties resolve toward lower
/// tag indices.
pub fn viterbi(probs: &ProbMatrix, transitions: &TransitionMatrix) -> Decoded {
    let n = probs.len();
    let m = probs.num_tags();
    debug_assert_eq!(m, transitions.num_tags());
    if n == 0 {
        return Decoded {
            path: Vec::new(),
            fallback: false,
        };
    }
    let neg = f64::NEG_INFINITY;
    let mut delta: Vec<f64> = (0..m)
        .map(|j| {
            if transitions.start(j) {
                probs.get(0, j).ln()
            } else {
                neg
            }
        })
        .collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(n.saturating_sub(1));
    for t in 1..n {
        let mut next = vec![neg; m];
        let mut ptr = vec![0usize; m];
        for j in 0..m {
            let mut best = neg;
            let mut arg = 0;
            for (i, &d) in delta.iter().enumerate() {
                if transitions.allowed(i, j) && d > best {
                    best = d;
                    arg = i;
                }
            }
            next[j] = best + probs.get(t, j).ln();
            ptr[j] = arg;
        }
        back.push(ptr);
        delta = next;
    }
    let mut best = neg;
    let mut last = 0;
    for (j, &d) in delta.iter().enumerate() {
        if transitions.end(j) && d > best {
            best = d;
            last = j;
        }
    }
    if best == neg {
        return Decoded {
            path: greedy_decode(probs),
            fallback: true,
        };
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t - 1][path[t]];
    }
    Decoded {
        path,
        fallback: false,
    }
}
