//! Token accuracy and exact-match chunk precision / recall / F1.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use crate::corpus::from_iobes;
use crate::error::{Error, Result};

/// Chunk counts for one chunk type (or overall).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChunkCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl ChunkCounts {
    /// `(precision, recall, f1)` in percent; 0 wherever a denominator is 0.
    pub fn prf(&self) -> (f64, f64, f64) {
        let ratio = |a: usize, b: usize| {
            if b == 0 {
                0.0
            } else {
                100.0 * a as f64 / b as f64
            }
        };
        let p = ratio(self.correct, self.predicted);
        let r = ratio(self.correct, self.gold);
        let f = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        (p, r, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Fraction of tokens whose tag matches exactly, in `[0, 1]`.
    pub token_accuracy: f64,
    pub tokens: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ChunkCounts,
    pub per_type: BTreeMap<String, ChunkCounts>,
}

impl EvalReport {
    /// Aligned human-readable table.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "tokens: {}  accuracy: {:.2}%",
            self.tokens,
            100.0 * self.token_accuracy
        );
        let _ = writeln!(
            s,
            "chunks: gold {}  predicted {}  correct {}",
            self.counts.gold, self.counts.predicted, self.counts.correct
        );
        let _ = writeln!(
            s,
            "{:<12} {:>9} {:>9} {:>9}",
            "type", "precision", "recall", "F1"
        );
        let _ = writeln!(
            s,
            "{:<12} {:>9.2} {:>9.2} {:>9.2}",
            "overall", self.precision, self.recall, self.f1
        );
        for (kind, c) in &self.per_type {
            let (p, r, f) = c.prf();
            let _ = writeln!(s, "{kind:<12} {p:>9.2} {r:>9.2} {f:>9.2}");
        }
        s
    }

    /// `key=value` lines.
    pub fn render_kv(&self) -> String {
        format!(
            "tokens={}\naccuracy={}\nprecision={}\nrecall={}\nf1={}\ngold_chunks={}\npredicted_chunks={}\ncorrect_chunks={}\n",
            self.tokens,
            self.token_accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.counts.gold,
            self.counts.predicted,
            self.counts.correct
        )
    }
}

fn check_shapes<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>]) -> Result<usize> {
    if pred.len() != gold.len() {
        return Err(Error::shape(
            "evaluation",
            format!(
                "{} predicted sentences vs {} gold sentences",
                pred.len(),
                gold.len()
            ),
        ));
    }
    let mut tokens = 0;
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::shape(
                "evaluation",
                format!(
                    "sentence {i}: {} predicted tags vs {} gold tags",
                    p.len(),
                    g.len()
                ),
            ));
        }
        tokens += g.len();
    }
    Ok(tokens)
}

/// Exact tag matches over all tokens.
pub fn token_accuracy<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>]) -> Result<f64> {
    let tokens = check_shapes(pred, gold)?;
    if tokens == 0 {
        return Err(Error::invalid("accuracy of an empty corpus is undefined"));
    }
    let correct = pred
        .iter()
        .zip(gold)
        .flat_map(|(p, g)| p.iter().zip(g))
        .filter(|(a, b)| a.as_ref() == b.as_ref())
        .count();
    Ok(correct as f64 / tokens as f64)
}

/// Chunk-level scores. A predicted chunk counts only when its type, start
/// and end all match a gold chunk in the same sentence. Spans come from
/// [`from_iobes`], which also reads IOB2.
pub fn chunk_prf<S: AsRef<str>>(pred: &[Vec<S>], gold: &[Vec<S>]) -> Result<EvalReport> {
    let tokens = check_shapes(pred, gold)?;
    let mut counts = ChunkCounts::default();
    let mut per_type: BTreeMap<String, ChunkCounts> = BTreeMap::new();
    let mut matches = 0;
    for (p, g) in pred.iter().zip(gold) {
        let ps = from_iobes(p);
        let gs = from_iobes(g);
        let gold_set: HashSet<_> = gs.iter().collect();
        for s in &gs {
            per_type.entry(s.kind.clone()).or_default().gold += 1;
        }
        for s in &ps {
            let c = per_type.entry(s.kind.clone()).or_default();
            c.predicted += 1;
            if gold_set.contains(s) {
                c.correct += 1;
                counts.correct += 1;
            }
        }
        counts.gold += gs.len();
        counts.predicted += ps.len();
        matches += p
            .iter()
            .zip(g)
            .filter(|(a, b)| a.as_ref() == b.as_ref())
            .count();
    }
    let (precision, recall, f1) = counts.prf();
    Ok(EvalReport {
        token_accuracy: if tokens == 0 {
            0.0
        } else {
            matches as f64 / tokens as f64
        },
        tokens,
        precision,
        recall,
        f1,
        counts,
        per_type,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn accuracy_cases() {
        let g = vec![v("A B C D")];
        assert_eq!(token_accuracy(&g, &g).unwrap(), 1.0);
        assert_eq!(token_accuracy(&[v("A B X X")], &g).unwrap(), 0.5);
        assert!(token_accuracy::<String>(&[], &[]).is_err());
        assert!(token_accuracy(&[v("A")], &g).is_err());
        assert!(token_accuracy(&[v("A"), v("B")], &g).is_err());
    }

    #[test]
    fn perfect_chunks() {
        let g = vec![v("B-NP E-NP O S-VP")];
        let r = chunk_prf(&g, &g).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (100.0, 100.0, 100.0));
        assert_eq!(r.token_accuracy, 1.0);
    }

    #[test]
    fn one_of_two() {
        let g = vec![v("B-NP E-NP O S-VP")];
        let p = vec![v("B-NP E-NP S-VP O")];
        let r = chunk_prf(&p, &g).unwrap();
        assert_eq!(
            r.counts,
            ChunkCounts {
                gold: 2,
                predicted: 2,
                correct: 1
            }
        );
        assert_eq!((r.precision, r.recall, r.f1), (50.0, 50.0, 50.0));
    }

    #[test]
    fn all_outside_prediction() {
        let g = vec![v("B-NP E-NP O")];
        let p = vec![v("O O O")];
        let r = chunk_prf(&p, &g).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn partial_overlap_earns_nothing() {
        let r = chunk_prf(&[v("B-NP I-NP E-NP")], &[v("B-NP E-NP O")]).unwrap();
        assert_eq!(r.counts.correct, 0);
    }

    #[test]
    fn swap_exchanges_precision_and_recall() {
        let a = vec![v("B-NP E-NP O S-VP S-NP"), v("O S-NP")];
        let b = vec![v("B-NP E-NP S-VP O O"), v("O S-NP")];
        let ab = chunk_prf(&a, &b).unwrap();
        let ba = chunk_prf(&b, &a).unwrap();
        assert_eq!(ab.precision, ba.recall);
        assert_eq!(ab.recall, ba.precision);
        assert_eq!(ab.f1, ba.f1);
    }

    #[test]
    fn per_type_counts() {
        let r = chunk_prf(&[v("S-NP S-VP")], &[v("S-NP S-NP")]).unwrap();
        assert_eq!(
            r.per_type["NP"],
            ChunkCounts {
                gold: 2,
                predicted: 1,
                correct: 1
            }
        );
        assert_eq!(
            r.per_type["VP"],
            ChunkCounts {
                gold: 0,
                predicted: 1,
                correct: 0
            }
        );
    }

    #[test]
    fn renderings() {
        let g = vec![v("B-NP E-NP O")];
        let r = chunk_prf(&g, &g).unwrap();
        let kv = r.render_kv();
        assert!(
            kv.contains("f1=100\n") && kv.contains("gold_chunks=1\n"),
            "{kv}"
        );
        assert!(r.render_text().contains("overall"));
    }
}
