//! Evaluation metrics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::Hash;

use crate::error::{Error, Result};
use crate::tree::PartialTree;

/// Clipping counts and lengths of a reference set.
#[derive(Clone, Debug)]
pub struct NGramIndex<T> {
    max_n: usize,
    /// Highest count of each n-gram in any single reference.
    counts: HashMap<Vec<T>, usize>,
    /// Sorted reference lengths.
    lengths: Vec<usize>,
}

fn ngram_counts<T: Clone + Eq + Hash>(tokens: &[T], n: usize) -> HashMap<Vec<T>, usize> {
    let mut m = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    m
}

impl<T: Clone + Eq + Hash> NGramIndex<T> {
    pub fn new(references: &[Vec<T>], max_n: usize) -> Result<Self> {
        if references.is_empty() {
            return Err(Error::Config("BLEU needs at least one reference".into()));
        }
        let mut counts: HashMap<Vec<T>, usize> = HashMap::new();
        for r in references {
            for n in 1..=max_n {
                for (g, c) in ngram_counts(r, n) {
                    let e = counts.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
        }
        let mut lengths: Vec<usize> = references.iter().map(Vec::len).collect();
        lengths.sort_unstable();
        Ok(NGramIndex { max_n, counts, lengths })
    }

    /// Reference length closest to `c`; the shorter one on ties.
    pub fn closest_len(&self, c: usize) -> usize {
        let i = self.lengths.partition_point(|&l| l < c);
        let above = self.lengths.get(i).copied();
        let below = i.checked_sub(1).map(|j| self.lengths[j]);
        match (below, above) {
            (Some(b), Some(a)) if c - b <= a - c => b,
            (_, Some(a)) => a,
            (Some(b), None) => b,
            (None, None) => 0,
        }
    }

    /// Clipped matches of order `n` in `hyp`.
    fn clipped(&self, hyp: &[T], n: usize) -> usize {
        ngram_counts(hyp, n)
            .into_iter()
            .map(|(g, c)| c.min(self.counts.get(&g).copied().unwrap_or(0)))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bleu {
    /// In `[0, 100]`.
    pub score: f64,
    pub brevity_penalty: f64,
    pub precisions: Vec<f64>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn corpus_bleu<'a, T: Clone + Eq + Hash + 'a>(
    hyps: &[Vec<T>],
    max_n: usize,
    index: impl Fn(usize) -> &'a NGramIndex<T>,
) -> Result<Bleu> {
    if hyps.is_empty() {
        return Err(Error::EmptyHypotheses);
    }
    if max_n == 0 {
        return Err(Error::Config("BLEU order must be at least 1".into()));
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for (i, h) in hyps.iter().enumerate() {
        let idx = index(i);
        if idx.max_n < max_n {
            return Err(Error::Config(format!("index built for order {}, asked for {max_n}", idx.max_n)));
        }
        c += h.len();
        r += idx.closest_len(h.len());
        for n in 1..=max_n {
            matches[n - 1] += idx.clipped(h, n);
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    let precisions: Vec<f64> = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let bp = if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let score = if precisions.iter().any(|&p| p == 0.0) {
        log::warn!("an n-gram precision is zero; corpus BLEU is 0");
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        100.0 * bp * log_mean.exp()
    };
    Ok(Bleu {
        score,
        brevity_penalty: bp,
        precisions,
        hyp_len: c,
        ref_len: r,
    })
}

/// Corpus BLEU where hypothesis `i` is scored against `references[i]`.
pub fn bleu<T: Clone + Eq + Hash>(hyps: &[Vec<T>], references: &[Vec<Vec<T>>], max_n: usize) -> Result<Bleu> {
    if hyps.len() != references.len() {
        return Err(Error::Config(format!(
            "{} hypotheses but {} reference sets",
            hyps.len(),
            references.len()
        )));
    }
    let indices: Vec<NGramIndex<T>> = references
        .iter()
        .map(|r| NGramIndex::new(r, max_n))
        .collect::<Result<_>>()?;
    corpus_bleu(hyps, max_n, |i| &indices[i])
}

/// Corpus BLEU with one shared reference set for every hypothesis.
pub fn bleu_shared<T: Clone + Eq + Hash>(hyps: &[Vec<T>], index: &NGramIndex<T>, max_n: usize) -> Result<Bleu> {
    corpus_bleu(hyps, max_n, |_| index)
}

/// Multiset-overlap F1. Two empty sequences score 1.
pub fn token_f1<T: Eq + Hash>(pred: &[T], reference: &[T]) -> f64 {
    if pred.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for t in reference {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / pred.len() as f64;
    let r = overlap as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

pub fn exact_match<T: PartialEq>(pred: &[T], reference: &[T]) -> bool {
    pred == reference
}

/// Fraction of exact matches over paired sequences.
pub fn exact_match_rate<T: PartialEq>(preds: &[Vec<T>], references: &[Vec<T>]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let hits = preds.iter().zip(references).filter(|(p, r)| exact_match(p, r)).count();
    hits as f64 / preds.len() as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleStats {
    /// Fraction of samples absent from the training set.
    pub frac_novel: f64,
    /// Distinct samples divided by the number of samples.
    pub frac_unique: f64,
    pub avg_tokens: f64,
    /// Mean average span over trees where it is defined.
    pub avg_span: Option<f64>,
}

pub fn sample_stats<T: Clone + Eq + Hash>(
    sentences: &[Vec<T>],
    trees: &[PartialTree],
    training: &HashSet<Vec<T>>,
) -> Result<SampleStats> {
    let n = sentences.len().max(1) as f64;
    let novel = sentences.iter().filter(|s| !training.contains(*s)).count();
    let unique: HashSet<&Vec<T>> = sentences.iter().collect();
    let tokens: usize = sentences.iter().map(Vec::len).sum();
    let mut spans = Vec::new();
    for t in trees {
        if let Some(s) = t.average_span()? {
            spans.push(s);
        }
    }
    Ok(SampleStats {
        frac_novel: novel as f64 / n,
        frac_unique: unique.len() as f64 / n,
        avg_tokens: tokens as f64 / n,
        avg_span: (!spans.is_empty()).then(|| spans.iter().sum::<f64>() / spans.len() as f64),
    })
}

/// Entropy of a distribution, normalised by the log of its support size.
pub fn normalized_entropy(dist: &[f32]) -> f64 {
    if dist.len() < 2 {
        return 0.0;
    }
    let h: f64 = dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -f64::from(p) * f64::from(p).ln())
        .sum();
    (h / (dist.len() as f64).ln()).clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthEntropy {
    pub depth: usize,
    pub entropy: f64,
    pub count: usize,
}

/// Mean normalised entropy of the policy at each tree depth.
pub fn entropy_by_depth<'a>(nodes: impl IntoIterator<Item = (usize, &'a [f32])>) -> Vec<DepthEntropy> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (depth, dist) in nodes {
        let e = acc.entry(depth).or_insert((0.0, 0));
        e.0 += normalized_entropy(dist);
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(depth, (sum, count))| DepthEntropy {
            depth,
            entropy: sum / count as f64,
            count,
        })
        .collect()
}
