//! Word error rate and corpus BLEU.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featio::Utterance;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("no utterance pairs to score")]
    NoPairs,
    #[error("every hypothesis is empty")]
    AllEmptyHypotheses,
    #[error("ids differ between references and hypotheses: missing hypotheses {missing_hyp:?}, unexpected hypotheses {extra_hyp:?}")]
    IdMismatch {
        missing_hyp: Vec<String>,
        extra_hyp: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WerReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_length: usize,
    pub wer: f64,
}

impl WerReport {
    fn from_counts(substitutions: usize, deletions: usize, insertions: usize, reference_length: usize) -> Self {
        Self {
            substitutions,
            deletions,
            insertions,
            reference_length,
            wer: (substitutions + deletions + insertions) as f64 / reference_length as f64,
        }
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// One step of a minimum-edit alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match,
    Substitute,
    Insert,
    Delete,
}

/// Minimum-edit alignment with unit costs, reference order. On equal cost
/// the backtrace takes the diagonal first, then insertion, then deletion.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Vec<EditOp> {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut cost = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        cost[j] = j;
    }
    for i in 1..=n {
        cost[i * w] = i;
        for j in 1..=m {
            let sub = cost[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let ins = cost[i * w + j - 1] + 1;
            let del = cost[(i - 1) * w + j] + 1;
            cost[i * w + j] = sub.min(ins).min(del);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if here == cost[(i - 1) * w + j - 1] + usize::from(!same) {
                ops.push(if same { EditOp::Match } else { EditOp::Substitute });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && here == cost[i * w + j - 1] + 1 {
            ops.push(EditOp::Insert);
            j -= 1;
        } else {
            ops.push(EditOp::Delete);
            i -= 1;
        }
    }
    ops.reverse();
    ops
}

pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<WerReport, MetricsError> {
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let (mut s, mut d, mut ins) = (0, 0, 0);
    for op in align(reference, hypothesis) {
        match op {
            EditOp::Match => {}
            EditOp::Substitute => s += 1,
            EditOp::Delete => d += 1,
            EditOp::Insert => ins += 1,
        }
    }
    Ok(WerReport::from_counts(s, d, ins, reference.len()))
}

/// Pooled WER: edit counts and reference lengths are summed before dividing.
pub fn corpus_wer<T: PartialEq, R: AsRef<[T]>>(pairs: &[(R, R)]) -> Result<WerReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::NoPairs);
    }
    let (mut s, mut d, mut i, mut n) = (0, 0, 0, 0);
    for (r, h) in pairs {
        let rep = wer(r.as_ref(), h.as_ref())?;
        s += rep.substitutions;
        d += rep.deletions;
        i += rep.insertions;
        n += rep.reference_length;
    }
    Ok(WerReport::from_counts(s, d, i, n))
}

/// Mean of per-utterance WER values.
pub fn mean_utterance_wer<T: PartialEq, R: AsRef<[T]>>(pairs: &[(R, R)]) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::NoPairs);
    }
    let mut total = 0.0;
    for (r, h) in pairs {
        total += wer(r.as_ref(), h.as_ref())?.wer;
    }
    Ok(total / pairs.len() as f64)
}

/// Numerator used in place of a zero n-gram match count for the smoothed score.
pub const BLEU_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    /// Unsmoothed clipped precisions `p_1..p_N`.
    pub precisions: Vec<f64>,
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub brevity_penalty: f64,
    /// Unsmoothed: zero whenever any `p_n` is zero.
    pub bleu: f64,
    /// Zero match counts replaced by [`BLEU_EPSILON`].
    pub bleu_smoothed: f64,
    pub hyp_length: usize,
    pub ref_length: usize,
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if n > 0 {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus BLEU with one reference per hypothesis: clipped n-gram counts are
/// pooled over the corpus for `n = 1..=max_n`, combined by a uniform
/// geometric mean and scaled by the brevity penalty.
pub fn corpus_bleu<T: Eq + Hash, R: AsRef<[T]>>(pairs: &[(R, R)], max_n: usize) -> Result<BleuReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::NoPairs);
    }
    let mut matches = vec![0u64; max_n];
    let mut totals = vec![0u64; max_n];
    let (mut hyp_length, mut ref_length) = (0, 0);
    for (r, h) in pairs {
        let (r, h) = (r.as_ref(), h.as_ref());
        hyp_length += h.len();
        ref_length += r.len();
        for n in 1..=max_n {
            let ref_counts = ngram_counts(r, n);
            for (g, c) in ngram_counts(h, n) {
                matches[n - 1] += c.min(ref_counts.get(g).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }
    if hyp_length == 0 {
        return Err(MetricsError::AllEmptyHypotheses);
    }

    let precisions: Vec<f64> = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if hyp_length < ref_length {
        (1.0 - ref_length as f64 / hyp_length as f64).exp()
    } else {
        1.0
    };
    let geo = |ps: &[f64]| (ps.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64).exp();
    let bleu = if precisions.contains(&0.0) {
        0.0
    } else {
        brevity_penalty * geo(&precisions)
    };
    let smoothed: Vec<f64> = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| {
            let num = if m == 0 { BLEU_EPSILON } else { m as f64 };
            num / t.max(1) as f64
        })
        .collect();
    Ok(BleuReport {
        precisions,
        matches,
        totals,
        brevity_penalty,
        bleu,
        bleu_smoothed: brevity_penalty * geo(&smoothed),
        hyp_length,
        ref_length,
    })
}

/// Lowercases and drops punctuation; tokens left empty are removed.
pub fn normalize_tokens<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            t.as_ref()
                .chars()
                .filter(|c| c.is_alphanumeric() || c.is_whitespace())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Splits every token into single characters (for unsegmented scripts).
pub fn char_tokens<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .flat_map(|t| t.as_ref().chars().filter(|c| !c.is_whitespace()).map(String::from).collect::<Vec<_>>())
        .collect()
}

/// A reference/hypothesis token pair.
pub type TokenPair = (Vec<String>, Vec<String>);

/// Pairs references with hypotheses by id, in reference order.
pub fn pair_by_id(refs: &[Utterance], hyps: &[Utterance]) -> Result<Vec<TokenPair>, MetricsError> {
    let by_id: HashMap<&str, &Utterance> = hyps.iter().map(|u| (u.id.as_str(), u)).collect();
    let missing_hyp: Vec<String> = refs
        .iter()
        .filter(|r| !by_id.contains_key(r.id.as_str()))
        .map(|r| r.id.clone())
        .collect();
    let ref_ids: std::collections::HashSet<&str> = refs.iter().map(|u| u.id.as_str()).collect();
    let extra_hyp: Vec<String> = hyps
        .iter()
        .filter(|h| !ref_ids.contains(h.id.as_str()))
        .map(|h| h.id.clone())
        .collect();
    if !missing_hyp.is_empty() || !extra_hyp.is_empty() {
        return Err(MetricsError::IdMismatch { missing_hyp, extra_hyp });
    }
    Ok(refs
        .iter()
        .map(|r| (r.tokens.clone(), by_id[r.id.as_str()].tokens.clone()))
        .collect())
}
