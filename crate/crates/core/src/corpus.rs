//! Corpus-level token accounting and compression-factor sweeps.

use serde::{Deserialize, Serialize};

use crate::compress::{CompressError, CompressionOutcome, Compressor};
use crate::costmodel::{attention_cost, CostError, LlmShape};
use crate::featio::FeatureSequence;

/// Totals over a set of compressed sequences.
///
/// `output_rate` is the duration-weighted mean of per-sequence output rates,
/// which for a single input rate equals total output tokens per second of
/// audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusAccounting {
    pub files: usize,
    pub input_tokens: usize,
    pub output_tokens: usize,
    pub duration_secs: f64,
    pub input_rate: f64,
    pub output_rate: f64,
    pub compression_factor: f64,
}

impl CorpusAccounting {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a CompressionOutcome>) -> Option<Self> {
        let mut acc = Self {
            files: 0,
            input_tokens: 0,
            output_tokens: 0,
            duration_secs: 0.0,
            input_rate: 0.0,
            output_rate: 0.0,
            compression_factor: 0.0,
        };
        let (mut in_weighted, mut out_weighted) = (0.0, 0.0);
        for o in outcomes {
            let dur = o.input_tokens as f64 / o.input_rate;
            acc.files += 1;
            acc.input_tokens += o.input_tokens;
            acc.output_tokens += o.output_tokens;
            acc.duration_secs += dur;
            in_weighted += o.input_rate * dur;
            out_weighted += o.output_rate * dur;
        }
        if acc.files == 0 {
            return None;
        }
        acc.input_rate = in_weighted / acc.duration_secs;
        acc.output_rate = out_weighted / acc.duration_secs;
        acc.compression_factor = acc.input_tokens as f64 / acc.output_tokens as f64;
        Some(acc)
    }
}

/// One sweep point: a compressor family at one factor over the whole corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub k: usize,
    pub input_tokens: usize,
    pub tokens: usize,
    pub tok_per_s: f64,
    /// Summed per-sequence attention cost at the compressed lengths.
    pub flops: f64,
    /// Attention cost of the uncompressed corpus over `flops`.
    pub savings_vs_baseline: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("no input sequences")]
    NoInputs,
    #[error("no compression factors given")]
    NoFactors,
    #[error("sweep family must be uniavg or unisamp, got `{0}`")]
    Family(String),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Runs every `family` at every factor in `factors` over `seqs`. Rows come
/// out grouped by family, factors in the given order.
pub fn sweep(seqs: &[FeatureSequence], families: &[&str], factors: &[usize], shape: &LlmShape) -> Result<Vec<SweepRow>, SweepError> {
    if seqs.is_empty() {
        return Err(SweepError::NoInputs);
    }
    if factors.is_empty() {
        return Err(SweepError::NoFactors);
    }
    let cost_of = |tokens: usize| attention_cost(&shape.with_audio_tokens(tokens));
    let baseline: f64 = seqs.iter().map(|s| cost_of(s.len())).sum();
    let mut rows = Vec::with_capacity(families.len() * factors.len());
    for &family in families {
        if !matches!(family, "uniavg" | "unisamp") {
            return Err(SweepError::Family(family.to_string()));
        }
        for &k in factors {
            let compressor = Compressor::from_parts(family, Some(k))?;
            let outcomes = seqs
                .iter()
                .map(|s| compressor.apply(s))
                .collect::<Result<Vec<_>, _>>()?;
            let acc = CorpusAccounting::from_outcomes(&outcomes).expect("non-empty corpus");
            let flops: f64 = outcomes.iter().map(|o| cost_of(o.output_tokens)).sum();
            let savings = if flops == baseline {
                1.0
            } else if flops == 0.0 {
                return Err(CostError::EmptyAfter.into());
            } else {
                baseline / flops
            };
            rows.push(SweepRow {
                family: family.to_string(),
                k,
                input_tokens: acc.input_tokens,
                tokens: acc.output_tokens,
                tok_per_s: acc.output_rate,
                flops,
                savings_vs_baseline: savings,
            });
        }
    }
    Ok(rows)
}
