//! Quadratic attention cost of an LLM forward pass.
//!
//! Only the attention score and value products are modeled: per layer,
//! `Q K^T` and `softmax(.) V` are each `S x d x S` multiply-accumulates at two
//! FLOPs apiece, giving `4 S^2 d`. Projections and feed-forward blocks grow
//! linearly in `S` and are left out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COST_TERMS: &str = "attention QK^T and AV products only; linear-in-S projections and feed-forward excluded";

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("compressed token count {after} exceeds the original {before}")]
    Expanded { before: usize, after: usize },
    #[error("sequence length is zero after compression; savings ratio is unbounded")]
    EmptyAfter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmShape {
    pub layers: usize,
    pub d_model: usize,
    pub audio_tokens: usize,
    pub text_tokens: usize,
}

impl LlmShape {
    pub fn new(layers: usize, d_model: usize) -> Self {
        Self {
            layers,
            d_model,
            audio_tokens: 0,
            text_tokens: 0,
        }
    }

    pub fn with_audio_tokens(self, audio_tokens: usize) -> Self {
        Self { audio_tokens, ..self }
    }

    pub fn with_text_tokens(self, text_tokens: usize) -> Self {
        Self { text_tokens, ..self }
    }

    pub fn sequence_len(&self) -> usize {
        self.audio_tokens + self.text_tokens
    }
}

/// `layers * 4 * S^2 * d_model` FLOPs.
pub fn attention_cost(shape: &LlmShape) -> f64 {
    let s = shape.sequence_len() as f64;
    shape.layers as f64 * 4.0 * s * s * shape.d_model as f64
}

/// Cost at `before` audio tokens over cost at `after`, text tokens fixed.
pub fn savings(before: usize, after: usize, shape: &LlmShape) -> Result<f64, CostError> {
    if after > before {
        return Err(CostError::Expanded { before, after });
    }
    if before == after {
        return Ok(1.0);
    }
    let full = attention_cost(&shape.with_audio_tokens(before));
    let reduced = attention_cost(&shape.with_audio_tokens(after));
    if reduced == 0.0 {
        return Err(CostError::EmptyAfter);
    }
    Ok(full / reduced)
}

/// One row of a cost report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub tok_per_s: f64,
    pub tokens: usize,
    pub flops: f64,
    pub savings_vs_baseline: f64,
}

impl CostRow {
    pub fn new(baseline_tokens: usize, tokens: usize, tok_per_s: f64, shape: &LlmShape) -> Result<Self, CostError> {
        Ok(Self {
            tok_per_s,
            tokens,
            flops: attention_cost(&shape.with_audio_tokens(tokens)),
            savings_vs_baseline: savings(baseline_tokens, tokens, shape)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_examples() {
        let shape = LlmShape::new(32, 4096);
        assert_eq!(attention_cost(&shape), 0.0);
        assert_eq!(attention_cost(&shape.with_audio_tokens(500)), 1.31072e11);
        let full = attention_cost(&shape.with_audio_tokens(400).with_text_tokens(100));
        let half = attention_cost(&shape.with_audio_tokens(200).with_text_tokens(50));
        assert_eq!(full, 4.0 * half);
    }

    #[test]
    fn savings_examples() {
        let shape = LlmShape::new(28, 3584);
        assert_eq!(savings(300, 300, &shape), Ok(1.0));
        assert_eq!(savings(300, 100, &shape), Ok(9.0));
        assert_eq!(savings(600, 100, &shape), Ok(36.0));
        let s = savings(250, 125, &shape.with_text_tokens(50)).unwrap();
        assert!((s - (300.0f64 / 175.0).powi(2)).abs() < 1e-12);
        assert!((s - 2.9388).abs() < 1e-4);
        assert_eq!(savings(1, 2, &shape), Err(CostError::Expanded { before: 2 - 1, after: 2 }));
        assert_eq!(savings(5, 0, &shape), Err(CostError::EmptyAfter));
        assert_eq!(savings(0, 0, &shape), Ok(1.0));
    }

    #[test]
    fn monotone_in_each_field() {
        let base = LlmShape {
            layers: 2,
            d_model: 8,
            audio_tokens: 10,
            text_tokens: 3,
        };
        let c = attention_cost(&base);
        assert!(attention_cost(&LlmShape { layers: 3, ..base }) >= c);
        assert!(attention_cost(&LlmShape { d_model: 9, ..base }) >= c);
        assert!(attention_cost(&LlmShape { audio_tokens: 11, ..base }) >= c);
        assert!(attention_cost(&LlmShape { text_tokens: 4, ..base }) >= c);
    }
}
