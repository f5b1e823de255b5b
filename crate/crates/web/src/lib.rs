//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes flat row-major frames and returns a JSON
//! string. The plain Rust functions underneath are what the tests exercise.

use audiotok::compress::{adjacent_dissimilarity, segment_unsupervised};
use audiotok::costmodel::CostRow;
use audiotok::{Compressor, FeatureSequence, LlmShape};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct SegmentView {
    pub dissimilarity: Vec<f64>,
    pub cut_after: Vec<usize>,
    /// Half-open `[start, end)` frame ranges.
    pub segments: Vec<[usize; 2]>,
    pub input_tokens: usize,
    pub output_tokens: usize,
    pub output_rate: f64,
    pub compressed: Vec<Vec<f32>>,
}

#[derive(Debug, Serialize)]
pub struct CompressView {
    pub compressor: String,
    pub input_tokens: usize,
    pub output_tokens: usize,
    pub compression_factor: f64,
    pub output_rate: f64,
    pub compressed: Vec<Vec<f32>>,
}

fn sequence(frames: &[f32], dim: usize, rate: f32) -> Result<FeatureSequence, String> {
    FeatureSequence::new(frames.to_vec(), dim, rate).map_err(|e| e.to_string())
}

fn rows(seq: &FeatureSequence) -> Vec<Vec<f32>> {
    seq.rows().map(<[f32]>::to_vec).collect()
}

pub fn segment_view(frames: &[f32], dim: usize, rate: f32) -> Result<SegmentView, String> {
    let seq = sequence(frames, dim, rate)?;
    let dissimilarity = adjacent_dissimilarity(&seq).map_err(|e| e.to_string())?;
    let out = segment_unsupervised(&seq).map_err(|e| e.to_string())?;
    let b = out.boundaries.clone().unwrap_or_default();
    Ok(SegmentView {
        dissimilarity,
        cut_after: b.cut_after().to_vec(),
        segments: b.segments(seq.len()).into_iter().map(|r| [r.start, r.end]).collect(),
        input_tokens: out.input_tokens,
        output_tokens: out.output_tokens,
        output_rate: out.output_rate,
        compressed: rows(&out.compressed),
    })
}

/// `spec` is a compressor name such as `uniavg:3`, `unisamp:2`, `unseg` or
/// `globalmean`.
pub fn compress_view(frames: &[f32], dim: usize, rate: f32, spec: &str) -> Result<CompressView, String> {
    let seq = sequence(frames, dim, rate)?;
    let compressor: Compressor = spec.parse().map_err(|e: audiotok::CompressError| e.to_string())?;
    let out = compressor.apply(&seq).map_err(|e| e.to_string())?;
    Ok(CompressView {
        compressor: compressor.to_string(),
        input_tokens: out.input_tokens,
        output_tokens: out.output_tokens,
        compression_factor: out.compression_factor,
        output_rate: out.output_rate,
        compressed: rows(&out.compressed),
    })
}

/// Attention cost for `seconds` of audio at `base_rate` tok/s, uniformly
/// compressed by every factor in `1..=max_k`.
pub fn cost_curve(layers: usize, d_model: usize, text_tokens: usize, seconds: f64, base_rate: f64, max_k: usize) -> Result<Vec<CostRow>, String> {
    if !(seconds > 0.0 && base_rate > 0.0) {
        return Err("seconds and rate must be positive".into());
    }
    if max_k == 0 {
        return Err("max K must be at least 1".into());
    }
    let shape = LlmShape::new(layers, d_model).with_text_tokens(text_tokens);
    let base = (seconds * base_rate).round() as usize;
    (1..=max_k)
        .map(|k| CostRow::new(base, base.div_ceil(k), base_rate / k as f64, &shape).map_err(|e| e.to_string()))
        .collect()
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn segment(frames: &[f32], dim: usize, rate: f32) -> Result<String, JsError> {
    to_js(segment_view(frames, dim, rate))
}

#[wasm_bindgen]
pub fn compress(frames: &[f32], dim: usize, rate: f32, spec: &str) -> Result<String, JsError> {
    to_js(compress_view(frames, dim, rate, spec))
}

#[wasm_bindgen]
pub fn cost(layers: usize, d_model: usize, text_tokens: usize, seconds: f64, base_rate: f64, max_k: usize) -> Result<String, JsError> {
    to_js(cost_curve(layers, d_model, text_tokens, seconds, base_rate, max_k))
}
