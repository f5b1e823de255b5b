//! Token compressors: uniform average pooling, uniform sampling,
//! unsupervised segmentation and global pooling.
//!
//! Every compressor returns a [`CompressionOutcome`] carrying the shortened
//! sequence together with its token accounting.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::featio::{FeatureError, FeatureSequence};

#[derive(Debug, Error)]
pub enum CompressError {
    #[error("compression factor K must be at least 1")]
    ZeroFactor,
    #[error("need at least 2 frames, got {0}")]
    TooShort(usize),
    #[error("frame {0} has zero norm; cosine similarity is undefined")]
    ZeroNorm(usize),
    #[error("boundary {index} out of range for {frames} frames")]
    BoundaryOutOfRange { index: usize, frames: usize },
    #[error("boundaries must be strictly increasing")]
    UnsortedBoundaries,
    #[error("unknown compressor `{0}`")]
    UnknownCompressor(String),
    #[error("invalid compressor spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Segment breaks: `t` in `cut_after` splits between frame `t` and `t + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Boundaries {
    cut_after: Vec<usize>,
}

impl Boundaries {
    /// Validates `cut_after` against a sequence of `frames` frames.
    pub fn new(cut_after: Vec<usize>, frames: usize) -> Result<Self, CompressError> {
        let b = Self { cut_after };
        b.validate(frames)?;
        Ok(b)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Cuts after every frame; merging with these is the identity.
    pub fn every_frame(frames: usize) -> Self {
        Self {
            cut_after: (0..frames.saturating_sub(1)).collect(),
        }
    }

    pub fn validate(&self, frames: usize) -> Result<(), CompressError> {
        if self.cut_after.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CompressError::UnsortedBoundaries);
        }
        if let Some(&index) = self.cut_after.iter().find(|&&t| t + 2 > frames) {
            return Err(CompressError::BoundaryOutOfRange { index, frames });
        }
        Ok(())
    }

    pub fn cut_after(&self) -> &[usize] {
        &self.cut_after
    }

    pub fn segment_count(&self) -> usize {
        self.cut_after.len() + 1
    }

    /// Frame ranges of each segment of a `frames`-long sequence.
    pub fn segments(&self, frames: usize) -> Vec<Range<usize>> {
        let mut out = Vec::with_capacity(self.segment_count());
        let mut start = 0;
        for &t in &self.cut_after {
            out.push(start..t + 1);
            start = t + 1;
        }
        out.push(start..frames);
        out
    }
}

/// A compressed sequence plus token accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionOutcome {
    pub compressed: FeatureSequence,
    pub boundaries: Option<Boundaries>,
    pub input_tokens: usize,
    pub output_tokens: usize,
    /// `input_tokens / output_tokens`.
    pub compression_factor: f64,
    pub input_rate: f64,
    /// Output tokens per second of audio.
    pub output_rate: f64,
}

impl CompressionOutcome {
    fn new(input: &FeatureSequence, compressed: FeatureSequence, boundaries: Option<Boundaries>, output_rate: f64) -> Self {
        let input_tokens = input.len();
        let output_tokens = compressed.len();
        Self {
            compressed,
            boundaries,
            input_tokens,
            output_tokens,
            compression_factor: input_tokens as f64 / output_tokens as f64,
            input_rate: input.frame_rate() as f64,
            output_rate,
        }
    }

    /// Average rate: input rate scaled by the token ratio.
    fn averaged(input: &FeatureSequence, compressed: FeatureSequence, boundaries: Option<Boundaries>) -> Self {
        let rate = input.frame_rate() as f64 * compressed.len() as f64 / input.len() as f64;
        Self::new(input, compressed, boundaries, rate)
    }

    pub fn summary(&self, compressor: &Compressor) -> OutcomeSummary {
        OutcomeSummary {
            compressor: compressor.to_string(),
            input_tokens: self.input_tokens,
            output_tokens: self.output_tokens,
            compression_factor: self.compression_factor,
            input_rate: self.input_rate,
            output_rate: self.output_rate,
            duration_secs: self.input_tokens as f64 / self.input_rate,
            boundaries: self.boundaries.clone(),
        }
    }
}

/// Serializable accounting record for one compressed sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub compressor: String,
    pub input_tokens: usize,
    pub output_tokens: usize,
    pub compression_factor: f64,
    pub input_rate: f64,
    pub output_rate: f64,
    pub duration_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub boundaries: Option<Boundaries>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlobalMode {
    Mean,
    Max,
}

/// One of the compression modules, with its factor where it takes one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compressor {
    UniAvg(usize),
    UniSamp(usize),
    UnSeg,
    Global(GlobalMode),
}

impl Compressor {
    /// Parses a family name plus optional `K`, as the CLI receives them.
    pub fn from_parts(name: &str, k: Option<usize>) -> Result<Self, CompressError> {
        match (name, k) {
            ("uniavg", Some(k)) => Ok(Self::UniAvg(k)),
            ("unisamp", Some(k)) => Ok(Self::UniSamp(k)),
            ("unseg", None) => Ok(Self::UnSeg),
            ("globalmean", None) => Ok(Self::Global(GlobalMode::Mean)),
            ("globalmax", None) => Ok(Self::Global(GlobalMode::Max)),
            ("uniavg" | "unisamp", None) => Err(CompressError::BadSpec(format!("{name} requires K"))),
            ("unseg" | "globalmean" | "globalmax", Some(_)) => {
                Err(CompressError::BadSpec(format!("{name} takes no K")))
            }
            _ => Err(CompressError::UnknownCompressor(name.to_string())),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::UniAvg(_) => "uniavg",
            Self::UniSamp(_) => "unisamp",
            Self::UnSeg => "unseg",
            Self::Global(GlobalMode::Mean) => "globalmean",
            Self::Global(GlobalMode::Max) => "globalmax",
        }
    }

    pub fn factor(&self) -> Option<usize> {
        match self {
            Self::UniAvg(k) | Self::UniSamp(k) => Some(*k),
            _ => None,
        }
    }

    pub fn apply(&self, seq: &FeatureSequence) -> Result<CompressionOutcome, CompressError> {
        match *self {
            Self::UniAvg(k) => uniform_avg_pool(seq, k),
            Self::UniSamp(k) => uniform_sample(seq, k),
            Self::UnSeg => segment_unsupervised(seq),
            Self::Global(mode) => Ok(global_pool(seq, mode)),
        }
    }
}

impl fmt::Display for Compressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.factor() {
            Some(k) => write!(f, "{}:{k}", self.family()),
            None => f.write_str(self.family()),
        }
    }
}

/// Accepts `uniavg:3`, `unisamp:2`, `unseg`, `globalmean`, `globalmax`.
impl FromStr for Compressor {
    type Err = CompressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            Some((name, k)) => {
                let k = k
                    .parse()
                    .map_err(|_| CompressError::BadSpec(format!("bad factor in `{s}`")))?;
                Self::from_parts(name, Some(k))
            }
            None => Self::from_parts(&s, None),
        }
    }
}

/// `d_t = 1 - cos(z_t, z_{t+1})` for every adjacent pair of frames.
pub fn adjacent_dissimilarity(seq: &FeatureSequence) -> Result<Vec<f64>, CompressError> {
    if seq.len() < 2 {
        return Err(CompressError::TooShort(seq.len()));
    }
    let norms: Vec<f64> = seq.rows().map(|r| dot(r, r)).collect();
    if let Some(t) = norms.iter().position(|&n| n == 0.0) {
        return Err(CompressError::ZeroNorm(t));
    }
    let d = seq
        .rows()
        .zip(seq.rows().skip(1))
        .enumerate()
        .map(|(t, (a, b))| {
            // sqrt(n * n) == n for identical frames, so repeated frames give
            // exactly 0 and cannot produce spurious peaks.
            let sim = dot(a, b) / (norms[t] * norms[t + 1]).sqrt();
            (1.0 - sim).clamp(0.0, 2.0)
        })
        .collect();
    Ok(d)
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Strict local maxima of `d`. Endpoints are never peaks; plateaus give none.
pub fn detect_peaks(d: &[f64]) -> Boundaries {
    let cut_after = d
        .windows(3)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] && w[1] > w[2])
        .map(|(i, _)| i + 1)
        .collect();
    Boundaries { cut_after }
}

/// Replaces each segment by the mean of its frames.
pub fn merge_segments(seq: &FeatureSequence, b: &Boundaries) -> Result<FeatureSequence, CompressError> {
    b.validate(seq.len())?;
    let segments = b.segments(seq.len());
    let mut frames = Vec::with_capacity(segments.len() * seq.dim());
    for seg in &segments {
        push_mean(seq, seg.clone(), &mut frames);
    }
    let rate = seq.frame_rate() as f64 * segments.len() as f64 / seq.len() as f64;
    Ok(FeatureSequence::new(frames, seq.dim(), rate as f32)?)
}

fn push_mean(seq: &FeatureSequence, range: Range<usize>, out: &mut Vec<f32>) {
    let n = range.len() as f64;
    let mut acc = vec![0.0f64; seq.dim()];
    for t in range {
        for (a, &v) in acc.iter_mut().zip(seq.frame(t)) {
            *a += v as f64;
        }
    }
    out.extend(acc.into_iter().map(|a| (a / n) as f32));
}

fn inherit_id(out: FeatureSequence, seq: &FeatureSequence) -> FeatureSequence {
    match seq.source_id() {
        Some(id) => out.with_source_id(id),
        None => out,
    }
}

/// Dissimilarity, peak picking and segment merging in one pass.
pub fn segment_unsupervised(seq: &FeatureSequence) -> Result<CompressionOutcome, CompressError> {
    let d = adjacent_dissimilarity(seq)?;
    let b = detect_peaks(&d);
    let merged = inherit_id(merge_segments(seq, &b)?, seq);
    Ok(CompressionOutcome::averaged(seq, merged, Some(b)))
}

/// Average pooling with kernel `k` and stride `k`. A trailing partial window
/// is averaged over the frames it has.
pub fn uniform_avg_pool(seq: &FeatureSequence, k: usize) -> Result<CompressionOutcome, CompressError> {
    if k == 0 {
        return Err(CompressError::ZeroFactor);
    }
    let t = seq.len();
    let mut frames = Vec::with_capacity(t.div_ceil(k) * seq.dim());
    if k == 1 {
        frames.extend_from_slice(seq.as_slice());
    } else {
        for start in (0..t).step_by(k) {
            push_mean(seq, start..(start + k).min(t), &mut frames);
        }
    }
    uniform_outcome(seq, frames, k)
}

/// Keeps frames `0, k, 2k, ...`.
pub fn uniform_sample(seq: &FeatureSequence, k: usize) -> Result<CompressionOutcome, CompressError> {
    if k == 0 {
        return Err(CompressError::ZeroFactor);
    }
    let frames: Vec<f32> = seq.rows().step_by(k).flatten().copied().collect();
    uniform_outcome(seq, frames, k)
}

fn uniform_outcome(seq: &FeatureSequence, frames: Vec<f32>, k: usize) -> Result<CompressionOutcome, CompressError> {
    let rate = seq.frame_rate() as f64 / k as f64;
    let out = if k == 1 {
        FeatureSequence::new(frames, seq.dim(), seq.frame_rate())?
    } else {
        FeatureSequence::new(frames, seq.dim(), rate as f32)?
    };
    Ok(CompressionOutcome::new(seq, inherit_id(out, seq), None, rate))
}

/// Collapses the whole sequence to one frame by per-dimension mean or max.
pub fn global_pool(seq: &FeatureSequence, mode: GlobalMode) -> CompressionOutcome {
    let mut frame = Vec::with_capacity(seq.dim());
    match mode {
        GlobalMode::Mean => push_mean(seq, 0..seq.len(), &mut frame),
        GlobalMode::Max => {
            frame.extend_from_slice(seq.frame(0));
            for row in seq.rows().skip(1) {
                for (m, &v) in frame.iter_mut().zip(row) {
                    *m = m.max(v);
                }
            }
        }
    }
    let rate = seq.frame_rate() as f64 / seq.len() as f64;
    let out = FeatureSequence::new(frame, seq.dim(), rate as f32).expect("pooled frame of a valid sequence is valid");
    CompressionOutcome::averaged(seq, inherit_id(out, seq), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[&[f32]], rate: f32) -> FeatureSequence {
        FeatureSequence::from_rows(rows, rate).unwrap()
    }

    fn rows(s: &FeatureSequence) -> Vec<Vec<f32>> {
        s.rows().map(<[f32]>::to_vec).collect()
    }

    #[test]
    fn dissimilarity_basic_cases() {
        let d = |a: &[f32], b: &[f32]| adjacent_dissimilarity(&seq(&[a, b], 25.0)).unwrap();
        assert_eq!(d(&[1.0, 0.0], &[1.0, 0.0]), vec![0.0]);
        assert_eq!(d(&[1.0, 0.0], &[0.0, 1.0]), vec![1.0]);
        assert_eq!(d(&[1.0, 0.0], &[-1.0, 0.0]), vec![2.0]);
    }

    #[test]
    fn dissimilarity_errors() {
        assert!(matches!(adjacent_dissimilarity(&seq(&[&[1.0]], 25.0)), Err(CompressError::TooShort(1))));
        assert!(matches!(
            adjacent_dissimilarity(&seq(&[&[1.0, 0.0], &[0.0, 0.0]], 25.0)),
            Err(CompressError::ZeroNorm(1))
        ));
    }

    #[test]
    fn peaks() {
        assert_eq!(detect_peaks(&[0.1, 0.9, 0.1]).cut_after(), &[1]);
        assert!(detect_peaks(&[0.1, 0.2, 0.3]).cut_after().is_empty());
        assert!(detect_peaks(&[0.1, 0.5, 0.5, 0.1]).cut_after().is_empty());
        assert!(detect_peaks(&[0.7]).cut_after().is_empty());
        assert!(detect_peaks(&[]).cut_after().is_empty());
    }

    #[test]
    fn merge_examples() {
        let s = seq(&[&[3.0f32, 1.0][..]; 4], 25.0);
        assert_eq!(rows(&merge_segments(&s, &Boundaries::empty()).unwrap()), vec![vec![3.0, 1.0]]);

        let s = seq(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]], 25.0);
        let m = merge_segments(&s, &Boundaries::new(vec![1], 4).unwrap()).unwrap();
        assert_eq!(rows(&m), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(m.frame_rate(), 12.5);

        let s = seq(&[&[2.0], &[4.0], &[6.0]], 25.0);
        let m = merge_segments(&s, &Boundaries::new(vec![0], 3).unwrap()).unwrap();
        assert_eq!(rows(&m), vec![vec![2.0], vec![5.0]]);
    }

    #[test]
    fn boundary_validation() {
        assert!(matches!(
            Boundaries::new(vec![3], 4),
            Err(CompressError::BoundaryOutOfRange { index: 3, frames: 4 })
        ));
        assert!(matches!(Boundaries::new(vec![1, 1], 4), Err(CompressError::UnsortedBoundaries)));
        let s = seq(&[&[1.0f32][..]; 2], 25.0);
        let bad = Boundaries { cut_after: vec![5] };
        assert!(merge_segments(&s, &bad).is_err());
    }

    #[test]
    fn merge_every_frame_is_identity() {
        let s = seq(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 7.0]], 50.0);
        let m = merge_segments(&s, &Boundaries::every_frame(3)).unwrap();
        assert_eq!(m.as_slice(), s.as_slice());
        assert_eq!(m.frame_rate(), 50.0);
    }

    #[test]
    fn unseg_traces() {
        let s = seq(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]], 25.0);
        assert_eq!(adjacent_dissimilarity(&s).unwrap(), vec![0.0, 1.0, 0.0]);
        let out = segment_unsupervised(&s).unwrap();
        assert_eq!(out.boundaries.as_ref().unwrap().cut_after(), &[1]);
        assert_eq!(rows(&out.compressed), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(out.compression_factor, 2.0);
        assert_eq!(out.output_rate, 12.5);

        let s = seq(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]], 25.0);
        let out = segment_unsupervised(&s).unwrap();
        assert!(out.boundaries.as_ref().unwrap().cut_after().is_empty());
        assert_eq!(rows(&out.compressed), vec![vec![0.5, 0.5]]);

        let s = seq(&[&[0.3f32, -0.2, 0.9][..]; 7], 25.0);
        let out = segment_unsupervised(&s).unwrap();
        assert_eq!(out.output_tokens, 1);
        assert_eq!(out.compression_factor, 7.0);
    }

    #[test]
    fn avg_pool_examples() {
        let s = seq(&[&[1.0], &[3.0], &[5.0], &[7.0]], 25.0);
        let out = uniform_avg_pool(&s, 2).unwrap();
        assert_eq!(out.compressed.as_slice(), &[2.0, 6.0]);
        assert_eq!(out.output_rate, 12.5);
        assert_eq!(out.compressed.frame_rate(), 12.5);

        let out = uniform_avg_pool(&s, 3).unwrap();
        assert_eq!(out.compressed.as_slice(), &[3.0, 7.0]);
        assert!((out.output_rate - 8.33).abs() < 0.005);

        let id = uniform_avg_pool(&s, 1).unwrap();
        assert_eq!(id.compressed, s);
        assert_eq!(id.compression_factor, 1.0);
        assert!(matches!(uniform_avg_pool(&s, 0), Err(CompressError::ZeroFactor)));
    }

    #[test]
    fn sample_examples() {
        let s = seq(&[&[0.0], &[1.0], &[2.0], &[3.0], &[4.0], &[5.0]], 25.0);
        assert_eq!(uniform_sample(&s, 3).unwrap().compressed.as_slice(), &[0.0, 3.0]);
        assert_eq!(uniform_sample(&s, 2).unwrap().output_rate, 12.5);
        assert_eq!(uniform_sample(&s, 1).unwrap().compressed, s);
        assert_eq!(uniform_sample(&s, 4).unwrap().output_tokens, 2);
        assert!(matches!(uniform_sample(&s, 0), Err(CompressError::ZeroFactor)));
    }

    #[test]
    fn global_examples() {
        let s = seq(&[&[1.0, 2.0], &[3.0, 4.0]], 25.0);
        assert_eq!(global_pool(&s, GlobalMode::Mean).compressed.as_slice(), &[2.0, 3.0]);
        let max = global_pool(&s, GlobalMode::Max);
        assert_eq!(max.compressed.as_slice(), &[3.0, 4.0]);
        assert_eq!(max.compression_factor, 2.0);
        let one = seq(&[&[-1.0, 5.0]], 25.0);
        assert_eq!(global_pool(&one, GlobalMode::Mean).compressed.as_slice(), one.as_slice());
        assert_eq!(global_pool(&one, GlobalMode::Max).compressed.as_slice(), one.as_slice());
    }

    #[test]
    fn compressor_parsing() {
        assert_eq!("uniavg:3".parse::<Compressor>().unwrap(), Compressor::UniAvg(3));
        assert_eq!("UnSeg".parse::<Compressor>().unwrap(), Compressor::UnSeg);
        assert_eq!("globalmax".parse::<Compressor>().unwrap(), Compressor::Global(GlobalMode::Max));
        assert!("uniavg".parse::<Compressor>().is_err());
        assert!("unseg:2".parse::<Compressor>().is_err());
        assert!("nope".parse::<Compressor>().is_err());
        assert_eq!(Compressor::UniSamp(2).to_string(), "unisamp:2");
    }

    #[test]
    fn summary_serializes_boundaries_as_array() {
        let s = seq(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]], 25.0);
        let out = segment_unsupervised(&s).unwrap();
        let json = serde_json::to_value(out.summary(&Compressor::UnSeg)).unwrap();
        assert_eq!(json["boundaries"], serde_json::json!([1]));
        assert_eq!(json["output_tokens"], 2);
    }
}
