//! Feature sequences and their on-disk formats.
//!
//! ATCF v1 layout (all little-endian):
//!
//! | offset | size | field                         |
//! |--------|------|-------------------------------|
//! | 0      | 4    | magic `ATCF`                  |
//! | 4      | 2    | version, `1`                  |
//! | 6      | 2    | reserved, `0`                 |
//! | 8      | 4    | frame count `T` (u32)         |
//! | 12     | 4    | dimension `D` (u32)           |
//! | 16     | 4    | frame rate in Hz (f32)        |
//! | 20     | 4TD  | row-major f32 frames          |

use std::collections::HashSet;
use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"ATCF";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature sequence has no frames")]
    NoFrames,
    #[error("feature dimension must be at least 1")]
    ZeroDim,
    #[error("frame buffer of {len} values is not a multiple of dimension {dim}")]
    Ragged { len: usize, dim: usize },
    #[error("non-finite value at frame {frame}, dim {dim}")]
    NonFinite { frame: usize, dim: usize },
    #[error("frame rate must be positive and finite, got {0}")]
    BadFrameRate(f32),
    #[error("bad magic {0:?}, expected \"ATCF\"")]
    BadMagic([u8; 4]),
    #[error("unsupported ATCF version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated ATCF file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("ATCF payload has {extra} trailing bytes beyond the declared T x D")]
    TrailingBytes { extra: u64 },
    #[error("line {line}: expected `<id>\\t<tokens>`")]
    MissingTab { line: usize },
    #[error("line {line}: empty utterance id")]
    EmptyId { line: usize },
    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A `T x D` matrix of frame features with its frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    frames: Vec<f32>,
    dim: usize,
    frame_rate: f32,
    source_id: Option<String>,
}

impl FeatureSequence {
    /// Builds a sequence from a row-major buffer of `T * dim` values.
    pub fn new(frames: Vec<f32>, dim: usize, frame_rate: f32) -> Result<Self, FeatureError> {
        if dim == 0 {
            return Err(FeatureError::ZeroDim);
        }
        if frames.is_empty() {
            return Err(FeatureError::NoFrames);
        }
        if !frames.len().is_multiple_of(dim) {
            return Err(FeatureError::Ragged {
                len: frames.len(),
                dim,
            });
        }
        if !(frame_rate.is_finite() && frame_rate > 0.0) {
            return Err(FeatureError::BadFrameRate(frame_rate));
        }
        if let Some(i) = frames.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite {
                frame: i / dim,
                dim: i % dim,
            });
        }
        Ok(Self {
            frames,
            dim,
            frame_rate,
            source_id: None,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R], frame_rate: f32) -> Result<Self, FeatureError> {
        let dim = rows.first().map(|r| r.as_ref().len()).ok_or(FeatureError::NoFrames)?;
        let mut frames = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(FeatureError::Ragged {
                    len: frames.len() + row.len(),
                    dim,
                });
            }
            frames.extend_from_slice(row);
        }
        Self::new(frames, dim, frame_rate)
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = Some(id.into());
        self
    }

    /// Number of frames `T`.
    pub fn len(&self) -> usize {
        self.frames.len() / self.dim
    }

    /// Always false; kept so clippy is happy alongside `len`.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate(&self) -> f32 {
        self.frame_rate
    }

    pub fn source_id(&self) -> Option<&str> {
        self.source_id.as_deref()
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.frames[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.frames.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.frames
    }

    /// Duration covered by the sequence, in seconds.
    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.frame_rate as f64
    }

    /// Size in bytes of the ATCF v1 encoding of this sequence.
    pub fn encoded_len(&self) -> u64 {
        HEADER_LEN as u64 + 4 * self.frames.len() as u64
    }
}

/// Header fields of an ATCF file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtcfHeader {
    pub version: u16,
    pub frames: u32,
    pub dim: u32,
    pub frame_rate: f32,
}

impl AtcfHeader {
    pub fn payload_len(&self) -> u64 {
        4 * self.frames as u64 * self.dim as u64
    }
}

/// Writes `seq` as ATCF v1 and returns the number of bytes written.
pub fn write_features<W: Write>(seq: &FeatureSequence, mut sink: W) -> Result<u64, FeatureError> {
    // Sequences are validated on construction; re-check so a buffer never
    // leaves the process with a NaN in it.
    if let Some(i) = seq.frames.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite {
            frame: i / seq.dim,
            dim: i % seq.dim,
        });
    }
    let mut buf = Vec::with_capacity(seq.encoded_len() as usize);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(seq.dim as u32).to_le_bytes());
    buf.extend_from_slice(&seq.frame_rate.to_le_bytes());
    for v in &seq.frames {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&buf)?;
    sink.flush()?;
    Ok(buf.len() as u64)
}

/// Reads and validates only the 20-byte header.
pub fn read_header<R: Read>(mut source: R) -> Result<AtcfHeader, FeatureError> {
    let mut head = [0u8; HEADER_LEN];
    let got = read_up_to(&mut source, &mut head)?;
    if got >= 4 && head[0..4] != MAGIC {
        return Err(FeatureError::BadMagic(head[0..4].try_into().unwrap()));
    }
    if got < HEADER_LEN {
        return Err(FeatureError::Truncated {
            expected: HEADER_LEN as u64,
            actual: got as u64,
        });
    }
    let version = u16::from_le_bytes([head[4], head[5]]);
    if version != VERSION {
        return Err(FeatureError::UnsupportedVersion(version));
    }
    let frames = u32::from_le_bytes(head[8..12].try_into().unwrap());
    let dim = u32::from_le_bytes(head[12..16].try_into().unwrap());
    let frame_rate = f32::from_le_bytes(head[16..20].try_into().unwrap());
    if frames == 0 {
        return Err(FeatureError::NoFrames);
    }
    if dim == 0 {
        return Err(FeatureError::ZeroDim);
    }
    if !(frame_rate.is_finite() && frame_rate > 0.0) {
        return Err(FeatureError::BadFrameRate(frame_rate));
    }
    Ok(AtcfHeader {
        version,
        frames,
        dim,
        frame_rate,
    })
}

/// Reads one ATCF v1 sequence, consuming the whole stream.
pub fn read_features<R: Read>(mut source: R) -> Result<FeatureSequence, FeatureError> {
    let header = read_header(&mut source)?;
    let expected = header.payload_len();
    let mut payload = Vec::new();
    source.read_to_end(&mut payload)?;
    let actual = payload.len() as u64;
    if actual < expected {
        return Err(FeatureError::Truncated {
            expected: HEADER_LEN as u64 + expected,
            actual: HEADER_LEN as u64 + actual,
        });
    }
    if actual > expected {
        return Err(FeatureError::TrailingBytes {
            extra: actual - expected,
        });
    }
    let frames = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    FeatureSequence::new(frames, header.dim as usize, header.frame_rate)
}

fn read_up_to<R: Read>(source: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// A reference or hypothesis transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn new(id: impl Into<String>, tokens: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            id: id.into(),
            tokens: tokens.into_iter().map(Into::into).collect(),
        }
    }

    /// `<id>\t<tokens joined by spaces>`, no newline.
    pub fn to_line(&self) -> String {
        format!("{}\t{}", self.id, self.tokens.join(" "))
    }
}

/// Parses `<id>\t<space separated tokens>` lines; blank lines are skipped.
pub fn read_utterances<R: BufRead>(source: R) -> Result<Vec<Utterance>, FeatureError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or(FeatureError::MissingTab { line: i + 1 })?;
        if id.is_empty() {
            return Err(FeatureError::EmptyId { line: i + 1 });
        }
        if !seen.insert(id.to_string()) {
            return Err(FeatureError::DuplicateId(id.to_string()));
        }
        out.push(Utterance::new(id, text.split_whitespace()));
    }
    Ok(out)
}

pub fn write_utterances<W: Write>(utts: &[Utterance], mut sink: W) -> io::Result<()> {
    for u in utts {
        writeln!(sink, "{}", u.to_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(seq: &FeatureSequence) -> Vec<u8> {
        let mut buf = Vec::new();
        write_features(seq, &mut buf).unwrap();
        buf
    }

    #[test]
    fn single_zero_frame_is_24_bytes() {
        let seq = FeatureSequence::new(vec![0.0], 1, 25.0).unwrap();
        let buf = encode(&seq);
        assert_eq!(buf.len(), 24);
        assert_eq!(&buf[20..], &[0, 0, 0, 0]);
        assert_eq!(&buf[0..4], b"ATCF");
        assert_eq!(&buf[4..8], &[1, 0, 0, 0]);
        assert_eq!(f32::from_le_bytes(buf[16..20].try_into().unwrap()), 25.0);
    }

    #[test]
    fn size_formula_3_by_128() {
        let seq = FeatureSequence::new(vec![0.5; 3 * 128], 128, 50.0).unwrap();
        let n = write_features(&seq, io::sink()).unwrap();
        assert_eq!(n, 1556);
        assert_eq!(seq.encoded_len(), 1556);
    }

    #[test]
    fn round_trip() {
        let seq = FeatureSequence::from_rows(&[[1.0f32, -2.5], [3.25, 1e-30]], 12.5).unwrap();
        let back = read_features(encode(&seq).as_slice()).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn rejects_bad_magic() {
        let mut buf = encode(&FeatureSequence::new(vec![1.0], 1, 25.0).unwrap());
        buf[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(read_features(buf.as_slice()), Err(FeatureError::BadMagic(m)) if &m == b"XXXX"));
    }

    #[test]
    fn rejects_short_payload() {
        let seq = FeatureSequence::new(vec![1.0; 4], 2, 25.0).unwrap();
        let buf = encode(&seq);
        // T=2, D=2 needs 16 payload bytes; keep 12.
        let err = read_features(&buf[..HEADER_LEN + 12]).unwrap_err();
        assert!(matches!(err, FeatureError::Truncated { expected: 36, actual: 32 }));
    }

    #[test]
    fn rejects_long_payload() {
        let mut buf = encode(&FeatureSequence::new(vec![1.0; 4], 2, 25.0).unwrap());
        buf.extend_from_slice(&[0; 4]);
        assert!(matches!(read_features(buf.as_slice()), Err(FeatureError::TrailingBytes { extra: 4 })));
    }

    #[test]
    fn rejects_nan_payload() {
        let mut buf = encode(&FeatureSequence::new(vec![1.0; 4], 2, 25.0).unwrap());
        buf[HEADER_LEN + 8..HEADER_LEN + 12].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_features(buf.as_slice()), Err(FeatureError::NonFinite { frame: 1, dim: 0 })));
    }

    #[test]
    fn rejects_zero_frames_and_version() {
        let mut buf = encode(&FeatureSequence::new(vec![1.0], 1, 25.0).unwrap());
        buf[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(read_features(&buf[..20]), Err(FeatureError::NoFrames)));
        buf[4] = 2;
        assert!(matches!(read_features(buf.as_slice()), Err(FeatureError::UnsupportedVersion(2))));
    }

    #[test]
    fn rejects_invalid_construction() {
        assert!(matches!(FeatureSequence::new(vec![], 2, 25.0), Err(FeatureError::NoFrames)));
        assert!(matches!(FeatureSequence::new(vec![1.0], 0, 25.0), Err(FeatureError::ZeroDim)));
        assert!(matches!(FeatureSequence::new(vec![1.0; 3], 2, 25.0), Err(FeatureError::Ragged { .. })));
        assert!(matches!(FeatureSequence::new(vec![1.0], 1, 0.0), Err(FeatureError::BadFrameRate(_))));
        assert!(matches!(
            FeatureSequence::new(vec![1.0, f32::INFINITY], 1, 25.0),
            Err(FeatureError::NonFinite { frame: 1, dim: 0 })
        ));
    }

    #[test]
    fn utterance_parsing() {
        let utts = read_utterances("u1\thello world\n\n  \nu2\t\n".as_bytes()).unwrap();
        assert_eq!(utts, vec![Utterance::new("u1", ["hello", "world"]), Utterance::new("u2", Vec::<String>::new())]);
    }

    #[test]
    fn utterance_errors() {
        assert!(matches!(read_utterances("u1 hello\n".as_bytes()), Err(FeatureError::MissingTab { line: 1 })));
        assert!(matches!(
            read_utterances("u1\ta\nu1\tb\n".as_bytes()),
            Err(FeatureError::DuplicateId(id)) if id == "u1"
        ));
        assert!(matches!(read_utterances("\ta\n".as_bytes()), Err(FeatureError::EmptyId { line: 1 })));
    }
}
