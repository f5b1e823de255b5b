//! Log-mel front end: Hann-windowed STFT, HTK-scale triangular filterbank,
//! natural log with a floor, followed by average pooling.

use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::compress::{self, CompressError};
use crate::featio::{FeatureError, FeatureSequence};

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum MelError {
    #[error("audio has {samples} samples, shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("audio must be {SAMPLE_RATE} Hz, got {0} Hz")]
    SampleRate(u32),
    #[error("expected mono audio, got {0} channels")]
    Channels(u16),
    #[error("expected 16-bit integer PCM, got {bits}-bit {format}")]
    SampleFormat { bits: u16, format: &'static str },
    #[error("invalid mel config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub sample_rate: u32,
    /// Window length in seconds.
    pub window: f64,
    /// Hop in seconds.
    pub hop: f64,
    pub n_mels: usize,
    pub pool_rate: usize,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            window: 0.025,
            hop: 0.010,
            n_mels: 128,
            pool_rate: 2,
            log_floor: 1e-10,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<(), MelError> {
        if self.sample_rate != SAMPLE_RATE {
            return Err(MelError::SampleRate(self.sample_rate));
        }
        if !(self.hop > 0.0 && self.window > self.hop) {
            return Err(MelError::Config("need window > hop > 0"));
        }
        if self.n_mels == 0 {
            return Err(MelError::Config("n_mels must be at least 1"));
        }
        if self.pool_rate == 0 {
            return Err(MelError::Config("pool_rate must be at least 1"));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return Err(MelError::Config("log_floor must be positive"));
        }
        Ok(())
    }

    pub fn win_samples(&self) -> usize {
        (self.window * self.sample_rate as f64).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop * self.sample_rate as f64).round() as usize
    }

    pub fn n_fft(&self) -> usize {
        self.win_samples().next_power_of_two()
    }

    /// Frames produced from `samples` samples, `None` if shorter than a window.
    pub fn frame_count(&self, samples: usize) -> Option<usize> {
        let win = self.win_samples();
        (samples >= win).then(|| (samples - win) / self.hop_samples() + 1)
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank over the `n_fft / 2 + 1` one-sided bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    n_bins: usize,
    /// `n_mels` rows of `n_bins` weights.
    weights: Vec<f64>,
    /// `(lower, center, upper)` edge frequencies of each triangle in Hz.
    edges: Vec<(f64, f64, f64)>,
}

impl MelFilterbank {
    /// Filters are spaced uniformly on the HTK mel scale from 0 Hz to
    /// Nyquist. Each bin's weight is the mean of the triangle over the bin's
    /// frequency cell `[f_k - df/2, f_k + df/2]`, so filters narrower than
    /// one bin still get a non-zero row.
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Self {
        let n_bins = n_fft / 2 + 1;
        let nyquist = sample_rate as f64 / 2.0;
        let df = sample_rate as f64 / n_fft as f64;
        let top = hz_to_mel(nyquist);
        let points: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
            .collect();
        let edges: Vec<_> = points.windows(3).map(|w| (w[0], w[1], w[2])).collect();
        let mut weights = vec![0.0; n_mels * n_bins];
        for (m, &(lo, c, hi)) in edges.iter().enumerate() {
            for k in 0..n_bins {
                let f = k as f64 * df;
                let a = (f - df / 2.0).max(0.0);
                let b = (f + df / 2.0).min(nyquist);
                if b > a {
                    weights[m * n_bins + k] = triangle_integral(lo, c, hi, a, b) / df;
                }
            }
        }
        Self { n_bins, weights, edges }
    }

    pub fn n_mels(&self) -> usize {
        self.edges.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn edges(&self, m: usize) -> (f64, f64, f64) {
        self.edges[m]
    }

    /// Applies the filterbank to a power spectrum of `n_bins` values.
    pub fn apply(&self, power: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate() {
            *o = self.row(m).iter().zip(power).map(|(w, p)| w * p).sum();
        }
    }
}

/// Exact integral over `[a, b]` of the unit-peak triangle with feet `lo`,
/// `hi` and apex `c`. The integrand is piecewise linear, so the trapezoid
/// rule on the pieces split at the knots is exact.
fn triangle_integral(lo: f64, c: f64, hi: f64, a: f64, b: f64) -> f64 {
    let tri = |f: f64| {
        if f <= lo || f >= hi {
            0.0
        } else if f <= c {
            (f - lo) / (c - lo)
        } else {
            (hi - f) / (hi - c)
        }
    };
    let mut knots = vec![a, b];
    knots.extend([lo, c, hi].into_iter().filter(|&k| k > a && k < b));
    knots.sort_by(f64::total_cmp);
    knots
        .windows(2)
        .map(|w| 0.5 * (tri(w[0]) + tri(w[1])) * (w[1] - w[0]))
        .sum()
}

pub fn hann(n: usize) -> Vec<f64> {
    // Periodic Hann, as used by common STFT front ends.
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Reusable STFT + filterbank state for one configuration.
pub struct MelFrontend {
    cfg: MelConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    filterbank: MelFilterbank,
}

impl MelFrontend {
    pub fn new(cfg: MelConfig) -> Result<Self, MelError> {
        cfg.validate()?;
        let n_fft = cfg.n_fft();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        Ok(Self {
            window: hann(cfg.win_samples()),
            filterbank: MelFilterbank::new(cfg.n_mels, n_fft, cfg.sample_rate),
            fft,
            cfg,
        })
    }

    pub fn config(&self) -> &MelConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// One-sided power spectrum of the windowed frame starting at `start`.
    pub fn power_spectrum(&self, audio: &[f32], start: usize) -> Vec<f64> {
        let n_fft = self.cfg.n_fft();
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        for (i, (slot, w)) in buf.iter_mut().zip(&self.window).enumerate() {
            slot.re = audio[start + i] as f64 * w;
        }
        self.fft.process(&mut buf);
        buf[..self.filterbank.n_bins()].iter().map(|c| c.norm_sqr()).collect()
    }

    /// Log-mel frames at `1 / hop` frames per second, before pooling.
    pub fn mel_spectrogram(&self, audio: &[f32]) -> Result<FeatureSequence, MelError> {
        let win = self.cfg.win_samples();
        let hop = self.cfg.hop_samples();
        let frames = self.cfg.frame_count(audio.len()).ok_or(MelError::TooShort {
            samples: audio.len(),
            window: win,
        })?;
        let n_mels = self.cfg.n_mels;
        let mut out = Vec::with_capacity(frames * n_mels);
        let mut mel = vec![0.0; n_mels];
        for t in 0..frames {
            let power = self.power_spectrum(audio, t * hop);
            self.filterbank.apply(&power, &mut mel);
            out.extend(mel.iter().map(|&e| (e + self.cfg.log_floor).ln() as f32));
        }
        let rate = (1.0 / self.cfg.hop) as f32;
        Ok(FeatureSequence::new(out, n_mels, rate)?)
    }

    /// Mel spectrogram followed by pooling at the configured rate.
    pub fn features(&self, audio: &[f32]) -> Result<FeatureSequence, MelError> {
        let mel = self.mel_spectrogram(audio)?;
        encoder_pool(&mel, self.cfg.pool_rate)
    }
}

pub fn mel_spectrogram(audio: &[f32], cfg: &MelConfig) -> Result<FeatureSequence, MelError> {
    MelFrontend::new(cfg.clone())?.mel_spectrogram(audio)
}

/// Average-pools by `rate`; the frame rate drops by the same factor.
pub fn encoder_pool(seq: &FeatureSequence, rate: usize) -> Result<FeatureSequence, MelError> {
    Ok(compress::uniform_avg_pool(seq, rate)?.compressed)
}

/// Reads a 16 kHz mono 16-bit PCM WAV into samples scaled to `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Vec<f32>, MelError> {
    let reader = hound::WavReader::open(path)?;
    read_wav_from(reader)
}

pub fn read_wav_from<R: std::io::Read>(reader: hound::WavReader<R>) -> Result<Vec<f32>, MelError> {
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(MelError::SampleRate(spec.sample_rate));
    }
    if spec.channels != 1 {
        return Err(MelError::Channels(spec.channels));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(MelError::SampleFormat {
            bits: spec.bits_per_sample,
            format: match spec.sample_format {
                hound::SampleFormat::Int => "int",
                hound::SampleFormat::Float => "float",
            },
        });
    }
    reader
        .into_samples::<i16>()
        .map(|s| Ok(s? as f32 / 32768.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let cfg = MelConfig::default();
        assert_eq!(cfg.win_samples(), 400);
        assert_eq!(cfg.hop_samples(), 160);
        assert_eq!(cfg.n_fft(), 512);
        assert_eq!(cfg.frame_count(16000), Some(98));
        assert_eq!(cfg.frame_count(400), Some(1));
        assert_eq!(cfg.frame_count(399), None);
    }

    #[test]
    fn mel_scale_round_trips() {
        for hz in [0.0, 440.0, 1000.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
        assert!((hz_to_mel(1000.0) - 1000.0).abs() < 0.1);
    }

    #[test]
    fn triangle_integral_whole_area() {
        // Unit-peak triangle of base 4 has area 2.
        assert!((triangle_integral(1.0, 2.0, 5.0, 0.0, 10.0) - 2.0).abs() < 1e-12);
        assert!((triangle_integral(1.0, 2.0, 5.0, 1.0, 2.0) - 0.5).abs() < 1e-12);
        assert_eq!(triangle_integral(1.0, 2.0, 5.0, 6.0, 7.0), 0.0);
    }

    #[test]
    fn filterbank_rows_positive_and_contiguous() {
        let fb = MelFilterbank::new(128, 512, SAMPLE_RATE);
        for m in 0..fb.n_mels() {
            let row = fb.row(m);
            assert!(row.iter().sum::<f64>() > 0.0, "row {m} is empty");
            let nz: Vec<usize> = (0..row.len()).filter(|&k| row[k] > 0.0).collect();
            assert_eq!(nz.last().unwrap() - nz[0] + 1, nz.len(), "row {m} support has gaps");
        }
        let (lo, _, _) = fb.edges(0);
        let (_, _, hi) = fb.edges(127);
        assert_eq!(lo, 0.0);
        assert!((hi - 8000.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_short_audio_and_bad_rate() {
        assert!(matches!(
            mel_spectrogram(&[0.0; 399], &MelConfig::default()),
            Err(MelError::TooShort { samples: 399, window: 400 })
        ));
        let cfg = MelConfig {
            sample_rate: 8000,
            ..MelConfig::default()
        };
        assert!(matches!(mel_spectrogram(&[0.0; 1000], &cfg), Err(MelError::SampleRate(8000))));
    }

    #[test]
    fn pooling_degenerate_inputs() {
        let one = FeatureSequence::new(vec![1.0; 4], 4, 100.0).unwrap();
        let pooled = encoder_pool(&one, 2).unwrap();
        assert_eq!(pooled.len(), 1);
        assert_eq!(pooled.frame_rate(), 50.0);
        assert_eq!(encoder_pool(&one, 1).unwrap(), one);
    }

    #[test]
    fn wav_reader_checks_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for s in [0i16, 16384, -32768] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        assert_eq!(read_wav(&path).unwrap(), vec![0.0, 0.5, -1.0]);

        let path = dir.path().join("b.wav");
        let mut w = hound::WavWriter::create(&path, hound::WavSpec { sample_rate: 44100, ..spec }).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path), Err(MelError::SampleRate(44100))));
    }
}
