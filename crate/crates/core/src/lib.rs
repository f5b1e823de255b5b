//! Audio token compression toolkit.
//!
//! The crate works on [`FeatureSequence`] values: a `T x D` matrix of encoder
//! frames tagged with its frame rate. Compressors in [`compress`] shorten the
//! sequence and report token accounting; [`costmodel`] turns token counts into
//! attention cost; [`metrics`] scores transcripts and translations; [`lora`]
//! carries the low-rank adapter arithmetic; [`melfront`] produces log-mel
//! frames from 16 kHz audio so the rest of the pipeline can run without a
//! neural encoder.

pub mod compress;
pub mod corpus;
pub mod costmodel;
pub mod featio;
pub mod lora;
pub mod melfront;
pub mod metrics;

pub use compress::{Boundaries, CompressError, CompressionOutcome, Compressor, GlobalMode};
pub use corpus::{CorpusAccounting, SweepRow};
pub use costmodel::LlmShape;
pub use featio::{FeatureError, FeatureSequence, Utterance};
pub use lora::{BaseLinear, LoraAdapter, LoraError};
pub use melfront::{MelConfig, MelError};
pub use metrics::{BleuReport, MetricsError, WerReport};
