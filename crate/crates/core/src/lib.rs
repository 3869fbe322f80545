//! Unknown-speaker clustering pipeline.
//!
//! The pipeline turns raw audio into per-second speaker decisions:
//!
//! 1. [`audio`] — WAV decode, resampling to the canonical 16 kHz, 1 s
//!    analysis windows, and a synthetic-speaker corpus generator.
//! 2. [`features`] — STFT, mel filterbank, log-compressed mel snippets
//!    (the 128×100 network input), and chroma pitch-class profiles.
//! 3. [`nn`] — a small from-scratch CNN trained as a speaker classifier
//!    with SGD + cross-entropy; its last hidden dense layer doubles as
//!    the embedding extractor.
//! 4. [`embedding`], [`pca`], [`tsne`] — batch embedding extraction and
//!    2-D diagnostic projections.
//! 5. [`clustering`] — average-linkage agglomerative clustering under the
//!    cosine metric, with automatic speaker-count estimation from the
//!    dendrogram's merge-distance gaps.
//! 6. [`segmentation`] — per-second labels to time segments, with each
//!    change point refined by chroma-based bottom-up merging.
//! 7. [`svm`] — one-vs-one linear SVMs over embeddings for speaker
//!    identification.
//!
//! All randomized operations take explicit seeds and are deterministic for
//! a fixed seed.

pub mod audio;
pub mod clustering;
pub mod embedding;
pub mod error;
pub mod features;
pub mod manifest;
pub mod nn;
pub mod pca;
pub mod segmentation;
pub mod svm;
pub mod synth;
pub mod tsne;
pub mod viz;

pub use error::{Error, Result};

/// Canonical sample rate for the whole pipeline, in Hz. All audio is
/// resampled to this on ingest so the 128×100 mel geometry is fixed.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// Length of one analysis snippet in seconds.
pub const SNIPPET_SECONDS: f64 = 1.0;
