//! whisperkit — a model-agnostic toolkit for whispered-speech ASR
//! experimentation.
//!
//! The crate covers the full small-scale evaluation pipeline:
//!
//! - [`audio`]: WAV I/O, windowed-sinc resampling, and synthetic test signals
//! - [`features`]: power spectrogram, log-mel, and MFCC front ends
//! - [`augment`]: SpecAugment-style time masking over feature matrices
//! - [`ctc`]: exact CTC negative log-likelihood and its gradient
//! - [`decode`]: greedy and prefix-beam-search decoding
//! - [`model`]: a desk-scale frame-classification acoustic model
//! - [`trainer`]: AdamW training loop with on-the-fly masking
//! - [`metrics`]: edit-distance alignment, WER/CER, corpus aggregation
//! - [`acoustics`]: intensity, spectral slope, and periodicity measures
//!   quantifying the whisper/normal contrast
//! - [`manifest`]: typed dataset manifests (JSONL / TSV) with
//!   style/dialect/split metadata
//!
//! Everything is deterministic given explicit seeds; no global RNG state is
//! consulted anywhere. The companion `whisperkit` binary wires these modules
//! into reproducible command-line experiments.

pub mod acoustics;
pub mod audio;
pub mod augment;
pub mod ctc;
pub mod decode;
pub mod features;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod reference;
pub mod trainer;

mod numeric;

// The guide's chapters run as documentation tests: every fenced Rust block
// in book/src compiles and executes under `cargo test --doc`, so the book
// cannot drift from the library. One module per chapter keeps failures
// attributable.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/audio.md")]
    mod audio {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/masking.md")]
    mod masking {}
    #[doc = include_str!("../../../book/src/ctc.md")]
    mod ctc {}
    #[doc = include_str!("../../../book/src/decoding.md")]
    mod decoding {}
    #[doc = include_str!("../../../book/src/model-training.md")]
    mod model_training {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/acoustics.md")]
    mod acoustics {}
    #[doc = include_str!("../../../book/src/manifests.md")]
    mod manifests {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
