pub mod analyze;
pub mod decode;
pub mod features;
pub mod score;
pub mod summarize;
pub mod synth_dataset;
pub mod train;

use std::path::Path;

use anyhow::Context;
use whisperkit::audio::{load_wav, resample, AudioBuffer, STANDARD_RATE_HZ};
use whisperkit::manifest::{parse_manifest, Manifest, Split};

use crate::{SplitFilter, UsageError};

/// Parse a manifest; parse failures are usage-grade errors (the input file
/// itself is unusable, nothing ran yet).
pub fn load_manifest(path: &Path) -> anyhow::Result<Manifest> {
    parse_manifest(path)
        .with_context(|| format!("loading manifest {}", path.display()))
        .map_err(UsageError::from_anyhow)
}

pub fn apply_split(manifest: &Manifest, filter: SplitFilter) -> Manifest {
    match filter {
        SplitFilter::All => manifest.clone(),
        SplitFilter::Train => manifest.filter_split(Split::Train),
        SplitFilter::Test => manifest.filter_split(Split::Test),
    }
}

/// Load one utterance at the pipeline's 16 kHz standard.
pub fn load_audio_16k(manifest: &Manifest, record_path: &Path) -> anyhow::Result<AudioBuffer> {
    let _ = manifest;
    let buf = load_wav(record_path)?;
    Ok(resample(&buf, STANDARD_RATE_HZ)?)
}
