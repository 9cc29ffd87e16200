//! Training-time corruption of feature matrices: contiguous frame spans are
//! replaced by a fill value (time masking). A config-gated frequency-masking
//! extra is available but off by default; time masking is the primary policy.
//!
//! Masking is pure: the RNG seed is an explicit argument and identical seeds
//! reproduce identical masks. Overlapping sampled intervals are merged at
//! apply time — the mask is a *set* of frame indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("max mask width {max_width} exceeds frame count {num_frames}")]
    MaxWidthExceedsFrames { max_width: usize, num_frames: usize },
    #[error("interval (start {start}, width {width}) out of bounds for {num_frames} frames")]
    IntervalOutOfBounds {
        start: usize,
        width: usize,
        num_frames: usize,
    },
}

/// What masked rows are filled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillMode {
    Zeros,
    /// Per-dimension mean over the unmasked frames. Keeps the feature
    /// statistics of log-domain features in place.
    #[default]
    UtteranceMean,
}

/// One contiguous masked span of frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskInterval {
    pub start: usize,
    pub width: usize,
}

/// A sampled set of time masks plus the fill policy. Serializes to JSON for
/// experiment reproducibility logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub intervals: Vec<MaskInterval>,
    pub fill: FillMode,
}

impl MaskSpec {
    pub fn empty() -> Self {
        Self {
            intervals: Vec::new(),
            fill: FillMode::default(),
        }
    }

    pub fn with_fill(mut self, fill: FillMode) -> Self {
        self.fill = fill;
        self
    }
}

/// Sample `n_masks` intervals: width uniform in `[0, max_width]`, start
/// uniform in `[0, num_frames − width]`. Deterministic given the seed.
pub fn sample_time_masks(
    num_frames: usize,
    n_masks: usize,
    max_width: usize,
    seed: u64,
) -> Result<MaskSpec, AugmentError> {
    if max_width > num_frames {
        return Err(AugmentError::MaxWidthExceedsFrames {
            max_width,
            num_frames,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intervals = (0..n_masks)
        .map(|_| {
            let width = rng.random_range(0..=max_width);
            let start = rng.random_range(0..=num_frames - width);
            MaskInterval { start, width }
        })
        .collect();
    Ok(MaskSpec {
        intervals,
        fill: FillMode::default(),
    })
}

/// Merge intervals into disjoint sorted spans (half-open, in frames).
fn merged_spans(spec: &MaskSpec) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = spec
        .intervals
        .iter()
        .filter(|iv| iv.width > 0)
        .map(|iv| (iv.start, iv.start + iv.width))
        .collect();
    spans.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Replace every frame inside a mask interval with the fill value. Frames
/// outside all intervals are bit-identical to the input.
pub fn apply_masks(feat: &FeatureMatrix, spec: &MaskSpec) -> Result<FeatureMatrix, AugmentError> {
    let t = feat.num_frames();
    for iv in &spec.intervals {
        if iv.start + iv.width > t {
            return Err(AugmentError::IntervalOutOfBounds {
                start: iv.start,
                width: iv.width,
                num_frames: t,
            });
        }
    }
    let spans = merged_spans(spec);
    let mut out = feat.clone();
    if spans.is_empty() {
        return Ok(out);
    }

    let d = feat.dim();
    let fill: Vec<f64> = match spec.fill {
        FillMode::Zeros => vec![0.0; d],
        FillMode::UtteranceMean => {
            let mut masked = vec![false; t];
            for &(s, e) in &spans {
                masked[s..e].iter_mut().for_each(|m| *m = true);
            }
            let n_unmasked = masked.iter().filter(|m| !**m).count();
            if n_unmasked == 0 {
                vec![0.0; d] // fully masked utterance: nothing to average
            } else {
                let mut mean = vec![0.0; d];
                for (ti, row) in feat.rows().enumerate() {
                    if !masked[ti] {
                        for (m, v) in mean.iter_mut().zip(row) {
                            *m += v;
                        }
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n_unmasked as f64);
                mean
            }
        }
    };

    let data = out.data_mut();
    for &(s, e) in &spans {
        for ti in s..e {
            data[ti * d..(ti + 1) * d].copy_from_slice(&fill);
        }
    }
    Ok(out)
}

/// Mask parameters used by the training loop. Frequency masking stays off
/// unless `n_freq_masks` is raised above zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub n_time_masks: usize,
    pub max_time_width: usize,
    pub n_freq_masks: usize,
    pub max_freq_width: usize,
    pub fill: FillMode,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            n_time_masks: 2,
            max_time_width: 10,
            n_freq_masks: 0,
            max_freq_width: 8,
            fill: FillMode::default(),
        }
    }
}

/// Convenience used per (utterance, epoch) by the trainer: samples time
/// masks (clamping `max_time_width` to the utterance length) and applies
/// them, then frequency masks if configured.
pub fn augment(
    feat: &FeatureMatrix,
    cfg: &AugmentConfig,
    seed: u64,
) -> Result<FeatureMatrix, AugmentError> {
    let spec = sample_time_masks(
        feat.num_frames(),
        cfg.n_time_masks,
        cfg.max_time_width.min(feat.num_frames()),
        seed,
    )?
    .with_fill(cfg.fill);
    let mut out = apply_masks(feat, &spec)?;
    if cfg.n_freq_masks > 0 {
        out = apply_freq_masks(&out, cfg, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    }
    Ok(out)
}

/// Frequency-axis analogue: masked feature dimensions are zeroed (or set to
/// the global unmasked mean). Off by default.
fn apply_freq_masks(
    feat: &FeatureMatrix,
    cfg: &AugmentConfig,
    seed: u64,
) -> Result<FeatureMatrix, AugmentError> {
    let d = feat.dim();
    let max_w = cfg.max_freq_width.min(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masked_dims = vec![false; d];
    for _ in 0..cfg.n_freq_masks {
        let width = rng.random_range(0..=max_w);
        let start = rng.random_range(0..=d - width);
        masked_dims[start..start + width]
            .iter_mut()
            .for_each(|m| *m = true);
    }
    let fill_value = match cfg.fill {
        FillMode::Zeros => 0.0,
        FillMode::UtteranceMean => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for row in feat.rows() {
                for (dim, v) in row.iter().enumerate() {
                    if !masked_dims[dim] {
                        sum += v;
                        n += 1;
                    }
                }
            }
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        }
    };
    let mut out = feat.clone();
    let t = out.num_frames();
    let data = out.data_mut();
    for ti in 0..t {
        for (dim, m) in masked_dims.iter().enumerate() {
            if *m {
                data[ti * d + dim] = fill_value;
            }
        }
    }
    Ok(out)
}
