//! Frame-level spectral features: power spectrogram, log-mel, MFCC.
//!
//! Framing is exact and unpadded: frame `t` covers samples
//! `[t·hop, t·hop + frame_len)` and the trailing partial frame is dropped,
//! so `T = 1 + floor((N − frame_len) / hop)` holds for every input of at
//! least one frame. A Hann window is applied before the FFT.

use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::AudioBuffer;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("buffer of {len} samples is shorter than one frame ({frame_samples} samples)")]
    BufferTooShort { len: usize, frame_samples: usize },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
    #[error("expected {expected:?} input, got {got:?}")]
    KindMismatch {
        expected: FeatureKind,
        got: FeatureKind,
    },
    #[error("input dim {got} does not match fft_size {fft_size} ({expected} bins)")]
    DimMismatch {
        got: usize,
        fft_size: usize,
        expected: usize,
    },
    #[error("n_mfcc {n_mfcc} exceeds n_mels {n_mels}")]
    TooManyCoefficients { n_mfcc: usize, n_mels: usize },
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a valid feature file: {detail}")]
    MalformedFile { path: PathBuf, detail: String },
}

/// What a [`FeatureMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    PowerSpec,
    LogMel,
    Mfcc,
}

impl FeatureKind {
    fn to_u32(self) -> u32 {
        match self {
            FeatureKind::PowerSpec => 0,
            FeatureKind::LogMel => 1,
            FeatureKind::Mfcc => 2,
        }
    }

    fn from_u32(v: u32) -> Option<Self> {
        match v {
            0 => Some(FeatureKind::PowerSpec),
            1 => Some(FeatureKind::LogMel),
            2 => Some(FeatureKind::Mfcc),
            _ => None,
        }
    }
}

/// Front-end configuration. Defaults: 25 ms frames, 10 ms hop, 512-point
/// FFT, 80 mel bands over the full band, 13 cepstral coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub fmin_hz: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub fmax_hz: Option<f64>,
    pub log_floor: f64,
    /// Optional pre-emphasis coefficient; off by default (whisper already
    /// has a flat spectral slope, and the front end should not hide that).
    pub pre_emphasis: Option<f64>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            fft_size: 512,
            n_mels: 80,
            n_mfcc: 13,
            fmin_hz: 0.0,
            fmax_hz: None,
            log_floor: 1e-10,
            pre_emphasis: None,
        }
    }
}

impl FeatureConfig {
    pub fn frame_samples(&self, sample_rate_hz: u32) -> usize {
        (self.frame_len_ms / 1000.0 * f64::from(sample_rate_hz)).round() as usize
    }

    pub fn hop_samples(&self, sample_rate_hz: u32) -> usize {
        (self.hop_ms / 1000.0 * f64::from(sample_rate_hz)).round() as usize
    }

    /// Frames per second implied by the hop.
    pub fn frame_rate_hz(&self) -> f64 {
        1000.0 / self.hop_ms
    }

    fn fmax_or_nyquist(&self, sample_rate_hz: u32) -> f64 {
        self.fmax_hz
            .unwrap_or_else(|| f64::from(sample_rate_hz) / 2.0)
    }

    fn validate(&self, sample_rate_hz: u32) -> Result<(), FeatureError> {
        let bad = |msg: String| Err(FeatureError::InvalidConfig(msg));
        let frame = self.frame_samples(sample_rate_hz);
        let hop = self.hop_samples(sample_rate_hz);
        if frame == 0 || hop == 0 {
            return bad(format!(
                "frame ({:.3} ms) and hop ({:.3} ms) must be at least one sample",
                self.frame_len_ms, self.hop_ms
            ));
        }
        if hop > frame {
            return bad(format!("hop ({hop} samples) exceeds frame ({frame} samples)"));
        }
        if !self.fft_size.is_power_of_two() {
            return bad(format!("fft_size {} is not a power of two", self.fft_size));
        }
        if self.fft_size < frame {
            return bad(format!(
                "fft_size {} is smaller than the frame ({frame} samples)",
                self.fft_size
            ));
        }
        let nyquist = f64::from(sample_rate_hz) / 2.0;
        let fmax = self.fmax_or_nyquist(sample_rate_hz);
        let band_ok = self.fmin_hz >= 0.0 && self.fmin_hz < fmax && fmax <= nyquist;
        if !band_ok {
            return bad(format!(
                "need 0 <= fmin ({}) < fmax ({fmax}) <= Nyquist ({nyquist})",
                self.fmin_hz
            ));
        }
        if self.n_mels == 0 {
            return bad("n_mels must be positive".into());
        }
        if self.log_floor <= 0.0 || self.log_floor.is_nan() {
            return bad(format!("log_floor must be positive, got {}", self.log_floor));
        }
        Ok(())
    }
}

/// T × D matrix of frame-level features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>, // row-major, T rows of D
    num_frames: usize,
    dim: usize,
    frame_rate_hz: f64,
    kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn from_rows(
        data: Vec<f64>,
        num_frames: usize,
        dim: usize,
        frame_rate_hz: f64,
        kind: FeatureKind,
    ) -> Self {
        assert_eq!(data.len(), num_frames * dim, "row-major shape mismatch");
        Self {
            data,
            num_frames,
            dim,
            frame_rate_hz,
            kind,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

// ── STFT / mel / MFCC ───────────────────────────────────────────────────────

/// Periodic Hann window of the given length.
fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Power spectrogram: Hann-windowed frames, zero-padded to `fft_size`,
/// entry (t, k) = |DFT_k|². D = fft_size/2 + 1.
pub fn stft_power(buf: &AudioBuffer, cfg: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    cfg.validate(buf.sample_rate_hz())?;
    let frame = cfg.frame_samples(buf.sample_rate_hz());
    let hop = cfg.hop_samples(buf.sample_rate_hz());
    if buf.len() < frame {
        return Err(FeatureError::BufferTooShort {
            len: buf.len(),
            frame_samples: frame,
        });
    }

    let samples: Vec<f64> = match cfg.pre_emphasis {
        None => buf.samples().to_vec(),
        Some(alpha) => {
            let x = buf.samples();
            let mut y = Vec::with_capacity(x.len());
            y.push(x[0]);
            for i in 1..x.len() {
                y.push(x[i] - alpha * x[i - 1]);
            }
            y
        }
    };

    let num_frames = 1 + (samples.len() - frame) / hop;
    let n_bins = cfg.fft_size / 2 + 1;
    let window = hann(frame);
    let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);

    let mut data = Vec::with_capacity(num_frames * n_bins);
    let mut scratch = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    for t in 0..num_frames {
        let start = t * hop;
        for i in 0..cfg.fft_size {
            scratch[i] = if i < frame {
                Complex::new(samples[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut scratch);
        data.extend(scratch.iter().take(n_bins).map(|c| c.norm_sqr()));
    }

    Ok(FeatureMatrix {
        data,
        num_frames,
        dim: n_bins,
        frame_rate_hz: f64::from(buf.sample_rate_hz()) / hop as f64,
        kind: FeatureKind::PowerSpec,
    })
}

/// Mel scale: mel(f) = 2595 · log10(1 + f/700).
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank as per-filter `(bin, weight)` lists.
fn mel_filterbank(cfg: &FeatureConfig, sample_rate_hz: u32, n_bins: usize) -> Vec<Vec<(usize, f64)>> {
    let fmax = cfg.fmax_or_nyquist(sample_rate_hz);
    let mel_lo = hz_to_mel(cfg.fmin_hz);
    let mel_hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = f64::from(sample_rate_hz) / cfg.fft_size as f64;

    (0..cfg.n_mels)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut taps = Vec::new();
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                if f <= left || f >= right {
                    continue;
                }
                let w = if f <= center {
                    (f - left) / (center - left)
                } else {
                    (right - f) / (right - center)
                };
                if w > 0.0 {
                    taps.push((k, w));
                }
            }
            taps
        })
        .collect()
}

/// Log-mel filterbank energies: entry (t, m) = ln(max(Σ_k H[m,k]·P[t,k], floor)).
///
/// The input must be a power spectrogram whose width matches `cfg.fft_size`.
/// The triangular filterbank needs the sample rate to place its band edges;
/// pass the rate of the audio the spectrogram came from.
pub fn log_mel(
    spec: &FeatureMatrix,
    cfg: &FeatureConfig,
    sample_rate_hz: u32,
) -> Result<FeatureMatrix, FeatureError> {
    if spec.kind != FeatureKind::PowerSpec {
        return Err(FeatureError::KindMismatch {
            expected: FeatureKind::PowerSpec,
            got: spec.kind,
        });
    }
    let n_bins = cfg.fft_size / 2 + 1;
    if spec.dim != n_bins {
        return Err(FeatureError::DimMismatch {
            got: spec.dim,
            fft_size: cfg.fft_size,
            expected: n_bins,
        });
    }
    cfg.validate(sample_rate_hz)?;

    let bank = mel_filterbank(cfg, sample_rate_hz, n_bins);
    let mut data = Vec::with_capacity(spec.num_frames * cfg.n_mels);
    for row in spec.rows() {
        for taps in &bank {
            let e: f64 = taps.iter().map(|&(k, w)| w * row[k]).sum();
            data.push(e.max(cfg.log_floor).ln());
        }
    }
    Ok(FeatureMatrix {
        data,
        num_frames: spec.num_frames,
        dim: cfg.n_mels,
        frame_rate_hz: spec.frame_rate_hz,
        kind: FeatureKind::LogMel,
    })
}

/// MFCC: orthonormal DCT-II over the mel axis, first `n_mfcc` coefficients.
pub fn mfcc(logmel: &FeatureMatrix, cfg: &FeatureConfig) -> Result<FeatureMatrix, FeatureError> {
    if logmel.kind != FeatureKind::LogMel {
        return Err(FeatureError::KindMismatch {
            expected: FeatureKind::LogMel,
            got: logmel.kind,
        });
    }
    if cfg.n_mfcc > logmel.dim {
        return Err(FeatureError::TooManyCoefficients {
            n_mfcc: cfg.n_mfcc,
            n_mels: logmel.dim,
        });
    }
    let m = logmel.dim;
    let mut data = Vec::with_capacity(logmel.num_frames * cfg.n_mfcc);
    for row in logmel.rows() {
        for j in 0..cfg.n_mfcc {
            let scale = if j == 0 {
                (1.0 / m as f64).sqrt()
            } else {
                (2.0 / m as f64).sqrt()
            };
            let c: f64 = row
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    x * (std::f64::consts::PI * (2 * i + 1) as f64 * j as f64 / (2 * m) as f64)
                        .cos()
                })
                .sum();
            data.push(scale * c);
        }
    }
    Ok(FeatureMatrix {
        data,
        num_frames: logmel.num_frames,
        dim: cfg.n_mfcc,
        frame_rate_hz: logmel.frame_rate_hz,
        kind: FeatureKind::Mfcc,
    })
}

/// Full front end: audio → requested feature kind.
pub fn extract(
    buf: &AudioBuffer,
    cfg: &FeatureConfig,
    kind: FeatureKind,
) -> Result<FeatureMatrix, FeatureError> {
    let spec = stft_power(buf, cfg)?;
    match kind {
        FeatureKind::PowerSpec => Ok(spec),
        FeatureKind::LogMel => log_mel(&spec, cfg, buf.sample_rate_hz()),
        FeatureKind::Mfcc => {
            let lm = log_mel(&spec, cfg, buf.sample_rate_hz())?;
            mfcc(&lm, cfg)
        }
    }
}

// ── Serialization ───────────────────────────────────────────────────────────

const FEATURE_MAGIC: &[u8; 4] = b"WKF1";

impl FeatureMatrix {
    /// Serialized form: 16-byte header (magic, kind, T, D) followed by
    /// row-major little-endian f32 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&self.kind.to_u32().to_le_bytes());
        out.extend_from_slice(&(self.num_frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    /// Write [`FeatureMatrix::to_bytes`] to a file.
    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        let path = path.as_ref();
        let io_err = |source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        };
        let f = std::fs::File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(f);
        w.write_all(&self.to_bytes()).map_err(io_err)?;
        w.flush().map_err(io_err)?;
        Ok(())
    }

    /// Read a feature file. The header carries no frame rate, so the caller
    /// supplies it (feature indexes written by the CLI record it per file).
    pub fn read_file(path: impl AsRef<Path>, frame_rate_hz: f64) -> Result<Self, FeatureError> {
        let path = path.as_ref();
        let io_err = |source| FeatureError::Io {
            path: path.to_path_buf(),
            source,
        };
        let bad = |detail: &str| FeatureError::MalformedFile {
            path: path.to_path_buf(),
            detail: detail.into(),
        };
        let mut f = std::fs::File::open(path).map_err(io_err)?;
        let mut header = [0u8; 16];
        f.read_exact(&mut header).map_err(io_err)?;
        if &header[0..4] != FEATURE_MAGIC {
            return Err(bad("bad magic"));
        }
        let kind = FeatureKind::from_u32(u32::from_le_bytes(header[4..8].try_into().unwrap()))
            .ok_or_else(|| bad("unknown feature kind"))?;
        let num_frames = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let mut payload = Vec::new();
        f.read_to_end(&mut payload).map_err(io_err)?;
        if payload.len() != num_frames * dim * 4 {
            return Err(bad("payload size does not match header"));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Ok(Self {
            data,
            num_frames,
            dim,
            frame_rate_hz,
            kind,
        })
    }

    /// Debug CSV export: header `d0,d1,...`, one row per frame.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim).map(|d| format!("d{d}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}
