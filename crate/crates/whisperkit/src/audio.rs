//! Mono audio buffers: WAV I/O, resampling, and synthetic test signals.
//!
//! Every pipeline in this crate standardizes on 16 kHz mono before feature
//! extraction ([`STANDARD_RATE_HZ`]); corpora shipping at other rates go
//! through [`resample`] first. [`synthesize`] produces deterministic test
//! signals: pure tones, seeded white noise (an aperiodic whisper-like proxy),
//! and harmonic series (a voiced-speech proxy with distinct harmonic bands).

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Internal rate standard: all pipelines resample to this before features.
pub const STANDARD_RATE_HZ: u32 = 16_000;

/// Errors from audio loading, writing, resampling, and synthesis.
#[derive(Debug, Error)]
pub enum AudioError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a valid WAV file: {detail}")]
    MalformedWav { path: PathBuf, detail: String },
    #[error("{path}: unsupported WAV encoding: {detail}")]
    UnsupportedWav { path: PathBuf, detail: String },
    #[error("{path}: WAV contains no audio samples")]
    EmptyAudio { path: PathBuf },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("frequency {freq_hz} Hz is at or above Nyquist ({nyquist_hz} Hz)")]
    FrequencyAboveNyquist { freq_hz: f64, nyquist_hz: f64 },
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("amplitude must lie in [0, 1], got {0}")]
    AmplitudeOutOfRange(f64),
}

/// A mono signal: amplitude samples in [-1, 1] plus their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    /// Wrap raw samples. The rate must be positive; emptiness is allowed
    /// here and rejected at the feature-extraction boundary.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// A copy with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> AudioBuffer {
        AudioBuffer {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}

/// Sample encodings supported on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavSampleFormat {
    /// 16-bit signed integer PCM (format tag 1).
    Int16,
    /// 32-bit IEEE float (format tag 3).
    Float32,
}

// ── WAV I/O ─────────────────────────────────────────────────────────────────

struct WavInfo {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
    data_offset: usize,
    data_len: usize,
}

fn malformed(path: &Path, detail: impl Into<String>) -> AudioError {
    AudioError::MalformedWav {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn parse_wav_header(path: &Path, bytes: &[u8]) -> Result<WavInfo, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed(path, "missing RIFF/WAVE header"));
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<(usize, usize)> = None;
    let mut off = 12usize;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap()) as usize;
        let body = off + 8;
        if body + size > bytes.len() {
            return Err(malformed(path, "chunk size exceeds file length"));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(malformed(path, "fmt chunk too short"));
                }
                let f = &bytes[body..body + 16];
                fmt = Some((
                    u16::from_le_bytes([f[0], f[1]]),
                    u16::from_le_bytes([f[2], f[3]]),
                    u32::from_le_bytes([f[4], f[5], f[6], f[7]]),
                    u16::from_le_bytes([f[14], f[15]]),
                ));
            }
            b"data" => data = Some((body, size)),
            _ => {} // skip LIST, fact, cue, ...
        }
        off = body + size + (size & 1); // chunks are word-aligned
    }
    let (format_tag, channels, sample_rate, bits_per_sample) =
        fmt.ok_or_else(|| malformed(path, "no fmt chunk"))?;
    let (data_offset, data_len) = data.ok_or_else(|| malformed(path, "no data chunk"))?;
    if channels == 0 {
        return Err(malformed(path, "zero channels"));
    }
    if sample_rate == 0 {
        return Err(malformed(path, "zero sample rate"));
    }
    Ok(WavInfo {
        format_tag,
        channels,
        sample_rate,
        bits_per_sample,
        data_offset,
        data_len,
    })
}

/// Load a PCM WAV file as a mono buffer.
///
/// 16-bit integer and 32-bit float encodings are accepted. Multi-channel
/// files are averaged to mono; integer samples are scaled to [-1, 1).
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, AudioError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let info = parse_wav_header(path, &bytes)?;

    let bytes_per_sample = match (info.format_tag, info.bits_per_sample) {
        (1, 16) => 2,
        (3, 32) => 4,
        (tag, bits) => {
            return Err(AudioError::UnsupportedWav {
                path: path.to_path_buf(),
                detail: format!("format tag {tag} with {bits} bits per sample"),
            })
        }
    };
    let frame_size = bytes_per_sample * info.channels as usize;
    if info.data_len % frame_size != 0 {
        return Err(malformed(path, "data chunk not a whole number of frames"));
    }
    let n_frames = info.data_len / frame_size;
    if n_frames == 0 {
        return Err(AudioError::EmptyAudio {
            path: path.to_path_buf(),
        });
    }

    let data = &bytes[info.data_offset..info.data_offset + info.data_len];
    let channels = info.channels as usize;
    let mut samples = Vec::with_capacity(n_frames);
    for frame in 0..n_frames {
        let mut acc = 0.0f64;
        for ch in 0..channels {
            let at = (frame * channels + ch) * bytes_per_sample;
            let v = match bytes_per_sample {
                2 => f64::from(i16::from_le_bytes([data[at], data[at + 1]])) / 32768.0,
                _ => f64::from(f32::from_le_bytes([
                    data[at],
                    data[at + 1],
                    data[at + 2],
                    data[at + 3],
                ]))
                .clamp(-1.0, 1.0),
            };
            acc += v;
        }
        samples.push(acc / channels as f64);
    }
    AudioBuffer::new(samples, info.sample_rate)
}

/// Write a mono buffer as a RIFF WAV file in the given sample format.
///
/// Samples are clamped to [-1, 1] before encoding.
pub fn write_wav(
    path: impl AsRef<Path>,
    buf: &AudioBuffer,
    format: WavSampleFormat,
) -> Result<(), AudioError> {
    let path = path.as_ref();
    let io_err = |source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };

    let (format_tag, bits): (u16, u16) = match format {
        WavSampleFormat::Int16 => (1, 16),
        WavSampleFormat::Float32 => (3, 32),
    };
    let bytes_per_sample = u32::from(bits) / 8;
    let data_len = buf.len() as u32 * bytes_per_sample;

    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&buf.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate_hz * bytes_per_sample).to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &buf.samples {
        let s = s.clamp(-1.0, 1.0);
        match format {
            WavSampleFormat::Int16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            WavSampleFormat::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }

    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(&out).map_err(io_err)?;
    Ok(())
}

/// Duration in seconds read from the WAV header alone (no sample decoding).
pub fn wav_duration_seconds(path: impl AsRef<Path>) -> Result<f64, AudioError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let info = parse_wav_header(path, &bytes)?;
    let bytes_per_sample = match (info.format_tag, info.bits_per_sample) {
        (1, 16) => 2usize,
        (3, 32) => 4,
        (tag, bits) => {
            return Err(AudioError::UnsupportedWav {
                path: path.to_path_buf(),
                detail: format!("format tag {tag} with {bits} bits per sample"),
            })
        }
    };
    let frame_size = bytes_per_sample * info.channels as usize;
    let n_frames = info.data_len.checked_div(frame_size).unwrap_or(0);
    Ok(n_frames as f64 / f64::from(info.sample_rate))
}

// ── Resampling ──────────────────────────────────────────────────────────────

const RESAMPLE_TAPS: usize = 32;
const KAISER_BETA: f64 = 8.0;

/// Modified Bessel function of the first kind, order zero (series expansion).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=30 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-16 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Convert to a new sample rate with a Kaiser-windowed sinc kernel
/// (β = 8, 32 taps per output phase).
///
/// Resampling to the source rate returns a bit-identical copy. Output length
/// is `round(len · target / source)`.
pub fn resample(buf: &AudioBuffer, target_rate_hz: u32) -> Result<AudioBuffer, AudioError> {
    if target_rate_hz == 0 {
        return Err(AudioError::ZeroSampleRate);
    }
    if target_rate_hz == buf.sample_rate_hz || buf.is_empty() {
        return Ok(AudioBuffer {
            samples: buf.samples.clone(),
            sample_rate_hz: target_rate_hz,
        });
    }

    let source = buf.sample_rate_hz;
    let out_len = ((buf.len() as u128 * u128::from(target_rate_hz) + u128::from(source) / 2)
        / u128::from(source)) as usize;

    let ratio = f64::from(source) / f64::from(target_rate_hz); // input samples per output
    let cutoff = (f64::from(target_rate_hz) / f64::from(source)).min(1.0);
    let half_width = RESAMPLE_TAPS as f64 / 2.0 / cutoff;
    let i0_beta = bessel_i0(KAISER_BETA);

    let x = &buf.samples;
    let n = x.len() as isize;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let pos = i as f64 * ratio;
        let lo = (pos - half_width).ceil() as isize;
        let hi = (pos + half_width).floor() as isize;
        let mut acc = 0.0;
        let mut ksum = 0.0;
        for k in lo..=hi {
            let t = pos - k as f64;
            let u = t / half_width;
            let w = bessel_i0(KAISER_BETA * (1.0 - u * u).max(0.0).sqrt()) / i0_beta;
            let h = cutoff * sinc(cutoff * t) * w;
            ksum += h;
            if k >= 0 && k < n {
                acc += x[k as usize] * h;
            }
        }
        out.push(if ksum != 0.0 { acc / ksum } else { 0.0 });
    }
    Ok(AudioBuffer {
        samples: out,
        sample_rate_hz: target_rate_hz,
    })
}

// ── Synthesis ───────────────────────────────────────────────────────────────

/// Deterministic test-signal families.
///
/// `HarmonicSeries` stands in for voiced speech (distinct harmonic bands at
/// multiples of f0); `WhiteNoise` stands in for whisper (aperiodic, flat
/// spectrum). Partials at or above Nyquist are dropped.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    Sine { freq_hz: f64, amp: f64 },
    WhiteNoise { amp: f64, seed: u64 },
    HarmonicSeries {
        f0_hz: f64,
        n_partials: u32,
        rolloff_db_per_octave: f64,
    },
    Silence,
}

/// Generate `duration_s` seconds of the given signal. Pure: identical
/// arguments (including seeds) produce identical buffers.
pub fn synthesize(
    kind: &SignalKind,
    duration_s: f64,
    sample_rate_hz: u32,
) -> Result<AudioBuffer, AudioError> {
    if sample_rate_hz == 0 {
        return Err(AudioError::ZeroSampleRate);
    }
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(AudioError::NonPositiveDuration(duration_s));
    }
    let n = (duration_s * f64::from(sample_rate_hz)).round() as usize;
    if n == 0 {
        return Err(AudioError::NonPositiveDuration(duration_s));
    }
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    let rate = f64::from(sample_rate_hz);

    let samples = match *kind {
        SignalKind::Silence => vec![0.0; n],
        SignalKind::Sine { freq_hz, amp } => {
            if freq_hz >= nyquist {
                return Err(AudioError::FrequencyAboveNyquist {
                    freq_hz,
                    nyquist_hz: nyquist,
                });
            }
            if !(0.0..=1.0).contains(&amp) {
                return Err(AudioError::AmplitudeOutOfRange(amp));
            }
            let w = 2.0 * std::f64::consts::PI * freq_hz;
            (0..n).map(|i| amp * (w * i as f64 / rate).sin()).collect()
        }
        SignalKind::WhiteNoise { amp, seed } => {
            if !(0.0..=1.0).contains(&amp) {
                return Err(AudioError::AmplitudeOutOfRange(amp));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| amp * (rng.random::<f64>() * 2.0 - 1.0))
                .collect()
        }
        SignalKind::HarmonicSeries {
            f0_hz,
            n_partials,
            rolloff_db_per_octave,
        } => {
            if f0_hz >= nyquist {
                return Err(AudioError::FrequencyAboveNyquist {
                    freq_hz: f0_hz,
                    nyquist_hz: nyquist,
                });
            }
            let mut sig = vec![0.0f64; n];
            for p in 1..=n_partials.max(1) {
                let f = f0_hz * f64::from(p);
                if f >= nyquist {
                    break;
                }
                let gain = 10f64.powf(rolloff_db_per_octave * f64::from(p).log2() / 20.0);
                let w = 2.0 * std::f64::consts::PI * f;
                for (i, s) in sig.iter_mut().enumerate() {
                    *s += gain * (w * i as f64 / rate).sin();
                }
            }
            let peak = sig.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            if peak > 0.0 {
                for s in &mut sig {
                    *s /= peak;
                }
            }
            sig
        }
    };
    AudioBuffer::new(samples, sample_rate_hz)
}
