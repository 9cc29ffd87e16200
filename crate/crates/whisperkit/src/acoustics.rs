//! Quantitative whisper-vs-normal acoustic measures.
//!
//! Whispered speech carries less energy, a flatter spectral slope, and no
//! periodic voicing. The three measures here turn those contrasts into
//! numbers per utterance, and [`style_contrast`] reduces them to per-speaker
//! whisper-minus-normal deltas:
//!
//! - [`intensity_contour`]: per-frame RMS in dB
//! - [`spectral_slope`]: regression slope of the time-averaged log-power
//!   spectrum in dB per kHz (closer to zero = flatter)
//! - [`periodicity`]: peak normalized autocorrelation in the pitch lag
//!   range, near 1 for voiced signals and near 0 for noise
//!
//! Formant tracking is deliberately out of scope; robust formant estimation
//! is its own research problem.

use serde::Serialize;
use thiserror::Error;

use crate::audio::AudioBuffer;
use crate::features::{stft_power, FeatureConfig, FeatureError};
use crate::manifest::Style;

#[derive(Debug, Error)]
pub enum AcousticsError {
    #[error("buffer of {len} samples is shorter than one frame ({frame_samples})")]
    BufferTooShort { len: usize, frame_samples: usize },
    #[error("buffer of {len} samples is too short for f_lo {f_lo_hz} Hz (needs {needed})")]
    TooShortForPitchFloor {
        len: usize,
        f_lo_hz: f64,
        needed: usize,
    },
    #[error("band [{fmin_hz}, {fmax_hz}] Hz covers fewer than 2 spectrum bins")]
    DegenerateBand { fmin_hz: f64, fmax_hz: f64 },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Hard floor keeping silence finite: 20·log10(1e-10) = −200 dB.
const DB_FLOOR_AMPLITUDE: f64 = 1e-10;

/// Per-frame intensity in dB: `20·log10(max(RMS, 1e-10))`.
///
/// The floor enters through `max`, not addition, so applying a gain `g`
/// shifts every non-silent frame by exactly `20·log10 g`.
pub fn intensity_contour(
    buf: &AudioBuffer,
    frame_ms: f64,
    hop_ms: f64,
) -> Result<Vec<f64>, AcousticsError> {
    let rate = buf.sample_rate_hz();
    let frame = (frame_ms / 1000.0 * f64::from(rate)).round() as usize;
    let hop = ((hop_ms / 1000.0 * f64::from(rate)).round() as usize).max(1);
    if frame == 0 || buf.len() < frame {
        return Err(AcousticsError::BufferTooShort {
            len: buf.len(),
            frame_samples: frame.max(1),
        });
    }
    let x = buf.samples();
    let num_frames = 1 + (x.len() - frame) / hop;
    let mut out = Vec::with_capacity(num_frames);
    for t in 0..num_frames {
        let seg = &x[t * hop..t * hop + frame];
        let rms = (seg.iter().map(|s| s * s).sum::<f64>() / frame as f64).sqrt();
        out.push(20.0 * rms.max(DB_FLOOR_AMPLITUDE).log10());
    }
    Ok(out)
}

/// Frequency band for the slope regression. Defaults 100 Hz – 8 kHz (skips
/// DC leakage; the upper edge is Nyquist at the 16 kHz pipeline standard).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SlopeBand {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for SlopeBand {
    fn default() -> Self {
        Self {
            fmin_hz: 100.0,
            fmax_hz: 8000.0,
        }
    }
}

/// Least-squares slope of the time-averaged log-power spectrum (dB) against
/// frequency (kHz) over the band. A global gain shifts the intercept only.
pub fn spectral_slope(
    buf: &AudioBuffer,
    cfg: &FeatureConfig,
    band: &SlopeBand,
) -> Result<f64, AcousticsError> {
    let spec = stft_power(buf, cfg)?;
    let bin_hz = f64::from(buf.sample_rate_hz()) / cfg.fft_size as f64;

    let mut xs = Vec::new(); // kHz
    let mut ys = Vec::new(); // dB
    for k in 0..spec.dim() {
        let f = k as f64 * bin_hz;
        if f < band.fmin_hz || f > band.fmax_hz {
            continue;
        }
        let mean_power: f64 =
            spec.rows().map(|row| row[k]).sum::<f64>() / spec.num_frames() as f64;
        xs.push(f / 1000.0);
        ys.push(10.0 * mean_power.max(1e-20).log10());
    }
    if xs.len() < 2 {
        return Err(AcousticsError::DegenerateBand {
            fmin_hz: band.fmin_hz,
            fmax_hz: band.fmax_hz,
        });
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    Ok(cov / var)
}

/// Pitch lag search range. Defaults cover typical speech f0 (60–400 Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PitchRange {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
}

impl Default for PitchRange {
    fn default() -> Self {
        Self {
            f_lo_hz: 60.0,
            f_hi_hz: 400.0,
        }
    }
}

fn autocorr_peak(buf: &AudioBuffer, range: &PitchRange) -> Result<Option<(usize, f64)>, AcousticsError> {
    let rate = f64::from(buf.sample_rate_hz());
    let lag_max = (rate / range.f_lo_hz).floor() as usize;
    let lag_min = ((rate / range.f_hi_hz).ceil() as usize).max(1);
    let needed = 2 * lag_max;
    if buf.len() < needed {
        return Err(AcousticsError::TooShortForPitchFloor {
            len: buf.len(),
            f_lo_hz: range.f_lo_hz,
            needed,
        });
    }
    let mean = buf.samples().iter().sum::<f64>() / buf.len() as f64;
    let x: Vec<f64> = buf.samples().iter().map(|s| s - mean).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Ok(None); // silence: degenerate normalization
    }
    let mut best_lag = lag_min;
    let mut best = f64::NEG_INFINITY;
    for lag in lag_min..=lag_max.min(x.len() - 1) {
        let r: f64 = x[..x.len() - lag]
            .iter()
            .zip(&x[lag..])
            .map(|(a, b)| a * b)
            .sum();
        let normalized = r / energy;
        if normalized > best {
            best = normalized;
            best_lag = lag;
        }
    }
    Ok(Some((best_lag, best.clamp(0.0, 1.0))))
}

/// Peak normalized autocorrelation of the mean-removed signal over lags in
/// the pitch range, clamped to [0, 1]. Silence is defined as 0. The ratio
/// form makes the value exactly gain-invariant.
pub fn periodicity(buf: &AudioBuffer, range: &PitchRange) -> Result<f64, AcousticsError> {
    Ok(autocorr_peak(buf, range)?.map_or(0.0, |(_, v)| v))
}

/// Frequency of the best autocorrelation lag, or `None` on silence. A crude
/// but serviceable pitch estimate for periodic signals.
pub fn pitch_estimate_hz(buf: &AudioBuffer, range: &PitchRange) -> Result<Option<f64>, AcousticsError> {
    Ok(autocorr_peak(buf, range)?
        .map(|(lag, _)| f64::from(buf.sample_rate_hz()) / lag as f64))
}

/// All per-utterance measures in one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtteranceMeasures {
    pub mean_intensity_db: f64,
    pub slope_db_per_khz: f64,
    pub periodicity: f64,
}

/// Analysis knobs shared across an experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub features: FeatureConfig,
    pub slope_band: SlopeBand,
    pub pitch: PitchRange,
}

pub fn analyze(buf: &AudioBuffer, cfg: &AnalysisConfig) -> Result<UtteranceMeasures, AcousticsError> {
    let contour = intensity_contour(buf, cfg.features.frame_len_ms, cfg.features.hop_ms)?;
    let mean_intensity_db = contour.iter().sum::<f64>() / contour.len() as f64;
    Ok(UtteranceMeasures {
        mean_intensity_db,
        slope_db_per_khz: spectral_slope(buf, &cfg.features, &cfg.slope_band)?,
        periodicity: periodicity(buf, &cfg.pitch)?,
    })
}

/// One analyzed utterance with the metadata contrast needs.
#[derive(Debug, Clone)]
pub struct SpeakerStyleMeasure {
    pub speaker_id: String,
    pub style: Style,
    pub measures: UtteranceMeasures,
}

/// Whisper-minus-normal deltas for one speaker, averaged over that
/// speaker's utterances per style.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StyleDelta {
    pub speaker_id: String,
    pub n_normal: usize,
    pub n_whisper: usize,
    pub d_mean_intensity_db: f64,
    pub d_slope_db_per_khz: f64,
    pub d_periodicity: f64,
}

/// Per-speaker style contrast. Speakers missing either style are skipped and
/// returned separately so callers can report them.
pub fn style_contrast(items: &[SpeakerStyleMeasure]) -> (Vec<StyleDelta>, Vec<String>) {
    use std::collections::BTreeMap;
    #[derive(Default)]
    struct Acc {
        n: usize,
        intensity: f64,
        slope: f64,
        periodicity: f64,
    }
    impl Acc {
        fn push(&mut self, m: &UtteranceMeasures) {
            self.n += 1;
            self.intensity += m.mean_intensity_db;
            self.slope += m.slope_db_per_khz;
            self.periodicity += m.periodicity;
        }
        fn mean(&self) -> (f64, f64, f64) {
            let n = self.n as f64;
            (self.intensity / n, self.slope / n, self.periodicity / n)
        }
    }

    let mut by_speaker: BTreeMap<String, (Acc, Acc)> = BTreeMap::new();
    for item in items {
        let entry = by_speaker.entry(item.speaker_id.clone()).or_default();
        match item.style {
            Style::Normal => entry.0.push(&item.measures),
            Style::Whisper => entry.1.push(&item.measures),
        }
    }

    let mut deltas = Vec::new();
    let mut skipped = Vec::new();
    for (speaker_id, (normal, whisper)) in by_speaker {
        if normal.n == 0 || whisper.n == 0 {
            skipped.push(speaker_id);
            continue;
        }
        let (ni, ns, np) = normal.mean();
        let (wi, ws, wp) = whisper.mean();
        deltas.push(StyleDelta {
            speaker_id,
            n_normal: normal.n,
            n_whisper: whisper.n,
            d_mean_intensity_db: wi - ni,
            d_slope_db_per_khz: ws - ns,
            d_periodicity: wp - np,
        });
    }
    (deltas, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{resample, synthesize, SignalKind};

    fn square_wave(rate: u32, dur: f64) -> AudioBuffer {
        let n = (dur * f64::from(rate)) as usize;
        let half_period = 8usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| if (i / half_period).is_multiple_of(2) { 1.0 } else { -1.0 })
            .collect();
        AudioBuffer::new(samples, rate).unwrap()
    }

    fn noise(amp: f64, seed: u64) -> AudioBuffer {
        synthesize(&SignalKind::WhiteNoise { amp, seed }, 1.0, 16000).unwrap()
    }

    fn harmonic() -> AudioBuffer {
        synthesize(
            &SignalKind::HarmonicSeries {
                f0_hz: 200.0,
                n_partials: 20,
                rolloff_db_per_octave: -12.0,
            },
            1.0,
            16000,
        )
        .unwrap()
    }

    #[test]
    fn full_scale_square_wave_sits_at_zero_db() {
        let contour = intensity_contour(&square_wave(16000, 0.5), 25.0, 10.0).unwrap();
        for v in contour {
            assert!(v.abs() < 1e-12, "got {v} dB");
        }
    }

    #[test]
    fn silence_hits_the_floor() {
        let silence = synthesize(&SignalKind::Silence, 0.5, 16000).unwrap();
        let contour = intensity_contour(&silence, 25.0, 10.0).unwrap();
        for v in contour {
            assert_eq!(v, -200.0);
        }
    }

    #[test]
    fn gain_shifts_intensity_exactly() {
        let buf = noise(0.4, 3);
        let base = intensity_contour(&buf, 25.0, 10.0).unwrap();
        for gain in [2.0, 0.5, 0.1, 7.3] {
            let shifted = intensity_contour(&buf.scaled(gain), 25.0, 10.0).unwrap();
            let want = 20.0 * f64::log10(gain);
            for (a, b) in base.iter().zip(&shifted) {
                assert!(
                    ((b - a) - want).abs() < 1e-9,
                    "gain {gain}: shift {}",
                    b - a
                );
            }
        }
    }

    #[test]
    fn double_gain_is_six_db() {
        let buf = noise(0.3, 9);
        let base = intensity_contour(&buf, 25.0, 10.0).unwrap();
        let doubled = intensity_contour(&buf.scaled(2.0), 25.0, 10.0).unwrap();
        for (a, b) in base.iter().zip(&doubled) {
            assert!(((b - a) - 6.020599913279624).abs() < 1e-9);
        }
    }

    #[test]
    fn short_buffer_rejected() {
        let buf = AudioBuffer::new(vec![0.5; 100], 16000).unwrap();
        assert!(matches!(
            intensity_contour(&buf, 25.0, 10.0),
            Err(AcousticsError::BufferTooShort { .. })
        ));
    }

    #[test]
    fn white_noise_slope_is_nearly_flat() {
        let slope =
            spectral_slope(&noise(0.8, 11), &FeatureConfig::default(), &SlopeBand::default())
                .unwrap();
        assert!(slope.abs() < 0.5, "slope {slope} dB/kHz");
    }

    #[test]
    fn harmonic_rolloff_is_steeper_than_noise() {
        let cfg = FeatureConfig::default();
        let band = SlopeBand::default();
        let s_noise = spectral_slope(&noise(0.8, 11), &cfg, &band).unwrap();
        let s_harm = spectral_slope(&harmonic(), &cfg, &band).unwrap();
        assert!(
            s_harm < s_noise,
            "harmonic {s_harm} should fall below noise {s_noise}"
        );
    }

    #[test]
    fn slope_ignores_global_gain() {
        let buf = noise(0.5, 21);
        let cfg = FeatureConfig::default();
        let band = SlopeBand::default();
        let a = spectral_slope(&buf, &cfg, &band).unwrap();
        let b = spectral_slope(&buf.scaled(0.125), &cfg, &band).unwrap();
        assert!((a - b).abs() < 1e-9, "a={a} b={b}");
    }

    #[test]
    fn degenerate_band_rejected() {
        let band = SlopeBand {
            fmin_hz: 1000.0,
            fmax_hz: 1010.0, // narrower than one 31.25 Hz bin
        };
        assert!(matches!(
            spectral_slope(&noise(0.5, 2), &FeatureConfig::default(), &band),
            Err(AcousticsError::DegenerateBand { .. })
        ));
    }

    #[test]
    fn sine_is_highly_periodic() {
        let sine = synthesize(
            &SignalKind::Sine {
                freq_hz: 200.0,
                amp: 0.9,
            },
            1.0,
            16000,
        )
        .unwrap();
        let p = periodicity(&sine, &PitchRange::default()).unwrap();
        assert!(p > 0.95, "periodicity {p}");
        let f = pitch_estimate_hz(&sine, &PitchRange::default())
            .unwrap()
            .unwrap();
        assert!((f - 200.0).abs() < 2.0, "pitch {f}");
    }

    #[test]
    fn white_noise_is_aperiodic() {
        let p = periodicity(&noise(0.8, 13), &PitchRange::default()).unwrap();
        assert!(p < 0.3, "periodicity {p}");
    }

    #[test]
    fn silence_periodicity_is_zero() {
        let silence = synthesize(&SignalKind::Silence, 1.0, 16000).unwrap();
        assert_eq!(periodicity(&silence, &PitchRange::default()).unwrap(), 0.0);
    }

    #[test]
    fn periodicity_needs_two_pitch_floors() {
        // 60 Hz floor at 16 kHz needs 2·266 samples
        let buf = AudioBuffer::new(vec![0.1; 500], 16000).unwrap();
        assert!(matches!(
            periodicity(&buf, &PitchRange::default()),
            Err(AcousticsError::TooShortForPitchFloor { .. })
        ));
    }

    #[test]
    fn periodicity_is_gain_invariant() {
        let buf = harmonic();
        let base = periodicity(&buf, &PitchRange::default()).unwrap();
        for gain in [3.0, 0.01, 123.4] {
            let scaled = periodicity(&buf.scaled(gain), &PitchRange::default()).unwrap();
            assert!((scaled - base).abs() < 1e-9);
        }
    }

    #[test]
    fn pitch_estimate_survives_rate_conversion_within_one_percent() {
        let src = synthesize(
            &SignalKind::Sine {
                freq_hz: 200.0,
                amp: 0.8,
            },
            1.0,
            44100,
        )
        .unwrap();
        let range = PitchRange::default();
        let f_src = pitch_estimate_hz(&src, &range).unwrap().unwrap();
        for rate in [8000u32, 16000, 44100] {
            let converted = resample(&src, rate).unwrap();
            let f = pitch_estimate_hz(&converted, &range).unwrap().unwrap();
            assert!(
                (f - f_src).abs() / f_src < 0.01,
                "rate {rate}: {f} vs {f_src}"
            );
        }
    }

    #[test]
    fn identical_audio_gives_zero_deltas() {
        let m = analyze(&harmonic(), &AnalysisConfig::default()).unwrap();
        let items = vec![
            SpeakerStyleMeasure {
                speaker_id: "spk0".into(),
                style: Style::Normal,
                measures: m,
            },
            SpeakerStyleMeasure {
                speaker_id: "spk0".into(),
                style: Style::Whisper,
                measures: m,
            },
        ];
        let (deltas, skipped) = style_contrast(&items);
        assert!(skipped.is_empty());
        assert_eq!(deltas.len(), 1);
        assert_eq!(deltas[0].d_mean_intensity_db, 0.0);
        assert_eq!(deltas[0].d_slope_db_per_khz, 0.0);
        assert_eq!(deltas[0].d_periodicity, 0.0);
    }

    #[test]
    fn synthetic_proxy_pair_matches_expected_directions() {
        let cfg = AnalysisConfig::default();
        let normal = analyze(&harmonic(), &cfg).unwrap();
        let whisper = analyze(&noise(0.5, 17), &cfg).unwrap();
        let items = vec![
            SpeakerStyleMeasure {
                speaker_id: "spk0".into(),
                style: Style::Normal,
                measures: normal,
            },
            SpeakerStyleMeasure {
                speaker_id: "spk0".into(),
                style: Style::Whisper,
                measures: whisper,
            },
        ];
        let (deltas, _) = style_contrast(&items);
        let d = &deltas[0];
        assert!(d.d_periodicity < 0.0, "whisper proxy must be less periodic");
        assert!(d.d_slope_db_per_khz > 0.0, "whisper proxy must be flatter");
        assert!(d.d_mean_intensity_db < 0.0, "whisper proxy must be quieter");
    }

    #[test]
    fn single_style_speakers_are_skipped() {
        let m = analyze(&noise(0.5, 23), &AnalysisConfig::default()).unwrap();
        let items = vec![
            SpeakerStyleMeasure {
                speaker_id: "only_normal".into(),
                style: Style::Normal,
                measures: m,
            },
        ];
        let (deltas, skipped) = style_contrast(&items);
        assert!(deltas.is_empty());
        assert_eq!(skipped, vec!["only_normal".to_string()]);
    }
}
