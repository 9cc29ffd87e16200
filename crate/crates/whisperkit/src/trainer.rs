//! AdamW training loop over manifest batches with masking applied on the fly.
//!
//! Everything that consumes randomness — initialization, batch-order
//! shuffling, per-utterance masks — draws from explicit seeds, so a (config,
//! seed, manifest) triple maps to one bit-exact trajectory. Batches are
//! formed once by sorting utterances by feature length (classic length
//! bucketing); each epoch shuffles the batch *order*. Per-utterance loss is
//! computed on the utterance's true frame count, and batch loss is the mean
//! over utterances (not frames), so changing the batch size does not silently
//! rescale the learning rate.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{load_wav, resample, AudioError, STANDARD_RATE_HZ};
use crate::augment::{augment, AugmentConfig, AugmentError};
use crate::ctc::{ctc_loss, CtcError, TokenSeq, Vocabulary};
use crate::features::{extract, FeatureConfig, FeatureError, FeatureKind, FeatureMatrix};
use crate::manifest::Manifest;
use crate::metrics::normalize_text;
use crate::model::{backward, forward, ModelConfig, ModelError, ModelParams};
use crate::numeric::fnv1a64;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("manifest has no usable training rows")]
    EmptyManifest,
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("non-finite gradient; step rejected")]
    NonFiniteGradient,
    #[error("utterance {utt_id}: {source}")]
    Audio {
        utt_id: String,
        #[source]
        source: AudioError,
    },
    #[error("utterance {utt_id}: {source}")]
    Feature {
        utt_id: String,
        #[source]
        source: FeatureError,
    },
    #[error("utterance {utt_id}: {source}")]
    Tokenize {
        utt_id: String,
        #[source]
        source: CtcError,
    },
    #[error(transparent)]
    Ctc(#[from] CtcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

/// Learning-rate schedule over the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LrSchedule {
    Constant,
    /// Linear ramp over `warmup_steps` (default: 10% of total steps), then
    /// linear decay toward zero at the final step.
    LinearWarmupDecay { warmup_steps: Option<usize> },
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule::LinearWarmupDecay { warmup_steps: None }
    }
}

impl LrSchedule {
    /// Multiplier for optimizer step `step` (0-based) of `total` steps.
    pub fn factor(&self, step: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::LinearWarmupDecay { warmup_steps } => {
                let total = total.max(1);
                let warmup = warmup_steps
                    .unwrap_or_else(|| (total as f64 * 0.1).ceil() as usize)
                    .clamp(1, total);
                if step < warmup {
                    (step + 1) as f64 / warmup as f64
                } else if total == warmup {
                    1.0
                } else {
                    (total - step) as f64 / (total - warmup) as f64
                }
            }
        }
    }
}

/// Full training recipe. Defaults mirror the mixed-style fine-tuning setup
/// this loop scales down: 25 epochs, batch size 6, AdamW with decoupled
/// weight decay, warmup-then-decay learning rate, time masking on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            batch_size: 6,
            lr: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            lr_schedule: LrSchedule::default(),
            seed: 42,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if self.lr.is_nan() || self.lr < 0.0 || !self.lr.is_finite() {
            return bad(format!("lr must be finite and non-negative, got {}", self.lr));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            let in_unit_interval = 0.0 < v && v < 1.0;
            if !in_unit_interval {
                return bad(format!("{name} must lie in (0,1), got {v}"));
            }
        }
        if self.eps <= 0.0 || self.eps.is_nan() {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if self.weight_decay < 0.0 {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        Ok(())
    }
}

/// First and second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub step_count: usize,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step_count: 0,
        }
    }
}

/// AdamW step hyperparameters at one step (the trainer folds the schedule
/// into `lr` before calling).
#[derive(Debug, Clone, Copy)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn from_config(cfg: &TrainConfig, lr: f64) -> Self {
        Self {
            lr,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            weight_decay: cfg.weight_decay,
        }
    }

    /// One decoupled-weight-decay Adam step, in place:
    ///
    /// m ← β₁m + (1−β₁)g; v ← β₂v + (1−β₂)g²; bias-correct both;
    /// θ ← θ − lr·m̂/(√v̂ + ε) − lr·wd·θ_pre (decay applied to the
    /// pre-update parameters, independent of the gradient path).
    ///
    /// Non-finite gradients reject the step and leave parameters and state
    /// untouched — a silently infinite loss would poison the moments.
    pub fn step(
        &self,
        params: &mut ModelParams,
        grads: &ModelParams,
        state: &mut OptimizerState,
    ) -> Result<(), TrainError> {
        if !grads.all_finite() {
            return Err(TrainError::NonFiniteGradient);
        }
        let t = state.step_count + 1;
        let bc1 = 1.0 - self.beta1.powi(t as i32);
        let bc2 = 1.0 - self.beta2.powi(t as i32);
        let [pw, pb, pw2, pb2] = params.tensors_mut();
        let [mw, mb, mw2, mb2] = state.m.tensors_mut();
        let [vw, vb, vw2, vb2] = state.v.tensors_mut();
        let param_tensors = [pw, pb, pw2, pb2];
        let m_tensors = [mw, mb, mw2, mb2];
        let v_tensors = [vw, vb, vw2, vb2];
        for (((p, m), v), g) in param_tensors
            .into_iter()
            .zip(m_tensors)
            .zip(v_tensors)
            .zip(grads.tensors())
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                let theta = p[i];
                p[i] = theta - self.lr * m_hat / (v_hat.sqrt() + self.eps)
                    - self.lr * self.weight_decay * theta;
            }
        }
        state.step_count = t;
        Ok(())
    }
}

/// One epoch's summary, also the JSONL training-log row shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub skipped: usize,
    pub lr: f64,
}

/// Architecture knobs the trainer does not derive from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelHyper {
    pub context_radius: usize,
    pub hidden: usize,
}

impl Default for ModelHyper {
    fn default() -> Self {
        Self {
            context_radius: 5,
            hidden: 64,
        }
    }
}

/// The result of a training run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub params: ModelParams,
    pub vocab: Vocabulary,
    pub epochs: Vec<EpochStats>,
    /// Rows dropped before training: empty transcript, or too few frames for
    /// any CTC alignment. Independent of the shuffle seed.
    pub skipped_utterances: usize,
    /// Optimizer steps rejected for non-finite gradients.
    pub rejected_steps: usize,
}

struct PreparedUtterance {
    utt_id: String,
    feat: FeatureMatrix,
    target: TokenSeq,
}

/// Load, resample to 16 kHz, and extract features for every usable row;
/// tokenize transcripts against `vocab`.
fn prepare(
    manifest: &Manifest,
    feat_cfg: &FeatureConfig,
    feature_kind: FeatureKind,
    vocab: &Vocabulary,
) -> Result<(Vec<PreparedUtterance>, usize), TrainError> {
    let mut prepared = Vec::with_capacity(manifest.len());
    let mut skipped = 0usize;
    for record in manifest.records() {
        let text = normalize_text(&record.transcript);
        if text.is_empty() {
            log::warn!("skipping {}: empty transcript", record.utt_id);
            skipped += 1;
            continue;
        }
        let buf = load_wav(manifest.resolve_audio_path(record)).map_err(|source| {
            TrainError::Audio {
                utt_id: record.utt_id.clone(),
                source,
            }
        })?;
        let buf = resample(&buf, STANDARD_RATE_HZ).map_err(|source| TrainError::Audio {
            utt_id: record.utt_id.clone(),
            source,
        })?;
        let feat = extract(&buf, feat_cfg, feature_kind).map_err(|source| TrainError::Feature {
            utt_id: record.utt_id.clone(),
            source,
        })?;
        let target = vocab
            .tokenize_chars(&text)
            .map_err(|source| TrainError::Tokenize {
                utt_id: record.utt_id.clone(),
                source,
            })?;
        if feat.num_frames() < target.min_alignment_frames() {
            log::warn!(
                "skipping {}: {} frames cannot align {} labels",
                record.utt_id,
                feat.num_frames(),
                target.len()
            );
            skipped += 1;
            continue;
        }
        prepared.push(PreparedUtterance {
            utt_id: record.utt_id.clone(),
            feat,
            target,
        });
    }
    Ok((prepared, skipped))
}

/// Train a model on the manifest (already filtered to its training split).
///
/// The vocabulary is built from the normalized training transcripts; model
/// input width comes from the extracted features. Deterministic given
/// (manifest, configs, seed).
pub fn train(
    manifest: &Manifest,
    feat_cfg: &FeatureConfig,
    feature_kind: FeatureKind,
    hyper: &ModelHyper,
    cfg: &TrainConfig,
) -> Result<TrainRun, TrainError> {
    cfg.validate()?;
    let texts: Vec<String> = manifest
        .records()
        .iter()
        .map(|r| normalize_text(&r.transcript))
        .filter(|t| !t.is_empty())
        .collect();
    if texts.is_empty() {
        return Err(TrainError::EmptyManifest);
    }
    let vocab = Vocabulary::from_corpus_text(texts.iter().map(String::as_str))?;

    let (mut prepared, skipped_utterances) = prepare(manifest, feat_cfg, feature_kind, &vocab)?;
    if prepared.is_empty() {
        return Err(TrainError::EmptyManifest);
    }
    // length bucketing: batches of similar T, formed once, deterministically
    prepared.sort_by(|a, b| {
        (a.feat.num_frames(), &a.utt_id).cmp(&(b.feat.num_frames(), &b.utt_id))
    });
    let batches: Vec<Vec<usize>> = (0..prepared.len())
        .collect::<Vec<_>>()
        .chunks(cfg.batch_size)
        .map(<[usize]>::to_vec)
        .collect();

    let feat_dim = prepared[0].feat.dim();
    let model_cfg = ModelConfig {
        feat_dim,
        context_radius: hyper.context_radius,
        hidden: hyper.hidden,
        vocab_size: vocab.size(),
        seed: cfg.seed,
    };
    let mut params = ModelParams::init(&model_cfg)?;
    let mut state = OptimizerState::new(&params);
    let total_steps = cfg.epochs * batches.len();

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5851_f42d_4c95_7f2d);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut rejected_steps = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..batches.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss_sum = 0.0;
        let mut epoch_utts = 0usize;
        let mut epoch_lr = 0.0;
        for &batch_idx in &order {
            let batch = &batches[batch_idx];
            let mut grads = params.zeros_like();
            let mut batch_loss = 0.0;
            for &utt_idx in batch {
                let utt = &prepared[utt_idx];
                let mask_seed = fnv1a64(
                    format!("{}:{}:{}", cfg.seed, epoch, utt.utt_id).as_bytes(),
                );
                let masked = augment(&utt.feat, &cfg.augment, mask_seed)?;
                let em = forward(&params, &masked)?;
                let out = ctc_loss(&em, &utt.target)?;
                let g = backward(&params, &masked, &out.grad)?;
                grads.add_scaled(&g, 1.0 / batch.len() as f64);
                batch_loss += out.loss;
            }
            epoch_loss_sum += batch_loss;
            epoch_utts += batch.len();

            let lr = cfg.lr * cfg.lr_schedule.factor(state.step_count, total_steps);
            epoch_lr = lr;
            match AdamW::from_config(cfg, lr).step(&mut params, &grads, &mut state) {
                Ok(()) => {}
                Err(TrainError::NonFiniteGradient) => {
                    log::warn!("epoch {epoch}: non-finite gradient, step rejected");
                    rejected_steps += 1;
                }
                Err(e) => return Err(e),
            }
        }
        let stats = EpochStats {
            epoch,
            mean_loss: epoch_loss_sum / epoch_utts as f64,
            skipped: skipped_utterances,
            lr: epoch_lr,
        };
        log::info!(
            "epoch {} mean_loss {:.4} lr {:.6}",
            stats.epoch,
            stats.mean_loss,
            stats.lr
        );
        epochs.push(stats);
    }

    Ok(TrainRun {
        params,
        vocab,
        epochs,
        skipped_utterances,
        rejected_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{synthesize, write_wav, SignalKind, WavSampleFormat};
    use crate::manifest::{Split, Style, UtteranceRecord};
    use std::path::Path;

    /// 1-parameter-per-tensor model so optimizer arithmetic stays scalar.
    fn scalar_params() -> ModelParams {
        let cfg = ModelConfig {
            feat_dim: 1,
            context_radius: 0,
            hidden: 1,
            vocab_size: 1,
            seed: 0,
        };
        ModelParams::init(&cfg).unwrap().zeros_like()
    }

    fn adamw(lr: f64, weight_decay: f64) -> AdamW {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    #[test]
    fn zero_gradient_zero_decay_leaves_params() {
        let mut params = scalar_params();
        params.w1[0] = 1.5;
        let grads = params.zeros_like();
        let mut state = OptimizerState::new(&params);
        adamw(0.1, 0.0).step(&mut params, &grads, &mut state).unwrap();
        assert_eq!(params.w1[0], 1.5);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn first_adam_step_matches_hand_computation() {
        let mut params = scalar_params();
        params.w1[0] = 1.0;
        let mut grads = params.zeros_like();
        grads.w1[0] = 1.0;
        let mut state = OptimizerState::new(&params);
        adamw(0.1, 0.0).step(&mut params, &grads, &mut state).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction: θ' = 1 − 0.1/(1 + 1e-8)
        let exact = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((params.w1[0] - exact).abs() < 1e-12);
        assert!((params.w1[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn decoupled_decay_without_gradient() {
        let mut params = scalar_params();
        params.w1[0] = 1.0;
        let grads = params.zeros_like();
        let mut state = OptimizerState::new(&params);
        adamw(0.1, 0.01).step(&mut params, &grads, &mut state).unwrap();
        assert!((params.w1[0] - 0.999).abs() < 1e-12);
    }

    #[test]
    fn wd_zero_matches_independent_scalar_adam() {
        // textbook scalar Adam, written without reference to the crate's
        struct ScalarAdam {
            m: f64,
            v: f64,
            t: i32,
        }
        impl ScalarAdam {
            fn step(&mut self, theta: f64, g: f64) -> f64 {
                let (b1, b2, lr, eps) = (0.9, 0.999, 0.05, 1e-8);
                self.t += 1;
                self.m = b1 * self.m + (1.0 - b1) * g;
                self.v = b2 * self.v + (1.0 - b2) * g * g;
                let m_hat = self.m / (1.0 - b1.powi(self.t));
                let v_hat = self.v / (1.0 - b2.powi(self.t));
                theta - lr * m_hat / (v_hat.sqrt() + eps)
            }
        }

        let mut params = scalar_params();
        params.w1[0] = 0.7;
        let mut state = OptimizerState::new(&params);
        let mut oracle = ScalarAdam { m: 0.0, v: 0.0, t: 0 };
        let mut theta = 0.7;
        let opt = adamw(0.05, 0.0);
        for step in 0..100 {
            let g = (step as f64 * 0.31).sin() + 0.2;
            let mut grads = params.zeros_like();
            grads.w1[0] = g;
            opt.step(&mut params, &grads, &mut state).unwrap();
            theta = oracle.step(theta, g);
            assert!(
                (params.w1[0] - theta).abs() < 1e-10,
                "step {step}: {} vs {theta}",
                params.w1[0]
            );
        }
    }

    #[test]
    fn weight_decay_differs_by_exactly_lr_wd_theta() {
        let mut with_wd = scalar_params();
        with_wd.w1[0] = 0.8;
        let mut without_wd = with_wd.clone();
        let mut grads = with_wd.zeros_like();
        grads.w1[0] = -0.3;
        let mut s1 = OptimizerState::new(&with_wd);
        let mut s2 = OptimizerState::new(&without_wd);
        let theta_pre = 0.8;
        adamw(0.05, 0.02).step(&mut with_wd, &grads, &mut s1).unwrap();
        adamw(0.05, 0.0).step(&mut without_wd, &grads, &mut s2).unwrap();
        let diff = without_wd.w1[0] - with_wd.w1[0];
        assert!((diff - 0.05 * 0.02 * theta_pre).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_rejects_step() {
        let mut params = scalar_params();
        params.w1[0] = 1.0;
        let mut grads = params.zeros_like();
        grads.w1[0] = f64::NAN;
        let mut state = OptimizerState::new(&params);
        let err = adamw(0.1, 0.0).step(&mut params, &grads, &mut state);
        assert!(matches!(err, Err(TrainError::NonFiniteGradient)));
        assert_eq!(params.w1[0], 1.0);
        assert_eq!(state.step_count, 0);
        assert!(state.m.w1[0] == 0.0 && state.v.w1[0] == 0.0);
    }

    #[test]
    fn schedule_factors() {
        let c = LrSchedule::Constant;
        assert_eq!(c.factor(0, 100), 1.0);
        assert_eq!(c.factor(99, 100), 1.0);
        let w = LrSchedule::LinearWarmupDecay { warmup_steps: Some(10) };
        assert_eq!(w.factor(0, 100), 0.1);
        assert_eq!(w.factor(9, 100), 1.0);
        assert_eq!(w.factor(10, 100), 1.0);
        assert!((w.factor(55, 100) - 0.5).abs() < 1e-12);
        assert!(w.factor(99, 100) > 0.0);
        // default warmup: 10% of total
        let d = LrSchedule::default();
        assert_eq!(d.factor(0, 100), 0.1);
    }

    // ── end-to-end training on a tiny synthesized corpus ───────────────────

    /// 'a' = harmonic burst (voiced proxy), 'b' = noise burst (whisper
    /// proxy), 120 ms per event at 16 kHz.
    fn event_samples(token: char, seed: u64) -> Vec<f64> {
        let kind = match token {
            'a' => SignalKind::HarmonicSeries {
                f0_hz: 220.0,
                n_partials: 8,
                rolloff_db_per_octave: -6.0,
            },
            'b' => SignalKind::WhiteNoise { amp: 0.5, seed },
            _ => SignalKind::Silence,
        };
        synthesize(&kind, 0.12, 16000).unwrap().samples().to_vec()
    }

    fn corpus(dir: &Path, rows: &[(&str, &str)]) -> Manifest {
        let with_audio: Vec<(&str, &str, &str)> =
            rows.iter().map(|&(id, tr)| (id, tr, tr)).collect();
        corpus_with_audio(dir, &with_audio)
    }

    /// Rows are (utt_id, transcript, audio_events); audio comes from the
    /// events string so transcript/audio mismatches can be constructed.
    fn corpus_with_audio(dir: &Path, rows: &[(&str, &str, &str)]) -> Manifest {
        std::fs::create_dir_all(dir.join("wavs")).unwrap();
        let mut records = Vec::new();
        for (i, (utt_id, transcript, events)) in rows.iter().enumerate() {
            let mut samples = Vec::new();
            let events = if events.is_empty() { "a" } else { events };
            for (pos, ch) in events.chars().enumerate() {
                samples.extend(event_samples(ch, (i * 37 + pos) as u64));
            }
            let buf = crate::audio::AudioBuffer::new(samples, 16000).unwrap();
            write_wav(
                dir.join(format!("wavs/{utt_id}.wav")),
                &buf,
                WavSampleFormat::Int16,
            )
            .unwrap();
            records.push(UtteranceRecord {
                utt_id: utt_id.to_string(),
                audio_path: format!("wavs/{utt_id}.wav"),
                transcript: transcript.to_string(),
                speaker_id: "spk0".into(),
                style: Style::Normal,
                dialect: "synthetic".into(),
                split: Split::Train,
            });
        }
        Manifest::new(records, "trainer-test", Some(dir.to_path_buf())).unwrap()
    }

    fn small_feat_cfg() -> FeatureConfig {
        FeatureConfig {
            n_mels: 16,
            ..FeatureConfig::default()
        }
    }

    fn small_hyper() -> ModelHyper {
        ModelHyper {
            context_radius: 2,
            hidden: 16,
        }
    }

    #[test]
    fn zero_lr_training_returns_initial_params() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = corpus(dir.path(), &[("u0", "ab"), ("u1", "ba"), ("u2", "aba")]);
        let cfg = TrainConfig {
            epochs: 1,
            lr: 0.0,
            seed: 5,
            ..TrainConfig::default()
        };
        let run = train(&manifest, &small_feat_cfg(), FeatureKind::LogMel, &small_hyper(), &cfg)
            .unwrap();
        let init = ModelParams::init(&ModelConfig {
            feat_dim: 16,
            context_radius: 2,
            hidden: 16,
            vocab_size: 2,
            seed: 5,
        })
        .unwrap();
        assert_eq!(run.params, init);
        assert_eq!(run.epochs.len(), 1);
    }

    #[test]
    fn loss_decreases_over_early_epochs() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = corpus(
            dir.path(),
            &[
                ("u0", "ab"),
                ("u1", "ba"),
                ("u2", "aba"),
                ("u3", "bab"),
                ("u4", "ab"),
                ("u5", "ba"),
            ],
        );
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 3,
            lr: 3e-3,
            seed: 7,
            ..TrainConfig::default()
        };
        let run = train(&manifest, &small_feat_cfg(), FeatureKind::LogMel, &small_hyper(), &cfg)
            .unwrap();
        for pair in run.epochs.windows(2) {
            assert!(
                pair[1].mean_loss < pair[0].mean_loss,
                "epoch {} loss {} did not improve on {}",
                pair[1].epoch,
                pair[1].mean_loss,
                pair[0].mean_loss
            );
        }
    }

    #[test]
    fn identical_seeds_give_bit_identical_runs() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = corpus(dir.path(), &[("u0", "ab"), ("u1", "ba"), ("u2", "aba"), ("u3", "b")]);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train(&manifest, &small_feat_cfg(), FeatureKind::LogMel, &small_hyper(), &cfg)
            .unwrap();
        let b = train(&manifest, &small_feat_cfg(), FeatureKind::LogMel, &small_hyper(), &cfg)
            .unwrap();
        assert_eq!(a.epochs, b.epochs);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn skipped_rows_are_seed_invariant_and_nonfatal() {
        let dir = tempfile::tempdir().unwrap();
        // "aaaaaaaa..." needs 2·40−1 frames but the audio has far fewer;
        // the empty transcript is dropped before feature extraction.
        let long = "a".repeat(40);
        let manifest = corpus_with_audio(
            dir.path(),
            &[
                ("good1", "ab", "ab"),
                ("bad_long", long.as_str(), "a"), // 79 frames needed, ~18 available
                ("bad_empty", "", "a"),
                ("good2", "ba", "ba"),
            ],
        );
        let mut counts = Vec::new();
        for seed in [1u64, 2, 3] {
            let cfg = TrainConfig {
                epochs: 1,
                seed,
                ..TrainConfig::default()
            };
            let run = train(&manifest, &small_feat_cfg(), FeatureKind::LogMel, &small_hyper(), &cfg)
                .unwrap();
            counts.push(run.skipped_utterances);
        }
        assert_eq!(counts, vec![2, 2, 2]);
    }

    #[test]
    fn empty_manifest_is_an_error() {
        let manifest = Manifest::new(vec![], "empty", None).unwrap();
        let cfg = TrainConfig::default();
        assert!(matches!(
            train(&manifest, &small_feat_cfg(), FeatureKind::LogMel, &small_hyper(), &cfg),
            Err(TrainError::EmptyManifest)
        ));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = TrainConfig {
            beta1: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lr: f64::NAN,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let ok = TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        };
        assert!(ok.validate().is_ok());
    }
}
