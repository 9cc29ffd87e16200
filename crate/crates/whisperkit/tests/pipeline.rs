//! Cross-module integration: synthesized audio through features, training,
//! checkpointing, decoding, and scoring using only the public API.
//!
//! Model *quality* is deliberately not asserted here — convergence needs the
//! full-size corpus and belongs to the acceptance suite. These tests pin the
//! wiring: every stage accepts the previous stage's output, training reduces
//! the loss, checkpoints feed decoding losslessly, and scoring closes the
//! loop.

use whisperkit::audio::{load_wav, synthesize, write_wav, SignalKind, WavSampleFormat};
use whisperkit::ctc::ctc_loss;
use whisperkit::decode::{beam_decode, greedy_decode};
use whisperkit::features::{extract, FeatureConfig, FeatureKind, FeatureMatrix};
use whisperkit::manifest::{Manifest, Split, Style, UtteranceRecord};
use whisperkit::metrics::{score_corpus, ScorePair};
use whisperkit::model::{forward, read_checkpoint, write_checkpoint};
use whisperkit::trainer::{train, ModelHyper, TrainConfig};

/// 120 ms events with raised-cosine edges: harmonic burst for 'a', one fixed
/// noise realization for 'b' (bare concatenation would put a broadband click
/// at every boundary).
fn event(token: char) -> Vec<f64> {
    let kind = match token {
        'a' => SignalKind::HarmonicSeries {
            f0_hz: 220.0,
            n_partials: 8,
            rolloff_db_per_octave: -6.0,
        },
        _ => SignalKind::WhiteNoise { amp: 0.5, seed: 77 },
    };
    let mut samples = synthesize(&kind, 0.12, 16000).unwrap().samples().to_vec();
    let ramp = 160usize;
    for i in 0..ramp {
        let g = 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / ramp as f64).cos());
        samples[i] *= g;
        let j = samples.len() - 1 - i;
        samples[j] *= g;
    }
    samples
}

fn build_corpus(dir: &std::path::Path, rows: &[(&str, &str, Split)]) -> Manifest {
    std::fs::create_dir_all(dir.join("wavs")).unwrap();
    let mut records = Vec::new();
    for (utt_id, transcript, split) in rows {
        let samples: Vec<f64> = transcript.chars().flat_map(event).collect();
        let buf = whisperkit::audio::AudioBuffer::new(samples, 16000).unwrap();
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
            split: *split,
        });
    }
    Manifest::new(records, "pipeline-test", Some(dir.to_path_buf())).unwrap()
}

#[test]
fn train_checkpoint_decode_score_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rows = [
        ("t00", "ab", Split::Train),
        ("t01", "ba", Split::Train),
        ("t02", "aba", Split::Train),
        ("t03", "bab", Split::Train),
        ("t04", "abab", Split::Train),
        ("t05", "baba", Split::Train),
        ("t06", "ababa", Split::Train),
        ("t07", "babab", Split::Train),
        ("t08", "ab", Split::Train),
        ("t09", "ba", Split::Train),
        ("t10", "aba", Split::Train),
        ("t11", "bab", Split::Train),
        ("e0", "ab", Split::Test),
        ("e1", "bab", Split::Test),
    ];
    let manifest = build_corpus(dir.path(), &rows);

    let feat_cfg = FeatureConfig {
        n_mels: 24,
        ..FeatureConfig::default()
    };
    // masks scaled to these ~22-frame utterances (defaults assume longer)
    let augment = whisperkit::augment::AugmentConfig {
        n_time_masks: 1,
        max_time_width: 3,
        ..whisperkit::augment::AugmentConfig::default()
    };
    let cfg = TrainConfig {
        epochs: 8,
        batch_size: 3,
        lr: 5e-3,
        seed: 3,
        augment,
        ..TrainConfig::default()
    };
    let hyper = ModelHyper {
        context_radius: 2,
        hidden: 24,
    };
    let run = train(
        &manifest.filter_split(Split::Train),
        &feat_cfg,
        FeatureKind::LogMel,
        &hyper,
        &cfg,
    )
    .unwrap();
    assert_eq!(run.vocab.tokens(), &["a".to_string(), "b".into()]);
    assert_eq!(run.skipped_utterances, 0);
    let first = run.epochs.first().unwrap().mean_loss;
    let last = run.epochs.last().unwrap().mean_loss;
    assert!(last < first * 0.5, "loss {first:.3} -> {last:.3} barely moved");

    // checkpoint round trip feeds decoding
    let ckpt = dir.path().join("model.ckpt");
    write_checkpoint(&ckpt, &run.params, &run.vocab).unwrap();
    let (params, vocab) = read_checkpoint(&ckpt).unwrap();
    assert_eq!(vocab, run.vocab);

    let mut beam_pairs = Vec::new();
    for record in manifest.filter_split(Split::Test).records() {
        let audio = load_wav(manifest.resolve_audio_path(record)).unwrap();
        let feat = extract(&audio, &feat_cfg, FeatureKind::LogMel).unwrap();
        let em = forward(&params, &feat).unwrap();

        // the trained model assigns the reference a finite CTC loss
        let target = vocab.tokenize_chars(&record.transcript).unwrap();
        assert!(ctc_loss(&em, &target).unwrap().loss.is_finite());

        // decoders emit only vocabulary text, deterministically
        let beam_hyp = vocab.text_of(&beam_decode(&em, 16));
        let greedy_hyp = vocab.text_of(&greedy_decode(&em));
        assert!(beam_hyp.chars().all(|c| c == 'a' || c == 'b'));
        assert!(greedy_hyp.chars().all(|c| c == 'a' || c == 'b'));
        assert_eq!(beam_hyp, vocab.text_of(&beam_decode(&em, 16)));

        beam_pairs.push(ScorePair {
            utt_id: record.utt_id.clone(),
            reference: record.transcript.clone(),
            hypothesis: beam_hyp,
        });
    }
    let report = score_corpus(&beam_pairs);
    assert_eq!(report.wer.per_utterance.len(), 2);
    assert!(report.cer.percent.is_finite());
    assert!(report.wer.rejected.is_empty());
}

#[test]
fn feature_files_survive_the_disk_round_trip_mid_pipeline() {
    let tone = synthesize(
        &SignalKind::Sine {
            freq_hz: 440.0,
            amp: 0.7,
        },
        0.3,
        16000,
    )
    .unwrap();
    let cfg = FeatureConfig::default();
    let feat = extract(&tone, &cfg, FeatureKind::LogMel).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tone.feat");
    feat.write_file(&path).unwrap();
    let back = FeatureMatrix::read_file(&path, feat.frame_rate_hz()).unwrap();
    assert_eq!(back.num_frames(), feat.num_frames());
    assert_eq!(back.dim(), feat.dim());
    // stored at f32: equal after the same quantization
    for (a, b) in feat.data().iter().zip(back.data()) {
        assert_eq!(*a as f32, *b as f32);
    }
}
