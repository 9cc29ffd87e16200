//! `whisperkit features`: one feature file per manifest row plus an index
//! mapping utt_id → file. Idempotent: a re-run skips rows whose audio
//! content, config, and existing output all hash-match the index.

use std::collections::BTreeMap;
use std::process::ExitCode;

use serde::{Deserialize, Serialize};
use whisperkit::features::extract;

use crate::config::EffectiveConfig;
use crate::output::{sha256_file, sha256_hex, write_atomic, RunMeta};
use crate::FeaturesArgs;

use super::{load_audio_16k, load_manifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    path: String,
    num_frames: usize,
    dim: usize,
    audio_sha256: String,
    feature_sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FeatureIndex {
    meta: RunMeta,
    feature_kind: whisperkit::features::FeatureKind,
    frame_rate_hz: f64,
    entries: BTreeMap<String, IndexEntry>,
    failures: BTreeMap<String, String>,
}

pub fn run(args: FeaturesArgs) -> anyhow::Result<ExitCode> {
    let cfg = EffectiveConfig::load(args.common.config.as_deref())?;
    let meta = RunMeta::new(cfg.hash(), args.common.seed);
    let manifest = load_manifest(&args.common.manifest)?;
    std::fs::create_dir_all(&args.out)?;

    let index_path = args.out.join("features_index.json");
    let previous: Option<FeatureIndex> = std::fs::read_to_string(&index_path)
        .ok()
        .and_then(|text| serde_json::from_str(&text).ok());

    let mut entries = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut skipped_up_to_date = 0usize;

    for record in manifest.records() {
        let audio_path = manifest.resolve_audio_path(record);
        let audio_sha = match sha256_file(&audio_path) {
            Ok(h) => h,
            Err(e) => {
                failures.insert(record.utt_id.clone(), format!("{e:#}"));
                continue;
            }
        };
        let rel_out = format!("{}.feat", record.utt_id);
        let out_path = args.out.join(&rel_out);

        // up-to-date check: same audio bytes, same config, output intact
        if let Some(prev) = &previous {
            if prev.meta.config_hash == meta.config_hash {
                if let Some(entry) = prev.entries.get(&record.utt_id) {
                    if entry.audio_sha256 == audio_sha
                        && sha256_file(&out_path).is_ok_and(|h| h == entry.feature_sha256)
                    {
                        entries.insert(record.utt_id.clone(), entry.clone());
                        skipped_up_to_date += 1;
                        continue;
                    }
                }
            }
        }

        let result = load_audio_16k(&manifest, &audio_path)
            .and_then(|buf| Ok(extract(&buf, &cfg.features, cfg.feature_kind)?));
        match result {
            Ok(feat) => {
                let bytes = feat.to_bytes();
                write_atomic(&out_path, &bytes)?;
                entries.insert(
                    record.utt_id.clone(),
                    IndexEntry {
                        path: rel_out,
                        num_frames: feat.num_frames(),
                        dim: feat.dim(),
                        audio_sha256: audio_sha,
                        feature_sha256: sha256_hex(&bytes),
                    },
                );
            }
            Err(e) => {
                failures.insert(record.utt_id.clone(), format!("{e:#}"));
            }
        }
    }

    let n_failures = failures.len();
    let index = FeatureIndex {
        meta,
        feature_kind: cfg.feature_kind,
        frame_rate_hz: cfg.features.frame_rate_hz(),
        entries,
        failures,
    };
    write_atomic(
        &index_path,
        serde_json::to_string_pretty(&index)?.as_bytes(),
    )?;

    println!(
        "features: {} written, {} up-to-date, {} failed -> {}",
        index.entries.len() - skipped_up_to_date,
        skipped_up_to_date,
        n_failures,
        index_path.display()
    );
    for (utt, msg) in &index.failures {
        eprintln!("  failed {utt}: {msg}");
    }
    Ok(if n_failures > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}
