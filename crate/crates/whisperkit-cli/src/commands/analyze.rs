//! `whisperkit analyze`: per-utterance acoustic measures (intensity, slope,
//! periodicity) and per-speaker whisper-minus-normal contrast CSVs.

use std::fmt::Write as _;
use std::process::ExitCode;

use whisperkit::acoustics::{analyze, style_contrast, AnalysisConfig, SpeakerStyleMeasure};

use crate::config::EffectiveConfig;
use crate::output::{write_atomic, RunMeta};
use crate::AnalyzeArgs;

use super::{load_audio_16k, load_manifest};

pub fn run(args: AnalyzeArgs) -> anyhow::Result<ExitCode> {
    let cfg = EffectiveConfig::load(args.common.config.as_deref())?;
    let meta = RunMeta::new(cfg.hash(), args.common.seed);
    let manifest = load_manifest(&args.common.manifest)?;
    std::fs::create_dir_all(&args.out)?;

    let analysis_cfg = AnalysisConfig {
        features: cfg.features.clone(),
        slope_band: cfg.slope_band,
        pitch: cfg.pitch,
    };

    let mut rows = String::new();
    let mut items = Vec::new();
    let mut failures = 0usize;
    for record in manifest.records() {
        let audio_path = manifest.resolve_audio_path(record);
        match load_audio_16k(&manifest, &audio_path)
            .and_then(|buf| Ok(analyze(&buf, &analysis_cfg)?))
        {
            Ok(m) => {
                writeln!(
                    rows,
                    "{},{},{:.6},{:.6},{:.6}",
                    record.utt_id, record.style, m.mean_intensity_db, m.slope_db_per_khz, m.periodicity
                )?;
                items.push(SpeakerStyleMeasure {
                    speaker_id: record.speaker_id.clone(),
                    style: record.style,
                    measures: m,
                });
            }
            Err(e) => {
                eprintln!("  failed {}: {e:#}", record.utt_id);
                failures += 1;
            }
        }
    }

    let mut analysis_csv = meta.csv_comment();
    analysis_csv.push_str("utt_id,style,mean_db,slope_db_per_khz,periodicity\n");
    analysis_csv.push_str(&rows);
    write_atomic(&args.out.join("analysis.csv"), analysis_csv.as_bytes())?;

    let (deltas, skipped) = style_contrast(&items);
    let mut contrast_csv = meta.csv_comment();
    writeln!(contrast_csv, "# skipped_single_style_speakers={}", skipped.len())?;
    contrast_csv
        .push_str("speaker_id,n_normal,n_whisper,d_mean_intensity_db,d_slope_db_per_khz,d_periodicity\n");
    for d in &deltas {
        writeln!(
            contrast_csv,
            "{},{},{},{:.6},{:.6},{:.6}",
            d.speaker_id,
            d.n_normal,
            d.n_whisper,
            d.d_mean_intensity_db,
            d.d_slope_db_per_khz,
            d.d_periodicity
        )?;
    }
    write_atomic(&args.out.join("contrast.csv"), contrast_csv.as_bytes())?;

    println!(
        "analyze: {} utterances, {} speaker contrasts, {} single-style skipped, {} failed -> {}",
        items.len(),
        deltas.len(),
        skipped.len(),
        failures,
        args.out.display()
    );
    Ok(if failures > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}
