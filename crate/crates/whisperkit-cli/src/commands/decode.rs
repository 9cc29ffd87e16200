//! `whisperkit decode`: hypotheses for every manifest row from a trained
//! checkpoint, as JSON lines `{utt_id, hyp_text, log_score}`.

use std::fmt::Write as _;
use std::process::ExitCode;

use serde_json::json;
use whisperkit::decode::{beam_decode_scored, greedy_decode_scored};
use whisperkit::features::extract;
use whisperkit::model::{forward, read_checkpoint};

use crate::config::EffectiveConfig;
use crate::output::{write_atomic, RunMeta};
use crate::{DecodeArgs, DecodeMethod};

use super::{apply_split, load_audio_16k, load_manifest};

pub fn run(args: DecodeArgs) -> anyhow::Result<ExitCode> {
    let cfg = EffectiveConfig::load(args.common.config.as_deref())?;
    let meta = RunMeta::new(cfg.hash(), args.common.seed);
    let (params, vocab) = read_checkpoint(&args.checkpoint)?;
    let manifest = apply_split(&load_manifest(&args.common.manifest)?, args.split);

    let mut out = String::new();
    writeln!(
        out,
        "{}",
        json!({"meta": meta, "method": args.method.to_string(), "beam_width": args.beam_width})
    )?;

    let mut failures = Vec::new();
    for record in manifest.records() {
        let audio_path = manifest.resolve_audio_path(record);
        let decoded = load_audio_16k(&manifest, &audio_path)
            .and_then(|buf| Ok(extract(&buf, &cfg.features, cfg.feature_kind)?))
            .and_then(|feat| Ok(forward(&params, &feat)?))
            .map(|em| match args.method {
                DecodeMethod::Greedy => greedy_decode_scored(&em),
                DecodeMethod::Beam => beam_decode_scored(&em, args.beam_width),
            });
        match decoded {
            Ok((seq, log_score)) => {
                writeln!(
                    out,
                    "{}",
                    json!({
                        "utt_id": record.utt_id,
                        "hyp_text": vocab.text_of(&seq),
                        "log_score": log_score,
                    })
                )?;
            }
            Err(e) => {
                eprintln!("  failed {}: {e:#}", record.utt_id);
                failures.push(record.utt_id.clone());
            }
        }
    }
    write_atomic(&args.out, out.as_bytes())?;

    println!(
        "decode[{}]: {} hypotheses, {} failed -> {}",
        args.method,
        manifest.len() - failures.len(),
        failures.len(),
        args.out.display()
    );
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
