//! `whisperkit synth-dataset`: build the synthetic 3-token corpus (wavs,
//! manifest, dataset metadata) used by the end-to-end evaluation.

use std::fmt::Write as _;
use std::process::ExitCode;

use serde_json::json;
use whisperkit::manifest::write_jsonl;

use crate::config::EffectiveConfig;
use crate::output::{write_atomic, RunMeta};
use crate::{synth, SynthArgs};

pub fn run(args: SynthArgs) -> anyhow::Result<ExitCode> {
    let cfg = EffectiveConfig::load(args.config.as_deref())?;
    let meta = RunMeta::new(cfg.hash(), args.seed);

    let manifest = synth::generate(&args.out, args.n_train, args.n_test, args.seed)?;

    let mut jsonl = String::new();
    writeln!(jsonl, "{}", meta.jsonl_line())?;
    let mut body = Vec::new();
    write_jsonl(&manifest, &mut body)?;
    jsonl.push_str(&String::from_utf8(body)?);
    write_atomic(&args.out.join("manifest.jsonl"), jsonl.as_bytes())?;

    let dataset_meta = json!({
        "meta": meta,
        "n_train": args.n_train,
        "n_test": args.n_test,
        "tokens": synth::TOKENS.iter().collect::<String>(),
        "sample_rate_hz": 16000,
    });
    write_atomic(
        &args.out.join("dataset_meta.json"),
        serde_json::to_string_pretty(&dataset_meta)?.as_bytes(),
    )?;

    println!(
        "synth-dataset: {} train + {} test utterances -> {}",
        args.n_train,
        args.n_test,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
