//! `whisperkit manifest-summarize`: per (style, dialect, split) utterance
//! and speaker counts plus header-derived durations.

use std::fmt::Write as _;
use std::process::ExitCode;

use whisperkit::manifest::summarize;

use crate::config::EffectiveConfig;
use crate::output::{write_atomic, RunMeta};
use crate::SummarizeArgs;

use super::load_manifest;

pub fn run(args: SummarizeArgs) -> anyhow::Result<ExitCode> {
    let cfg = EffectiveConfig::load(args.common.config.as_deref())?;
    let meta = RunMeta::new(cfg.hash(), args.common.seed);
    let manifest = load_manifest(&args.common.manifest)?;
    let summary = summarize(&manifest);

    println!(
        "{:<10} {:<14} {:<7} {:>8} {:>8} {:>10} {:>8}",
        "style", "dialect", "split", "utts", "spkrs", "dur_h", "no_dur"
    );
    for (key, group) in &summary {
        println!(
            "{:<10} {:<14} {:<7} {:>8} {:>8} {:>10} {:>8}",
            key.style.to_string(),
            key.dialect,
            key.split.to_string(),
            group.n_utterances,
            group.n_speakers,
            group
                .total_duration_h
                .map_or("?".to_string(), |h| format!("{h:.3}")),
            group.unknown_durations
        );
    }

    if let Some(out) = &args.out {
        let mut csv = meta.csv_comment();
        csv.push_str("style,dialect,split,n_utterances,n_speakers,total_duration_h,unknown_durations\n");
        for (key, group) in &summary {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                key.style,
                key.dialect,
                key.split,
                group.n_utterances,
                group.n_speakers,
                group.total_duration_h.map_or(String::new(), |h| format!("{h:.6}")),
                group.unknown_durations
            )?;
        }
        write_atomic(out, csv.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}
