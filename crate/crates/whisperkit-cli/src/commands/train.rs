//! `whisperkit train`: fit the acoustic model on the manifest's train split
//! and write a checkpoint plus a JSONL training log whose header echoes the
//! full effective config.

use std::fmt::Write as _;
use std::process::ExitCode;

use serde_json::json;
use whisperkit::manifest::Split;
use whisperkit::model::write_checkpoint;
use whisperkit::trainer::train;

use crate::config::EffectiveConfig;
use crate::output::{write_atomic, RunMeta};
use crate::TrainArgs;

use super::load_manifest;

pub fn run(args: TrainArgs) -> anyhow::Result<ExitCode> {
    let mut cfg = EffectiveConfig::load(args.common.config.as_deref())?;
    if let Some(epochs) = args.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(batch_size) = args.batch_size {
        cfg.train.batch_size = batch_size;
    }
    if let Some(lr) = args.lr {
        cfg.train.lr = lr;
    }
    cfg.train.seed = args.common.seed;
    let meta = RunMeta::new(cfg.hash(), cfg.train.seed);

    let manifest = load_manifest(&args.common.manifest)?;
    let train_split = manifest.filter_split(Split::Train);

    // --epochs 0 means "write the initialization": run a single zero-lr
    // epoch so vocabulary and dimensions are still derived from the data.
    let effective = if cfg.train.epochs == 0 {
        let mut c = cfg.train.clone();
        c.epochs = 1;
        c.lr = 0.0;
        c
    } else {
        cfg.train.clone()
    };
    let run = train(
        &train_split,
        &cfg.features,
        cfg.feature_kind,
        &cfg.model,
        &effective,
    )?;

    write_checkpoint(&args.out, &run.params, &run.vocab)?;

    let mut log = String::new();
    let header = json!({
        "meta": meta,
        "config": cfg,
        "n_train_rows": train_split.len(),
        "vocab": run.vocab.tokens(),
    });
    writeln!(log, "{header}")?;
    let epochs_logged: &[whisperkit::trainer::EpochStats] =
        if cfg.train.epochs == 0 { &[] } else { &run.epochs };
    for stats in epochs_logged {
        writeln!(log, "{}", serde_json::to_string(stats)?)?;
    }
    writeln!(
        log,
        "{}",
        json!({
            "skipped_utterances": run.skipped_utterances,
            "rejected_steps": run.rejected_steps,
        })
    )?;
    let log_path = args.log_out.unwrap_or_else(|| {
        let mut p = args.out.as_os_str().to_owned();
        p.push(".log.jsonl");
        p.into()
    });
    write_atomic(&log_path, log.as_bytes())?;

    let final_loss = epochs_logged.last().map(|e| e.mean_loss);
    println!(
        "train: {} rows, {} epochs, final mean loss {}, skipped {} -> {}",
        train_split.len() - run.skipped_utterances,
        epochs_logged.len(),
        final_loss.map_or("n/a".to_string(), |l| format!("{l:.4}")),
        run.skipped_utterances,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
