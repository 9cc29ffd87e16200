//! `whisperkit score`: WER/CER report for decoded hypotheses against
//! manifest transcripts. Emits `report.json`, `report.csv` (per-utterance
//! word-level rows), `aggregate.csv` (pooled per style/dialect/method), and
//! `alignment.txt` (sclite-style error listings).
//!
//! Rows missing from the hypothesis file score as empty hypotheses (all
//! deletions) with a warning. Published reference numbers are attached to
//! the JSON report for side-by-side context only.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::process::ExitCode;

use anyhow::Context;
use serde::Deserialize;
use serde_json::json;
use whisperkit::manifest::is_meta_line;
use whisperkit::metrics::{
    aggregate, render_alignment, score_corpus, words, AggregateRow, GroupKey, ScorePair,
};
use whisperkit::reference::{reference_table, REFERENCE_NOTE};

use crate::config::EffectiveConfig;
use crate::output::{write_atomic, RunMeta};
use crate::ScoreArgs;

use super::{apply_split, load_manifest};

const NORMALIZATION_NOTE: &str =
    "lowercase; punctuation stripped except apostrophes; whitespace collapsed; \
     CER counts spaces after collapsing";

#[derive(Debug, Deserialize)]
struct HypRow {
    utt_id: String,
    hyp_text: String,
    #[allow(dead_code)]
    log_score: f64,
}

struct HypFile {
    method: String,
    rows: BTreeMap<String, String>,
}

fn read_hyps(path: &std::path::Path) -> anyhow::Result<HypFile> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut method = "unknown".to_string();
    let mut rows = BTreeMap::new();
    for (idx, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if is_meta_line(&line) {
            continue;
        }
        // the decode header carries meta plus method fields
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(&line) {
            if value.get("meta").is_some() {
                if let Some(m) = value.get("method").and_then(|v| v.as_str()) {
                    method = m.to_string();
                }
                continue;
            }
        }
        let row: HypRow = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: bad hypothesis row", path.display(), idx + 1))?;
        rows.insert(row.utt_id, row.hyp_text);
    }
    Ok(HypFile { method, rows })
}

pub fn run(args: ScoreArgs) -> anyhow::Result<ExitCode> {
    let cfg = EffectiveConfig::load(args.common.config.as_deref())?;
    let meta = RunMeta::new(cfg.hash(), args.common.seed);
    let manifest = apply_split(&load_manifest(&args.common.manifest)?, args.split);
    let hyps = read_hyps(&args.hyps)?;
    std::fs::create_dir_all(&args.out)?;

    let mut pairs = Vec::with_capacity(manifest.len());
    let mut warnings = Vec::new();
    for record in manifest.records() {
        let hypothesis = match hyps.rows.get(&record.utt_id) {
            Some(h) => h.clone(),
            None => {
                warnings.push(format!(
                    "utt {} missing from hypotheses; scored as empty",
                    record.utt_id
                ));
                String::new()
            }
        };
        pairs.push(ScorePair {
            utt_id: record.utt_id.clone(),
            reference: record.transcript.clone(),
            hypothesis,
        });
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = score_corpus(&pairs);

    // aggregate by (style, dialect, method) using per-utterance counts
    let word_counts: BTreeMap<&str, (usize, usize)> = report
        .wer
        .per_utterance
        .iter()
        .map(|u| {
            (
                u.utt_id.as_str(),
                (u.substitutions + u.deletions + u.insertions, u.ref_len),
            )
        })
        .collect();
    let char_counts: BTreeMap<&str, (usize, usize)> = report
        .cer
        .per_utterance
        .iter()
        .map(|u| {
            (
                u.utt_id.as_str(),
                (u.substitutions + u.deletions + u.insertions, u.ref_len),
            )
        })
        .collect();
    let agg_rows: Vec<AggregateRow> = manifest
        .records()
        .iter()
        .filter_map(|r| {
            let wc = word_counts.get(r.utt_id.as_str())?;
            let cc = char_counts.get(r.utt_id.as_str()).copied().unwrap_or((0, 0));
            Some(AggregateRow {
                key: GroupKey {
                    style: r.style,
                    dialect: r.dialect.clone(),
                    decode_method: hyps.method.clone(),
                },
                word_counts: *wc,
                char_counts: cc,
            })
        })
        .collect();
    let table = aggregate(&agg_rows);

    // report.json
    let reference: Vec<serde_json::Value> = reference_table()
        .into_iter()
        .map(|(label, score)| json!({"system": label, "wer_percent": score.wer_percent, "cer_percent": score.cer_percent}))
        .collect();
    let aggregate_json: Vec<serde_json::Value> = table
        .iter()
        .map(|(k, v)| {
            json!({
                "style": k.style.to_string(),
                "dialect": k.dialect,
                "decode_method": k.decode_method,
                "n_utterances": v.n_utterances,
                "wer_percent": v.wer_percent,
                "cer_percent": v.cer_percent,
            })
        })
        .collect();
    let report_json = json!({
        "meta": meta,
        "normalization": NORMALIZATION_NOTE,
        "decode_method": hyps.method,
        "wer_percent": report.wer.percent,
        "cer_percent": report.cer.percent,
        "wer": report.wer,
        "cer": report.cer,
        "aggregate": aggregate_json,
        "paper_reference": {"note": REFERENCE_NOTE, "rows": reference},
        "warnings": warnings,
    });
    write_atomic(
        &args.out.join("report.json"),
        serde_json::to_string_pretty(&report_json)?.as_bytes(),
    )?;

    // report.csv: per-utterance word-level rows
    let mut csv = meta.csv_comment();
    csv.push_str("utt_id,S,D,I,N,wer_percent\n");
    for u in &report.wer.per_utterance {
        writeln!(
            csv,
            "{},{},{},{},{},{:.4}",
            u.utt_id, u.substitutions, u.deletions, u.insertions, u.ref_len, u.error_percent
        )?;
    }
    write_atomic(&args.out.join("report.csv"), csv.as_bytes())?;

    // aggregate.csv
    let mut agg_csv = meta.csv_comment();
    agg_csv.push_str("style,dialect,decode_method,n_utterances,wer_percent,cer_percent\n");
    for (k, v) in &table {
        writeln!(
            agg_csv,
            "{},{},{},{},{:.4},{:.4}",
            k.style, k.dialect, k.decode_method, v.n_utterances, v.wer_percent, v.cer_percent
        )?;
    }
    write_atomic(&args.out.join("aggregate.csv"), agg_csv.as_bytes())?;

    // alignment.txt
    let pair_by_id: BTreeMap<&str, &ScorePair> =
        pairs.iter().map(|p| (p.utt_id.as_str(), p)).collect();
    let mut alignment = meta.csv_comment();
    alignment.push('\n');
    for (utt_id, ops) in &report.word_alignments {
        let pair = pair_by_id[utt_id.as_str()];
        writeln!(alignment, "id: {utt_id} (S={} D={} I={})", ops.substitutions, ops.deletions, ops.insertions)?;
        alignment.push_str(&render_alignment(
            &words(&pair.reference),
            &words(&pair.hypothesis),
            ops,
        ));
        alignment.push('\n');
    }
    write_atomic(&args.out.join("alignment.txt"), alignment.as_bytes())?;

    println!(
        "score[{}]: WER {:.2}% CER {:.2}% over {} utterances ({} warnings) -> {}",
        hyps.method,
        report.wer.percent,
        report.cer.percent,
        report.wer.per_utterance.len(),
        warnings.len(),
        args.out.display()
    );
    println!("  {REFERENCE_NOTE}:");
    for (label, score) in reference_table() {
        println!(
            "    {label}: WER {:.2}% CER {:.2}%",
            score.wer_percent, score.cer_percent
        );
    }
    Ok(ExitCode::SUCCESS)
}
