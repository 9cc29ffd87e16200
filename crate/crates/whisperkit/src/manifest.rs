//! Typed dataset manifests: one utterance per row with transcript, speaker,
//! style (normal/whisper), dialect, and split metadata.
//!
//! Two on-disk forms, chosen by extension: JSON lines (`.jsonl`, primary —
//! append- and diff-friendly) and TSV (`.tsv`, header row, identical column
//! order). Fields are exactly `utt_id, audio_path, transcript, speaker_id,
//! style, dialect, split`. Audio paths may be relative; they resolve against
//! the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::wav_duration_seconds;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed row: {detail}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{path}:{line}: duplicate utt_id {utt_id:?}")]
    DuplicateUttId {
        path: PathBuf,
        line: usize,
        utt_id: String,
    },
    #[error("manifest extension must be .jsonl or .tsv, got {0:?}")]
    UnsupportedExtension(PathBuf),
    #[error(
        "record {utt_id:?} (style {style}, dialect {dialect:?}) matches no rule of the split plan"
    )]
    UnmatchedRecord {
        utt_id: String,
        style: Style,
        dialect: String,
    },
}

/// Speech style of an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Normal,
    Whisper,
}

impl std::fmt::Display for Style {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Style::Normal => "normal",
            Style::Whisper => "whisper",
        })
    }
}

/// Which side of the experiment a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub utt_id: String,
    pub audio_path: String,
    pub transcript: String,
    pub speaker_id: String,
    pub style: Style,
    pub dialect: String,
    pub split: Split,
}

/// A validated collection of records plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    records: Vec<UtteranceRecord>,
    provenance: String,
    base_dir: Option<PathBuf>,
}

impl Manifest {
    /// Build from in-memory records, rejecting duplicate ids.
    pub fn new(
        records: Vec<UtteranceRecord>,
        provenance: impl Into<String>,
        base_dir: Option<PathBuf>,
    ) -> Result<Self, ManifestError> {
        let mut seen = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.utt_id.clone()) {
                return Err(ManifestError::DuplicateUttId {
                    path: base_dir.clone().unwrap_or_default(),
                    line: i + 1,
                    utt_id: r.utt_id.clone(),
                });
            }
        }
        Ok(Self {
            records,
            provenance: provenance.into(),
            base_dir,
        })
    }

    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Resolve a record's audio path against the manifest location.
    pub fn resolve_audio_path(&self, record: &UtteranceRecord) -> PathBuf {
        let p = Path::new(&record.audio_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            match &self.base_dir {
                Some(base) => base.join(p),
                None => p.to_path_buf(),
            }
        }
    }

    /// Keep only rows of one split.
    pub fn filter_split(&self, split: Split) -> Manifest {
        Manifest {
            records: self
                .records
                .iter()
                .filter(|r| r.split == split)
                .cloned()
                .collect(),
            provenance: format!("{} [split={split}]", self.provenance),
            base_dir: self.base_dir.clone(),
        }
    }

    /// Paths of records whose audio file is missing on disk.
    pub fn missing_audio(&self) -> Vec<(String, PathBuf)> {
        self.records
            .iter()
            .filter_map(|r| {
                let p = self.resolve_audio_path(r);
                (!p.exists()).then(|| (r.utt_id.clone(), p))
            })
            .collect()
    }
}

// ── Parsing / serialization ─────────────────────────────────────────────────

/// Parse a manifest, dispatching on the file extension.
pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => parse_jsonl_file(path),
        Some("tsv") => parse_tsv_file(path),
        _ => Err(ManifestError::UnsupportedExtension(path.to_path_buf())),
    }
}

fn base_dir_of(path: &Path) -> Option<PathBuf> {
    path.parent().map(Path::to_path_buf)
}

/// JSONL files written by this toolkit lead with a `{"meta": ...}` object;
/// such lines are provenance, not records.
pub fn is_meta_line(line: &str) -> bool {
    match serde_json::from_str::<serde_json::Value>(line) {
        Ok(serde_json::Value::Object(map)) => map.len() == 1 && map.contains_key("meta"),
        _ => false,
    }
}

fn parse_jsonl_file(path: &Path) -> Result<Manifest, ManifestError> {
    let f = std::fs::File::open(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_jsonl_reader(
        BufReader::new(f),
        path.display().to_string(),
        path,
        base_dir_of(path),
    )
}

/// Parse JSON-lines manifest rows from any reader. Blank lines and
/// `{"meta": ...}` provenance lines are allowed; errors carry 1-based line
/// numbers.
pub fn parse_jsonl_reader(
    reader: impl BufRead,
    provenance: String,
    path_for_errors: &Path,
    base_dir: Option<PathBuf>,
) -> Result<Manifest, ManifestError> {
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| ManifestError::Io {
            path: path_for_errors.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() || is_meta_line(&line) {
            continue;
        }
        let record: UtteranceRecord =
            serde_json::from_str(&line).map_err(|e| ManifestError::MalformedRow {
                path: path_for_errors.to_path_buf(),
                line: line_no,
                detail: e.to_string(),
            })?;
        if !seen.insert(record.utt_id.clone()) {
            return Err(ManifestError::DuplicateUttId {
                path: path_for_errors.to_path_buf(),
                line: line_no,
                utt_id: record.utt_id,
            });
        }
        records.push(record);
    }
    Ok(Manifest {
        records,
        provenance,
        base_dir,
    })
}

fn parse_tsv_file(path: &Path) -> Result<Manifest, ManifestError> {
    let f = std::fs::File::open(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(true)
        .from_reader(f);
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for result in rdr.deserialize::<UtteranceRecord>() {
        let record = result.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(records.len() + 2);
            ManifestError::MalformedRow {
                path: path.to_path_buf(),
                line,
                detail: e.to_string(),
            }
        })?;
        if !seen.insert(record.utt_id.clone()) {
            return Err(ManifestError::DuplicateUttId {
                path: path.to_path_buf(),
                line: records.len() + 2, // header + 1-based data row
                utt_id: record.utt_id,
            });
        }
        records.push(record);
    }
    Ok(Manifest {
        records,
        provenance: path.display().to_string(),
        base_dir: base_dir_of(path),
    })
}

/// Write records as JSON lines (field order as declared).
pub fn write_jsonl(manifest: &Manifest, mut w: impl Write) -> std::io::Result<()> {
    for r in &manifest.records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Write records as TSV with a header row in the canonical column order.
pub fn write_tsv(manifest: &Manifest, w: impl Write) -> std::io::Result<()> {
    let mut wtr = csv::WriterBuilder::new().delimiter(b'\t').from_writer(w);
    for r in &manifest.records {
        wtr.serialize(r)?;
    }
    wtr.flush()
}

// ── Summaries ───────────────────────────────────────────────────────────────

/// Grouping key of a manifest summary. The corpora behind the style/dialect
/// pairs are one-to-one with dialect here (wTIMIT ↔ Singaporean,
/// CHAINS ↔ Irish), so no separate dataset column is kept on records.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SummaryKey {
    pub style: Style,
    pub dialect: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub n_utterances: usize,
    pub n_speakers: usize,
    /// Sum of per-file durations from WAV headers, in hours. `None` when no
    /// referenced file had a readable header.
    pub total_duration_h: Option<f64>,
    /// Rows whose audio header could not be read (still counted above).
    pub unknown_durations: usize,
}

/// Per-(style, dialect, split) counts, speaker tallies, and header-derived
/// durations. Rows with unreadable audio are counted; their duration is
/// flagged unknown rather than guessed.
pub fn summarize(manifest: &Manifest) -> BTreeMap<SummaryKey, GroupSummary> {
    struct Acc {
        n: usize,
        speakers: BTreeSet<String>,
        seconds: f64,
        known: usize,
        unknown: usize,
    }
    let mut groups: BTreeMap<SummaryKey, Acc> = BTreeMap::new();
    for r in &manifest.records {
        let key = SummaryKey {
            style: r.style,
            dialect: r.dialect.clone(),
            split: r.split,
        };
        let acc = groups.entry(key).or_insert(Acc {
            n: 0,
            speakers: BTreeSet::new(),
            seconds: 0.0,
            known: 0,
            unknown: 0,
        });
        acc.n += 1;
        acc.speakers.insert(r.speaker_id.clone());
        match wav_duration_seconds(manifest.resolve_audio_path(r)) {
            Ok(s) => {
                acc.seconds += s;
                acc.known += 1;
            }
            Err(_) => acc.unknown += 1,
        }
    }
    groups
        .into_iter()
        .map(|(k, acc)| {
            (
                k,
                GroupSummary {
                    n_utterances: acc.n,
                    n_speakers: acc.speakers.len(),
                    total_duration_h: (acc.known > 0).then(|| acc.seconds / 3600.0),
                    unknown_durations: acc.unknown,
                },
            )
        })
        .collect()
}

// ── Split plans ─────────────────────────────────────────────────────────────

/// How to partition a manifest into train and test sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPlan {
    /// The published usage mapping: Singaporean whisper, Singaporean
    /// normal, and Irish normal rows train; Irish whisper rows test.
    /// Anything else is an unmatched-record error.
    PaperReplication,
    /// Respect each record's explicit `split` field.
    ByField,
}

/// Partition into (train, test). Total and disjoint by construction.
pub fn split_plan(
    manifest: &Manifest,
    plan: SplitPlan,
) -> Result<(Manifest, Manifest), ManifestError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for r in &manifest.records {
        let goes_to_train = match plan {
            SplitPlan::ByField => r.split == Split::Train,
            SplitPlan::PaperReplication => match (r.dialect.as_str(), r.style) {
                ("Singaporean", Style::Whisper) => true,
                ("Singaporean", Style::Normal) => true,
                ("Irish", Style::Normal) => true,
                ("Irish", Style::Whisper) => false,
                _ => {
                    return Err(ManifestError::UnmatchedRecord {
                        utt_id: r.utt_id.clone(),
                        style: r.style,
                        dialect: r.dialect.clone(),
                    })
                }
            },
        };
        if goes_to_train {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }
    let mk = |records: Vec<UtteranceRecord>, side: &str| Manifest {
        records,
        provenance: format!("{} [{side}]", manifest.provenance),
        base_dir: manifest.base_dir.clone(),
    };
    Ok((mk(train, "train"), mk(test, "test")))
}
