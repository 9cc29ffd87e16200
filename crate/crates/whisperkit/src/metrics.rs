//! Edit-distance alignment and corpus scoring (WER / CER).
//!
//! Error rates are pooled over the corpus — `100 · Σ(S+D+I) / Σ N_ref` — not
//! averaged per utterance, matching the usual scoring-tool convention.
//! Values are not clamped: heavy insertion can push WER past 100%.
//!
//! Text is normalized before scoring: lowercased, punctuation stripped except
//! apostrophes, whitespace runs collapsed. CER counts the remaining spaces as
//! characters. Reports declare this normalization so comparisons against
//! published numbers stay explicit.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::manifest::Style;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("refs and hyps differ in length: {refs} vs {hyps}")]
    LengthMismatch { refs: usize, hyps: usize },
}

/// One step of an alignment between a reference and a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOpKind {
    Match,
    Substitute,
    Insert,
    Delete,
}

/// Alignment step with positions into the reference and hypothesis
/// (`None` on the side an insert/delete does not touch).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EditOp {
    pub kind: EditOpKind,
    pub ref_idx: Option<usize>,
    pub hyp_idx: Option<usize>,
}

/// Minimal unit-cost alignment plus its operation counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlignmentOps {
    pub ops: Vec<EditOp>,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub matches: usize,
    pub ref_len: usize,
}

impl AlignmentOps {
    /// S + D + I.
    pub fn distance(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Minimal (S + D + I) alignment by dynamic programming, unit costs.
/// Traceback ties prefer substitution over insertion over deletion.
#[allow(clippy::needless_range_loop)] // DP table indexing
pub fn edit_distance<T: Eq>(reference: &[T], hypothesis: &[T]) -> AlignmentOps {
    let n = reference.len();
    let m = hypothesis.len();
    let width = m + 1;
    let mut dist = vec![0usize; (n + 1) * width];
    for j in 0..=m {
        dist[j] = j;
    }
    for i in 1..=n {
        dist[i * width] = i;
        for j in 1..=m {
            let diag = dist[(i - 1) * width + (j - 1)]
                + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let ins = dist[i * width + (j - 1)] + 1;
            let del = dist[(i - 1) * width + j] + 1;
            dist[i * width + j] = diag.min(ins).min(del);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    let (mut subs, mut dels, mut inss, mut matches) = (0usize, 0usize, 0usize, 0usize);
    while i > 0 || j > 0 {
        let here = dist[i * width + j];
        // preference order at equal cost: match/substitute, insert, delete
        if i > 0 && j > 0 {
            let eq = reference[i - 1] == hypothesis[j - 1];
            if dist[(i - 1) * width + (j - 1)] + usize::from(!eq) == here {
                ops.push(EditOp {
                    kind: if eq { EditOpKind::Match } else { EditOpKind::Substitute },
                    ref_idx: Some(i - 1),
                    hyp_idx: Some(j - 1),
                });
                if eq {
                    matches += 1;
                } else {
                    subs += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && dist[i * width + (j - 1)] + 1 == here {
            ops.push(EditOp {
                kind: EditOpKind::Insert,
                ref_idx: None,
                hyp_idx: Some(j - 1),
            });
            inss += 1;
            j -= 1;
            continue;
        }
        ops.push(EditOp {
            kind: EditOpKind::Delete,
            ref_idx: Some(i - 1),
            hyp_idx: None,
        });
        dels += 1;
        i -= 1;
    }
    ops.reverse();
    AlignmentOps {
        ops,
        substitutions: subs,
        deletions: dels,
        insertions: inss,
        matches,
        ref_len: n,
    }
}

// ── Text normalization ──────────────────────────────────────────────────────

/// Scoring normalization: lowercase, strip punctuation except apostrophes,
/// collapse whitespace runs to single spaces, trim.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if ch.is_alphanumeric() || ch == '\'' {
            if pending_space {
                out.push(' ');
                pending_space = false;
            }
            out.extend(ch.to_lowercase());
        }
        // other punctuation dropped entirely
    }
    out
}

/// Normalized word tokens.
pub fn words(text: &str) -> Vec<String> {
    normalize_text(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Normalized characters for CER; spaces (already collapsed) count.
pub fn chars_for_cer(text: &str) -> Vec<char> {
    normalize_text(text).chars().collect()
}

// ── Corpus scoring ──────────────────────────────────────────────────────────

/// Per-utterance scoring row (counts at one granularity — words or chars).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredUtterance {
    pub utt_id: String,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
    /// Per-utterance error percentage (diagnostic only; corpus numbers pool).
    pub error_percent: f64,
}

/// Pooled corpus score at one granularity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusScore {
    pub percent: f64,
    pub total_edits: usize,
    pub total_ref: usize,
    pub per_utterance: Vec<ScoredUtterance>,
    /// utt_ids whose reference was empty after normalization (excluded).
    pub rejected: Vec<String>,
}

fn pool<T: Eq>(
    ids: &[String],
    refs: &[Vec<T>],
    hyps: &[Vec<T>],
) -> (CorpusScore, Vec<AlignmentOps>) {
    let mut per_utterance = Vec::with_capacity(refs.len());
    let mut rejected = Vec::new();
    let mut alignments = Vec::with_capacity(refs.len());
    let (mut total_edits, mut total_ref) = (0usize, 0usize);
    for ((id, r), h) in ids.iter().zip(refs).zip(hyps) {
        if r.is_empty() {
            rejected.push(id.clone());
            continue;
        }
        let ops = edit_distance(r, h);
        total_edits += ops.distance();
        total_ref += ops.ref_len;
        per_utterance.push(ScoredUtterance {
            utt_id: id.clone(),
            substitutions: ops.substitutions,
            deletions: ops.deletions,
            insertions: ops.insertions,
            ref_len: ops.ref_len,
            error_percent: 100.0 * ops.distance() as f64 / ops.ref_len as f64,
        });
        alignments.push(ops);
    }
    let percent = if total_ref == 0 {
        0.0
    } else {
        100.0 * total_edits as f64 / total_ref as f64
    };
    (
        CorpusScore {
            percent,
            total_edits,
            total_ref,
            per_utterance,
            rejected,
        },
        alignments,
    )
}

/// Word error rate pooled over aligned (reference, hypothesis) text pairs.
/// References that are empty after normalization are rejected per utterance
/// and reported, not scored.
pub fn wer(
    ids: &[String],
    refs: &[&str],
    hyps: &[&str],
) -> Result<CorpusScore, MetricsError> {
    if refs.len() != hyps.len() {
        return Err(MetricsError::LengthMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    let r: Vec<Vec<String>> = refs.iter().map(|t| words(t)).collect();
    let h: Vec<Vec<String>> = hyps.iter().map(|t| words(t)).collect();
    Ok(pool(ids, &r, &h).0)
}

/// Character error rate over normalized text (spaces count as characters).
pub fn cer(
    ids: &[String],
    refs: &[&str],
    hyps: &[&str],
) -> Result<CorpusScore, MetricsError> {
    if refs.len() != hyps.len() {
        return Err(MetricsError::LengthMismatch {
            refs: refs.len(),
            hyps: hyps.len(),
        });
    }
    let r: Vec<Vec<char>> = refs.iter().map(|t| chars_for_cer(t)).collect();
    let h: Vec<Vec<char>> = hyps.iter().map(|t| chars_for_cer(t)).collect();
    Ok(pool(ids, &r, &h).0)
}

/// One utterance to score: id, reference text, hypothesis text.
#[derive(Debug, Clone)]
pub struct ScorePair {
    pub utt_id: String,
    pub reference: String,
    pub hypothesis: String,
}

/// WER and CER for a corpus in one pass, plus word alignments for
/// pretty-printing.
#[derive(Debug, Clone)]
pub struct CorpusReport {
    pub wer: CorpusScore,
    pub cer: CorpusScore,
    pub word_alignments: Vec<(String, AlignmentOps)>,
}

pub fn score_corpus(pairs: &[ScorePair]) -> CorpusReport {
    let ids: Vec<String> = pairs.iter().map(|p| p.utt_id.clone()).collect();
    let refs_w: Vec<Vec<String>> = pairs.iter().map(|p| words(&p.reference)).collect();
    let hyps_w: Vec<Vec<String>> = pairs.iter().map(|p| words(&p.hypothesis)).collect();
    let (wer, aligns) = pool(&ids, &refs_w, &hyps_w);
    let refs_c: Vec<Vec<char>> = pairs.iter().map(|p| chars_for_cer(&p.reference)).collect();
    let hyps_c: Vec<Vec<char>> = pairs.iter().map(|p| chars_for_cer(&p.hypothesis)).collect();
    let (cer, _) = pool(&ids, &refs_c, &hyps_c);
    let scored_ids: Vec<String> = wer.per_utterance.iter().map(|u| u.utt_id.clone()).collect();
    CorpusReport {
        wer,
        cer,
        word_alignments: scored_ids.into_iter().zip(aligns).collect(),
    }
}

// ── Aggregation ─────────────────────────────────────────────────────────────

/// Grouping key of the aggregate table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GroupKey {
    pub style: Style,
    pub dialect: String,
    pub decode_method: String,
}

/// Input row for aggregation: group metadata plus the per-utterance counts.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub key: GroupKey,
    /// (S + D + I, N_ref) at word granularity.
    pub word_counts: (usize, usize),
    /// (S + D + I, N_ref) at character granularity.
    pub char_counts: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupScore {
    pub n_utterances: usize,
    pub wer_percent: f64,
    pub cer_percent: f64,
}

/// Pool per-utterance counts within each (style, dialect, decode_method)
/// group. BTreeMap keeps key ordering stable.
pub fn aggregate(rows: &[AggregateRow]) -> BTreeMap<GroupKey, GroupScore> {
    struct Acc {
        n: usize,
        w_edits: usize,
        w_ref: usize,
        c_edits: usize,
        c_ref: usize,
    }
    let mut groups: BTreeMap<GroupKey, Acc> = BTreeMap::new();
    for row in rows {
        let acc = groups.entry(row.key.clone()).or_insert(Acc {
            n: 0,
            w_edits: 0,
            w_ref: 0,
            c_edits: 0,
            c_ref: 0,
        });
        acc.n += 1;
        acc.w_edits += row.word_counts.0;
        acc.w_ref += row.word_counts.1;
        acc.c_edits += row.char_counts.0;
        acc.c_ref += row.char_counts.1;
    }
    groups
        .into_iter()
        .map(|(k, acc)| {
            let pct = |edits: usize, n: usize| {
                if n == 0 {
                    0.0
                } else {
                    100.0 * edits as f64 / n as f64
                }
            };
            (
                k,
                GroupScore {
                    n_utterances: acc.n,
                    wer_percent: pct(acc.w_edits, acc.w_ref),
                    cer_percent: pct(acc.c_edits, acc.c_ref),
                },
            )
        })
        .collect()
}

// ── Alignment pretty-printing ───────────────────────────────────────────────

/// Three-line sclite-style rendering: REF, HYP, and per-token tags
/// (`S`/`I`/`D`, blank for matches), column-aligned.
pub fn render_alignment(reference: &[String], hypothesis: &[String], ops: &AlignmentOps) -> String {
    let mut ref_cells = Vec::new();
    let mut hyp_cells = Vec::new();
    let mut tag_cells = Vec::new();
    for op in &ops.ops {
        let (r, h, tag) = match op.kind {
            EditOpKind::Match => (
                reference[op.ref_idx.unwrap()].clone(),
                hypothesis[op.hyp_idx.unwrap()].clone(),
                "",
            ),
            EditOpKind::Substitute => (
                reference[op.ref_idx.unwrap()].to_uppercase(),
                hypothesis[op.hyp_idx.unwrap()].to_uppercase(),
                "S",
            ),
            EditOpKind::Insert => (
                "***".to_string(),
                hypothesis[op.hyp_idx.unwrap()].to_uppercase(),
                "I",
            ),
            EditOpKind::Delete => (
                reference[op.ref_idx.unwrap()].to_uppercase(),
                "***".to_string(),
                "D",
            ),
        };
        let width = r.chars().count().max(h.chars().count()).max(tag.len());
        ref_cells.push(format!("{r:<width$}"));
        hyp_cells.push(format!("{h:<width$}"));
        tag_cells.push(format!("{tag:<width$}"));
    }
    format!(
        "REF: {}\nHYP: {}\n     {}\n",
        ref_cells.join(" "),
        hyp_cells.join(" "),
        tag_cells.join(" ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Memo-free recursive oracle. Exponential; tiny inputs only.
    fn naive_distance(r: &[u8], h: &[u8]) -> usize {
        if r.is_empty() {
            return h.len();
        }
        if h.is_empty() {
            return r.len();
        }
        let cost = usize::from(r[0] != h[0]);
        (naive_distance(&r[1..], &h[1..]) + cost)
            .min(naive_distance(r, &h[1..]) + 1)
            .min(naive_distance(&r[1..], h) + 1)
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn identical_sequences_have_zero_edits() {
        let a = chars("abc");
        let ops = edit_distance(&a, &a);
        assert_eq!(ops.distance(), 0);
        assert_eq!(ops.matches, 3);
    }

    #[test]
    fn kitten_to_sitting_is_three() {
        let ops = edit_distance(&chars("kitten"), &chars("sitting"));
        assert_eq!(ops.distance(), 3);
        assert_eq!(ops.substitutions, 2);
        assert_eq!(ops.insertions, 1);
        assert_eq!(ops.deletions, 0);
    }

    #[test]
    fn empty_hypothesis_is_all_deletions() {
        let r: Vec<String> = ["the", "cat"].iter().map(|s| s.to_string()).collect();
        let ops = edit_distance(&r, &[]);
        assert_eq!(ops.deletions, 2);
        assert_eq!(ops.distance(), 2);
    }

    #[test]
    fn counts_always_reconcile_with_ref_len() {
        let ops = edit_distance(&chars("abcab"), &chars("cabba"));
        assert_eq!(ops.substitutions + ops.deletions + ops.matches, ops.ref_len);
    }

    #[test]
    fn dp_matches_naive_recursion_small() {
        let alphabet = *b"abc";
        let strings: Vec<Vec<u8>> = (0..=4usize)
            .flat_map(|len| {
                (0..3usize.pow(len as u32)).map(move |mut code| {
                    (0..len)
                        .map(|_| {
                            let c = alphabet[code % 3];
                            code /= 3;
                            c
                        })
                        .collect::<Vec<u8>>()
                })
            })
            .collect();
        for r in &strings {
            for h in &strings {
                assert_eq!(
                    edit_distance(r, h).distance(),
                    naive_distance(r, h),
                    "r={r:?} h={h:?}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn replaying_ops_reconstructs_hypothesis(
            r in proptest::collection::vec(0u8..4, 0..12),
            h in proptest::collection::vec(0u8..4, 0..12),
        ) {
            let ops = edit_distance(&r, &h);
            let mut rebuilt = Vec::new();
            for op in &ops.ops {
                match op.kind {
                    EditOpKind::Match | EditOpKind::Substitute | EditOpKind::Insert => {
                        rebuilt.push(h[op.hyp_idx.unwrap()]);
                    }
                    EditOpKind::Delete => {}
                }
            }
            prop_assert_eq!(rebuilt, h);
        }

        #[test]
        fn distance_symmetry_and_triangle(
            a in proptest::collection::vec(0u8..3, 0..8),
            b in proptest::collection::vec(0u8..3, 0..8),
            c in proptest::collection::vec(0u8..3, 0..8),
        ) {
            let ab = edit_distance(&a, &b).distance();
            let ba = edit_distance(&b, &a).distance();
            prop_assert_eq!(ab, ba);
            let ac = edit_distance(&a, &c).distance();
            let cb = edit_distance(&c, &b).distance();
            prop_assert!(ab <= ac + cb);
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i}")).collect()
    }

    #[test]
    fn wer_zero_on_identical() {
        let score = wer(&ids(2), &["the cat", "sat"], &["the cat", "sat"]).unwrap();
        assert_eq!(score.percent, 0.0);
    }

    #[test]
    fn single_deletion_wer() {
        let score = wer(&ids(1), &["the cat sat"], &["the cat"]).unwrap();
        assert!((score.percent - 33.333333333333336).abs() < 1e-9);
    }

    #[test]
    fn pooled_wer_is_not_per_utterance_mean() {
        // errors 1/3 and 0/2 pool to 1/5 = 20.0, not the 16.67 mean
        let score = wer(
            &ids(2),
            &["the cat sat", "go now"],
            &["the cat mat", "go now"],
        )
        .unwrap();
        assert!((score.percent - 20.0).abs() < 1e-12);
        assert_eq!(score.total_edits, 1);
        assert_eq!(score.total_ref, 5);
    }

    #[test]
    fn wer_is_order_invariant() {
        let r = ["a b c", "d e"];
        let h = ["a x c", "d e"];
        let fwd = wer(&ids(2), &r, &h).unwrap();
        let rev = wer(
            &ids(2),
            &[r[1], r[0]],
            &[h[1], h[0]],
        )
        .unwrap();
        assert_eq!(fwd.percent, rev.percent);
    }

    #[test]
    fn empty_reference_rejected_per_utterance() {
        let score = wer(&ids(2), &["", "one two"], &["junk", "one two"]).unwrap();
        assert_eq!(score.rejected, vec!["u0".to_string()]);
        assert_eq!(score.percent, 0.0);
        assert_eq!(score.per_utterance.len(), 1);
    }

    #[test]
    fn cer_identical_and_single_substitution() {
        assert_eq!(cer(&ids(1), &["hello"], &["hello"]).unwrap().percent, 0.0);
        let s = cer(&ids(1), &["cat"], &["cut"]).unwrap();
        assert!((s.percent - 33.333333333333336).abs() < 1e-9);
    }

    #[test]
    fn whitespace_only_differences_score_zero() {
        let w = wer(&ids(1), &["the   cat  sat"], &["the cat sat"]).unwrap();
        assert_eq!(w.percent, 0.0);
        let c = cer(&ids(1), &["the   cat\tsat"], &["the cat sat"]).unwrap();
        assert_eq!(c.percent, 0.0);
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_text("Hello, World!"), "hello world");
        assert_eq!(normalize_text("don't STOP."), "don't stop");
        assert_eq!(normalize_text("  a\t b\nc "), "a b c");
        assert_eq!(chars_for_cer("a  b"), vec!['a', ' ', 'b']);
    }

    #[test]
    fn wer_length_mismatch_is_an_error() {
        assert!(matches!(
            wer(&ids(1), &["a"], &[]),
            Err(MetricsError::LengthMismatch { refs: 1, hyps: 0 })
        ));
    }

    #[test]
    fn aggregate_single_group_equals_corpus_score() {
        let rows = vec![
            AggregateRow {
                key: GroupKey {
                    style: Style::Whisper,
                    dialect: "Irish".into(),
                    decode_method: "greedy".into(),
                },
                word_counts: (1, 3),
                char_counts: (2, 11),
            },
            AggregateRow {
                key: GroupKey {
                    style: Style::Whisper,
                    dialect: "Irish".into(),
                    decode_method: "greedy".into(),
                },
                word_counts: (0, 2),
                char_counts: (0, 6),
            },
        ];
        let table = aggregate(&rows);
        assert_eq!(table.len(), 1);
        let g = table.values().next().unwrap();
        assert_eq!(g.n_utterances, 2);
        assert!((g.wer_percent - 20.0).abs() < 1e-12);
        assert!((g.cer_percent - 100.0 * 2.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_groups_are_independent() {
        let mk = |style: Style, edits: usize| AggregateRow {
            key: GroupKey {
                style,
                dialect: "Irish".into(),
                decode_method: "beam".into(),
            },
            word_counts: (edits, 4),
            char_counts: (edits, 10),
        };
        let both = aggregate(&[mk(Style::Normal, 0), mk(Style::Whisper, 2)]);
        let solo = aggregate(&[mk(Style::Whisper, 2)]);
        let key = GroupKey {
            style: Style::Whisper,
            dialect: "Irish".into(),
            decode_method: "beam".into(),
        };
        assert_eq!(both.get(&key), solo.get(&key));
    }

    #[test]
    fn alignment_rendering_marks_errors() {
        let r: Vec<String> = ["the", "cat", "sat"].iter().map(|s| s.to_string()).collect();
        let h: Vec<String> = ["the", "cut", "sat"].iter().map(|s| s.to_string()).collect();
        let ops = edit_distance(&r, &h);
        let text = render_alignment(&r, &h, &ops);
        assert!(text.contains("CAT"));
        assert!(text.contains("CUT"));
        assert!(text.lines().nth(2).unwrap().contains('S'));
    }

    #[test]
    fn score_corpus_combines_both_granularities() {
        let pairs = vec![
            ScorePair {
                utt_id: "u0".into(),
                reference: "the cat sat".into(),
                hypothesis: "the cut sat".into(),
            },
            ScorePair {
                utt_id: "u1".into(),
                reference: "go".into(),
                hypothesis: "go".into(),
            },
        ];
        let report = score_corpus(&pairs);
        assert!((report.wer.percent - 25.0).abs() < 1e-12); // 1 of 4 words
        assert_eq!(report.cer.total_ref, 13); // "the cat sat" (11) + "go" (2)
        assert_eq!(report.word_alignments.len(), 2);
    }
}
