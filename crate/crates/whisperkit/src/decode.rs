//! Greedy and prefix-beam-search decoding from emissions to token sequences.
//!
//! Greedy decoding collapses the per-frame argmax path. Beam decoding keeps
//! the `beam_width` best label *prefixes* by marginal probability — the sum
//! over all remaining paths that collapse to the prefix — tracked as the
//! usual (ends-in-blank, ends-in-label) pair and merged by log-sum-exp.
//! Merging by sum rather than max is what makes the exhaustive-marginal
//! oracle well defined; Viterbi-style max would decode a different objective.
//!
//! Everything is deterministic: score ties break toward the
//! lexicographically smallest prefix, and the frame argmax breaks toward the
//! lowest label index (so all-uniform emissions decode to the empty string —
//! blank wins every frame).

use std::collections::BTreeMap;

use crate::ctc::{collapse, EmissionMatrix, TokenSeq, BLANK_ID};
use crate::numeric::log_add;

/// Collapse of the per-frame argmax path; ties break toward the lowest
/// label index.
pub fn greedy_decode(em: &EmissionMatrix) -> TokenSeq {
    greedy_decode_scored(em).0
}

/// Greedy decode plus the log-probability of the argmax path.
pub fn greedy_decode_scored(em: &EmissionMatrix) -> (TokenSeq, f64) {
    let mut path = Vec::with_capacity(em.num_frames());
    let mut score = 0.0;
    for t in 0..em.num_frames() {
        let row = em.row(t);
        let mut best = 0usize;
        for (k, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = k;
            }
        }
        score += row[best];
        path.push(best);
    }
    (collapse(&path), score)
}

#[derive(Clone, Copy)]
struct PrefixMass {
    /// Log mass of paths collapsing to the prefix that end in a blank.
    blank: f64,
    /// Log mass of paths collapsing to the prefix that end in its last label.
    label: f64,
}

impl PrefixMass {
    fn total(&self) -> f64 {
        log_add(self.blank, self.label)
    }
}

/// Prefix beam search maximizing the label-sequence marginal.
///
/// With `beam_width` at least the number of reachable prefixes the search is
/// exact. A width of zero is treated as one.
pub fn beam_decode(em: &EmissionMatrix, beam_width: usize) -> TokenSeq {
    beam_decode_scored(em, beam_width).0
}

/// Beam decode plus the log marginal probability of the returned labels.
pub fn beam_decode_scored(em: &EmissionMatrix, beam_width: usize) -> (TokenSeq, f64) {
    let beam_width = beam_width.max(1);
    let neg = f64::NEG_INFINITY;

    // BTreeMap keys are prefixes; lexicographic iteration keeps every merge
    // and tie deterministic.
    let mut beam: BTreeMap<Vec<usize>, PrefixMass> = BTreeMap::new();
    beam.insert(
        Vec::new(),
        PrefixMass {
            blank: 0.0,
            label: neg,
        },
    );

    for t in 0..em.num_frames() {
        let row = em.row(t);
        let mut next: BTreeMap<Vec<usize>, PrefixMass> = BTreeMap::new();

        for (prefix, mass) in &beam {
            // Stay on the same prefix via a blank frame.
            let entry = next.entry(prefix.clone()).or_insert(PrefixMass {
                blank: neg,
                label: neg,
            });
            entry.blank = log_add(entry.blank, mass.total() + row[BLANK_ID]);

            let last = prefix.last().copied();
            for (label, &p) in row.iter().enumerate().skip(1) {
                if Some(label) == last {
                    // Repeat without separating blank: same prefix.
                    let entry = next.entry(prefix.clone()).or_insert(PrefixMass {
                        blank: neg,
                        label: neg,
                    });
                    entry.label = log_add(entry.label, mass.label + p);
                    // Blank-separated repeat: prefix grows.
                    let mut grown = prefix.clone();
                    grown.push(label);
                    let entry = next.entry(grown).or_insert(PrefixMass {
                        blank: neg,
                        label: neg,
                    });
                    entry.label = log_add(entry.label, mass.blank + p);
                } else {
                    let mut grown = prefix.clone();
                    grown.push(label);
                    let entry = next.entry(grown).or_insert(PrefixMass {
                        blank: neg,
                        label: neg,
                    });
                    entry.label = log_add(entry.label, mass.total() + p);
                }
            }
        }

        let mut ranked: Vec<(Vec<usize>, PrefixMass)> = next.into_iter().collect();
        ranked.sort_by(|a, b| {
            b.1.total()
                .partial_cmp(&a.1.total())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        ranked.truncate(beam_width);
        beam = ranked.into_iter().collect();
    }

    let (prefix, mass) = beam
        .iter()
        .max_by(|a, b| {
            a.1.total()
                .partial_cmp(&b.1.total())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| b.0.cmp(a.0)) // reversed: smallest prefix wins ties
        })
        .expect("beam never empties");
    (
        TokenSeq::new(prefix.clone()).expect("beam prefixes never contain blank"),
        mass.total(),
    )
}
