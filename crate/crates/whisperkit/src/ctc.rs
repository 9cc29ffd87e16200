//! CTC negative log-likelihood and its gradient, computed exactly by
//! forward-backward dynamic programming over the blank-extended label
//! sequence. All recursions stay in the log domain; whisper-length
//! utterances underflow probability-domain DP immediately.
//!
//! The gradient is taken with respect to pre-softmax logits with the row
//! normalization folded in (`∂L/∂a[t,k] = p[t,k] − γ[t,k]`), so a model can
//! backpropagate straight through its log-softmax output without re-deriving
//! the chain rule. Rows of the gradient therefore sum to zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{log_add, log_softmax_row, log_sum_exp};

/// Index of the CTC blank symbol. Always zero; usable tokens start at 1.
pub const BLANK_ID: usize = 0;

#[derive(Debug, Error)]
pub enum CtcError {
    #[error("vocabulary tokens must be distinct and non-empty (offender: {0:?})")]
    InvalidToken(String),
    #[error("vocabulary must contain at least one token")]
    EmptyVocabulary,
    #[error("character {ch:?} at position {pos} is not in the vocabulary")]
    UnknownChar { ch: char, pos: usize },
    #[error("token id {id} out of range 1..={vocab_size}")]
    TokenOutOfRange { id: usize, vocab_size: usize },
    #[error("emission matrix must have at least one frame")]
    EmptyEmissions,
    #[error("emission row {row} is not log-normalized (log-sum {log_sum:.3e})")]
    InvalidEmissions { row: usize, log_sum: f64 },
    #[error(
        "alignment infeasible: target needs at least {needed_frames} frames, \
         emissions have {num_frames}"
    )]
    InfeasibleTarget {
        needed_frames: usize,
        num_frames: usize,
    },
}

/// Ordered token inventory. Token ids are dense in `1..=len`; id 0 is the
/// blank and never appears in a transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self, CtcError> {
        if tokens.is_empty() {
            return Err(CtcError::EmptyVocabulary);
        }
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || tokens[..i].contains(t) {
                return Err(CtcError::InvalidToken(t.clone()));
            }
        }
        Ok(Self { tokens })
    }

    /// Build a character vocabulary from corpus text: the sorted set of
    /// distinct characters. Deterministic for a given corpus.
    pub fn from_corpus_text<'a>(texts: impl IntoIterator<Item = &'a str>) -> Result<Self, CtcError> {
        let mut chars: Vec<char> = texts
            .into_iter()
            .flat_map(|t| t.chars())
            .collect::<std::collections::BTreeSet<char>>()
            .into_iter()
            .collect();
        chars.sort_unstable();
        Self::new(chars.into_iter().map(String::from).collect())
    }

    /// Number of usable tokens (V). Emission rows have V + 1 entries.
    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token text for an id in `1..=V`.
    pub fn token(&self, id: usize) -> Option<&str> {
        (id >= 1)
            .then(|| self.tokens.get(id - 1).map(String::as_str))
            .flatten()
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token).map(|i| i + 1)
    }

    /// Map text to token ids, one per character.
    pub fn tokenize_chars(&self, text: &str) -> Result<TokenSeq, CtcError> {
        let mut ids = Vec::with_capacity(text.chars().count());
        for (pos, ch) in text.chars().enumerate() {
            let id = self
                .id_of(&ch.to_string())
                .ok_or(CtcError::UnknownChar { ch, pos })?;
            ids.push(id);
        }
        Ok(TokenSeq { ids })
    }

    /// Join a token sequence back into text.
    pub fn text_of(&self, seq: &TokenSeq) -> String {
        seq.ids
            .iter()
            .filter_map(|&id| self.token(id))
            .collect::<Vec<_>>()
            .join("")
    }
}

/// A blank-free sequence of token ids (each ≥ 1).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TokenSeq {
    ids: Vec<usize>,
}

impl TokenSeq {
    /// Wrap ids, rejecting the blank (id 0).
    pub fn new(ids: Vec<usize>) -> Result<Self, CtcError> {
        if let Some(&id) = ids.iter().find(|&&id| id == BLANK_ID) {
            return Err(CtcError::TokenOutOfRange { id, vocab_size: 0 });
        }
        Ok(Self { ids })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Frames required for any CTC alignment: one per label plus one blank
    /// between each adjacent equal pair.
    pub fn min_alignment_frames(&self) -> usize {
        let repeats = self.ids.windows(2).filter(|w| w[0] == w[1]).count();
        self.ids.len() + repeats
    }
}

impl From<TokenSeq> for Vec<usize> {
    fn from(seq: TokenSeq) -> Self {
        seq.ids
    }
}

/// The CTC many-to-one path mapping: merge adjacent repeats, delete blanks.
pub fn collapse(path: &[usize]) -> TokenSeq {
    let mut ids = Vec::new();
    let mut prev = None;
    for &p in path {
        if Some(p) != prev && p != BLANK_ID {
            ids.push(p);
        }
        prev = Some(p);
    }
    TokenSeq { ids }
}

/// T × (V+1) per-frame log-probabilities. Every row log-sum-exps to zero
/// (within 1e-6); construction enforces it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    logprobs: Vec<f64>, // row-major
    num_frames: usize,
    num_labels: usize, // V + 1 including blank
}

impl EmissionMatrix {
    /// Wrap already-normalized log-probabilities.
    pub fn from_logprobs(
        logprobs: Vec<f64>,
        num_frames: usize,
        num_labels: usize,
    ) -> Result<Self, CtcError> {
        assert_eq!(logprobs.len(), num_frames * num_labels, "shape mismatch");
        if num_frames == 0 || num_labels == 0 {
            return Err(CtcError::EmptyEmissions);
        }
        for (t, row) in logprobs.chunks_exact(num_labels).enumerate() {
            let z = log_sum_exp(row);
            if z.abs() > 1e-6 {
                return Err(CtcError::InvalidEmissions { row: t, log_sum: z });
            }
        }
        Ok(Self {
            logprobs,
            num_frames,
            num_labels,
        })
    }

    /// Normalize arbitrary logits row-wise (log-softmax) and wrap.
    pub fn from_logits(
        mut logits: Vec<f64>,
        num_frames: usize,
        num_labels: usize,
    ) -> Result<Self, CtcError> {
        assert_eq!(logits.len(), num_frames * num_labels, "shape mismatch");
        if num_frames == 0 || num_labels == 0 {
            return Err(CtcError::EmptyEmissions);
        }
        for row in logits.chunks_exact_mut(num_labels) {
            log_softmax_row(row);
        }
        Ok(Self {
            logprobs: logits,
            num_frames,
            num_labels,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    /// V + 1: vocabulary size plus the blank.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Vocabulary size V (labels minus the blank).
    pub fn vocab_size(&self) -> usize {
        self.num_labels - 1
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.logprobs[t * self.num_labels..(t + 1) * self.num_labels]
    }

    pub fn get(&self, t: usize, label: usize) -> f64 {
        self.logprobs[t * self.num_labels + label]
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }
}

/// Loss value and its gradient with respect to pre-softmax logits
/// (row-major T × (V+1), rows sum to zero).
#[derive(Debug, Clone)]
pub struct CtcLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Exact CTC negative log-likelihood of `target` under `em`, plus gradient.
///
/// The loss is `−ln Σ_{paths π: collapse(π) = target} Π_t p_t(π_t)`.
/// Infeasible targets (more labels than frames can carry) are a distinct
/// error rather than an infinite loss: silent infinities would poison
/// optimizer moments downstream.
pub fn ctc_loss(em: &EmissionMatrix, target: &TokenSeq) -> Result<CtcLoss, CtcError> {
    let t_len = em.num_frames();
    let vocab_size = em.vocab_size();
    for &id in target.ids() {
        if id == BLANK_ID || id > vocab_size {
            return Err(CtcError::TokenOutOfRange { id, vocab_size });
        }
    }
    let needed = target.min_alignment_frames();
    if t_len < needed {
        return Err(CtcError::InfeasibleTarget {
            needed_frames: needed,
            num_frames: t_len,
        });
    }

    // Extended label sequence: blank, l1, blank, l2, ..., blank.
    let labels = target.ids();
    let s_len = 2 * labels.len() + 1;
    let ext = |s: usize| -> usize {
        if s.is_multiple_of(2) {
            BLANK_ID
        } else {
            labels[s / 2]
        }
    };
    // A skip transition s−2 → s is allowed when the extended label at s is a
    // real token different from the one at s−2.
    let can_skip = |s: usize| s >= 2 && s % 2 == 1 && (s == 1 || labels[s / 2] != labels[s / 2 - 1]);

    let neg = f64::NEG_INFINITY;
    let at = |t: usize, s: usize| t * s_len + s;

    // Forward: alpha[t][s] = log-prob of emitting the first t+1 frames and
    // sitting at extended state s (emission at t included).
    let mut alpha = vec![neg; t_len * s_len];
    alpha[at(0, 0)] = em.get(0, BLANK_ID);
    if s_len > 1 {
        alpha[at(0, 1)] = em.get(0, ext(1));
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut a = alpha[at(t - 1, s)];
            if s >= 1 {
                a = log_add(a, alpha[at(t - 1, s - 1)]);
            }
            if can_skip(s) {
                a = log_add(a, alpha[at(t - 1, s - 2)]);
            }
            if a != neg {
                alpha[at(t, s)] = a + em.get(t, ext(s));
            }
        }
    }
    let log_p = log_add(
        alpha[at(t_len - 1, s_len - 1)],
        if s_len >= 2 {
            alpha[at(t_len - 1, s_len - 2)]
        } else {
            neg
        },
    );
    // Feasible targets always have at least one valid path.
    debug_assert!(log_p != neg, "no valid alignment for a feasible target");

    // Backward: beta[t][s] = log-prob of completing the path from state s
    // after frame t (emission at t excluded).
    let mut beta = vec![neg; t_len * s_len];
    beta[at(t_len - 1, s_len - 1)] = 0.0;
    if s_len >= 2 {
        beta[at(t_len - 1, s_len - 2)] = 0.0;
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut b = beta[at(t + 1, s)] + em.get(t + 1, ext(s));
            if s + 1 < s_len {
                b = log_add(b, beta[at(t + 1, s + 1)] + em.get(t + 1, ext(s + 1)));
            }
            if s + 2 < s_len && can_skip(s + 2) {
                b = log_add(b, beta[at(t + 1, s + 2)] + em.get(t + 1, ext(s + 2)));
            }
            beta[at(t, s)] = b;
        }
    }

    // grad[t][k] = p[t][k] − Σ_{s: ext(s)=k} exp(alpha + beta − log_p)
    let num_labels = em.num_labels();
    let mut grad = vec![0.0; t_len * num_labels];
    let mut occupancy = vec![neg; num_labels];
    for t in 0..t_len {
        occupancy.iter_mut().for_each(|o| *o = neg);
        for s in 0..s_len {
            let ab = alpha[at(t, s)] + beta[at(t, s)];
            let k = ext(s);
            occupancy[k] = log_add(occupancy[k], ab);
        }
        for k in 0..num_labels {
            let gamma = if occupancy[k] == neg {
                0.0
            } else {
                (occupancy[k] - log_p).exp()
            };
            grad[t * num_labels + k] = em.get(t, k).exp() - gamma;
        }
    }

    Ok(CtcLoss { loss: -log_p, grad })
}
