//! Desk-scale frame-classification acoustic model: each emission row is
//! produced from a window of feature frames (the frame plus `context_radius`
//! neighbors on each side, edge-padded by repetition) pushed through
//! affine → tanh → affine → log-softmax.
//!
//! The model is deliberately small — a stand-in for a fine-tuned
//! self-supervised encoder at a scale where exact reverse-mode gradients
//! stay simple enough to verify against finite differences.

use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ctc::{CtcError, EmissionMatrix, Vocabulary};
use crate::features::FeatureMatrix;
use crate::numeric::log_softmax_row;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature dim {got} does not match model input dim {expected}")]
    FeatureDimMismatch { got: usize, expected: usize },
    #[error("gradient shape does not match emissions: got {got}, expected {expected}")]
    GradShapeMismatch { got: usize, expected: usize },
    #[error("model config invalid: {0}")]
    InvalidConfig(String),
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not a valid checkpoint: {detail}")]
    MalformedCheckpoint { path: PathBuf, detail: String },
    #[error(transparent)]
    Vocabulary(#[from] CtcError),
}

/// Architecture hyperparameters plus the initialization seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Per-frame feature dimension D.
    pub feat_dim: usize,
    /// Frames of context on each side (receptive field 2c+1 frames).
    pub context_radius: usize,
    /// Hidden layer width.
    pub hidden: usize,
    /// Vocabulary size V; emissions get V+1 labels including the blank.
    pub vocab_size: usize,
    pub seed: u64,
}

/// Dense parameters (and, reused shape-wise, gradients and moments).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// H × (D·(2c+1)), row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// (V+1) × H, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub config: ModelConfig,
}

impl ModelParams {
    /// Seeded initialization: uniform in ±1/√fan_in per layer.
    pub fn init(config: &ModelConfig) -> Result<Self, ModelError> {
        if config.feat_dim == 0 || config.hidden == 0 || config.vocab_size == 0 {
            return Err(ModelError::InvalidConfig(
                "feat_dim, hidden, and vocab_size must be positive".into(),
            ));
        }
        let input_dim = config.input_dim();
        let out_dim = config.vocab_size + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut uniform = |n: usize, fan_in: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * bound)
                .collect()
        };
        Ok(Self {
            w1: uniform(config.hidden * input_dim, input_dim),
            b1: uniform(config.hidden, input_dim),
            w2: uniform(out_dim * config.hidden, config.hidden),
            b2: uniform(out_dim, config.hidden),
            config: config.clone(),
        })
    }

    /// Same shapes, all zeros. Gradient and moment accumulators start here.
    pub fn zeros_like(&self) -> Self {
        Self {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
            config: self.config.clone(),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Visit all tensors in a fixed order (w1, b1, w2, b2).
    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// Elementwise accumulate `other` scaled by `scale`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .into_iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl ModelConfig {
    /// Stacked input width: D · (2c + 1).
    pub fn input_dim(&self) -> usize {
        self.feat_dim * (2 * self.context_radius + 1)
    }
}

/// Stack frames t−c..t+c (edge-padded by repetition) into one input vector.
fn stacked_input(feat: &FeatureMatrix, t: usize, c: usize, out: &mut [f64]) {
    let d = feat.dim();
    let last = feat.num_frames() - 1;
    for (w, chunk) in out.chunks_exact_mut(d).enumerate() {
        let src = (t + w).saturating_sub(c).min(last);
        chunk.copy_from_slice(feat.row(src));
    }
}

fn forward_frame(
    params: &ModelParams,
    input: &[f64],
    hidden: &mut [f64],
    logits: &mut [f64],
) {
    let in_dim = input.len();
    for (h, hv) in hidden.iter_mut().enumerate() {
        let row = &params.w1[h * in_dim..(h + 1) * in_dim];
        let mut a = params.b1[h];
        for (w, x) in row.iter().zip(input) {
            a += w * x;
        }
        *hv = a.tanh();
    }
    let h_dim = hidden.len();
    for (k, lv) in logits.iter_mut().enumerate() {
        let row = &params.w2[k * h_dim..(k + 1) * h_dim];
        let mut a = params.b2[k];
        for (w, h) in row.iter().zip(hidden.iter()) {
            a += w * h;
        }
        *lv = a;
    }
}

/// Frame-wise forward pass producing a valid emission matrix (each row a
/// log-distribution over V+1 labels).
pub fn forward(params: &ModelParams, feat: &FeatureMatrix) -> Result<EmissionMatrix, ModelError> {
    if feat.dim() != params.config.feat_dim {
        return Err(ModelError::FeatureDimMismatch {
            got: feat.dim(),
            expected: params.config.feat_dim,
        });
    }
    let t_len = feat.num_frames();
    let out_dim = params.config.vocab_size + 1;
    let c = params.config.context_radius;
    let mut input = vec![0.0; params.config.input_dim()];
    let mut hidden = vec![0.0; params.config.hidden];
    let mut logits = vec![0.0; t_len * out_dim];
    for t in 0..t_len {
        stacked_input(feat, t, c, &mut input);
        let row = &mut logits[t * out_dim..(t + 1) * out_dim];
        forward_frame(params, &input, &mut hidden, row);
        log_softmax_row(row);
    }
    Ok(EmissionMatrix::from_logprobs(logits, t_len, out_dim)
        .expect("log-softmax rows are normalized by construction"))
}

/// Exact reverse-mode gradients of the loss with respect to all parameters,
/// given `grad_em` = ∂loss/∂logits from [`crate::ctc::ctc_loss`]
/// (row-major T × (V+1)).
pub fn backward(
    params: &ModelParams,
    feat: &FeatureMatrix,
    grad_em: &[f64],
) -> Result<ModelParams, ModelError> {
    if feat.dim() != params.config.feat_dim {
        return Err(ModelError::FeatureDimMismatch {
            got: feat.dim(),
            expected: params.config.feat_dim,
        });
    }
    let t_len = feat.num_frames();
    let out_dim = params.config.vocab_size + 1;
    if grad_em.len() != t_len * out_dim {
        return Err(ModelError::GradShapeMismatch {
            got: grad_em.len(),
            expected: t_len * out_dim,
        });
    }

    let c = params.config.context_radius;
    let in_dim = params.config.input_dim();
    let h_dim = params.config.hidden;
    let mut grads = params.zeros_like();
    let mut input = vec![0.0; in_dim];
    let mut hidden = vec![0.0; h_dim];
    let mut logits = vec![0.0; out_dim];
    let mut grad_h = vec![0.0; h_dim];

    for t in 0..t_len {
        stacked_input(feat, t, c, &mut input);
        forward_frame(params, &input, &mut hidden, &mut logits);
        let g_out = &grad_em[t * out_dim..(t + 1) * out_dim];

        // output layer: gW2[k,h] += g_k · h_h ; gb2 += g ; grad_h = W2ᵀ g
        grad_h.iter_mut().for_each(|g| *g = 0.0);
        for (k, &g) in g_out.iter().enumerate() {
            grads.b2[k] += g;
            let w_row = &params.w2[k * h_dim..(k + 1) * h_dim];
            let gw_row = &mut grads.w2[k * h_dim..(k + 1) * h_dim];
            for h in 0..h_dim {
                gw_row[h] += g * hidden[h];
                grad_h[h] += g * w_row[h];
            }
        }
        // through tanh: ga = grad_h · (1 − h²), then gW1[h,i] += ga · x_i
        for h in 0..h_dim {
            let ga = grad_h[h] * (1.0 - hidden[h] * hidden[h]);
            grads.b1[h] += ga;
            let gw_row = &mut grads.w1[h * in_dim..(h + 1) * in_dim];
            for (gw, x) in gw_row.iter_mut().zip(&input) {
                *gw += ga * x;
            }
        }
    }
    Ok(grads)
}

// ── Checkpoints ─────────────────────────────────────────────────────────────

const CHECKPOINT_MAGIC: &[u8; 4] = b"WKCK";
const CHECKPOINT_VERSION: u32 = 1;

/// Write parameters and the vocabulary to `path` atomically
/// (temp file + rename). Header: magic, version, D, c, H, V, seed; then the
/// vocabulary tokens (length-prefixed UTF-8), then w1/b1/w2/b2 as row-major
/// little-endian f32.
pub fn write_checkpoint(
    path: impl AsRef<Path>,
    params: &ModelParams,
    vocab: &Vocabulary,
) -> Result<(), ModelError> {
    let path = path.as_ref();
    let io_err = |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("ckpt.tmp");
    {
        let f = std::fs::File::create(&tmp).map_err(io_err)?;
        let mut w = BufWriter::new(f);
        let cfg = &params.config;
        w.write_all(CHECKPOINT_MAGIC).map_err(io_err)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io_err)?;
        for v in [
            cfg.feat_dim as u32,
            cfg.context_radius as u32,
            cfg.hidden as u32,
            cfg.vocab_size as u32,
        ] {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
        w.write_all(&cfg.seed.to_le_bytes()).map_err(io_err)?;
        for token in vocab.tokens() {
            let bytes = token.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(io_err)?;
            w.write_all(bytes).map_err(io_err)?;
        }
        for tensor in params.tensors() {
            for &v in tensor {
                w.write_all(&(v as f32).to_le_bytes()).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)?;
    }
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

/// Read a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, Vocabulary), ModelError> {
    let path = path.as_ref();
    let io_err = |source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bad = |detail: &str| ModelError::MalformedCheckpoint {
        path: path.to_path_buf(),
        detail: detail.into(),
    };
    let mut f = std::fs::File::open(path).map_err(io_err)?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() < 32 || &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    if u32_at(4) != CHECKPOINT_VERSION as usize {
        return Err(bad("unsupported version"));
    }
    let (feat_dim, context_radius, hidden, vocab_size) =
        (u32_at(8), u32_at(12), u32_at(16), u32_at(20));
    let seed = u64::from_le_bytes(bytes[24..32].try_into().unwrap());

    let mut off = 32usize;
    let mut tokens = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        if off + 4 > bytes.len() {
            return Err(bad("truncated vocabulary"));
        }
        let len = u32_at(off);
        off += 4;
        if off + len > bytes.len() {
            return Err(bad("truncated vocabulary token"));
        }
        let token = std::str::from_utf8(&bytes[off..off + len])
            .map_err(|_| bad("vocabulary token not UTF-8"))?
            .to_string();
        tokens.push(token);
        off += len;
    }
    let vocab = Vocabulary::new(tokens)?;

    let config = ModelConfig {
        feat_dim,
        context_radius,
        hidden,
        vocab_size,
        seed,
    };
    let out_dim = vocab_size + 1;
    let sizes = [
        hidden * config.input_dim(),
        hidden,
        out_dim * hidden,
        out_dim,
    ];
    let expected: usize = sizes.iter().sum::<usize>() * 4;
    if bytes.len() - off != expected {
        return Err(bad("tensor payload size does not match header"));
    }
    let mut read_tensor = |n: usize| -> Vec<f64> {
        let t = bytes[off..off + n * 4]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        off += n * 4;
        t
    };
    let w1 = read_tensor(sizes[0]);
    let b1 = read_tensor(sizes[1]);
    let w2 = read_tensor(sizes[2]);
    let b2 = read_tensor(sizes[3]);
    Ok((
        ModelParams {
            w1,
            b1,
            w2,
            b2,
            config,
        },
        vocab,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctc::{ctc_loss, TokenSeq};
    use crate::features::FeatureKind;

    fn feat_from(data: Vec<f64>, t: usize, d: usize) -> FeatureMatrix {
        FeatureMatrix::from_rows(data, t, d, 100.0, FeatureKind::LogMel)
    }

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            feat_dim: 2,
            context_radius: 1,
            hidden: 3,
            vocab_size: 2,
            seed: 7,
        }
    }

    #[test]
    fn zero_parameters_give_uniform_rows() {
        let cfg = ModelConfig {
            feat_dim: 4,
            context_radius: 2,
            hidden: 5,
            vocab_size: 3,
            seed: 0,
        };
        let zero = ModelParams::init(&cfg).unwrap().zeros_like();
        let feat = feat_from(vec![0.3; 6 * 4], 6, 4);
        let em = forward(&zero, &feat).unwrap();
        let want = -(4f64).ln(); // V+1 = 4
        for t in 0..6 {
            for k in 0..4 {
                assert!((em.get(t, k) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn emission_rows_are_log_normalized() {
        let params = ModelParams::init(&tiny_config()).unwrap();
        let feat = feat_from((0..10 * 2).map(|i| (i as f64).sin()).collect(), 10, 2);
        let em = forward(&params, &feat).unwrap();
        for t in 0..em.num_frames() {
            let z: f64 = em.row(t).iter().map(|v| v.exp()).sum();
            assert!((z - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn scalar_forward_matches_hand_computation() {
        // c=0, D=1, H=1, V=1: everything is scalar arithmetic
        let cfg = ModelConfig {
            feat_dim: 1,
            context_radius: 0,
            hidden: 1,
            vocab_size: 1,
            seed: 0,
        };
        let mut params = ModelParams::init(&cfg).unwrap().zeros_like();
        params.w1 = vec![2.0];
        params.b1 = vec![0.5];
        params.w2 = vec![1.0, -1.0]; // rows: blank, token
        params.b2 = vec![0.1, -0.2];

        let xs = [0.0, 0.4, -0.9];
        let feat = feat_from(xs.to_vec(), 3, 1);
        let em = forward(&params, &feat).unwrap();
        for (t, &x) in xs.iter().enumerate() {
            let h = (2.0 * x + 0.5).tanh();
            let l0 = h + 0.1;
            let l1 = -h - 0.2;
            let z = (l0.exp() + l1.exp()).ln();
            assert!((em.get(t, 0) - (l0 - z)).abs() < 1e-12);
            assert!((em.get(t, 1) - (l1 - z)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_parameter_gradients() {
        let params = ModelParams::init(&tiny_config()).unwrap();
        let feat = feat_from(vec![0.2; 5 * 2], 5, 2);
        let grads = backward(&params, &feat, &[0.0; 5 * 3]).unwrap();
        assert!(grads.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        let cfg = tiny_config(); // D=2, H=3, V=2, c=1
        let params = ModelParams::init(&cfg).unwrap();
        let feat = feat_from(
            (0..4 * 2).map(|i| ((i * 13) % 7) as f64 / 7.0 - 0.4).collect(),
            4,
            2,
        );
        let target = TokenSeq::new(vec![1, 2]).unwrap();

        let loss_of = |p: &ModelParams| -> f64 {
            ctc_loss(&forward(p, &feat).unwrap(), &target).unwrap().loss
        };
        let em = forward(&params, &feat).unwrap();
        let out = ctc_loss(&em, &target).unwrap();
        let analytic = backward(&params, &feat, &out.grad).unwrap();

        let h = 1e-5;
        let tensors = ["w1", "b1", "w2", "b2"];
        #[allow(clippy::needless_range_loop)] // ti indexes params and grads alike
        for ti in 0..4 {
            let n = analytic.tensors()[ti].len();
            for i in 0..n {
                let mut up = params.clone();
                up.tensors_mut()[ti][i] += h;
                let mut dn = params.clone();
                dn.tensors_mut()[ti][i] -= h;
                let fd = (loss_of(&up) - loss_of(&dn)) / (2.0 * h);
                let an = analytic.tensors()[ti][i];
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
                assert!(rel < 1e-4, "{}[{i}]: fd={fd} analytic={an}", tensors[ti]);
            }
        }
    }

    #[test]
    fn summed_gradients_are_additive() {
        let params = ModelParams::init(&tiny_config()).unwrap();
        let feat = feat_from(vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.5], 3, 2);
        let target = TokenSeq::new(vec![1]).unwrap();
        let em = forward(&params, &feat).unwrap();
        let g = ctc_loss(&em, &target).unwrap().grad;
        let single = backward(&params, &feat, &g).unwrap();

        // the same utterance twice in a batch: summed gradient doubles
        let mut batch = params.zeros_like();
        batch.add_scaled(&single, 1.0);
        batch.add_scaled(&single, 1.0);
        for (b, s) in batch.tensors().into_iter().zip(single.tensors()) {
            for (x, y) in b.iter().zip(s) {
                assert!((x - 2.0 * y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn context_free_model_is_permutation_equivariant() {
        let cfg = ModelConfig {
            context_radius: 0,
            ..tiny_config()
        };
        let params = ModelParams::init(&cfg).unwrap();
        let rows: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64 * 0.2, -(t as f64)]).collect();
        let feat = feat_from(rows.concat(), 5, 2);
        let perm = [3usize, 0, 4, 1, 2];
        let permuted: Vec<f64> = perm.iter().flat_map(|&t| rows[t].clone()).collect();
        let feat_p = feat_from(permuted, 5, 2);

        let em = forward(&params, &feat).unwrap();
        let em_p = forward(&params, &feat_p).unwrap();
        for (out_t, &src_t) in perm.iter().enumerate() {
            assert_eq!(em_p.row(out_t), em.row(src_t));
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let params = ModelParams::init(&tiny_config()).unwrap();
        let feat = feat_from(vec![0.0; 5 * 3], 5, 3);
        assert!(matches!(
            forward(&params, &feat),
            Err(ModelError::FeatureDimMismatch { got: 3, expected: 2 })
        ));
        let feat_ok = feat_from(vec![0.0; 5 * 2], 5, 2);
        assert!(matches!(
            backward(&params, &feat_ok, &[0.0; 7]),
            Err(ModelError::GradShapeMismatch { got: 7, expected: 15 })
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let params = ModelParams::init(&tiny_config()).unwrap();
        let vocab = Vocabulary::new(vec!["a".into(), "b".into()]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        write_checkpoint(&path, &params, &vocab).unwrap();

        // atomic write leaves no temp file behind
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.path() != path)
            .collect();
        assert!(leftovers.is_empty());

        let (back, vocab_back) = read_checkpoint(&path).unwrap();
        assert_eq!(back.config, params.config);
        assert_eq!(vocab_back, vocab);
        for (a, b) in params.tensors().into_iter().zip(back.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn malformed_checkpoints_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.ckpt");
        std::fs::write(&p, b"nope").unwrap();
        assert!(matches!(
            read_checkpoint(&p),
            Err(ModelError::MalformedCheckpoint { .. })
        ));
        assert!(matches!(
            read_checkpoint(dir.path().join("absent.ckpt")),
            Err(ModelError::Io { .. })
        ));
    }
}
