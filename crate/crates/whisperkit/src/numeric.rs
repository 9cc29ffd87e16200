//! Small shared numeric helpers (log-domain arithmetic, stable hashing).

/// log(exp(a) + exp(b)) without leaving the log domain.
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// log Σ exp(xs) over a slice.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// In-place log-softmax of one row.
pub(crate) fn log_softmax_row(row: &mut [f64]) {
    let z = log_sum_exp(row);
    for x in row.iter_mut() {
        *x -= z;
    }
}

/// FNV-1a over arbitrary bytes. Stable across builds, used to derive
/// per-utterance RNG streams from (seed, epoch, id) without depending on
/// std's unspecified default hasher.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
