//! Baker–Campbell–Hausdorff product through degree [`MAX_STEP`].
//!
//! `log(exp(X) exp(Y))` is expanded in the free associative algebra on two
//! letters, truncated at degree 6. Its degree-`k` part is a Lie polynomial,
//! so by the Dynkin–Specht–Wever lemma it equals `(1/k) Σ_w c_w [w]` where
//! `[w]` is the right-nested bracket `[a_1, [a_2, … [a_{k-1}, a_k]]]` of the
//! word `w` and `c_w` its Goldberg coefficient. On a step-`s` algebra every
//! bracket word longer than `s` vanishes, so the sum is exact.

use std::sync::OnceLock;

use crate::algebra::{StratifiedAlgebra, MAX_STEP};

/// Word id: `(1 << len) | bits`, letter `p` of the word is bit `p`
/// (0 = X, 1 = Y).
const WORDS: usize = 1 << (MAX_STEP + 1);

fn word_len(id: usize) -> usize {
    (usize::BITS - 1 - id.leading_zeros()) as usize
}

fn concat(a: usize, b: usize) -> Option<usize> {
    let (la, lb) = (word_len(a), word_len(b));
    if la + lb > MAX_STEP {
        return None;
    }
    let bits = (a ^ (1 << la)) | ((b ^ (1 << lb)) << la);
    Some((1 << (la + lb)) | bits)
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; WORDS];
    for (i, &ca) in a.iter().enumerate() {
        if ca == 0.0 {
            continue;
        }
        for (j, &cb) in b.iter().enumerate() {
            if cb == 0.0 {
                continue;
            }
            if let Some(w) = concat(i, j) {
                out[w] += ca * cb;
            }
        }
    }
    out
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Goldberg coefficients of `log(exp X exp Y)`, indexed by word id.
pub fn goldberg_coefficients() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // exp(X) exp(Y) - 1 = Σ_{p+q>=1} X^p Y^q / (p! q!)
        let mut z = vec![0.0; WORDS];
        for p in 0..=MAX_STEP {
            for q in 0..=(MAX_STEP - p) {
                if p + q == 0 {
                    continue;
                }
                let bits = ((1usize << q) - 1) << p;
                z[(1 << (p + q)) | bits] = 1.0 / (factorial(p) * factorial(q));
            }
        }
        let mut log = vec![0.0; WORDS];
        let mut power = z.clone();
        for m in 1..=MAX_STEP {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            for (l, p) in log.iter_mut().zip(&power) {
                *l += sign * p / m as f64;
            }
            power = mul(&power, &z);
        }
        log
    })
}

/// Words with a nonzero BCH weight `c_w / |w|`, ascending by length.
fn weighted_words() -> &'static [(usize, f64)] {
    static WORDS_W: OnceLock<Vec<(usize, f64)>> = OnceLock::new();
    WORDS_W.get_or_init(|| {
        let c = goldberg_coefficients();
        (2..WORDS)
            .filter(|&id| c[id].abs() > 1e-15)
            .map(|id| (id, c[id] / word_len(id) as f64))
            .collect()
    })
}

/// Exponential coordinates of `exp(x) exp(y)`.
pub fn bch(algebra: &StratifiedAlgebra, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = algebra.dim();
    let s = algebra.step();
    let limit = 1usize << (s + 1);
    // Right-nested values of every word up to length s, built from suffixes:
    // [a w] = [a, [w]], and the suffix of id is (id >> 1) with its length bit.
    let mut nested: Vec<Option<Vec<f64>>> = vec![None; limit];
    nested[2] = Some(x.to_vec());
    nested[3] = Some(y.to_vec());
    for id in 4..limit {
        let len = word_len(id);
        let bits = id ^ (1 << len);
        let first = if bits & 1 == 0 { x } else { y };
        let suffix = (1 << (len - 1)) | (bits >> 1);
        let v = algebra.bracket_slices(first, nested[suffix].as_ref().expect("suffix first"));
        nested[id] = Some(v);
    }
    let mut out = vec![0.0; n];
    for &(id, w) in weighted_words() {
        if id >= limit {
            break;
        }
        let v = nested[id].as_ref().expect("computed");
        for (o, vi) in out.iter_mut().zip(v) {
            *o += w * vi;
        }
    }
    out
}
