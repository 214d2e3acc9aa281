//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use carnot_lab::{AlgebraVector, CarnotGroup, GroupElement, StratifiedAlgebra};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn groups() -> Vec<CarnotGroup> {
    StratifiedAlgebra::builtin_names()
        .iter()
        .map(|n| CarnotGroup::new(StratifiedAlgebra::builtin(n).unwrap()))
        .collect()
}

pub fn random_point(rng: &mut impl Rng, n: usize, radius: f64) -> GroupElement {
    GroupElement((0..n).map(|_| rng.random_range(-radius..radius)).collect())
}

/// `ad_x` built column by column from single brackets.
pub fn ad(algebra: &StratifiedAlgebra, x: &[f64]) -> DMatrix<f64> {
    let n = algebra.dim();
    let xv = AlgebraVector(x.to_vec());
    DMatrix::from_fn(n, n, |i, j| {
        algebra.bracket(&xv, &AlgebraVector::basis(n, j)).unwrap().0[i]
    })
}

/// `exp` of a nilpotent matrix by its finite series.
pub fn nilpotent_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=n {
        term = &term * m / k as f64;
        out += &term;
    }
    out
}

/// `log(e^x e^y) = x + ∫_0^1 ψ(e^{ad x} e^{t ad y}) y dt` with
/// `ψ(z) = z log z / (z - 1) = 1 + Σ_{k≥1} (-1)^{k+1} (z-1)^k / (k(k+1))`,
/// the integral by composite Simpson. The integrand is a polynomial in `t`.
pub fn integral_bch(algebra: &StratifiedAlgebra, x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = algebra.dim();
    let ex = nilpotent_exp(&ad(algebra, x));
    let ady = ad(algebra, y);
    let yv = DVector::from_column_slice(y);
    let integrand = |t: f64| -> DVector<f64> {
        let w = &ex * nilpotent_exp(&(&ady * t)) - DMatrix::identity(n, n);
        let mut psi = DMatrix::identity(n, n);
        let mut power = DMatrix::identity(n, n);
        for k in 1..=n {
            power = &power * &w;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            psi += &power * (sign / (k * (k + 1)) as f64);
        }
        psi * &yv
    };
    let intervals = 400;
    let h = 1.0 / intervals as f64;
    let mut acc = integrand(0.0) + integrand(1.0);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += integrand(i as f64 * h) * w;
    }
    let integral = acc * (h / 3.0);
    (0..n).map(|i| x[i] + integral[i]).collect()
}

/// Max abs difference of two slices.
pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
