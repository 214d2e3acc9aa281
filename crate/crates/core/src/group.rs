//! The Carnot group of a stratified algebra in exponential coordinates of the
//! first kind: `g = exp(Σ g_i X_i)`.
//!
//! In these coordinates the identity is the origin, inversion is negation and
//! dilations are diagonal. Everything that depends on `log g` is a polynomial
//! in `ad_g`, truncated at order `s - 1` because `ad_g` is nilpotent.

use nalgebra::{DMatrix, DVector};

use crate::algebra::{AlgebraVector, StratifiedAlgebra};
use crate::bch;
use crate::error::{check_dim, Result};

/// A point of the group, by its exponential coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement(pub Vec<f64>);

impl GroupElement {
    pub fn identity(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// `exp(v)`; a no-op on the coordinates.
    pub fn exp(v: &AlgebraVector) -> Self {
        Self(v.0.clone())
    }

    pub fn log(&self) -> AlgebraVector {
        AlgebraVector(self.0.clone())
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |acc, (a, b)| f64::max(acc, (a - b).abs()))
    }
}

impl From<Vec<f64>> for GroupElement {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// A right-invariant co-vector, stored through its values `λ(X_i)` at the
/// identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Covector(pub Vec<f64>);

impl Covector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `N(λ) = Σ |λ(X_i)|`.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    pub fn apply(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|x| alpha * x).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }
}

impl From<Vec<f64>> for Covector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Coefficients of `z / (1 - e^{-z})`, the series giving the left-translation
/// differential in exponential coordinates.
const LEFT_JACOBIAN_SERIES: [f64; 6] = [1.0, 0.5, 1.0 / 12.0, 0.0, -1.0 / 720.0, 0.0];

#[derive(Debug, Clone)]
pub struct CarnotGroup {
    algebra: StratifiedAlgebra,
}

impl CarnotGroup {
    pub fn new(algebra: StratifiedAlgebra) -> Self {
        Self { algebra }
    }

    pub fn algebra(&self) -> &StratifiedAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn step(&self) -> usize {
        self.algebra.step()
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::identity(self.dim())
    }

    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        check_dim(self.dim(), g.dim())?;
        check_dim(self.dim(), h.dim())?;
        Ok(GroupElement(bch::bch(&self.algebra, &g.0, &h.0)))
    }

    /// `δ_τ`: coordinate `i` scales by `τ^{d_i}`.
    pub fn dilate(&self, tau: f64, g: &GroupElement) -> GroupElement {
        GroupElement(
            g.0.iter()
                .zip(self.algebra.degrees())
                .map(|(x, &d)| x * tau.powi(d as i32))
                .collect(),
        )
    }

    /// Matrix of the differential of `δ_τ`, i.e. `diag(τ^{d_i})`.
    pub fn dilation_differential(&self, tau: f64) -> DMatrix<f64> {
        let d = DVector::from_iterator(self.dim(), self.algebra.degrees().iter().map(|&d| tau.powi(d as i32)));
        DMatrix::from_diagonal(&d)
    }

    /// `Σ_{k<s} coeffs[k] ad_x^k` as a matrix.
    fn ad_series(&self, x: &[f64], coeffs: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let ad = self.algebra.ad_matrix(x);
        let mut power = DMatrix::identity(n, n);
        let mut out = DMatrix::zeros(n, n);
        for &c in coeffs.iter().take(self.step()) {
            if c != 0.0 {
                out += &power * c;
            }
            power = &ad * power;
        }
        out
    }

    /// `Σ_{k<s} coeffs[k] ad_x^k v`, without forming matrices.
    fn ad_series_apply(&self, x: &[f64], coeffs: &[f64], v: &[f64]) -> Vec<f64> {
        let mut term = v.to_vec();
        let mut next = vec![0.0; v.len()];
        let mut out: Vec<f64> = v.iter().map(|t| coeffs[0] * t).collect();
        for &c in coeffs.iter().take(self.step()).skip(1) {
            self.algebra.bracket_into(x, &term, &mut next);
            std::mem::swap(&mut term, &mut next);
            if c != 0.0 {
                out.iter_mut().zip(&term).for_each(|(o, t)| *o += c * t);
            }
        }
        out
    }

    /// `Ad_g = exp(ad_{log g})`.
    pub fn adjoint(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), g.dim())?;
        Ok(self.ad_series(&g.0, &exp_series()))
    }

    /// `λ ∘ Ad_g`, as the vector of its values on the basis.
    pub fn coadjoint(&self, g: &GroupElement, lambda: &Covector) -> Result<Covector> {
        check_dim(self.dim(), g.dim())?;
        check_dim(self.dim(), lambda.dim())?;
        Ok(Covector(self.coadjoint_slices(&g.0, &lambda.0)))
    }

    /// Components `(λ ∘ Ad_g)(X_j)` computed by the transposed series
    /// `Σ (ad_x^T)^k λ / k!`.
    pub(crate) fn coadjoint_slices(&self, x: &[f64], lambda: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut term = lambda.to_vec();
        let mut out = lambda.to_vec();
        let mut next = vec![0.0; n];
        for k in 1..self.step() {
            next.iter_mut().for_each(|v| *v = 0.0);
            for t in self.algebra.terms() {
                next[t.j] += term[t.k] * x[t.i] * t.c;
            }
            let inv = 1.0 / k as f64;
            for (tm, nx) in term.iter_mut().zip(&next) {
                *tm = nx * inv;
            }
            out.iter_mut().zip(&term).for_each(|(o, t)| *o += t);
        }
        out
    }

    /// Differential at the identity of `h ↦ g·h`, in exponential coordinates.
    pub fn left_jacobian(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), g.dim())?;
        Ok(self.ad_series(&g.0, &LEFT_JACOBIAN_SERIES))
    }

    pub(crate) fn left_jacobian_apply(&self, g: &[f64], v: &[f64]) -> Vec<f64> {
        self.ad_series_apply(g, &LEFT_JACOBIAN_SERIES, v)
    }

    /// Differential at the identity of `h ↦ h·g`, obtained as
    /// `left_jacobian(g) · Ad_{g^{-1}}`.
    pub fn right_jacobian(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        Ok(self.left_jacobian(g)? * self.adjoint(&g.inverse())?)
    }

    /// `d/dτ δ_τ(g)` at `τ = 1`: component `i` is `d_i g_i`.
    pub fn dilation_field(&self, g: &GroupElement) -> Vec<f64> {
        g.0.iter()
            .zip(self.algebra.degrees())
            .map(|(x, &d)| d as f64 * x)
            .collect()
    }

    /// Coefficients `P_i(g)` of the dilation field on the right-invariant
    /// frame: solves `right_jacobian(g) P = dilation_field(g)`.
    pub fn dilation_field_coefficients(&self, g: &GroupElement) -> Result<Vec<f64>> {
        let r = self.right_jacobian(g)?;
        let rhs = self.dilation_field(g);
        let n = self.dim();
        // Ad and the left Jacobian are polynomials in a degree-raising ad, so
        // in the adapted basis r is unit lower triangular.
        let mut p = vec![0.0; n];
        for i in 0..n {
            debug_assert!((r[(i, i)] - 1.0).abs() < 1e-12);
            debug_assert!(((i + 1)..n).all(|j| r[(i, j)] == 0.0));
            let acc: f64 = (0..i).map(|j| r[(i, j)] * p[j]).sum();
            p[i] = (rhs[i] - acc) / r[(i, i)];
        }
        Ok(p)
    }

    /// `λ(Vec δ(g)) = Σ λ_i P_i(g)` for the right-invariant co-vector `λ`.
    pub fn covector_on_dilation_field(&self, lambda: &Covector, g: &GroupElement) -> Result<f64> {
        check_dim(self.dim(), lambda.dim())?;
        Ok(lambda.apply(&self.dilation_field_coefficients(g)?))
    }

    /// `max_i |g_i|^{1/d_i}`, a homogeneous proxy for the distance to the
    /// identity.
    pub fn homogeneous_quasinorm(&self, g: &GroupElement) -> f64 {
        g.0.iter()
            .zip(self.algebra.degrees())
            .map(|(x, &d)| x.abs().powf(1.0 / d as f64))
            .fold(0.0, f64::max)
    }

    /// Whether `g` is central, i.e. `ad_g = 0`.
    pub fn is_central(&self, g: &GroupElement) -> bool {
        self.algebra.ad_matrix(&g.0).iter().all(|&c| c == 0.0)
    }
}

/// `N(λ) = Σ |λ(X_i)|`.
pub fn covector_norm(lambda: &Covector) -> f64 {
    lambda.norm()
}

fn exp_series() -> [f64; 6] {
    [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0, 1.0 / 120.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heis() -> CarnotGroup {
        CarnotGroup::new(StratifiedAlgebra::heisenberg())
    }

    #[test]
    fn heisenberg_product_law() {
        let g = heis();
        let (x, y, z) = (0.7, -1.3, 0.25);
        let (a, b, c) = (-0.4, 2.1, 1.5);
        let p = g
            .multiply(&GroupElement(vec![x, y, z]), &GroupElement(vec![a, b, c]))
            .unwrap();
        let expected = [x + a, y + b, z + c - 0.5 * (a * y - x * b)];
        for (got, want) in p.0.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_and_inverse() {
        let g = CarnotGroup::new(StratifiedAlgebra::filiform(4).unwrap());
        let p = GroupElement(vec![0.3, -0.8, 1.1, 0.2, -2.0]);
        assert_eq!(g.multiply(&p, &g.identity()).unwrap(), p);
        let e = g.multiply(&p, &p.inverse()).unwrap();
        assert!(e.0.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn heisenberg_dilation_and_field() {
        let g = heis();
        let p = GroupElement(vec![1.0, 2.0, 3.0]);
        assert_eq!(g.dilate(2.0, &p).0, vec![2.0, 4.0, 12.0]);
        assert_eq!(g.dilate(1.0, &p), p);
        assert_eq!(g.dilation_field(&p), vec![1.0, 2.0, 6.0]);
        assert_eq!(g.dilation_field(&g.identity()), vec![0.0; 3]);
    }

    #[test]
    fn heisenberg_adjoint_columns() {
        let g = heis();
        let (x, y, z) = (0.6, -1.7, 0.9);
        let ad = g.adjoint(&GroupElement(vec![x, y, z])).unwrap();
        // Ad X = X - yZ, Ad Y = Y + xZ, Ad Z = Z
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -y, x, 1.0]);
        assert!((ad - expected).abs().max() < 1e-15);
        assert_eq!(g.adjoint(&g.identity()).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn heisenberg_left_jacobian() {
        let g = heis();
        let (x, y, z) = (0.6, -1.7, 0.9);
        let l = g.left_jacobian(&GroupElement(vec![x, y, z])).unwrap();
        // (a, b, c) -> (a, b, c + (x b - y a) / 2)
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -0.5 * y, 0.5 * x, 1.0]);
        assert!((l - expected).abs().max() < 1e-15);
        assert_eq!(g.left_jacobian(&g.identity()).unwrap(), DMatrix::identity(3, 3));
        assert_eq!(g.right_jacobian(&g.identity()).unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn heisenberg_dilation_coefficients() {
        let g = heis();
        let p = g
            .dilation_field_coefficients(&GroupElement(vec![0.5, -2.0, 0.75]))
            .unwrap();
        // The second-order correction [g, Vec δ(g)] vanishes in the Heisenberg group.
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((p[1] + 2.0).abs() < 1e-15);
        assert!((p[2] - 1.5).abs() < 1e-15);
        assert_eq!(g.dilation_field_coefficients(&g.identity()).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn fast_paths_match_matrices() {
        let g = CarnotGroup::new(StratifiedAlgebra::filiform(5).unwrap());
        let p = GroupElement(vec![0.9, -0.4, 1.3, -0.2, 0.6, 0.1]);
        let v = vec![0.3, 0.2, -0.5, 1.0, 0.7, -0.9];
        let lam = Covector(vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]);
        let l = g.left_jacobian(&p).unwrap() * DVector::from_vec(v.clone());
        let fast = g.left_jacobian_apply(&p.0, &v);
        for i in 0..6 {
            assert!((l[i] - fast[i]).abs() < 1e-14);
        }
        let ad = g.adjoint(&p).unwrap();
        let co = g.coadjoint(&p, &lam).unwrap();
        for j in 0..6 {
            let direct: f64 = (0..6).map(|k| lam.0[k] * ad[(k, j)]).sum();
            assert!((direct - co.0[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn covector_norm_examples() {
        assert_eq!(covector_norm(&Covector::zeros(3)), 0.0);
        assert_eq!(covector_norm(&Covector(vec![1.0, -2.0, 3.0])), 6.0);
        let l = Covector(vec![0.5, -1.5, 2.0]);
        assert!((covector_norm(&l.scaled(-3.0)) - 3.0 * covector_norm(&l)).abs() < 1e-15);
    }

    #[test]
    fn quasinorm_examples() {
        let g = heis();
        assert_eq!(g.homogeneous_quasinorm(&g.identity()), 0.0);
        for n in [1.0, 2.0, 5.0] {
            let z = 1.0 / (4.0 * std::f64::consts::PI * n);
            let q = g.homogeneous_quasinorm(&GroupElement(vec![0.0, 0.0, z]));
            assert!((q - z.sqrt()).abs() < 1e-15);
        }
        let p = GroupElement(vec![0.3, -0.1, 2.0]);
        assert!((g.homogeneous_quasinorm(&g.dilate(4.0, &p)) - 4.0 * g.homogeneous_quasinorm(&p)).abs() < 1e-14);
        assert!((g.homogeneous_quasinorm(&g.dilate(-2.0, &p)) - 2.0 * g.homogeneous_quasinorm(&p)).abs() < 1e-14);
    }

    #[test]
    fn dimension_errors() {
        let g = heis();
        let bad = GroupElement(vec![1.0, 2.0]);
        assert!(g.multiply(&bad, &g.identity()).is_err());
        assert!(g.adjoint(&bad).is_err());
        assert!(g.left_jacobian(&bad).is_err());
        assert!(g.coadjoint(&g.identity(), &Covector(vec![1.0])).is_err());
    }

    #[test]
    fn center_detection() {
        let g = CarnotGroup::new(StratifiedAlgebra::filiform(3).unwrap());
        assert!(g.is_central(&GroupElement(vec![0.0, 0.0, 0.0, 2.5])));
        assert!(!g.is_central(&GroupElement(vec![0.0, 0.0, 1.0, 0.0])));
    }
}
