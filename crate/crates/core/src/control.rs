//! Norms on the first stratum, the energy `½‖·‖²`, its sub-differentials and
//! the extraction of the normal control from a co-vector.
//!
//! For `E = ½‖·‖²` a functional `a` lies in `∂_v E` exactly when
//! `a(v) = ‖v‖²` and `‖a‖_* = ‖v‖`. The normal control at `g` is therefore
//! any `u` in the duality map of `η = (λ ∘ Ad_g)|_{V_1}`: a point of the face
//! of the unit ball exposed by `η`, scaled by `‖η‖_*`.

use serde::{Deserialize, Serialize};

use crate::algebra::matrix_rank;
use crate::error::{check_dim, Error, Result};
use crate::group::{CarnotGroup, Covector, GroupElement};

/// Tolerance for sub-differential membership on unit-scale inputs.
pub const SUBDIFF_TOL: f64 = 1e-10;

/// `η` with `‖η‖ ≤ ZERO_ETA` is treated as zero and yields `u = 0`.
pub const ZERO_ETA: f64 = 1e-14;

/// Relative tolerance for deciding which unit-ball vertices attain the dual norm.
const FACE_TOL: f64 = 1e-12;

/// A value `u(t) ∈ V_1` in the adapted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlValue(pub Vec<f64>);

impl ControlValue {
    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ControlValue {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// How a control is chosen when the sub-differential inclusion has several
/// solutions. Only one rule is implemented.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Mean of the vertices of the exposed face, scaled to `η(u) = ‖u‖²`.
    #[default]
    FaceMean,
}

/// A symmetric polytope norm `‖v‖ = max_a a·v` over its facet functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralNorm {
    facets: Vec<Vec<f64>>,
    vertices: Vec<Vec<f64>>,
}

impl PolyhedralNorm {
    /// Largest first-stratum dimension accepted for vertex enumeration.
    pub const MAX_DIM: usize = 4;

    pub fn new(facets: Vec<Vec<f64>>) -> Result<Self> {
        let m = facets.first().map(Vec::len).unwrap_or(0);
        if m == 0 || m > Self::MAX_DIM {
            return Err(Error::InvalidInput(format!(
                "polyhedral norm needs facets of dimension 1..={}",
                Self::MAX_DIM
            )));
        }
        for f in &facets {
            check_dim(m, f.len())?;
            if f.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("facet entries must be finite".into()));
            }
        }
        for f in &facets {
            let has_opposite = facets
                .iter()
                .any(|g| g.iter().zip(f).all(|(a, b)| (a + b).abs() <= 1e-12));
            if !has_opposite {
                return Err(Error::InvalidInput(format!(
                    "polyhedral norm is not symmetric: facet {f:?} has no opposite"
                )));
            }
        }
        if matrix_rank(&facets, m) < m {
            return Err(Error::InvalidInput(
                "polyhedral facets do not span the first stratum".into(),
            ));
        }
        let vertices = enumerate_vertices(&facets, m);
        Ok(Self { facets, vertices })
    }

    pub fn dim(&self) -> usize {
        self.facets[0].len()
    }

    pub fn facets(&self) -> &[Vec<f64>] {
        &self.facets
    }

    /// Vertices of the unit ball `{v : a·v ≤ 1 for every facet a}`.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }
}

/// Vertices of `{v : a·v ≤ 1}` by solving every `m`-subset of facet
/// equalities and keeping the feasible solutions.
fn enumerate_vertices(facets: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..m).collect();
    let f = facets.len();
    if f < m {
        return out;
    }
    loop {
        let a = nalgebra::DMatrix::from_fn(m, m, |r, c| facets[idx[r]][c]);
        let b = nalgebra::DVector::from_element(m, 1.0);
        if let Some(v) = a.lu().solve(&b) {
            let v: Vec<f64> = v.iter().copied().collect();
            let feasible = v.iter().all(|x| x.is_finite()) && facets.iter().all(|fa| dot(fa, &v) <= 1.0 + 1e-9);
            let fresh = !out.iter().any(|w| w.iter().zip(&v).all(|(p, q)| (p - q).abs() <= 1e-9));
            if feasible && fresh {
                out.push(v);
            }
        }
        // next combination
        let mut i = m;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + f - m {
                break;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The left-invariant norm on `V_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NormDocument", into = "NormDocument")]
pub enum NormSpec {
    Euclidean,
    L1,
    LInfinity,
    Polyhedral(PolyhedralNorm),
}

/// Config-file form of a [`NormSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormDocument {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facets: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub selection: Selection,
}

impl TryFrom<NormDocument> for NormSpec {
    type Error = Error;

    fn try_from(doc: NormDocument) -> Result<Self> {
        match (doc.kind.as_str(), doc.facets) {
            ("euclidean", None) => Ok(NormSpec::Euclidean),
            ("l1", None) => Ok(NormSpec::L1),
            ("linfty", None) => Ok(NormSpec::LInfinity),
            ("polyhedral", Some(f)) => Ok(NormSpec::Polyhedral(PolyhedralNorm::new(f)?)),
            ("polyhedral", None) => Err(Error::InvalidInput("polyhedral norm needs 'facets'".into())),
            (k @ ("euclidean" | "l1" | "linfty"), Some(_)) => {
                Err(Error::InvalidInput(format!("norm '{k}' takes no facets")))
            }
            (k, _) => Err(Error::InvalidInput(format!("unknown norm kind '{k}'"))),
        }
    }
}

impl From<NormSpec> for NormDocument {
    fn from(n: NormSpec) -> Self {
        let (kind, facets) = match n {
            NormSpec::Euclidean => ("euclidean", None),
            NormSpec::L1 => ("l1", None),
            NormSpec::LInfinity => ("linfty", None),
            NormSpec::Polyhedral(p) => ("polyhedral", Some(p.facets)),
        };
        NormDocument {
            kind: kind.to_string(),
            facets,
            selection: Selection::FaceMean,
        }
    }
}

impl std::str::FromStr for NormSpec {
    type Err = Error;

    /// Parses `euclidean`, `l1`, `linfty` or a JSON norm document.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(NormSpec::Euclidean),
            "l1" => Ok(NormSpec::L1),
            "linfty" | "linf" => Ok(NormSpec::LInfinity),
            _ => serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string())),
        }
    }
}

impl NormSpec {
    pub fn label(&self) -> &'static str {
        match self {
            NormSpec::Euclidean => "euclidean",
            NormSpec::L1 => "l1",
            NormSpec::LInfinity => "linfty",
            NormSpec::Polyhedral(_) => "polyhedral",
        }
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        match self {
            NormSpec::Euclidean => dot(v, v).sqrt(),
            NormSpec::L1 => v.iter().map(|x| x.abs()).sum(),
            NormSpec::LInfinity => v.iter().fold(0.0, |a, x| f64::max(a, x.abs())),
            NormSpec::Polyhedral(p) => p.facets.iter().map(|a| dot(a, v)).fold(0.0, f64::max),
        }
    }

    /// `‖a‖_* = sup_{‖v‖ ≤ 1} a(v)`.
    pub fn dual_norm(&self, a: &[f64]) -> f64 {
        match self {
            NormSpec::Euclidean => dot(a, a).sqrt(),
            NormSpec::L1 => a.iter().fold(0.0, |m, x| f64::max(m, x.abs())),
            NormSpec::LInfinity => a.iter().map(|x| x.abs()).sum(),
            NormSpec::Polyhedral(p) => p.vertices.iter().map(|v| dot(a, v)).fold(0.0, f64::max),
        }
    }

    /// `½‖v‖²`.
    pub fn energy(&self, v: &ControlValue) -> f64 {
        let n = self.norm(&v.0);
        0.5 * n * n
    }

    /// Whether `a ∈ ∂_v E`, tested through `a(v) = ‖v‖²` and `‖a‖_* = ‖v‖`,
    /// each within `tol` relative to `max(1, ‖v‖^k)`.
    pub fn in_subdifferential(&self, a: &[f64], v: &ControlValue, tol: f64) -> bool {
        if a.len() != v.dim() {
            return false;
        }
        let nv = self.norm(&v.0);
        let pairing = dot(a, &v.0);
        let dual = self.dual_norm(a);
        (pairing - nv * nv).abs() <= tol * (nv * nv).max(1.0) && (dual - nv).abs() <= tol * nv.max(1.0)
    }

    /// The control `u ∈ ∂E*(η)` chosen by [`Selection::FaceMean`].
    pub fn select_control(&self, eta: &[f64]) -> ControlValue {
        let m = eta.len();
        let scale = eta.iter().fold(0.0, |a, x| f64::max(a, x.abs()));
        if scale <= ZERO_ETA {
            return ControlValue::zeros(m);
        }
        let u = match self {
            NormSpec::Euclidean => eta.to_vec(),
            NormSpec::L1 => {
                // Exposed face: conv{sign(η_i) e_i : |η_i| = ‖η‖_∞}.
                let top = scale;
                let winners: Vec<usize> = (0..m).filter(|&i| eta[i].abs() >= top * (1.0 - FACE_TOL)).collect();
                let w = top / winners.len() as f64;
                let mut u = vec![0.0; m];
                for i in winners {
                    u[i] = w * eta[i].signum();
                }
                u
            }
            NormSpec::LInfinity => {
                // Exposed face: sign(η_i) on the support of η, free (mean 0) elsewhere.
                let total: f64 = eta.iter().map(|x| x.abs()).sum();
                eta.iter()
                    .map(|&x| {
                        if x.abs() > scale * FACE_TOL {
                            total * x.signum()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            NormSpec::Polyhedral(p) => {
                let dual = self.dual_norm(eta);
                let face: Vec<&Vec<f64>> = p
                    .vertices
                    .iter()
                    .filter(|v| dot(eta, v) >= dual - FACE_TOL * dual.abs().max(scale))
                    .collect();
                let mut mean = vec![0.0; m];
                for v in &face {
                    mean.iter_mut().zip(v.iter()).for_each(|(a, b)| *a += b);
                }
                let k = face.len() as f64;
                mean.iter().map(|x| dual * x / k).collect()
            }
        };
        ControlValue(u)
    }

    /// The normal control at `g`: `u` with `(λ ∘ Ad_g)|_{V_1} ∈ ∂_u E`.
    pub fn extract_control(&self, group: &CarnotGroup, lambda: &Covector, g: &GroupElement) -> Result<ControlValue> {
        let eta = first_stratum_pullback(group, lambda, g)?;
        if let NormSpec::Polyhedral(p) = self {
            check_dim(p.dim(), eta.len())?;
        }
        Ok(self.select_control(&eta))
    }
}

/// `η = (λ ∘ Ad_g)` restricted to the first stratum.
pub fn first_stratum_pullback(group: &CarnotGroup, lambda: &Covector, g: &GroupElement) -> Result<Vec<f64>> {
    let mut full = group.coadjoint(g, lambda)?.0;
    full.truncate(group.algebra().rank());
    Ok(full)
}

/// `αλ`, the co-vector of the reparametrized curve `t ↦ γ(αt)`.
pub fn rescale_covector(lambda: &Covector, alpha: f64) -> Result<Covector> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "rescaling factor must be positive, got {alpha}"
        )));
    }
    Ok(lambda.scaled(alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::StratifiedAlgebra;

    fn cv(v: &[f64]) -> ControlValue {
        ControlValue(v.to_vec())
    }

    fn octagon() -> PolyhedralNorm {
        let mut facets = Vec::new();
        for k in 0..8 {
            let th = std::f64::consts::PI * k as f64 / 4.0;
            facets.push(vec![th.cos(), th.sin()]);
        }
        PolyhedralNorm::new(facets).unwrap()
    }

    #[test]
    fn energy_examples() {
        assert_eq!(NormSpec::Euclidean.energy(&cv(&[0.0, 0.0])), 0.0);
        assert_eq!(NormSpec::Euclidean.energy(&cv(&[3.0, 4.0])), 12.5);
        assert_eq!(NormSpec::L1.energy(&cv(&[1.0, 1.0])), 2.0);
        assert_eq!(NormSpec::LInfinity.energy(&cv(&[1.0, -3.0])), 4.5);
        let v = cv(&[0.3, -1.1]);
        let tv = cv(&[0.3 * 2.5, -1.1 * 2.5]);
        for n in [NormSpec::Euclidean, NormSpec::L1, NormSpec::LInfinity] {
            assert!((n.energy(&tv) - 6.25 * n.energy(&v)).abs() < 1e-14);
        }
    }

    #[test]
    fn subdifferential_examples() {
        let v = cv(&[0.4, -1.3]);
        assert!(NormSpec::Euclidean.in_subdifferential(&v.0, &v, SUBDIFF_TOL));
        let zero = cv(&[0.0, 0.0]);
        assert!(NormSpec::L1.in_subdifferential(&[0.0, 0.0], &zero, SUBDIFF_TOL));
        assert!(!NormSpec::L1.in_subdifferential(&[0.1, 0.0], &zero, SUBDIFF_TOL));
        let e1 = cv(&[1.0, 0.0]);
        for beta in [-1.0, -0.5, 0.0, 0.7, 1.0] {
            assert!(NormSpec::L1.in_subdifferential(&[1.0, beta], &e1, SUBDIFF_TOL));
        }
        assert!(!NormSpec::L1.in_subdifferential(&[1.0, 1.2], &e1, SUBDIFF_TOL));
        assert!(!NormSpec::L1.in_subdifferential(&[0.9, 0.0], &e1, SUBDIFF_TOL));
    }

    /// Brute force of `a(w - v) <= E(w) - E(v)` over a grid.
    fn grid_check(norm: &NormSpec, a: &[f64], v: &ControlValue, radius: f64, step: f64) -> bool {
        let k = (radius / step).round() as i64;
        let ev = norm.energy(v);
        for i in -k..=k {
            for j in -k..=k {
                let w = cv(&[i as f64 * step, j as f64 * step]);
                let lhs = a[0] * (w.0[0] - v.0[0]) + a[1] * (w.0[1] - v.0[1]);
                if lhs > norm.energy(&w) - ev + 1e-12 {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn l1_subdifferential_matches_brute_force() {
        let e1 = cv(&[1.0, 0.0]);
        for beta in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            assert!(grid_check(&NormSpec::L1, &[1.0, beta], &e1, 3.0, 0.05));
        }
        for beta in [-1.2, 1.1] {
            assert!(!grid_check(&NormSpec::L1, &[1.0, beta], &e1, 3.0, 0.05));
        }
    }

    #[test]
    fn selections_satisfy_the_inclusion() {
        let oct = NormSpec::Polyhedral(octagon());
        let etas = [
            [1.0, 0.0],
            [0.3, -0.3],
            [0.0, 2.0],
            [-0.7, 0.2],
            [1.0, 1.0],
            [1e-3, -4.0],
        ];
        for norm in [NormSpec::Euclidean, NormSpec::L1, NormSpec::LInfinity, oct] {
            for eta in &etas {
                let u = norm.select_control(eta);
                assert!(
                    norm.in_subdifferential(eta, &u, SUBDIFF_TOL),
                    "{} {eta:?} {u:?}",
                    norm.label()
                );
                assert!(grid_check(&norm, eta, &u, 3.0, 0.05), "{} {eta:?}", norm.label());
            }
        }
    }

    #[test]
    fn face_mean_on_ties() {
        // l1 with |η_1| = |η_2|: the face is the segment from e_1 to e_2.
        let u = NormSpec::L1.select_control(&[1.0, -1.0]);
        assert_eq!(u.0, vec![0.5, -0.5]);
        // linfty with η_2 = 0: the free coordinate is set to the face mean 0.
        let u = NormSpec::LInfinity.select_control(&[2.0, 0.0]);
        assert_eq!(u.0, vec![2.0, 0.0]);
        assert_eq!(NormSpec::L1.select_control(&[0.0, 0.0]).0, vec![0.0, 0.0]);
    }

    #[test]
    fn polyhedral_square_agrees_with_linfty() {
        let square =
            PolyhedralNorm::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(square.vertices().len(), 4);
        let p = NormSpec::Polyhedral(square);
        for v in [[0.3, -0.9], [2.0, 1.0], [-1.0, 0.25]] {
            assert!((p.norm(&v) - NormSpec::LInfinity.norm(&v)).abs() < 1e-15);
            assert!((p.dual_norm(&v) - NormSpec::LInfinity.dual_norm(&v)).abs() < 1e-12);
            let a = p.select_control(&v);
            let b = NormSpec::LInfinity.select_control(&v);
            for i in 0..2 {
                assert!((a.0[i] - b.0[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polyhedral_rejects_bad_facets() {
        assert!(PolyhedralNorm::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(PolyhedralNorm::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).is_err());
        assert!(PolyhedralNorm::new(vec![]).is_err());
        assert!(PolyhedralNorm::new(vec![vec![1.0; 5], vec![-1.0; 5]]).is_err());
    }

    #[test]
    fn norm_document_parsing() {
        let n: NormSpec = "l1".parse().unwrap();
        assert_eq!(n, NormSpec::L1);
        let n: NormSpec = r#"{"kind":"polyhedral","facets":[[1,0],[-1,0],[0,1],[0,-1]]}"#.parse().unwrap();
        assert_eq!(n.label(), "polyhedral");
        let n: NormSpec = r#"{"kind":"euclidean","selection":"face-mean"}"#.parse().unwrap();
        assert_eq!(n, NormSpec::Euclidean);
        assert!(r#"{"kind":"cubic"}"#.parse::<NormSpec>().is_err());
        assert!(r#"{"kind":"polyhedral"}"#.parse::<NormSpec>().is_err());
    }

    #[test]
    fn heisenberg_euclidean_control() {
        let g = CarnotGroup::new(StratifiedAlgebra::heisenberg());
        let lam = Covector(vec![0.3, -0.8, 1.7]);
        let (x, y, z) = (0.4, -1.1, 2.0);
        let u = NormSpec::Euclidean
            .extract_control(&g, &lam, &GroupElement(vec![x, y, z]))
            .unwrap();
        assert!((u.0[0] - (0.3 - y * 1.7)).abs() < 1e-15);
        assert!((u.0[1] - (-0.8 + x * 1.7)).abs() < 1e-15);

        let zero = NormSpec::Euclidean
            .extract_control(&g, &Covector::zeros(3), &GroupElement(vec![x, y, z]))
            .unwrap();
        assert_eq!(zero.0, vec![0.0, 0.0]);

        let at_center = NormSpec::Euclidean
            .extract_control(&g, &lam, &GroupElement(vec![0.0, 0.0, 5.0]))
            .unwrap();
        let at_one = NormSpec::Euclidean.extract_control(&g, &lam, &g.identity()).unwrap();
        assert_eq!(at_center, at_one);
    }

    #[test]
    fn rescaling() {
        let lam = Covector(vec![0.5, -1.0, 2.0]);
        assert_eq!(rescale_covector(&lam, 1.0).unwrap(), lam);
        let r = rescale_covector(&lam, 3.0).unwrap();
        assert!((r.norm() - 3.0 * lam.norm()).abs() < 1e-15);
        assert!(rescale_covector(&lam, 0.0).is_err());
        assert!(rescale_covector(&lam, -1.0).is_err());

        let g = CarnotGroup::new(StratifiedAlgebra::heisenberg());
        let p = GroupElement(vec![0.2, 0.9, -0.3]);
        let u = NormSpec::Euclidean.extract_control(&g, &lam, &p).unwrap();
        let ua = NormSpec::Euclidean.extract_control(&g, &r, &p).unwrap();
        for i in 0..2 {
            assert!((ua.0[i] - 3.0 * u.0[i]).abs() < 1e-14);
        }
    }
}
