//! Stratified nilpotent Lie algebras given by structure constants in an
//! adapted basis.
//!
//! Basis indices are 0-based in the API. The on-disk algebra document and
//! every human-facing report use 1-based indices.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// `(i, j, [(k, c)])`: the bracket `[X_i, X_j] = Σ c X_k`, 0-based.
pub type Bracket = (usize, usize, Vec<(usize, f64)>);

/// Largest supported step. The BCH product is carried through this degree.
pub const MAX_STEP: usize = 6;

/// Absolute tolerance used by [`StratifiedAlgebra::validate`].
pub const VALIDATION_TOL: f64 = 1e-12;

/// An element of the Lie algebra, in the adapted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraVector(pub Vec<f64>);

impl AlgebraVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// The `i`-th basis vector of an `n`-dimensional algebra.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for AlgebraVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// One nonzero structure constant `c_{ij}^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BracketTerm {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub c: f64,
}

/// A stratified Lie algebra `V_1 ⊕ … ⊕ V_s` with dense structure constants.
#[derive(Debug, Clone)]
pub struct StratifiedAlgebra {
    strata: Vec<usize>,
    degrees: Vec<usize>,
    /// `c_{ij}^k` at `(i * n + j) * n + k`.
    constants: Vec<f64>,
    terms: Vec<BracketTerm>,
    name: String,
}

impl StratifiedAlgebra {
    /// Builds an algebra from raw dense constants without checking any Lie
    /// algebra axiom. Only shapes and the supported step range are checked;
    /// use [`validate`](Self::validate) for the axioms.
    pub fn from_constants(strata: Vec<usize>, constants: Vec<f64>) -> Result<Self> {
        if strata.is_empty() || strata.contains(&0) {
            return Err(Error::InvalidInput(
                "strata must be a non-empty list of positive integers".into(),
            ));
        }
        if strata.len() > MAX_STEP {
            return Err(Error::InvalidInput(format!(
                "step {} exceeds the supported maximum {MAX_STEP}",
                strata.len()
            )));
        }
        let n: usize = strata.iter().sum();
        check_dim(n * n * n, constants.len())?;
        if constants.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("structure constants must be finite".into()));
        }
        let degrees = strata
            .iter()
            .enumerate()
            .flat_map(|(j, &m)| std::iter::repeat_n(j + 1, m))
            .collect();
        let mut terms = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = constants[(i * n + j) * n + k];
                    if c != 0.0 {
                        terms.push(BracketTerm { i, j, k, c });
                    }
                }
            }
        }
        Ok(Self {
            strata,
            degrees,
            constants,
            terms,
            name: String::from("custom"),
        })
    }

    /// Builds an algebra from the brackets `[X_i, X_j] = Σ c_k X_k` for
    /// `i < j` (0-based); the `j > i` half is filled by antisymmetry.
    pub fn from_brackets(strata: Vec<usize>, brackets: &[Bracket]) -> Result<Self> {
        let n: usize = strata.iter().sum();
        let mut constants = vec![0.0; n * n * n];
        for (i, j, terms) in brackets {
            let (i, j) = (*i, *j);
            if i >= j || j >= n {
                return Err(Error::InvalidInput(format!(
                    "bracket index pair ({}, {}) must satisfy i < j <= n = {n}",
                    i + 1,
                    j + 1
                )));
            }
            for &(k, c) in terms {
                if k >= n {
                    return Err(Error::InvalidInput(format!(
                        "bracket target index {} exceeds n = {n}",
                        k + 1
                    )));
                }
                constants[(i * n + j) * n + k] += c;
                constants[(j * n + i) * n + k] -= c;
            }
        }
        Self::from_constants(strata, constants)
    }

    /// The 3-dimensional Heisenberg algebra, basis `X, Y, Z` with `[X, Y] = Z`.
    pub fn heisenberg() -> Self {
        Self::from_brackets(vec![2, 1], &[(0, 1, vec![(2, 1.0)])])
            .expect("static constants")
            .named("heisenberg")
    }

    /// Filiform algebra of the first type and step `s`: basis
    /// `X_1, Y_1, …, Y_s` with `[X_1, Y_i] = Y_{i+1}` as the only brackets.
    pub fn filiform(step: usize) -> Result<Self> {
        if !(2..=MAX_STEP).contains(&step) {
            return Err(Error::InvalidInput(format!(
                "filiform step must lie in 2..={MAX_STEP}, got {step}"
            )));
        }
        let mut strata = vec![2];
        strata.extend(std::iter::repeat_n(1, step - 1));
        // X_1 is index 0, Y_i is index i.
        let brackets: Vec<_> = (1..step).map(|i| (0, i, vec![(i + 1, 1.0)])).collect();
        Ok(Self::from_brackets(strata, &brackets)?.named(&format!("filiform{step}")))
    }

    /// Free step-2 nilpotent algebra of the given rank, with `[X_a, X_b]`
    /// for `a < b` listed in lexicographic order as the second stratum.
    pub fn free_step2(rank: usize) -> Result<Self> {
        if rank < 2 {
            return Err(Error::InvalidInput("free step-2 algebra needs rank >= 2".into()));
        }
        let second = rank * (rank - 1) / 2;
        let mut brackets = Vec::with_capacity(second);
        let mut k = rank;
        for a in 0..rank {
            for b in (a + 1)..rank {
                brackets.push((a, b, vec![(k, 1.0)]));
                k += 1;
            }
        }
        Ok(Self::from_brackets(vec![rank, second], &brackets)?.named(&format!("free-step2-rank{rank}")))
    }

    /// Looks up a built-in algebra: `heisenberg`, `filiform2` … `filiform6`,
    /// `free-step2-rank3`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "heisenberg" => Ok(Self::heisenberg()),
            "free-step2-rank3" => Self::free_step2(3),
            _ => match name.strip_prefix("filiform").map(str::parse::<usize>) {
                Some(Ok(s)) => Self::filiform(s),
                _ => Err(Error::InvalidInput(format!("unknown built-in algebra '{name}'"))),
            },
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &[
            "heisenberg",
            "filiform2",
            "filiform3",
            "filiform4",
            "filiform5",
            "filiform6",
            "free-step2-rank3",
        ]
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    /// The step `s`, i.e. the number of strata.
    pub fn step(&self) -> usize {
        self.strata.len()
    }

    pub fn strata(&self) -> &[usize] {
        &self.strata
    }

    /// Dimension of the first (horizontal) stratum.
    pub fn rank(&self) -> usize {
        self.strata[0]
    }

    /// Degree `d_i ∈ {1, …, s}` of every basis index.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Structure constant `c_{ij}^k` (0-based).
    pub fn constant(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.constants[(i * n + j) * n + k]
    }

    pub(crate) fn terms(&self) -> &[BracketTerm] {
        &self.terms
    }

    /// Index range of stratum `j` (1-based stratum number).
    pub fn stratum_range(&self, j: usize) -> std::ops::Range<usize> {
        let start: usize = self.strata[..j - 1].iter().sum();
        start..start + self.strata[j - 1]
    }

    /// `[x, y] = Σ x_i y_j c_{ij}^k X_k`.
    pub fn bracket(&self, x: &AlgebraVector, y: &AlgebraVector) -> Result<AlgebraVector> {
        check_dim(self.dim(), x.dim())?;
        check_dim(self.dim(), y.dim())?;
        Ok(AlgebraVector(self.bracket_slices(&x.0, &y.0)))
    }

    pub(crate) fn bracket_slices(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.bracket_into(x, y, &mut out);
        out
    }

    pub(crate) fn bracket_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for t in &self.terms {
            out[t.k] += x[t.i] * y[t.j] * t.c;
        }
    }

    /// Matrix of `ad_x = [x, ·]`; column `j` is `[x, X_j]`.
    pub fn adjoint_operator(&self, x: &AlgebraVector) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.ad_matrix(&x.0))
    }

    pub(crate) fn ad_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for t in &self.terms {
            m[(t.k, t.j)] += x[t.i] * t.c;
        }
        m
    }

    /// Checks every stratification axiom and reports the first counterexample
    /// of each.
    pub fn validate(&self) -> ValidationReport {
        let n = self.dim();
        let s = self.step();
        let tol = VALIDATION_TOL;
        let d = &self.degrees;
        let mut checks = Vec::new();

        let mut bad = None;
        'anti: for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if (self.constant(i, j, k) + self.constant(j, i, k)).abs() > tol {
                        bad = Some([i, j, k]);
                        break 'anti;
                    }
                }
            }
        }
        checks.push(CheckResult::new(Invariant::Antisymmetry, bad, "c_ij^k != -c_ji^k"));

        let mut bad = None;
        'jacobi: for i in 0..n {
            let xi = AlgebraVector::basis(n, i);
            for j in 0..n {
                let xj = AlgebraVector::basis(n, j);
                for k in 0..n {
                    let xk = AlgebraVector::basis(n, k);
                    let a = self.bracket_slices(&xi.0, &self.bracket_slices(&xj.0, &xk.0));
                    let b = self.bracket_slices(&xj.0, &self.bracket_slices(&xk.0, &xi.0));
                    let c = self.bracket_slices(&xk.0, &self.bracket_slices(&xi.0, &xj.0));
                    if (0..n).any(|m| (a[m] + b[m] + c[m]).abs() > tol) {
                        bad = Some([i, j, k]);
                        break 'jacobi;
                    }
                }
            }
        }
        checks.push(CheckResult::new(Invariant::Jacobi, bad, "Jacobi identity fails"));

        let bad = self
            .terms
            .iter()
            .find(|t| t.c.abs() > tol && d[t.k] != d[t.i] + d[t.j])
            .map(|t| [t.i, t.j, t.k]);
        checks.push(CheckResult::new(
            Invariant::Grading,
            bad,
            "bracket leaves the stratum of degree d_i + d_j",
        ));

        let mut generation = CheckResult::new(Invariant::Generation, None, "");
        for j in 1..s {
            let target = self.stratum_range(j + 1);
            let mut rows = Vec::new();
            for a in self.stratum_range(1) {
                for b in self.stratum_range(j) {
                    let v = self.bracket_slices(&AlgebraVector::basis(n, a).0, &AlgebraVector::basis(n, b).0);
                    rows.push(v[target.clone()].to_vec());
                }
            }
            let r = matrix_rank(&rows, target.len());
            if r < target.len() {
                generation = CheckResult {
                    invariant: Invariant::Generation,
                    passed: false,
                    counterexample: None,
                    detail: format!(
                        "[V_1, V_{j}] has rank {r} inside V_{} of dimension {}",
                        j + 1,
                        target.len()
                    ),
                };
                break;
            }
        }
        checks.push(generation);

        let bad = self
            .terms
            .iter()
            .find(|t| t.c.abs() > tol && d[t.i] + d[t.j] > s)
            .map(|t| [t.i, t.j, t.k]);
        checks.push(CheckResult::new(
            Invariant::Nilpotency,
            bad,
            "nonzero bracket of total degree > s",
        ));

        ValidationReport { checks }
    }

    /// Reads the JSON algebra document format.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: AlgebraDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.into_algebra()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("custom")
            .to_string();
        Ok(Self::from_json_str(&text)?.named(&name))
    }

    /// A built-in name or, failing that, a path to an algebra document.
    pub fn resolve(source: &str) -> Result<Self> {
        match Self::builtin(source) {
            Ok(a) => Ok(a),
            Err(_) if Path::new(source).exists() => Self::from_file(Path::new(source)),
            Err(e) => Err(e),
        }
    }

    pub fn to_document(&self) -> AlgebraDocument {
        let n = self.dim();
        let mut brackets = BTreeMap::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let terms: Vec<(usize, f64)> = (0..n)
                    .filter(|&k| self.constant(i, j, k) != 0.0)
                    .map(|k| (k + 1, self.constant(i, j, k)))
                    .collect();
                if !terms.is_empty() {
                    brackets.insert(format!("{},{}", i + 1, j + 1), terms);
                }
            }
        }
        AlgebraDocument {
            strata: self.strata.clone(),
            brackets,
        }
    }
}

/// On-disk algebra description. Indices are 1-based; keys are `"i,j"` with
/// `i < j`, values are lists of `[k, coefficient]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraDocument {
    pub strata: Vec<usize>,
    #[serde(default)]
    pub brackets: BTreeMap<String, Vec<(usize, f64)>>,
}

impl AlgebraDocument {
    pub fn into_algebra(self) -> Result<StratifiedAlgebra> {
        let mut brackets = Vec::with_capacity(self.brackets.len());
        for (key, terms) in &self.brackets {
            let (i, j) = parse_pair(key)?;
            let mut out = Vec::with_capacity(terms.len());
            for &(k, c) in terms {
                if k == 0 {
                    return Err(Error::Parse(format!("bracket '{key}': indices are 1-based")));
                }
                out.push((k - 1, c));
            }
            brackets.push((i, j, out));
        }
        StratifiedAlgebra::from_brackets(self.strata, &brackets)
    }
}

fn parse_pair(key: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("bracket key '{key}' is not of the form \"i,j\""));
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let i: usize = a.trim().parse().map_err(|_| bad())?;
    let j: usize = b.trim().parse().map_err(|_| bad())?;
    if i == 0 || j == 0 {
        return Err(Error::Parse(format!("bracket key '{key}': indices are 1-based")));
    }
    if i >= j {
        return Err(Error::Parse(format!("bracket key '{key}' must have i < j")));
    }
    Ok((i - 1, j - 1))
}

/// Rank of a list of row vectors by Gaussian elimination with partial pivoting.
pub(crate) fn matrix_rank(rows: &[Vec<f64>], cols: usize) -> usize {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let scale = m.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
    let tol = 1e-9 * scale;
    let mut rank = 0;
    for col in 0..cols {
        let pivot = (rank..m.len()).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()));
        let Some(p) = pivot else { break };
        if m[p][col].abs() <= tol {
            continue;
        }
        m.swap(rank, p);
        for r in (rank + 1)..m.len() {
            let f = m[r][col] / m[rank][col];
            let (top, bottom) = m.split_at_mut(r);
            for (x, y) in bottom[0][col..cols].iter_mut().zip(&top[rank][col..cols]) {
                *x -= f * y;
            }
        }
        rank += 1;
    }
    rank
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Invariant {
    Antisymmetry,
    Jacobi,
    Grading,
    Generation,
    Nilpotency,
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Invariant::Antisymmetry => "antisymmetry",
            Invariant::Jacobi => "jacobi",
            Invariant::Grading => "grading",
            Invariant::Generation => "generation",
            Invariant::Nilpotency => "nilpotency",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub invariant: Invariant,
    pub passed: bool,
    /// First failing basis triple, 1-based.
    pub counterexample: Option<[usize; 3]>,
    pub detail: String,
}

impl CheckResult {
    fn new(invariant: Invariant, bad: Option<[usize; 3]>, what: &str) -> Self {
        match bad {
            None => Self {
                invariant,
                passed: true,
                counterexample: None,
                detail: String::new(),
            },
            Some(t) => {
                let t1 = [t[0] + 1, t[1] + 1, t[2] + 1];
                Self {
                    invariant,
                    passed: false,
                    counterexample: Some(t1),
                    detail: format!("{what} at ({}, {}, {})", t1[0], t1[1], t1[2]),
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, invariant: Invariant) -> &CheckResult {
        self.checks
            .iter()
            .find(|c| c.invariant == invariant)
            .expect("every invariant is checked")
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            if c.passed {
                writeln!(f, "{:<13} pass", c.invariant.to_string())?;
            } else {
                writeln!(f, "{:<13} FAIL  {}", c.invariant.to_string(), c.detail)?;
            }
        }
        Ok(())
    }
}
