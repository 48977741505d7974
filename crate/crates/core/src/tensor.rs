//! Dense multilinear algebra on a 2n-dimensional real vector space with a
//! fixed basis `e_1, ..., e_2n`.
//!
//! Conventions used throughout the crate:
//!
//! * A metric is stored as its covariant components `g_ij = g(e_i, e_j)`.
//! * A (1,1) tensor `P` is stored with the upper index as the row:
//!   `P e_j = Σ_k P[(k, j)] e_k`.
//! * A (0,3) tensor is stored row-major as `T[(i, j, k)] = T(e_i, e_j, e_k)`,
//!   flat index `(i * d + j) * d + k`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerance;

/// Largest supported total dimension 2n.
pub const MAX_TOTAL_DIM: usize = 16;

/// Half dimension `n` of a 2n-dimensional space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dim(usize);

impl Dim {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || 2 * n > MAX_TOTAL_DIM {
            return Err(Error::InvalidDimension(2 * n));
        }
        Ok(Self(n))
    }

    /// Builds the half dimension from a total dimension, which must be even.
    pub fn from_total(total: usize) -> Result<Self> {
        if total % 2 != 0 {
            return Err(Error::InvalidDimension(total));
        }
        Self::new(total / 2)
    }

    pub fn half(self) -> usize {
        self.0
    }

    pub fn total(self) -> usize {
        2 * self.0
    }
}

impl TryFrom<usize> for Dim {
    type Error = Error;

    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.0
    }
}

fn ensure_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Inverse of a symmetric positive-definite matrix.
///
/// Symmetry is checked entrywise at the default tolerance and positive
/// definiteness by attempting a Cholesky factorization.
pub fn metric_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(g)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric"));
    }
    let asym = max_abs(&(g - g.transpose()));
    if !Tolerance::default().negligible(asym, max_abs(g)) {
        return Err(Error::NonSymmetricMetric(asym));
    }
    let sym = (g + g.transpose()) * 0.5;
    let chol = Cholesky::new(sym).ok_or(Error::NotPositiveDefinite)?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// A Riemannian metric together with its cached inverse `g^{ij}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
}

impl Metric {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        let d = ensure_square(&g)?;
        Dim::from_total(d)?;
        let g_inv = metric_inverse(&g)?;
        let g = (&g + g.transpose()) * 0.5;
        Ok(Self { g, g_inv })
    }

    pub fn identity(dim: Dim) -> Self {
        let id = DMatrix::identity(dim.total(), dim.total());
        Self {
            g: id.clone(),
            g_inv: id,
        }
    }

    /// Total dimension 2n.
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn half_dim(&self) -> Dim {
        Dim(self.dim() / 2)
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.g * y))
    }

    /// Components in the basis `e'_i = Σ_a basis[(a, i)] e_a`.
    pub fn transformed(&self, basis: &DMatrix<f64>) -> Result<Self> {
        Self::new(basis.transpose() * &self.g * basis)
    }

    /// Norm of a (0,3) tensor induced by this metric.
    pub fn norm3(&self, t: &Tensor3) -> f64 {
        inner_product3_unchecked(t, t, self).max(0.0).sqrt()
    }
}

/// An almost product structure `P` with `P² = I`, `tr P = 0` and
/// `g(Px, Py) = g(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductStructure {
    p: DMatrix<f64>,
}

impl ProductStructure {
    pub fn new(p: DMatrix<f64>, g: &Metric) -> Result<Self> {
        Self::with_tolerance(p, g, Tolerance::default())
    }

    pub fn with_tolerance(p: DMatrix<f64>, g: &Metric, tol: Tolerance) -> Result<Self> {
        let d = ensure_square(&p)?;
        if d != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                found: d,
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("product structure"));
        }
        let scale = max_abs(&p).max(1.0);
        let id = DMatrix::<f64>::identity(d, d);

        let involution = max_abs(&(&p * &p - &id));
        if !tol.negligible(involution, scale * scale) {
            return Err(Error::InvalidProductStructure {
                what: "P² = I",
                residual: involution,
            });
        }
        let trace = p.trace().abs();
        if !tol.negligible(trace, scale * d as f64) {
            return Err(Error::InvalidProductStructure {
                what: "tr P = 0",
                residual: trace,
            });
        }
        let gc = g.components();
        let compat = max_abs(&(p.transpose() * gc * &p - gc));
        if !tol.negligible(compat, scale * scale * max_abs(gc)) {
            return Err(Error::InvalidProductStructure {
                what: "g(Px, Py) = g(x, y)",
                residual: compat,
            });
        }
        Ok(Self { p })
    }

    /// `diag(I_n, -I_n)`, compatible with any block-diagonal metric.
    pub fn standard(dim: Dim) -> Self {
        let n = dim.half();
        let p = DMatrix::from_fn(2 * n, 2 * n, |i, j| match (i == j, i < n) {
            (false, _) => 0.0,
            (true, true) => 1.0,
            (true, false) => -1.0,
        });
        Self { p }
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.p * x
    }

    /// Components in the basis `e'_i = Σ_a basis[(a, i)] e_a`, validated
    /// against the metric expressed in the same basis.
    pub fn transformed(&self, basis: &DMatrix<f64>, g_new: &Metric) -> Result<Self> {
        let inv = basis
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("basis change is singular".into()))?;
        Self::new(inv * &self.p * basis, g_new)
    }
}

/// A (0,1) tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Covector(Vec<f64>);

impl Covector {
    pub fn new(components: Vec<f64>) -> Self {
        Self(components)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    /// `x ↦ θ(Px)`.
    pub fn compose_p(&self, p: &ProductStructure) -> Self {
        let v = p.components().transpose() * self.to_vector();
        Self(v.iter().copied().collect())
    }

    /// `sqrt(g^{ij} θ_i θ_j)`.
    pub fn norm(&self, g: &Metric) -> f64 {
        let v = self.to_vector();
        v.dot(&(g.inverse() * &v)).max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn transformed(&self, basis: &DMatrix<f64>) -> Self {
        let v = basis.transpose() * self.to_vector();
        Self(v.iter().copied().collect())
    }
}

impl Index<usize> for Covector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// An argument in a slot substitution such as `T(Pz, x, Py)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arg {
    X,
    Y,
    Z,
    PX,
    PY,
    PZ,
}

impl Arg {
    fn variable(self) -> usize {
        match self {
            Arg::X | Arg::PX => 0,
            Arg::Y | Arg::PY => 1,
            Arg::Z | Arg::PZ => 2,
        }
    }

    fn uses_p(self) -> bool {
        matches!(self, Arg::PX | Arg::PY | Arg::PZ)
    }
}

/// Dense (0,3) tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dim: usize,
    components: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            components: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut components = Vec::with_capacity(dim * dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    components.push(f(i, j, k));
                }
            }
        }
        Self { dim, components }
    }

    /// Builds a tensor from a row-major flat array of length `dim³`.
    pub fn from_vec(dim: usize, components: Vec<f64>) -> Result<Self> {
        let expected = dim * dim * dim;
        if components.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: components.len(),
            });
        }
        Ok(Self { dim, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.components
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.components
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.components[self.offset(i, j, k)]
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Euclidean norm of the components in the fixed basis.
    pub fn frobenius_norm(&self) -> f64 {
        self.components.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            components: self.components.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Tensor3) {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        for (s, o) in self.components.iter_mut().zip(&other.components) {
            *s += a * o;
        }
    }

    /// Substitutes the argument of one slot by a linear map:
    /// `R(.., e_a, ..) = T(.., m e_a, ..)` with `m e_a = Σ_b m[(b, a)] e_b`.
    pub fn apply_to_slot(&self, slot: usize, m: &DMatrix<f64>) -> Self {
        assert!(slot < 3, "slot index out of range");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let idx = [i, j, k];
                    let a = idx[slot];
                    let mut acc = 0.0;
                    for b in 0..d {
                        let coef = m[(b, a)];
                        if coef == 0.0 {
                            continue;
                        }
                        let mut src = idx;
                        src[slot] = b;
                        acc += coef * self.get(src[0], src[1], src[2]);
                    }
                    out[[i, j, k]] = acc;
                }
            }
        }
        out
    }

    /// `(x, y, z) ↦ T(σ₁x, σ₂y, σ₃z)` with `σ = P` on the listed (0-based)
    /// slots and the identity elsewhere.
    pub fn compose_p(&self, p: &ProductStructure, slots: &[usize]) -> Self {
        slots
            .iter()
            .fold(self.clone(), |acc, &s| acc.apply_to_slot(s, p.components()))
    }

    /// `R(v₀, v₁, v₂) = T(v[order[0]], v[order[1]], v[order[2]])`.
    pub fn permuted(&self, order: [usize; 3]) -> Self {
        let mut seen = [false; 3];
        for &o in &order {
            assert!(o < 3 && !seen[o], "order must be a permutation of 0..3");
            seen[o] = true;
        }
        Self::from_fn(self.dim, |i, j, k| {
            let v = [i, j, k];
            self.get(v[order[0]], v[order[1]], v[order[2]])
        })
    }

    /// Evaluates a substituted copy, e.g. `[PZ, X, PY]` gives `(x,y,z) ↦ T(Pz, x, Py)`.
    ///
    /// Panics unless the arguments use each of x, y, z exactly once.
    pub fn substitute(&self, p: &ProductStructure, args: [Arg; 3]) -> Self {
        let slots: Vec<usize> = (0..3).filter(|&s| args[s].uses_p()).collect();
        let composed = self.compose_p(p, &slots);
        composed.permuted([args[0].variable(), args[1].variable(), args[2].variable()])
    }

    /// `R(x,y,z) = ½(A(x,y,z) − A(y,x,z))`.
    pub fn antisymmetrize12(&self) -> Self {
        Self::from_fn(self.dim, |i, j, k| {
            0.5 * (self.get(i, j, k) - self.get(j, i, k))
        })
    }

    /// `max |T(x,y,z) + T(y,x,z)|`.
    pub fn antisymmetry12_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    worst = worst.max((self.get(i, j, k) + self.get(j, i, k)).abs());
                }
            }
        }
        worst
    }

    /// Components in the basis `e'_i = Σ_a basis[(a, i)] e_a`.
    pub fn transformed(&self, basis: &DMatrix<f64>) -> Self {
        (0..3).fold(self.clone(), |acc, s| acc.apply_to_slot(s, basis))
    }

    /// Components `S^{abc} = g^{ai} g^{bj} g^{ck} S_ijk`.
    pub fn raised(&self, g: &Metric) -> Self {
        self.transformed(g.inverse())
    }

    /// Componentwise Euclidean dot product in the fixed basis.
    pub fn dot(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a * b)
            .sum()
    }
}

impl Index<[usize; 3]> for Tensor3 {
    type Output = f64;

    fn index(&self, [i, j, k]: [usize; 3]) -> &f64 {
        &self.components[self.offset(i, j, k)]
    }
}

impl IndexMut<[usize; 3]> for Tensor3 {
    fn index_mut(&mut self, [i, j, k]: [usize; 3]) -> &mut f64 {
        let o = self.offset(i, j, k);
        &mut self.components[o]
    }
}

impl Add<&Tensor3> for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Add for Tensor3 {
    type Output = Tensor3;

    fn add(mut self, rhs: Tensor3) -> Tensor3 {
        self.axpy(1.0, &rhs);
        self
    }
}

impl AddAssign<&Tensor3> for Tensor3 {
    fn add_assign(&mut self, rhs: &Tensor3) {
        self.axpy(1.0, rhs);
    }
}

impl Sub<&Tensor3> for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Sub for Tensor3 {
    type Output = Tensor3;

    fn sub(mut self, rhs: Tensor3) -> Tensor3 {
        self.axpy(-1.0, &rhs);
        self
    }
}

impl Neg for Tensor3 {
    type Output = Tensor3;

    fn neg(self) -> Tensor3 {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &Tensor3 {
    type Output = Tensor3;

    fn mul(self, s: f64) -> Tensor3 {
        self.scaled(s)
    }
}

impl Mul<f64> for Tensor3 {
    type Output = Tensor3;

    fn mul(self, s: f64) -> Tensor3 {
        self.scaled(s)
    }
}

/// Associated metric `g̃(x, y) = g(x, Py)`, components `g_ik P^k_j`.
pub fn associated_metric(g: &Metric, p: &ProductStructure) -> DMatrix<f64> {
    g.components() * p.components()
}

fn inner_product3_unchecked(s: &Tensor3, t: &Tensor3, g: &Metric) -> f64 {
    s.raised(g).dot(t)
}

/// `⟨S, T⟩ = g^{ia} g^{jb} g^{kc} S_ijk T_abc`.
pub fn inner_product3(s: &Tensor3, t: &Tensor3, g: &Metric) -> Result<f64> {
    for found in [s.dim(), t.dim()] {
        if found != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                found,
            });
        }
    }
    Ok(inner_product3_unchecked(s, t, g))
}
