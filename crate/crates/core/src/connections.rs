//! Natural connections: transformation and torsion tensors, the naturality
//! conditions, the canonical connection, and the two linear torsion ansätze
//! (built from `F`, and from `g ⊗ θ`).
//!
//! A linear connection is written `∇'_x y = ∇_x y + Q(x, y)` over the
//! Levi-Civita connection `∇` of `g`, with (0,3) versions
//! `Q(x,y,z) = g(Q(x,y), z)` and `T(x,y,z) = g(T(x,y), z)`. It is natural
//! (`∇'P = ∇'g = 0`) exactly when
//!
//! ```text
//! F(x,y,z) = Q(x,y,Pz) − Q(x,Py,z)      and      Q(x,y,z) = −Q(x,z,y).
//! ```
//!
//! Residuals of functions that do not take a metric are Euclidean norms of
//! the components in the working basis.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::classifier::cyclic_map;
use crate::error::{Error, Result};
use crate::linalg::{min_norm_solve, RankRevealed, RANK_CUTOFF};
use crate::structure_gen::{random_tensor, StructureTensor};
use crate::tensor::{Arg, Covector, Dim, Metric, ProductStructure, Tensor3};
use crate::tolerance::Tolerance;
use crate::torsion_space::{Projector, TorsionTensor};

/// Transformation tensor `Q(x,y,z) = g(∇'_x y − ∇_x y, z)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TransformTensor(Tensor3);

impl TransformTensor {
    pub fn new(q: Tensor3) -> Self {
        Self(q)
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor3 {
        self.0
    }
}

/// `Φ(x,y,z) = g(∇̃_x y − ∇_x y, z)` for the Levi-Civita connection `∇̃` of
/// the associated metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PhiTensor(Tensor3);

impl PhiTensor {
    pub fn new(phi: Tensor3) -> Self {
        Self(phi)
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.0
    }
}

/// The unique `Q` skew in its last two slots whose torsion is `T`:
/// `Q(x,y,z) = ½[T(x,y,z) − T(y,z,x) + T(z,x,y)]`.
pub fn q_from_torsion(t: &TorsionTensor) -> TransformTensor {
    let t = t.tensor();
    let mut q = t.clone();
    q.axpy(-1.0, &t.permuted([1, 2, 0]));
    q += &t.permuted([2, 0, 1]);
    TransformTensor(q.scaled(0.5))
}

/// `T(x,y,z) = Q(x,y,z) − Q(y,x,z)`.
pub fn torsion_from_q(q: &TransformTensor) -> TorsionTensor {
    let q = q.tensor();
    TorsionTensor::from_antisymmetric(q - &q.permuted([1, 0, 2]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NaturalityCheck {
    pub natural: bool,
    /// `‖F(x,y,z) − Q(x,y,Pz) + Q(x,Py,z)‖`
    pub structure_residual: f64,
    /// `‖Q(x,y,z) + Q(x,z,y)‖`
    pub skew_residual: f64,
}

/// `Q(x,y,Pz) − Q(x,Py,z)`, the structure tensor a transformation tensor induces.
fn induced_structure(q: &Tensor3, p: &ProductStructure) -> Tensor3 {
    q.compose_p(p, &[2]) - q.compose_p(p, &[1])
}

pub fn is_natural(
    q: &TransformTensor,
    f: &StructureTensor,
    p: &ProductStructure,
    tol: f64,
) -> NaturalityCheck {
    let q = q.tensor();
    let structure_residual = (f.tensor() - &induced_structure(q, p)).frobenius_norm();
    let skew_residual = (q + &q.permuted([0, 2, 1])).frobenius_norm();
    NaturalityCheck {
        natural: structure_residual < tol && skew_residual < tol,
        structure_residual,
        skew_residual,
    }
}

fn require_integrable(f: &StructureTensor, p: &ProductStructure, tol: Tolerance) -> Result<()> {
    let residual = cyclic_map(f.tensor(), p).frobenius_norm();
    if !tol.negligible(residual, f.tensor().frobenius_norm()) {
        return Err(Error::OutsideIntegrableClass(residual));
    }
    Ok(())
}

/// `Φ(x,y,z) = ½{F(y,x,Pz) − F(Py,x,z)}`, valid on W1⊕W2 only.
pub fn phi_from_f(f: &StructureTensor, p: &ProductStructure) -> Result<PhiTensor> {
    phi_from_f_with_tolerance(f, p, Tolerance::default())
}

/// [`phi_from_f`] with an explicit tolerance on the cyclic residual, for
/// approximate (e.g. finite-difference) input.
pub fn phi_from_f_with_tolerance(
    f: &StructureTensor,
    p: &ProductStructure,
    tol: Tolerance,
) -> Result<PhiTensor> {
    require_integrable(f, p, tol)?;
    let f = f.tensor();
    let phi =
        f.substitute(p, [Arg::Y, Arg::X, Arg::PZ]) - f.substitute(p, [Arg::PY, Arg::X, Arg::Z]);
    Ok(PhiTensor(phi.scaled(0.5)))
}

/// Residuals of the two naturality identities expressed through `Φ` and the
/// Nijenhuis tensor `N(x,y,z) = g(N(x,y), z)`:
///
/// ```text
/// 4 p1(T) = −Φ(x,y,z) + Φ(y,z,x) − Φ(x,Py,Pz) − Φ(y,Pz,Px) + 2Φ(z,Px,Py)
/// 4 p3(T) = −N(x,y,z)
/// ```
pub fn phi_projection_residuals(
    t: &TorsionTensor,
    phi: &PhiTensor,
    n: &Tensor3,
    p: &ProductStructure,
) -> (f64, f64) {
    use Arg::*;
    let phi = phi.tensor();
    let mut rhs = phi.scaled(-1.0);
    rhs += &phi.substitute(p, [Y, Z, X]);
    rhs.axpy(-1.0, &phi.substitute(p, [X, PY, PZ]));
    rhs.axpy(-1.0, &phi.substitute(p, [Y, PZ, PX]));
    rhs.axpy(2.0, &phi.substitute(p, [Z, PX, PY]));
    let lhs1 = Projector::P1.apply_raw(t.tensor(), p).scaled(4.0);
    let lhs3 = Projector::P3.apply_raw(t.tensor(), p).scaled(4.0);
    (
        (&lhs1 - &rhs).frobenius_norm(),
        (&lhs3 + n).frobenius_norm(),
    )
}

/// `½F(z,y,Px)` as a tensor, without any class check.
pub(crate) fn half_f_zy_px(f: &StructureTensor, p: &ProductStructure) -> Tensor3 {
    f.tensor()
        .substitute(p, [Arg::Z, Arg::Y, Arg::PX])
        .scaled(0.5)
}

/// Torsion of the canonical connection, `T(x,y,z) = ½F(z,y,Px)`.
///
/// Antisymmetry in `x, y` already follows from the symmetries of `F`, so it
/// is checked only as a guard; input outside W1⊕W2 is rejected through the
/// cyclic residual.
pub fn canonical_torsion(f: &StructureTensor, p: &ProductStructure) -> Result<TorsionTensor> {
    canonical_torsion_with_tolerance(f, p, Tolerance::default())
}

/// [`canonical_torsion`] with an explicit tolerance for approximate input.
pub fn canonical_torsion_with_tolerance(
    f: &StructureTensor,
    p: &ProductStructure,
    tol: Tolerance,
) -> Result<TorsionTensor> {
    require_integrable(f, p, tol)?;
    let t = half_f_zy_px(f, p);
    let defect = t.antisymmetry12_defect();
    if !tol.negligible(defect, t.max_abs()) {
        return Err(Error::OutsideIntegrableClass(defect));
    }
    Ok(TorsionTensor::from_antisymmetric(t.antisymmetrize12()))
}

/// `‖T(x,y,z) + T(y,z,x) + T(Px,y,Pz) + T(y,Pz,Px)‖`, zero for the canonical
/// connection.
pub fn canonical_condition_residual(t: &TorsionTensor, p: &ProductStructure) -> f64 {
    use Arg::*;
    let t = t.tensor();
    let mut sum = t.clone();
    sum += &t.substitute(p, [Y, Z, X]);
    sum += &t.substitute(p, [PX, Y, PZ]);
    sum += &t.substitute(p, [Y, PZ, PX]);
    sum.frobenius_norm()
}

/// Canonical torsion on a W1 manifold written through the Lee form:
/// `(1/4n){g(y,z)θ(Px) − g(y,Pz)θ(x) − g(x,z)θ(Py) + g(x,Pz)θ(y)}`.
pub fn w1_canonical_torsion(g: &Metric, p: &ProductStructure, theta: &Covector) -> TorsionTensor {
    let d = g.dim();
    let gm = g.components();
    let gp = gm * p.components();
    let tp = theta.compose_p(p);
    let c = 1.0 / (2.0 * d as f64);
    TorsionTensor::from_antisymmetric(Tensor3::from_fn(d, |x, y, z| {
        c * (gm[(y, z)] * tp[x] - gp[(y, z)] * theta[x] - gm[(x, z)] * tp[y]
            + gp[(x, z)] * theta[y])
    }))
}

/// Coefficients of the 8-term ansatz built from `F`.
pub type FAnsatzCoeffs = [f64; 8];

/// Coefficients of the 12-term ansatz built from `g ⊗ θ`.
pub type GThetaAnsatzCoeffs = [f64; 12];

/// The 8 tensors of the `F` ansatz, in the order
/// `F(x,y,z), F(y,z,x), F(Px,y,z), F(Py,z,x), F(x,y,Pz), F(y,z,Px),
/// F(Px,Py,z), F(Py,Pz,x)`.
pub fn f_ansatz_basis(f: &StructureTensor, p: &ProductStructure) -> Vec<Tensor3> {
    use Arg::*;
    const TERMS: [[Arg; 3]; 8] = [
        [X, Y, Z],
        [Y, Z, X],
        [PX, Y, Z],
        [PY, Z, X],
        [X, Y, PZ],
        [Y, Z, PX],
        [PX, PY, Z],
        [PY, PZ, X],
    ];
    TERMS
        .iter()
        .map(|&args| f.tensor().substitute(p, args))
        .collect()
}

pub fn f_ansatz_torsion(f: &StructureTensor, p: &ProductStructure, c: &FAnsatzCoeffs) -> Tensor3 {
    combine(&f_ansatz_basis(f, p), c)
}

/// The 12 tensors of the `g ⊗ θ` ansatz, in the order
///
/// ```text
///  1 g(x,y)θ(z)    2 g(y,z)θ(x)    3 g(z,x)θ(y)
///  4 g(x,y)θ(Pz)   5 g(y,z)θ(Px)   6 g(z,x)θ(Py)
///  7 g(x,Py)θ(z)   8 g(y,Pz)θ(x)   9 g(z,Px)θ(y)
/// 10 g(x,Py)θ(Pz) 11 g(y,Pz)θ(Px) 12 g(z,Px)θ(Py)
/// ```
pub fn gtheta_ansatz_basis(g: &Metric, p: &ProductStructure, theta: &Covector) -> Vec<Tensor3> {
    let d = g.dim();
    let gm = g.components();
    let gp = gm * p.components();
    let tp = theta.compose_p(p);
    let mut basis = Vec::with_capacity(12);
    for (pair_metric, form) in [(gm, theta), (gm, &tp), (&gp, theta), (&gp, &tp)] {
        // pairs (x,y)|z, (y,z)|x, (z,x)|y
        basis.push(Tensor3::from_fn(d, |x, y, z| pair_metric[(x, y)] * form[z]));
        basis.push(Tensor3::from_fn(d, |x, y, z| pair_metric[(y, z)] * form[x]));
        basis.push(Tensor3::from_fn(d, |x, y, z| pair_metric[(z, x)] * form[y]));
    }
    basis
}

pub fn gtheta_ansatz_torsion(
    g: &Metric,
    p: &ProductStructure,
    theta: &Covector,
    c: &GThetaAnsatzCoeffs,
) -> Tensor3 {
    combine(&gtheta_ansatz_basis(g, p, theta), c)
}

fn combine(basis: &[Tensor3], coeffs: &[f64]) -> Tensor3 {
    assert_eq!(basis.len(), coeffs.len(), "coefficient count mismatch");
    let mut out = Tensor3::zeros(basis.first().map_or(0, Tensor3::dim));
    for (b, &c) in basis.iter().zip(coeffs) {
        if c != 0.0 {
            out.axpy(c, b);
        }
    }
    out
}

/// Affine solution set of a natural-connection ansatz, reported both in
/// coefficient space and as the set of torsions it produces.
#[derive(Debug, Clone, Serialize)]
pub struct AnsatzSolution {
    /// `‖A c − b‖` at the minimum-norm least-squares point.
    pub consistency_residual: f64,
    /// Minimum-norm coefficients, `None` when the system is inconsistent.
    pub particular: Option<Vec<f64>>,
    /// Orthonormal coefficient directions leaving the torsion natural.
    pub null_directions: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Smallest kept over largest discarded singular value.
    pub gap: f64,
    pub particular_torsion: Option<Tensor3>,
    /// Orthonormal (Euclidean) basis of the torsions spanned by the null directions.
    pub torsion_directions: Vec<Tensor3>,
    pub torsion_singular_values: Vec<f64>,
}

impl AnsatzSolution {
    pub fn is_empty(&self) -> bool {
        self.particular.is_none()
    }

    pub fn coefficient_dimension(&self) -> usize {
        self.null_directions.len()
    }

    /// Dimension of the affine set of torsions.
    pub fn torsion_dimension(&self) -> usize {
        self.torsion_directions.len()
    }
}

/// Solves for the coefficients `c` such that `T = Σ c_i basis_i` is the
/// torsion of a natural connection for `F`: `T` antisymmetric in its first
/// two slots, and `Q = q_from_torsion(T)` satisfying both naturality
/// conditions. All conditions are linear in `c`.
pub fn solve_natural_ansatz(
    basis: &[Tensor3],
    f: &StructureTensor,
    _g: &Metric,
    p: &ProductStructure,
) -> AnsatzSolution {
    let d = f.dim();
    let block = d * d * d;
    let columns: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| {
            let sym = b + &b.permuted([1, 0, 2]);
            // linear extension of q_from_torsion beyond antisymmetric input
            let mut q = b.clone();
            q.axpy(-1.0, &b.permuted([1, 2, 0]));
            q += &b.permuted([2, 0, 1]);
            let q = q.scaled(0.5);
            let natural = induced_structure(&q, p);
            let skew = &q + &q.permuted([0, 2, 1]);
            let mut col = sym.into_vec();
            col.extend(natural.into_vec());
            col.extend(skew.into_vec());
            col
        })
        .collect();
    let a = DMatrix::from_fn(3 * block, basis.len(), |r, c| columns[c][r]);
    let mut rhs = vec![0.0; 3 * block];
    rhs[block..2 * block].copy_from_slice(f.tensor().as_slice());
    let b = DVector::from_vec(rhs);

    let rr = RankRevealed::new(&a);
    let x = min_norm_solve(&a, &b);
    let consistency_residual = (&a * &x - &b).norm();
    let consistent = consistency_residual <= 1e-8 * b.norm().max(1.0);
    let null = rr.null_space();
    let null_directions: Vec<Vec<f64>> = null
        .column_iter()
        .map(|c| c.iter().copied().collect())
        .collect();

    let images: Vec<Tensor3> = null_directions.iter().map(|c| combine(basis, c)).collect();
    let scale = basis
        .iter()
        .map(Tensor3::frobenius_norm)
        .fold(0.0, f64::max);
    let (torsion_directions, torsion_singular_values) = image_basis(&images, d, scale);

    let particular: Option<Vec<f64>> = consistent.then(|| x.iter().copied().collect());
    let particular_torsion = particular.as_ref().map(|c| combine(basis, c));
    AnsatzSolution {
        consistency_residual,
        particular,
        null_directions,
        singular_values: rr.singular_values.clone(),
        rank: rr.rank,
        gap: rr.gap(),
        particular_torsion,
        torsion_directions,
        torsion_singular_values,
    }
}

/// Orthonormal basis of the span of `images`, with singular values below
/// `RANK_CUTOFF · scale` discarded.
fn image_basis(images: &[Tensor3], d: usize, scale: f64) -> (Vec<Tensor3>, Vec<f64>) {
    if images.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let block = d * d * d;
    let m = DMatrix::from_fn(block, images.len(), |r, c| images[c].as_slice()[r]);
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let cutoff = RANK_CUTOFF * scale;
    let directions = order
        .iter()
        .filter(|&&i| scale > 0.0 && svd.singular_values[i] > cutoff)
        .map(|&i| Tensor3::from_vec(d, u.column(i).iter().copied().collect()).expect("length d³"))
        .collect();
    (directions, values)
}

/// Parameters `(λ, μ)` of the two-parameter torsion family on W1 manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyParams {
    pub lambda: f64,
    pub mu: f64,
    pub n: Dim,
}

impl FamilyParams {
    pub fn new(lambda: f64, mu: f64, n: Dim) -> Self {
        Self { lambda, mu, n }
    }

    /// `(0, −1/4n)`, the member equal to the canonical torsion.
    pub fn canonical(n: Dim) -> Self {
        Self::new(0.0, -1.0 / (4.0 * n.half() as f64), n)
    }

    pub fn is_canonical(&self, tol: f64) -> bool {
        let c = Self::canonical(self.n);
        self.lambda.abs() <= tol && (self.mu - c.mu).abs() <= tol
    }

    /// The same torsion written in the 12-term `g ⊗ θ` basis.
    pub fn gtheta_coefficients(&self) -> GThetaAnsatzCoeffs {
        let (l, m) = (self.lambda, self.mu);
        let k = 1.0 / self.n.total() as f64;
        [0.0, l, -l, 0.0, m + k, -(m + k), 0.0, m, -m, 0.0, l, -l]
    }
}

/// ```text
/// T = λ{g(y,z)θ(x) − g(x,z)θ(y) + g(y,Pz)θ(Px) − g(x,Pz)θ(Py)}
///   + μ{g(y,Pz)θ(x) − g(x,Pz)θ(y) + g(y,z)θ(Px) − g(x,z)θ(Py)}
///   + (1/2n){g(y,z)θ(Px) − g(x,z)θ(Py)}
/// ```
pub fn w1_family_torsion(
    g: &Metric,
    p: &ProductStructure,
    theta: &Covector,
    params: &FamilyParams,
) -> TorsionTensor {
    let d = g.dim();
    let gm = g.components();
    let gp = gm * p.components();
    let tp = theta.compose_p(p);
    let (l, m) = (params.lambda, params.mu);
    let k = 1.0 / params.n.total() as f64;
    TorsionTensor::from_antisymmetric(Tensor3::from_fn(d, |x, y, z| {
        let lam =
            gm[(y, z)] * theta[x] - gm[(x, z)] * theta[y] + gp[(y, z)] * tp[x] - gp[(x, z)] * tp[y];
        let mu =
            gp[(y, z)] * theta[x] - gp[(x, z)] * theta[y] + gm[(y, z)] * tp[x] - gm[(x, z)] * tp[y];
        let base = gm[(y, z)] * tp[x] - gm[(x, z)] * tp[y];
        l * lam + m * mu + k * base
    }))
}

/// `‖F(z,x,Py) − T(Px,Py,z) + T(x,y,z)‖`; zero exactly when a natural
/// torsion lies in the sum of the first and fourth subspaces.
pub fn case_b_residual(t: &TorsionTensor, f: &StructureTensor, p: &ProductStructure) -> f64 {
    let t = t.tensor();
    let mut r = f.tensor().substitute(p, [Arg::Z, Arg::X, Arg::PY]);
    r.axpy(-1.0, &t.substitute(p, [Arg::PX, Arg::PY, Arg::Z]));
    r += t;
    r.frobenius_norm()
}

/// Residuals of the closed forms of the second and fourth components of a
/// natural torsion:
///
/// ```text
/// p2(T) = ½{T(x,y,z) − T(Px,Py,z) + F(z,x,Py)}
/// p4(T) = ½{T(x,y,z) + T(Px,Py,z)}
/// ```
pub fn natural_p2_p4_residuals(
    t: &TorsionTensor,
    f: &StructureTensor,
    g: &Metric,
    p: &ProductStructure,
) -> (f64, f64) {
    let tt = t.tensor();
    let tpp = tt.substitute(p, [Arg::PX, Arg::PY, Arg::Z]);
    let fzx = f.tensor().substitute(p, [Arg::Z, Arg::X, Arg::PY]);
    let expected2 = (&(tt - &tpp) + &fzx).scaled(0.5);
    let expected4 = (tt + &tpp).scaled(0.5);
    let p2 = Projector::P2.apply_raw(tt, p);
    let p4 = Projector::P4.apply_raw(tt, p);
    (g.norm3(&(&p2 - &expected2)), g.norm3(&(&p4 - &expected4)))
}

/// A random natural connection for `F`: the canonical `Q` plus a random
/// solution of the homogeneous conditions `Q(x,y,Pz) = Q(x,Py,z)`,
/// `Q(x,y,z) = −Q(x,z,y)`.
pub fn random_natural_transform(
    f: &StructureTensor,
    p: &ProductStructure,
    seed: u64,
) -> Result<TransformTensor> {
    let canonical = q_from_torsion(&canonical_torsion(f, p)?);
    let r = random_tensor(f.dim(), seed);
    let skew = (&r - &r.permuted([0, 2, 1])).scaled(0.5);
    let commuting = (&skew + &skew.compose_p(p, &[1, 2])).scaled(0.5);
    Ok(TransformTensor(canonical.into_tensor() + commuting))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::nijenhuis_from_f;
    use crate::structure_gen::{
        make_constrained_f, make_w1_f, random_covector, random_metric, random_product_structure,
        ClassSpec,
    };
    use crate::torsion_space::{decompose, project_p1, project_p3};

    fn dim(n: usize) -> Dim {
        Dim::new(n).unwrap()
    }

    fn w1_fixture_4() -> (Metric, ProductStructure, Covector, StructureTensor) {
        let g = Metric::identity(dim(2));
        let p = ProductStructure::standard(dim(2));
        let theta = Covector::new(vec![1.0, 0.0, 0.0, 0.0]);
        let f = make_w1_f(&g, &p, &theta);
        (g, p, theta, f)
    }

    fn w1_fixture_2() -> (Metric, ProductStructure, Covector, StructureTensor) {
        let g = Metric::identity(dim(1));
        let p = ProductStructure::standard(dim(1));
        let theta = Covector::new(vec![1.0, 0.0]);
        let f = make_w1_f(&g, &p, &theta);
        (g, p, theta, f)
    }

    fn random_w12(n: usize, seed: u64) -> (Metric, ProductStructure, StructureTensor) {
        let g = random_metric(dim(n), seed);
        let p = random_product_structure(&g, seed).unwrap();
        let f = make_constrained_f(&g, &p, ClassSpec::W1PlusW2, seed).unwrap();
        (g, p, f)
    }

    fn random_torsion(d: usize, seed: u64) -> TorsionTensor {
        TorsionTensor::new(random_tensor(d, seed).antisymmetrize12()).unwrap()
    }

    #[test]
    fn q_and_torsion_round_trip() {
        let z = TorsionTensor::zero(4);
        assert_eq!(q_from_torsion(&z).tensor().max_abs(), 0.0);
        let t = random_torsion(4, 2);
        let q = q_from_torsion(&t);
        assert!((torsion_from_q(&q).tensor() - t.tensor()).max_abs() < 1e-12);
        assert!((q.tensor() + &q.tensor().permuted([0, 2, 1])).max_abs() < 1e-12);

        let (_, p, _, f) = w1_fixture_4();
        let qc = q_from_torsion(&canonical_torsion(&f, &p).unwrap());
        assert!((qc.tensor() + &qc.tensor().permuted([0, 2, 1])).max_abs() < 1e-12);
    }

    #[test]
    fn torsion_from_q_cases() {
        let sym = Tensor3::from_fn(4, |i, j, k| (i * j + k) as f64);
        assert_eq!(
            torsion_from_q(&TransformTensor::new(sym))
                .tensor()
                .max_abs(),
            0.0
        );
        let q = TransformTensor::new(random_tensor(4, 4));
        assert_eq!(torsion_from_q(&q).tensor().antisymmetry12_defect(), 0.0);
    }

    #[test]
    fn naturality_examples() {
        let p = ProductStructure::standard(dim(2));
        let zero = is_natural(
            &TransformTensor::new(Tensor3::zeros(4)),
            &StructureTensor::zero(4),
            &p,
            1e-9,
        );
        assert!(zero.natural);

        let (_, p, _, f) = w1_fixture_4();
        let q = q_from_torsion(&canonical_torsion(&f, &p).unwrap());
        let check = is_natural(&q, &f, &p, 1e-9);
        assert!(check.natural, "{check:?}");

        for seed in 1..=20 {
            let q = q_from_torsion(&random_torsion(4, seed));
            let check = is_natural(&q, &f, &p, 1e-9);
            assert!(!check.natural);
            assert!(check.structure_residual > 0.01);
        }
    }

    #[test]
    fn phi_examples() {
        let p = ProductStructure::standard(dim(1));
        assert_eq!(
            phi_from_f(&StructureTensor::zero(2), &p)
                .unwrap()
                .tensor()
                .max_abs(),
            0.0
        );
        let (_, p, _, f) = w1_fixture_2();
        let phi = phi_from_f(&f, &p).unwrap();
        assert_eq!(phi.tensor().get(0, 1, 1), 0.0);
        // both connections are torsion-free
        let (_, p, f) = random_w12(2, 3);
        let phi = phi_from_f(&f, &p).unwrap();
        assert!((phi.tensor() - &phi.tensor().permuted([1, 0, 2])).max_abs() < 1e-12);
    }

    #[test]
    fn phi_rejects_nonintegrable_input() {
        let g = random_metric(dim(2), 1);
        let p = random_product_structure(&g, 1).unwrap();
        let f = crate::structure_gen::project_to_f_symmetries(&random_tensor(4, 1), &p);
        assert!(matches!(
            phi_from_f(&f, &p),
            Err(Error::OutsideIntegrableClass(_))
        ));
        assert!(matches!(
            canonical_torsion(&f, &p),
            Err(Error::OutsideIntegrableClass(_))
        ));
    }

    #[test]
    fn phi_projection_identities() {
        let p = ProductStructure::standard(dim(2));
        let (r1, r2) = phi_projection_residuals(
            &TorsionTensor::zero(4),
            &PhiTensor::new(Tensor3::zeros(4)),
            &Tensor3::zeros(4),
            &p,
        );
        assert_eq!((r1, r2), (0.0, 0.0));

        let (_, p, f) = random_w12(2, 6);
        let t = canonical_torsion(&f, &p).unwrap();
        let phi = phi_from_f(&f, &p).unwrap();
        let n = nijenhuis_from_f(&f, &p);
        let (r1, r2) = phi_projection_residuals(&t, &phi, &n, &p);
        assert!(r1 < 1e-9 && r2 < 1e-9, "{r1} {r2}");

        let f = f.scaled(1.0 / f.tensor().frobenius_norm());
        let phi = phi_from_f(&f, &p).unwrap();
        for seed in 1..=20 {
            let (r1, _) = phi_projection_residuals(&random_torsion(4, seed), &phi, &n, &p);
            assert!(r1 > 0.01);
        }
    }

    #[test]
    fn canonical_torsion_hand_values() {
        let p = ProductStructure::standard(dim(1));
        assert_eq!(
            canonical_torsion(&StructureTensor::zero(2), &p)
                .unwrap()
                .tensor()
                .max_abs(),
            0.0
        );
        let (_, p, _, f) = w1_fixture_2();
        assert_eq!(
            canonical_torsion(&f, &p).unwrap().tensor().get(0, 1, 1),
            0.5
        );
        let (_, p, _, f) = w1_fixture_4();
        let t = canonical_torsion(&f, &p).unwrap();
        assert_eq!(t.tensor().get(0, 2, 2), 0.25);
        assert_eq!(t.tensor().get(0, 1, 1), 0.0);
    }

    #[test]
    fn canonical_condition() {
        let p = ProductStructure::standard(dim(2));
        assert_eq!(
            canonical_condition_residual(&TorsionTensor::zero(4), &p),
            0.0
        );
        let (_, p, f) = random_w12(2, 9);
        let t = canonical_torsion(&f, &p).unwrap();
        assert!(canonical_condition_residual(&t, &p) < 1e-10);

        let (g, p, theta, _) = w1_fixture_4();
        let member = w1_family_torsion(&g, &p, &theta, &FamilyParams::new(1.0, 0.0, dim(2)));
        assert!(canonical_condition_residual(&member, &p) > 0.01);
    }

    #[test]
    fn w1_canonical_matches_general_formula() {
        let g = Metric::identity(dim(2));
        let p = ProductStructure::standard(dim(2));
        assert_eq!(
            w1_canonical_torsion(&g, &p, &Covector::zeros(4))
                .tensor()
                .max_abs(),
            0.0
        );

        let (g, p, theta, f) = w1_fixture_2();
        let t = w1_canonical_torsion(&g, &p, &theta);
        assert_eq!(t.tensor().get(0, 1, 1), 0.5);
        assert_eq!(t.tensor().get(0, 1, 1), 0.5 * f.tensor().get(1, 1, 0));

        let (g, p, theta, _) = w1_fixture_4();
        assert_eq!(
            w1_canonical_torsion(&g, &p, &theta).tensor().get(0, 2, 2),
            0.25
        );

        for seed in 0..5 {
            let g = random_metric(dim(3), seed);
            let p = random_product_structure(&g, seed).unwrap();
            let theta = random_covector(6, seed);
            let a = w1_canonical_torsion(&g, &p, &theta);
            let b = canonical_torsion(&make_w1_f(&g, &p, &theta), &p).unwrap();
            assert!((a.tensor() - b.tensor()).max_abs() < 1e-10);
        }
    }

    #[test]
    fn f_ansatz_single_terms() {
        let (_, p, f) = random_w12(2, 2);
        assert_eq!(f_ansatz_torsion(&f, &p, &[0.0; 8]).max_abs(), 0.0);
        let mut c = [0.0; 8];
        c[0] = 1.0;
        assert_eq!(&f_ansatz_torsion(&f, &p, &c), f.tensor());
    }

    #[test]
    fn f_ansatz_solution_is_the_canonical_torsion() {
        for seed in 1..=5 {
            let (g, p, f) = random_w12(2, seed);
            let sol = solve_natural_ansatz(&f_ansatz_basis(&f, &p), &f, &g, &p);
            let expected = canonical_torsion(&f, &p).unwrap();
            let t = sol.particular_torsion.as_ref().expect("consistent");
            assert!((t - expected.tensor()).max_abs() < 1e-8);
            assert_eq!(sol.torsion_dimension(), 0);
            // every coefficient direction leaves the torsion unchanged
            for dir in &sol.null_directions {
                let mut c = sol.particular.clone().unwrap();
                for (ci, di) in c.iter_mut().zip(dir) {
                    *ci += 3.0 * di;
                }
                let c: FAnsatzCoeffs = c.try_into().unwrap();
                let moved = f_ansatz_torsion(&f, &p, &c);
                assert!((&moved - expected.tensor()).max_abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gtheta_ansatz_cases() {
        let (g, p, theta, _) = w1_fixture_4();
        assert_eq!(
            gtheta_ansatz_torsion(&g, &p, &theta, &[0.0; 12]).max_abs(),
            0.0
        );
        assert_eq!(
            gtheta_ansatz_torsion(&g, &p, &Covector::zeros(4), &[1.0; 12]).max_abs(),
            0.0
        );
        let canonical = FamilyParams::canonical(dim(2));
        let t = gtheta_ansatz_torsion(&g, &p, &theta, &canonical.gtheta_coefficients());
        let expected = w1_canonical_torsion(&g, &p, &theta);
        assert!((&t - expected.tensor()).max_abs() < 1e-15);
    }

    #[test]
    fn gtheta_solution_constraints() {
        for n in [2, 3] {
            let g = random_metric(dim(n), 4);
            let p = random_product_structure(&g, 4).unwrap();
            let theta = random_covector(2 * n, 4);
            let f = make_w1_f(&g, &p, &theta);
            let sol = solve_natural_ansatz(&gtheta_ansatz_basis(&g, &p, &theta), &f, &g, &p);
            assert_eq!(sol.coefficient_dimension(), 2);
            assert_eq!(sol.torsion_dimension(), 2);
            let k = 1.0 / (2 * n) as f64;
            let mut points = vec![sol.particular.clone().unwrap()];
            for dir in &sol.null_directions {
                let c: Vec<f64> = points[0]
                    .iter()
                    .zip(dir)
                    .map(|(a, b)| a + 2.0 * b)
                    .collect();
                points.push(c);
            }
            for c in points {
                // coefficients of symmetric-in-(x,y) terms vanish
                for i in [0, 3, 6, 9] {
                    assert!(c[i].abs() < 1e-10, "c[{i}] = {}", c[i]);
                }
                assert!((c[2] + c[1]).abs() < 1e-10);
                assert!((c[5] + c[4]).abs() < 1e-10);
                assert!((c[8] + c[7]).abs() < 1e-10);
                assert!((c[11] + c[10]).abs() < 1e-10);
                assert!((c[1] - c[10]).abs() < 1e-10);
                assert!((c[4] - c[7] - k).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gtheta_solution_without_lee_form_is_trivial() {
        let g = random_metric(dim(2), 7);
        let p = random_product_structure(&g, 7).unwrap();
        let theta = Covector::zeros(4);
        let f = make_w1_f(&g, &p, &theta);
        let sol = solve_natural_ansatz(&gtheta_ansatz_basis(&g, &p, &theta), &f, &g, &p);
        assert!(!sol.is_empty());
        assert_eq!(sol.torsion_dimension(), 0);
        assert_eq!(sol.particular_torsion.unwrap().max_abs(), 0.0);
    }

    #[test]
    fn inconsistent_ansatz_is_empty() {
        // W2 structure tensor: no torsion built from g ⊗ θ (θ = 0) can be natural
        let g = random_metric(dim(2), 3);
        let p = random_product_structure(&g, 3).unwrap();
        let f = make_constrained_f(&g, &p, ClassSpec::W2, 3).unwrap();
        let theta = random_covector(4, 1);
        let sol = solve_natural_ansatz(&gtheta_ansatz_basis(&g, &p, &theta), &f, &g, &p);
        assert!(sol.is_empty());
        assert!(sol.particular_torsion.is_none());
    }

    #[test]
    fn family_hand_values() {
        let (g, p, theta, _) = w1_fixture_4();
        let t = w1_family_torsion(&g, &p, &theta, &FamilyParams::new(1.0, 0.0, dim(2)));
        assert_eq!(t.tensor().get(0, 1, 1), 2.25);
        assert_eq!(t.tensor().get(0, 2, 2), 0.25);
        let zero = w1_family_torsion(
            &g,
            &p,
            &Covector::zeros(4),
            &FamilyParams::new(3.0, -1.0, dim(2)),
        );
        assert_eq!(zero.tensor().max_abs(), 0.0);
        let canon = w1_family_torsion(&g, &p, &theta, &FamilyParams::canonical(dim(2)));
        assert!((canon.tensor() - w1_canonical_torsion(&g, &p, &theta).tensor()).max_abs() < 1e-15);
    }

    #[test]
    fn family_members_are_natural_and_satisfy_case_b_identity() {
        let g = random_metric(dim(2), 11);
        let p = random_product_structure(&g, 11).unwrap();
        let theta = random_covector(4, 11);
        let f = make_w1_f(&g, &p, &theta);
        for (l, m) in [(0.0, 0.0), (1.0, 0.0), (-0.5, 2.0), (0.3, -0.125)] {
            let params = FamilyParams::new(l, m, dim(2));
            let t = w1_family_torsion(&g, &p, &theta, &params);
            let via_basis = gtheta_ansatz_torsion(&g, &p, &theta, &params.gtheta_coefficients());
            assert!((&via_basis - t.tensor()).max_abs() < 1e-12);
            assert!(is_natural(&q_from_torsion(&t), &f, &p, 1e-9).natural);
            assert!(case_b_residual(&t, &f, &p) < 1e-9);
            let (r2, r4) = natural_p2_p4_residuals(&t, &f, &g, &p);
            assert!(r2 < 1e-9 && r4 < 1e-9);
        }
    }

    #[test]
    fn case_b_residual_cases() {
        let p = ProductStructure::standard(dim(2));
        assert_eq!(
            case_b_residual(&TorsionTensor::zero(4), &StructureTensor::zero(4), &p),
            0.0
        );
        let (_, p, _, f) = w1_fixture_4();
        for seed in 1..=20 {
            assert!(case_b_residual(&random_torsion(4, seed), &f, &p) > 0.01);
        }
    }

    #[test]
    fn random_natural_connections() {
        let (g, p, f) = random_w12(2, 12);
        for seed in 0..5 {
            let q = random_natural_transform(&f, &p, seed).unwrap();
            assert!(is_natural(&q, &f, &p, 1e-9).natural);
            let t = torsion_from_q(&q);
            let expected_p1 = half_f_zy_px(&f, &p);
            assert!((project_p1(&t, &p).tensor() - &expected_p1).max_abs() < 1e-9);
            assert!(project_p3(&t, &p).tensor().max_abs() < 1e-9);
            let (r2, r4) = natural_p2_p4_residuals(&t, &f, &g, &p);
            assert!(r2 < 1e-9 && r4 < 1e-9);
            let dec = decompose(&t, &g, &p).unwrap();
            assert!(dec.norms[0] > 0.0);
        }
    }
}
