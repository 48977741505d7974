//! Seeded generation of compatible `(g, P)` pairs and of structure tensors
//! `F(x,y,z) = g((∇_x P)y, z)` lying in a prescribed class.
//!
//! Every random quantity is drawn from ChaCha8 (`rand_chacha`) seeded with
//! `seed_from_u64(seed)`, entries uniform in `[-1, 1]`, filled in row-major
//! order. The same `(seed, dimension)` always yields the same fixture.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{cyclic_map, lee_form};
use crate::error::{Error, Result};
use crate::linalg::RankRevealed;
use crate::tensor::{Arg, Covector, Dim, Metric, ProductStructure, Tensor3};
use crate::tolerance::Tolerance;

/// Retries allowed after a degenerate random draw.
pub const MAX_RETRIES: usize = 8;

/// Norm below which a projected random tensor counts as degenerate.
pub const DEGENERATE_NORM: f64 = 1e-6;

const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(-1.0..=1.0)
}

/// Tensor with i.i.d. entries uniform in `[-1, 1]`.
pub fn random_tensor(dim: usize, seed: u64) -> Tensor3 {
    let mut rng = seeded_rng(seed);
    Tensor3::from_fn(dim, |_, _, _| uniform(&mut rng))
}

pub fn random_covector(dim: usize, seed: u64) -> Covector {
    let mut rng = seeded_rng(seed);
    Covector::new((0..dim).map(|_| uniform(&mut rng)).collect())
}

/// `A Aᵀ + 0.1 I` for a random `A`, so every eigenvalue is at least 0.1.
pub fn random_metric(n: Dim, seed: u64) -> Metric {
    let d = n.total();
    let mut rng = seeded_rng(seed);
    let a = DMatrix::from_row_iterator(d, d, (0..d * d).map(|_| uniform(&mut rng)));
    let g = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
    Metric::new(g).expect("A Aᵀ + 0.1 I is symmetric positive definite")
}

/// Product structure with `+1` on the g-orthonormalized first `n` columns of
/// `vectors` and `-1` on the rest.
pub fn product_structure_from_basis(
    g: &Metric,
    vectors: &DMatrix<f64>,
) -> Result<ProductStructure> {
    let d = g.dim();
    if vectors.nrows() != d || vectors.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: vectors.ncols(),
        });
    }
    let gm = g.components();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
    for c in 0..d {
        let v = vectors.column(c).into_owned();
        let original = v.dot(&(gm * &v)).sqrt();
        let mut w = v;
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for b in &basis {
                let coef = b.dot(&(gm * &w));
                w -= b * coef;
            }
        }
        let norm = w.dot(&(gm * &w)).max(0.0).sqrt();
        if norm.is_nan() || norm <= DEGENERATE_NORM * original {
            return Err(Error::Degenerate {
                what: "Gram–Schmidt on nearly dependent vectors",
                attempts: 1,
            });
        }
        basis.push(w / norm);
    }
    let b = DMatrix::from_columns(&basis);
    let n = d / 2;
    let signs = DVector::from_fn(d, |i, _| if i < n { 1.0 } else { -1.0 });
    let p = &b * DMatrix::from_diagonal(&signs) * b.transpose() * gm;
    ProductStructure::new(p, g)
}

/// Random `P` compatible with `g`, retried with a perturbed seed when the
/// random vectors are nearly dependent.
pub fn random_product_structure(g: &Metric, seed: u64) -> Result<ProductStructure> {
    let d = g.dim();
    for attempt in 0..=MAX_RETRIES {
        let s = seed.wrapping_add(SEED_STRIDE.wrapping_mul(attempt as u64));
        let mut rng = seeded_rng(s);
        let vectors = DMatrix::from_row_iterator(d, d, (0..d * d).map(|_| uniform(&mut rng)));
        match product_structure_from_basis(g, &vectors) {
            Err(Error::Degenerate { .. }) => continue,
            other => return other,
        }
    }
    Err(Error::Degenerate {
        what: "Gram–Schmidt on nearly dependent vectors",
        attempts: MAX_RETRIES + 1,
    })
}

/// A (0,3) tensor satisfying `F(x,y,z) = F(x,z,y) = -F(x,Py,Pz)` and
/// `F(x,y,Pz) = -F(x,Py,z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTensor(Tensor3);

impl StructureTensor {
    pub fn new(f: Tensor3, p: &ProductStructure) -> Result<Self> {
        Self::with_tolerance(f, p, Tolerance::default())
    }

    pub fn with_tolerance(f: Tensor3, p: &ProductStructure, tol: Tolerance) -> Result<Self> {
        if f.dim() != p.dim() {
            return Err(Error::DimensionMismatch {
                expected: p.dim(),
                found: f.dim(),
            });
        }
        if !f.is_finite() {
            return Err(Error::NonFinite("structure tensor"));
        }
        let (what, residual) = symmetry_defect(&f, p);
        if !tol.negligible(residual, f.max_abs()) {
            return Err(Error::InvalidStructureTensor { what, residual });
        }
        Ok(Self(f))
    }

    pub fn zero(dim: usize) -> Self {
        Self(Tensor3::zeros(dim))
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor3 {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.scaled(s))
    }

    /// Components in a new basis; the symmetries are basis independent.
    pub fn transformed(&self, basis: &DMatrix<f64>) -> Self {
        Self(self.0.transformed(basis))
    }
}

/// Worst violated symmetry of a candidate structure tensor.
pub fn symmetry_defect(f: &Tensor3, p: &ProductStructure) -> (&'static str, f64) {
    let swap = (f - &f.permuted([0, 2, 1])).max_abs();
    let pp = (f + &f.compose_p(p, &[1, 2])).max_abs();
    let mixed = (&f.compose_p(p, &[2]) + &f.compose_p(p, &[1])).max_abs();
    [
        ("F(x,y,z) = F(x,z,y)", swap),
        ("F(x,y,z) = -F(x,Py,Pz)", pp),
        ("F(x,y,Pz) = -F(x,Py,z)", mixed),
    ]
    .into_iter()
    .fold(("", 0.0), |acc, c| if c.1 > acc.1 { c } else { acc })
}

/// `¼[A(x,y,z) + A(x,z,y) − A(x,Py,Pz) − A(x,Pz,Py)]`.
pub fn project_to_f_symmetries(a: &Tensor3, p: &ProductStructure) -> StructureTensor {
    StructureTensor(symmetrize(a, p))
}

fn symmetrize(a: &Tensor3, p: &ProductStructure) -> Tensor3 {
    let mut out = a.clone();
    out += &a.permuted([0, 2, 1]);
    out.axpy(-1.0, &a.substitute(p, [Arg::X, Arg::PY, Arg::PZ]));
    out.axpy(-1.0, &a.substitute(p, [Arg::X, Arg::PZ, Arg::PY]));
    out.scaled(0.25)
}

/// `(1/2n){g(x,y)θ(z) + g(x,z)θ(y) − g(x,Py)θ(Pz) − g(x,Pz)θ(Py)}`.
pub fn make_w1_f(g: &Metric, p: &ProductStructure, theta: &Covector) -> StructureTensor {
    let d = g.dim();
    let gm = g.components();
    let gp = gm * p.components();
    let tp = theta.compose_p(p);
    let c = 1.0 / d as f64;
    StructureTensor(Tensor3::from_fn(d, |x, y, z| {
        c * (gm[(x, y)] * theta[z] + gm[(x, z)] * theta[y]
            - gp[(x, y)] * tp[z]
            - gp[(x, z)] * tp[y])
    }))
}

/// Target class for generated structure tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassSpec {
    W0,
    W1,
    W2,
    #[serde(rename = "W1⊕W2")]
    W1PlusW2,
}

impl fmt::Display for ClassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassSpec::W0 => "W0",
            ClassSpec::W1 => "W1",
            ClassSpec::W2 => "W2",
            ClassSpec::W1PlusW2 => "W1⊕W2",
        })
    }
}

/// Orthogonal projector (for the metric-induced inner product on (0,3)
/// tensors) onto the structure tensors of one class at a fixed `(g, P)`.
///
/// The class is the null space of an explicit linear constraint system over
/// the `(2n)³` components; projection solves the normal equations restricted
/// to that null space.
#[derive(Debug, Clone)]
pub struct ClassProjector {
    spec: ClassSpec,
    dim: usize,
    basis: DMatrix<f64>,
    raised_basis: DMatrix<f64>,
    gram: Option<Cholesky<f64, nalgebra::Dyn>>,
}

impl ClassProjector {
    pub fn new(g: &Metric, p: &ProductStructure, spec: ClassSpec) -> Self {
        let d = g.dim();
        let cols = d * d * d;
        let constraints = match spec {
            ClassSpec::W0 => DMatrix::identity(cols, cols),
            _ => Self::constraint_matrix(g, p, spec),
        };
        let basis = RankRevealed::new(&constraints).null_space();
        let raised_cols: Vec<DVector<f64>> = basis
            .column_iter()
            .map(|c| {
                let t =
                    Tensor3::from_vec(d, c.iter().copied().collect()).expect("column length is d³");
                DVector::from_vec(t.raised(g).into_vec())
            })
            .collect();
        let raised_basis = if raised_cols.is_empty() {
            DMatrix::zeros(cols, 0)
        } else {
            DMatrix::from_columns(&raised_cols)
        };
        let gram = if basis.ncols() > 0 {
            Cholesky::new(basis.transpose() * &raised_basis)
        } else {
            None
        };
        Self {
            spec,
            dim: d,
            basis,
            raised_basis,
            gram,
        }
    }

    fn constraint_matrix(g: &Metric, p: &ProductStructure, spec: ClassSpec) -> DMatrix<f64> {
        let d = g.dim();
        let cols = d * d * d;
        let mut blocks: Vec<Vec<f64>> = Vec::with_capacity(cols);
        for c in 0..cols {
            let mut unit = vec![0.0; cols];
            unit[c] = 1.0;
            let e = Tensor3::from_vec(d, unit).expect("unit tensor");
            let mut rows = (&e - &symmetrize(&e, p)).into_vec();
            match spec {
                ClassSpec::W1PlusW2 => rows.extend(cyclic_map(&e, p).into_vec()),
                ClassSpec::W2 => {
                    rows.extend(cyclic_map(&e, p).into_vec());
                    rows.extend_from_slice(lee_form(&e, g).components());
                }
                ClassSpec::W1 => {
                    let w1 = make_w1_f(g, p, &lee_form(&e, g)).into_tensor();
                    rows.extend((&e - &w1).into_vec());
                }
                ClassSpec::W0 => unreachable!("W0 handled by the caller"),
            }
            blocks.push(rows);
        }
        let nrows = blocks[0].len();
        DMatrix::from_fn(nrows, cols, |r, c| blocks[c][r])
    }

    pub fn spec(&self) -> ClassSpec {
        self.spec
    }

    /// Dimension of the class as a linear space.
    pub fn class_dimension(&self) -> usize {
        self.basis.ncols()
    }

    pub fn project(&self, start: &Tensor3) -> Tensor3 {
        assert_eq!(start.dim(), self.dim, "tensor dimension mismatch");
        let Some(gram) = &self.gram else {
            return Tensor3::zeros(self.dim);
        };
        let x0 = DVector::from_column_slice(start.as_slice());
        let rhs = self.raised_basis.transpose() * x0;
        let coef = gram.solve(&rhs);
        let x = &self.basis * coef;
        Tensor3::from_vec(self.dim, x.iter().copied().collect()).expect("length d³")
    }

    /// Projects and rejects results whose norm is below [`DEGENERATE_NORM`].
    pub fn project_nondegenerate(&self, start: &Tensor3, g: &Metric) -> Result<StructureTensor> {
        let f = self.project(start);
        let norm = g.norm3(&f);
        if norm.is_nan() || norm < DEGENERATE_NORM {
            return Err(Error::Degenerate {
                what: "projected structure tensor is (nearly) zero",
                attempts: 1,
            });
        }
        Ok(StructureTensor(f))
    }
}

/// Projects `start` onto a class, rejecting degenerate (near-zero) results.
/// The W0 target returns the zero tensor.
pub fn project_to_class(
    start: &Tensor3,
    g: &Metric,
    p: &ProductStructure,
    spec: ClassSpec,
) -> Result<StructureTensor> {
    if spec == ClassSpec::W0 {
        return Ok(StructureTensor::zero(g.dim()));
    }
    ClassProjector::new(g, p, spec).project_nondegenerate(start, g)
}

/// Random structure tensor in the requested class, seeded and reproducible.
pub fn make_constrained_f(
    g: &Metric,
    p: &ProductStructure,
    spec: ClassSpec,
    seed: u64,
) -> Result<StructureTensor> {
    if spec == ClassSpec::W0 {
        return Ok(StructureTensor::zero(g.dim()));
    }
    let projector = ClassProjector::new(g, p, spec);
    sample_class(&projector, g, p, seed)
}

/// Draws from a prepared projector, retrying with the next seed on degeneracy.
pub fn sample_class(
    projector: &ClassProjector,
    g: &Metric,
    p: &ProductStructure,
    seed: u64,
) -> Result<StructureTensor> {
    if projector.spec() == ClassSpec::W0 {
        return Ok(StructureTensor::zero(g.dim()));
    }
    for attempt in 0..=MAX_RETRIES {
        let start = symmetrize(
            &random_tensor(g.dim(), seed.wrapping_add(attempt as u64)),
            p,
        );
        match projector.project_nondegenerate(&start, g) {
            Err(Error::Degenerate { .. }) => continue,
            other => return other,
        }
    }
    Err(Error::Degenerate {
        what: "projected structure tensor is (nearly) zero",
        attempts: MAX_RETRIES + 1,
    })
}
