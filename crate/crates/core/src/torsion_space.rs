//! The four projectors `p1..p4` on torsion-type (0,3) tensors, the induced
//! orthogonal decomposition, and the case analysis of natural torsions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Arg, Metric, ProductStructure, Tensor3};
use crate::tolerance::Tolerance;

/// Default relative threshold below which a torsion component counts as zero.
pub const DEFAULT_CASE_TOL: f64 = 1e-8;

/// Completeness residual (relative to `max(1, ‖T‖)`) treated as a bug.
pub const COMPLETENESS_TOL: f64 = 1e-9;

/// A (0,3) tensor antisymmetric in its first two slots.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TorsionTensor(Tensor3);

impl TorsionTensor {
    /// Rejects input that is not antisymmetric in the first two slots.
    pub fn new(t: Tensor3) -> Result<Self> {
        Self::with_tolerance(t, Tolerance::default())
    }

    pub fn with_tolerance(t: Tensor3, tol: Tolerance) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::NonFinite("torsion tensor"));
        }
        let defect = t.antisymmetry12_defect();
        if !tol.negligible(defect, t.max_abs()) {
            return Err(Error::NotAntisymmetric(defect));
        }
        Ok(Self(t))
    }

    /// Wraps a tensor that is antisymmetric by construction.
    pub(crate) fn from_antisymmetric(t: Tensor3) -> Self {
        debug_assert!(t.antisymmetry12_defect() <= 1e-9 * t.max_abs().max(1.0));
        Self(t)
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
}

/// One of the four torsion projectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Projector {
    P1,
    P2,
    P3,
    P4,
}

impl Projector {
    pub const ALL: [Projector; 4] = [Projector::P1, Projector::P2, Projector::P3, Projector::P4];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Applies the projector to any (0,3) tensor. The operators are linear,
    /// so this is also meaningful off the torsion space.
    pub fn apply_raw(self, t: &Tensor3, p: &ProductStructure) -> Tensor3 {
        use Arg::*;
        let s = |args| t.substitute(p, args);
        match self {
            Projector::P1 | Projector::P2 => {
                // the two eighth-weighted projectors share every term; p2
                // flips the sign of all terms except 2T and -2T(Px,Py,z)
                let sign = if self == Projector::P1 { 1.0 } else { -1.0 };
                let mut out = t.scaled(2.0);
                out.axpy(-2.0, &s([PX, PY, Z]));
                let flipped = [
                    (-1.0, [Y, Z, X]),
                    (-1.0, [Z, X, Y]),
                    (-1.0, [PZ, X, PY]),
                    (1.0, [PY, Z, PX]),
                    (1.0, [Z, PX, PY]),
                    (1.0, [PY, PZ, X]),
                    (1.0, [PZ, PX, Y]),
                    (-1.0, [Y, PZ, PX]),
                ];
                for (c, args) in flipped {
                    out.axpy(sign * c, &s(args));
                }
                out.scaled(0.125)
            }
            Projector::P3 | Projector::P4 => {
                let sign = if self == Projector::P3 { -1.0 } else { 1.0 };
                let mut out = t.clone();
                out += &s([PX, PY, Z]);
                out.axpy(sign, &s([PX, Y, PZ]));
                out.axpy(sign, &s([X, PY, PZ]));
                out.scaled(0.25)
            }
        }
    }

    pub fn apply(self, t: &TorsionTensor, p: &ProductStructure) -> TorsionTensor {
        TorsionTensor::from_antisymmetric(self.apply_raw(t.tensor(), p))
    }
}

impl fmt::Display for Projector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.index() + 1)
    }
}

pub fn project_p1(t: &TorsionTensor, p: &ProductStructure) -> TorsionTensor {
    Projector::P1.apply(t, p)
}

pub fn project_p2(t: &TorsionTensor, p: &ProductStructure) -> TorsionTensor {
    Projector::P2.apply(t, p)
}

pub fn project_p3(t: &TorsionTensor, p: &ProductStructure) -> TorsionTensor {
    Projector::P3.apply(t, p)
}

pub fn project_p4(t: &TorsionTensor, p: &ProductStructure) -> TorsionTensor {
    Projector::P4.apply(t, p)
}

/// Components of a torsion tensor in the four invariant subspaces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorsionDecomposition {
    pub parts: [TorsionTensor; 4],
    pub norms: [f64; 4],
    pub total_norm: f64,
    pub completeness_residual: f64,
}

impl TorsionDecomposition {
    pub fn part(&self, projector: Projector) -> &TorsionTensor {
        &self.parts[projector.index()]
    }

    pub fn norm(&self, projector: Projector) -> f64 {
        self.norms[projector.index()]
    }
}

/// Splits `T` into its four projector components; norms use the metric.
pub fn decompose(
    t: &TorsionTensor,
    g: &Metric,
    p: &ProductStructure,
) -> Result<TorsionDecomposition> {
    let parts = Projector::ALL.map(|pr| pr.apply(t, p));
    let norms = [0, 1, 2, 3].map(|i| g.norm3(parts[i].tensor()));
    let mut sum = Tensor3::zeros(t.dim());
    for part in &parts {
        sum += part.tensor();
    }
    let total_norm = g.norm3(t.tensor());
    let completeness_residual = g.norm3(&(&sum - t.tensor()));
    if completeness_residual.is_nan()
        || completeness_residual > COMPLETENESS_TOL * total_norm.max(1.0)
    {
        return Err(Error::IncompleteDecomposition(completeness_residual));
    }
    Ok(TorsionDecomposition {
        parts,
        norms,
        total_norm,
        completeness_residual,
    })
}

/// Which torsion subspaces carry a natural torsion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Case {
    A,
    B,
    C,
    #[serde(rename = "other")]
    Other,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::A => "A",
            Case::B => "B",
            Case::C => "C",
            Case::Other => "other",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseLabel {
    pub case: Case,
    /// Whether each of the components `p1T..p4T` is nonzero.
    pub nonzero: [bool; 4],
}

impl CaseLabel {
    /// A component counts as zero when its norm is below `tol · ‖T‖`, with
    /// `‖T‖² = Σ ‖p_i T‖²` by orthogonality of the subspaces.
    pub fn from_norms(norms: [f64; 4], tol: f64) -> Self {
        let total = norms.iter().map(|n| n * n).sum::<f64>().sqrt();
        let nonzero = norms.map(|n| total > 0.0 && n >= tol * total);
        let case = match nonzero {
            [true, false, false, false] => Case::A,
            [true, false, false, true] => Case::B,
            [true, true, false, false] => Case::C,
            _ => Case::Other,
        };
        Self { case, nonzero }
    }

    pub fn in_t1(&self) -> bool {
        self.nonzero[0]
    }

    pub fn in_t2(&self) -> bool {
        self.nonzero[1]
    }

    pub fn in_t4(&self) -> bool {
        self.nonzero[3]
    }
}

pub fn case_label(dec: &TorsionDecomposition, tol: f64) -> CaseLabel {
    CaseLabel::from_norms(dec.norms, tol)
}
