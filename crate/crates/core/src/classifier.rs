//! Lee form, Nijenhuis tensor and class membership of a structure tensor.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::structure_gen::{make_w1_f, StructureTensor};
use crate::tensor::{Arg, Covector, Metric, ProductStructure, Tensor3};

/// Default residual tolerance on the unit-normalized structure tensor.
pub const DEFAULT_CLASS_TOL: f64 = 1e-8;

/// Structure tensors with norm below this are reported as W0 outright.
pub const ZERO_NORM: f64 = 1e-12;

/// `θ_k = g^{ij} F_ijk`.
pub fn lee_form(f: &Tensor3, g: &Metric) -> Covector {
    let d = f.dim();
    let gi = g.inverse();
    Covector::new(
        (0..d)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        acc += gi[(i, j)] * f.get(i, j, k);
                    }
                }
                acc
            })
            .collect(),
    )
}

/// `F(x,y,Pz) + F(y,z,Px) + F(z,x,Py)`; vanishes exactly on W1⊕W2.
pub fn cyclic_map(f: &Tensor3, p: &ProductStructure) -> Tensor3 {
    let mut out = f.substitute(p, [Arg::X, Arg::Y, Arg::PZ]);
    out += &f.substitute(p, [Arg::Y, Arg::Z, Arg::PX]);
    out += &f.substitute(p, [Arg::Z, Arg::X, Arg::PY]);
    out
}

/// `g(N(x,y), z) = F(x,Py,z) − F(y,Px,z) + F(Px,y,z) − F(Py,x,z)`.
pub fn nijenhuis_from_f(f: &StructureTensor, p: &ProductStructure) -> Tensor3 {
    let f = f.tensor();
    let mut out = f.substitute(p, [Arg::X, Arg::PY, Arg::Z]);
    out.axpy(-1.0, &f.substitute(p, [Arg::Y, Arg::PX, Arg::Z]));
    out += &f.substitute(p, [Arg::PX, Arg::Y, Arg::Z]);
    out.axpy(-1.0, &f.substitute(p, [Arg::PY, Arg::X, Arg::Z]));
    out
}

/// Smallest class containing a structure tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    W0,
    W1,
    W2,
    #[serde(rename = "W1⊕W2")]
    W1PlusW2,
    #[serde(rename = "outside W1⊕W2")]
    Outside,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::W0 => "W0",
            Verdict::W1 => "W1",
            Verdict::W2 => "W2",
            Verdict::W1PlusW2 => "W1⊕W2",
            Verdict::Outside => "outside W1⊕W2",
        })
    }
}

/// Residuals of the class conditions, all measured with the norm induced by
/// `g` on the unit-normalized structure tensor (except `f_norm`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// Norm of the structure tensor before normalization.
    pub f_norm: f64,
    pub theta_norm: f64,
    pub residual_w0: f64,
    pub residual_w1: f64,
    pub residual_cyclic: f64,
    pub residual_w2: f64,
    pub nijenhuis_norm: f64,
    pub tol: f64,
    pub verdict: Verdict,
}

/// Classifies `F` by testing, in containment order, W0, W1, W2 and W1⊕W2.
///
/// `F` is scaled to unit norm before the residuals are taken, unless its
/// norm is below [`ZERO_NORM`], in which case the verdict is W0 and the
/// residuals refer to the unscaled tensor.
pub fn classify(f: &StructureTensor, g: &Metric, p: &ProductStructure, tol: f64) -> ClassReport {
    let f_norm = g.norm3(f.tensor());
    let is_zero = f_norm < ZERO_NORM;
    let unit = if is_zero {
        f.clone()
    } else {
        f.scaled(1.0 / f_norm)
    };
    let theta = lee_form(unit.tensor(), g);
    let theta_norm = theta.norm(g);
    let residual_w0 = f_norm;
    let residual_w1 = g.norm3(&(unit.tensor() - make_w1_f(g, p, &theta).tensor()));
    let residual_cyclic = g.norm3(&cyclic_map(unit.tensor(), p));
    let residual_w2 = residual_cyclic.max(theta_norm);
    let nijenhuis_norm = g.norm3(&nijenhuis_from_f(&unit, p));

    let verdict = if is_zero {
        Verdict::W0
    } else if residual_w1 < tol {
        Verdict::W1
    } else if residual_w2 < tol {
        Verdict::W2
    } else if residual_cyclic < tol {
        Verdict::W1PlusW2
    } else {
        Verdict::Outside
    };
    ClassReport {
        f_norm,
        theta_norm,
        residual_w0,
        residual_w1,
        residual_cyclic,
        residual_w2,
        nijenhuis_norm,
        tol,
        verdict,
    }
}
