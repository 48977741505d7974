//! Natural connections on Riemannian almost product manifolds.
//!
//! Pointwise tensor algebra for a metric `g` and a compatible product
//! structure `P`: structure tensors `F(x,y,z) = g((∇_x P)y, z)` and their
//! classes, the four-way splitting of torsion tensors, natural and canonical
//! connections, and finite-difference chart examples to check it all against.

pub mod chart;
pub mod classifier;
pub mod connections;
pub mod error;
pub mod linalg;
pub mod structure_gen;
pub mod tensor;
pub mod tolerance;
pub mod torsion_space;

pub use chart::{builtin_chart, Chart, FdConfig, FdNaturality};
pub use classifier::{classify, ClassReport, Verdict};
pub use connections::{
    canonical_torsion, AnsatzSolution, FamilyParams, NaturalityCheck, PhiTensor, TransformTensor,
};
pub use error::{Error, Result};
pub use structure_gen::{ClassProjector, ClassSpec, StructureTensor};
pub use tensor::{Arg, Covector, Dim, Metric, ProductStructure, Tensor3};
pub use tolerance::Tolerance;
pub use torsion_space::{
    decompose, Case, CaseLabel, Projector, TorsionDecomposition, TorsionTensor,
};
