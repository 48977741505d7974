//! Shared inputs for the kernel benchmarks.

use natcon::structure_gen::{make_constrained_f, random_metric, random_product_structure};
use natcon::{ClassSpec, Dim, Metric, ProductStructure, StructureTensor};

/// Random geometry with a W1⊕W2 structure tensor at half dimension `n`.
pub fn geometry(n: usize, seed: u64) -> (Metric, ProductStructure, StructureTensor) {
    let g = random_metric(Dim::new(n).expect("valid half dimension"), seed);
    let p = random_product_structure(&g, seed).expect("product structure");
    let f = make_constrained_f(&g, &p, ClassSpec::W1PlusW2, seed).expect("structure tensor");
    (g, p, f)
}
