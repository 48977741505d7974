//! Rank-revealing helpers built on the SVD.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff below which a direction is treated as null.
pub const RANK_CUTOFF: f64 = 1e-10;

/// Result of a rank-revealing SVD of a (possibly rectangular) matrix.
#[derive(Debug, Clone)]
pub struct RankRevealed {
    /// Singular values in descending order, padded with zeros to the column count.
    pub singular_values: Vec<f64>,
    /// Right singular vectors as columns, ordered like `singular_values`.
    pub right_vectors: DMatrix<f64>,
    pub rank: usize,
}

impl RankRevealed {
    pub fn new(a: &DMatrix<f64>) -> Self {
        Self::with_cutoff(a, RANK_CUTOFF)
    }

    pub fn with_cutoff(a: &DMatrix<f64>, cutoff: f64) -> Self {
        let cols = a.ncols();
        // pad so that the SVD returns a full set of right singular vectors
        let padded = if a.nrows() < cols {
            let mut m = DMatrix::zeros(cols, cols);
            m.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
            m
        } else {
            a.clone()
        };
        let svd = padded.svd(false, true);
        let v_t = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let right_vectors = DMatrix::from_fn(cols, cols, |r, c| v_t[(order[c], r)]);
        let largest = singular_values.first().copied().unwrap_or(0.0);
        let rank = if largest > 0.0 {
            singular_values
                .iter()
                .filter(|&&s| s > cutoff * largest)
                .count()
        } else {
            0
        };
        Self {
            singular_values,
            right_vectors,
            rank,
        }
    }

    /// Orthonormal basis (columns) of the null space.
    pub fn null_space(&self) -> DMatrix<f64> {
        let cols = self.right_vectors.ncols();
        self.right_vectors
            .columns(self.rank, cols - self.rank)
            .into_owned()
    }

    /// Ratio of the smallest kept to the largest discarded singular value;
    /// infinite when nothing nonzero was discarded.
    pub fn gap(&self) -> f64 {
        if self.rank == 0 {
            return f64::INFINITY;
        }
        let kept = self.singular_values[self.rank - 1];
        match self.singular_values.get(self.rank) {
            Some(&d) if d > 0.0 => kept / d,
            _ => f64::INFINITY,
        }
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.max();
    if largest == 0.0 {
        return DVector::zeros(a.ncols());
    }
    svd.solve(b, RANK_CUTOFF * largest)
        .expect("singular vectors were computed")
}
