//! Reduced-rank projection, truncation and the clip/normalize step that turns
//! a projected count matrix into column-stochastic form.

use nalgebra::DMatrix;

use crate::domain::{CountMatrix, ProbabilityMatrix};
use crate::error::{Error, Result};

/// Columns whose sum falls below this are replaced by the uniform vector.
pub const DEGENERATE_COLUMN_SUM: f64 = 1e-12;

/// Entry-wise truncation level `C` and projection rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationParams {
    pub cap: f64,
    pub rank: usize,
}

impl TruncationParams {
    pub fn new(cap: f64, rank: usize) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::InvalidParameter("truncation cap must be > 0".into()));
        }
        if rank == 0 {
            return Err(Error::InvalidParameter("rank must be >= 1".into()));
        }
        Ok(Self { cap, rank })
    }
}

/// A thin SVD with singular values sorted in descending order, computed once
/// and reused for projections at several ranks.
#[derive(Debug, Clone)]
pub struct RankProjector {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
    v_t: DMatrix<f64>,
}

impl RankProjector {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let svd = m.clone().svd(true, true);
        let u = svd.u.expect("left singular vectors requested");
        let v_t = svd.v_t.expect("right singular vectors requested");
        let sv = svd.singular_values;
        let mut order: Vec<usize> = (0..sv.len()).collect();
        // stable sort keeps decomposition order among exact ties
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        let u = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
        let v_t = DMatrix::from_fn(order.len(), v_t.ncols(), |i, j| v_t[(order[i], j)]);
        let singular_values = order.iter().map(|&j| sv[j]).collect();
        Self { u, singular_values, v_t }
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn max_rank(&self) -> usize {
        self.singular_values.len()
    }

    /// First `k` left singular vectors as columns.
    pub fn left_vectors(&self, k: usize) -> DMatrix<f64> {
        self.u.columns(0, k.min(self.max_rank())).into_owned()
    }

    /// `U_k Sigma_k V_k^T`.
    pub fn project(&self, k: usize) -> Result<DMatrix<f64>> {
        if k == 0 || k > self.max_rank() {
            return Err(Error::RankOutOfRange { rank: k, max: self.max_rank() });
        }
        let mut us = self.u.columns(0, k).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.singular_values[j];
        }
        Ok(us * self.v_t.rows(0, k))
    }

    /// Frobenius error of the rank-`k` projection, `sqrt(sum_{j>k} sigma_j^2)`.
    pub fn tail_norm(&self, k: usize) -> f64 {
        self.singular_values.iter().skip(k).map(|s| s * s).sum::<f64>().sqrt()
    }
}

/// Best rank-`k` approximation in Frobenius norm.
pub fn reduced_rank_projection(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let max = m.nrows().min(m.ncols());
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    RankProjector::new(m).project(k)
}

pub fn clip_negatives(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}

/// Divides each column by its sum; near-zero columns become uniform.
pub fn normalize_columns(m: &DMatrix<f64>) -> ProbabilityMatrix {
    let d = m.nrows();
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let sum = col.sum();
        if sum < DEGENERATE_COLUMN_SUM {
            col.fill(1.0 / d as f64);
        } else {
            col /= sum;
        }
    }
    ProbabilityMatrix::new_unchecked(out)
}

/// `min(X_{it}, C)` entry-wise.
pub fn truncate_counts(x: &CountMatrix, cap: u64) -> DMatrix<u64> {
    x.entries().map(|v| v.min(cap))
}

/// Mean squared entry difference `(1/dT) ||estimate - truth||_F^2`.
pub fn projection_mse(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", truth.shape()),
            found: format!("{:?}", estimate.shape()),
        });
    }
    let n = (estimate.nrows() * estimate.ncols()) as f64;
    Ok((estimate - truth).norm_squared() / n)
}
