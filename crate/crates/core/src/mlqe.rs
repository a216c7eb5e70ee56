//! Maximum Lq estimation for a fixed number of clusters.
//!
//! For fixed labels the optimal prototypes have a closed form,
//! `Q_ik ∝ M_ik^(1/q)` where `M` holds the per-cluster count totals, so the
//! search only runs over labels. Substituting the closed form gives the
//! profile objective
//!
//! ```text
//! L*(κ; q) = Σ_k Σ_i M_ik (M_ik^(1/q) / Σ_j M_jk^(1/q))^(1-q)  =  Σ_k ‖M_k‖_{1/q}    (q < 1)
//! L*(κ; 1) = Σ_k Σ_i M_ik log(M_ik / Σ_j M_jk)
//! ```
//!
//! which [`refine_labels`] climbs one coordinate of `κ` at a time.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::domain::{ClusterModel, CountMatrix, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams {
    pub q: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { q: 1.0, max_sweeps: 100, seed: 0 }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(Error::InvalidParameter("q must lie in (0, 1]".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

fn is_mle(q: f64) -> bool {
    q >= 1.0
}

/// Per-cluster count totals `M_ik = sum_{t: label(t) = k} X_it`.
pub fn cluster_counts(x: &CountMatrix, labels: &[usize], k: usize) -> Result<DMatrix<f64>> {
    if labels.len() != x.len() {
        return Err(Error::LengthMismatch(labels.len(), x.len()));
    }
    let mut m = DMatrix::zeros(x.dim(), k);
    for (t, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(Error::LabelOutOfRange { index: t, label, k });
        }
        for i in 0..x.dim() {
            m[(i, label)] += x.get(i, t) as f64;
        }
    }
    Ok(m)
}

/// Writes `Q_i ∝ M_i^(1/q)` into `out`; returns false for an all-zero column.
fn prototype_column(m: &[f64], q: f64, out: &mut [f64]) -> bool {
    let max = m.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return false;
    }
    let inv_q = 1.0 / q;
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(m) {
        // ratio^(1/q) with ratio <= 1 cannot overflow
        *o = if v > 0.0 { (v / max).powf(inv_q) } else { 0.0 };
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    true
}

/// Closed-form Lq prototypes for each column of `m`.
pub fn closed_form_prototypes(m: &DMatrix<f64>, q: f64) -> Result<ProbabilityMatrix> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter("q must lie in (0, 1]".into()));
    }
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for k in 0..m.ncols() {
        let col: Vec<f64> = m.column(k).iter().copied().collect();
        let mut proto = vec![0.0; col.len()];
        if !prototype_column(&col, q, &mut proto) {
            return Err(Error::EmptyCluster(k));
        }
        out.set_column(k, &nalgebra::DVector::from_vec(proto));
    }
    Ok(ProbabilityMatrix::new_unchecked(out))
}

/// Contribution of one cluster's count column to `L*`.
fn column_value(m: &[f64], q: f64) -> f64 {
    if is_mle(q) {
        let total: f64 = m.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        m.iter().filter(|&&v| v > 0.0).map(|&v| v * (v / total).ln()).sum()
    } else {
        let max = m.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return 0.0;
        }
        let inv_q = 1.0 / q;
        let s: f64 = m.iter().filter(|&&v| v > 0.0).map(|&v| (v / max).powf(inv_q)).sum();
        max * s.powf(q)
    }
}

/// The profile objective `L*(κ; q)` evaluated on cluster totals.
pub fn profile_objective(m: &DMatrix<f64>, q: f64) -> f64 {
    m.column_iter().map(|c| column_value(c.as_slice(), q)).sum()
}

/// The Lq log-likelihood `Σ M_ik (Q_ik^(1-q) - 1)/(1-q)` at the closed-form
/// prototypes. It is an affine transform of [`profile_objective`] for fixed
/// data and tends to the q = 1 value as `q -> 1`.
pub fn lq_log_likelihood(m: &DMatrix<f64>, q: f64) -> f64 {
    if is_mle(q) {
        profile_objective(m, q)
    } else {
        (profile_objective(m, q) - m.sum()) / (1.0 - q)
    }
}

/// Lq objective of an arbitrary probability column: `Σ M_i Q_i^(1-q)/(1-q)`
/// for q < 1 and `Σ M_i log Q_i` at q = 1.
pub fn lq_objective(m: &[f64], proto: &[f64], q: f64) -> f64 {
    m.iter()
        .zip(proto)
        .filter(|(&mi, _)| mi > 0.0)
        .map(|(&mi, &p)| if is_mle(q) { mi * p.ln() } else { mi * p.powf(1.0 - q) / (1.0 - q) })
        .sum()
}

/// Outcome of [`refine_labels_detailed`].
#[derive(Debug, Clone)]
pub struct Refinement {
    pub model: ClusterModel,
    pub objective: f64,
    pub initial_objective: f64,
    pub sweeps: usize,
    pub moves: usize,
}

/// Greedy coordinate ascent on `L*` starting from `init`'s labels.
pub fn refine_labels(x: &CountMatrix, init: &ClusterModel, params: &SearchParams) -> Result<ClusterModel> {
    refine_labels_detailed(x, init, params).map(|r| r.model)
}

pub fn refine_labels_detailed(x: &CountMatrix, init: &ClusterModel, params: &SearchParams) -> Result<Refinement> {
    params.validate()?;
    if init.labels().len() != x.len() || init.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} x {}", x.dim(), x.len()),
            found: format!("{} x {}", init.dim(), init.labels().len()),
        });
    }
    let (d, t_len, k) = (x.dim(), x.len(), init.k());
    let q = params.q;
    let cols: Vec<Vec<f64>> = (0..t_len).map(|t| (0..d).map(|i| x.get(i, t) as f64).collect()).collect();
    let mut labels = init.labels().to_vec();
    let mut sizes = init.cluster_sizes();
    let mut totals = vec![vec![0.0; d]; k];
    for (t, &l) in labels.iter().enumerate() {
        totals[l].iter_mut().zip(&cols[t]).for_each(|(m, v)| *m += v);
    }
    let mut values: Vec<f64> = totals.iter().map(|m| column_value(m, q)).collect();
    let initial_objective: f64 = values.iter().sum();

    let mut r = rng::seeded(params.seed);
    let mut order: Vec<usize> = (0..t_len).collect();
    let mut scratch = vec![0.0; d];
    let mut removed = vec![0.0; d];
    let (mut sweeps, mut moves) = (0, 0);
    while sweeps < params.max_sweeps {
        sweeps += 1;
        order.shuffle(&mut r);
        let mut changed = false;
        for &t in &order {
            let a = labels[t];
            // moves that would empty a cluster are not allowed
            if sizes[a] <= 1 || k == 1 {
                continue;
            }
            removed.iter_mut().zip(&totals[a]).zip(&cols[t]).for_each(|((o, m), v)| *o = m - v);
            let removed_value = column_value(&removed, q);
            let mut best: Option<(usize, f64, f64)> = None;
            for b in (0..k).filter(|&b| b != a) {
                scratch.iter_mut().zip(&totals[b]).zip(&cols[t]).for_each(|((o, m), v)| *o = m + v);
                let added_value = column_value(&scratch, q);
                let gain = removed_value + added_value - values[a] - values[b];
                let eps = 1e-12 * (values[a].abs() + values[b].abs() + 1.0);
                if gain > eps && best.is_none_or(|(_, g, _)| gain > g) {
                    best = Some((b, gain, added_value));
                }
            }
            if let Some((b, _, added_value)) = best {
                totals[a].copy_from_slice(&removed);
                totals[b].iter_mut().zip(&cols[t]).for_each(|(m, v)| *m += v);
                values[a] = removed_value;
                values[b] = added_value;
                sizes[a] -= 1;
                sizes[b] += 1;
                labels[t] = b;
                moves += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut protos = DMatrix::zeros(d, k);
    let mut col = vec![0.0; d];
    for (j, m) in totals.iter().enumerate() {
        if !prototype_column(m, q, &mut col) {
            col.fill(1.0 / d as f64);
        }
        protos.set_column(j, &nalgebra::DVector::from_column_slice(&col));
    }
    let model = ClusterModel::new(labels, ProbabilityMatrix::new_unchecked(protos))?;
    let m = cluster_counts(x, model.labels(), k)?;
    Ok(Refinement { objective: profile_objective(&m, q), model, initial_objective, sweeps, moves })
}
