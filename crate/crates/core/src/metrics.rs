//! Adjusted Rand index, KL divergence and the weighted discrepancy functional
//! whose bias drives the penalty term.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::domain::ProbabilityMatrix;
use crate::error::{Error, Result};

fn choose2(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

fn dense_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

/// Hubert–Arabie adjusted Rand index computed from the contingency table.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len() as u64;
    let (a, ka) = dense_labels(a);
    let (b, kb) = dense_labels(b);
    let mut table = vec![0u64; ka * kb];
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&i, &j) in a.iter().zip(&b) {
        table[i * kb + j] += 1;
        rows[i] += 1;
        cols[j] += 1;
    }
    let index: f64 = table.iter().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom.abs() < 1e-12 {
        // both partitions trivial (all-singletons or all-one); agreement is
        // either perfect or undefined
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// `Σ p_i log(p_i / q_i)` with `0 log 0 = 0`; `+∞` on a support violation.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total)
}

/// `φ(P) = −Σ_{t,i} E[X_it] log P_it / (N_t n̄²_{κ*(t)})` with `n̄_k` the
/// size of cluster `k` under the true labels.
pub fn weighted_discrepancy_phi(
    p_eval: &ProbabilityMatrix,
    x_expected: &DMatrix<f64>,
    trial_counts: &[u64],
    true_labels: &[usize],
    k_true: usize,
) -> Result<f64> {
    let (d, t) = x_expected.shape();
    if p_eval.dim() != d || p_eval.ncols() != t || trial_counts.len() != t || true_labels.len() != t {
        return Err(Error::DimensionMismatch {
            expected: format!("{d} x {t}"),
            found: format!(
                "P {} x {}, {} trial counts, {} labels",
                p_eval.dim(),
                p_eval.ncols(),
                trial_counts.len(),
                true_labels.len()
            ),
        });
    }
    let mut sizes = vec![0usize; k_true];
    for (idx, &l) in true_labels.iter().enumerate() {
        if l >= k_true {
            return Err(Error::LabelOutOfRange { index: idx, label: l, k: k_true });
        }
        sizes[l] += 1;
    }
    let p = p_eval.entries();
    let mut total = 0.0;
    for col in 0..t {
        let n_bar = sizes[true_labels[col]] as f64;
        let w = 1.0 / (trial_counts[col] as f64 * n_bar * n_bar);
        for i in 0..d {
            let e = x_expected[(i, col)];
            if e > 0.0 {
                total -= w * e * p[(i, col)].ln();
            }
        }
    }
    Ok(total)
}

/// `½ Σ_k (Z̄_k − 1) / (n̄_k λ̄_k)`.
pub fn theorem1_limit_constant(z_bars: &[usize], n_bars: &[f64], lambda_bars: &[f64]) -> Result<f64> {
    if z_bars.len() != n_bars.len() {
        return Err(Error::LengthMismatch(z_bars.len(), n_bars.len()));
    }
    if z_bars.len() != lambda_bars.len() {
        return Err(Error::LengthMismatch(z_bars.len(), lambda_bars.len()));
    }
    if n_bars.iter().chain(lambda_bars).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("cluster sizes and rates must be positive".into()));
    }
    Ok(0.5
        * z_bars
            .iter()
            .zip(n_bars)
            .zip(lambda_bars)
            .map(|((&z, &n), &l)| (z as f64 - 1.0) / (n * l))
            .sum::<f64>())
}
