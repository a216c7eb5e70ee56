//! Non-negative matrix factorization with Frobenius multiplicative updates,
//! MAP label assignment, and the preliminary estimate that chains projection,
//! clipping, normalization, factorization and assignment.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::domain::{ClusterModel, CountMatrix, Factorization, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::lowrank::{clip_negatives, normalize_columns, RankProjector};
use crate::rng;

/// Floor applied to every factor entry after an update.
pub const FACTOR_FLOOR: f64 = 1e-12;

/// Relative cut used when warm-starting from a converged run.
pub const SNAP_REL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfParams {
    pub max_iters: usize,
    /// Relative change in the objective below which a run stops.
    pub tol: f64,
    /// Additional random starts beyond the first.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for NmfParams {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-6, restarts: 4, seed: 0 }
    }
}

impl NmfParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NmfResult {
    pub factorization: Factorization,
    /// Final `||P - WH||_F`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start of every iteration of the winning run.
    pub history: Vec<f64>,
}

/// Factorizes `p` at inner dimension `k`. The returned basis has unit column
/// sums; the scale moves into the rows of the weights.
pub fn nmf(p: &ProbabilityMatrix, k: usize, params: &NmfParams) -> Result<NmfResult> {
    nmf_matrix(p.entries(), k, params)
}

pub(crate) fn nmf_matrix(v: &DMatrix<f64>, k: usize, params: &NmfParams) -> Result<NmfResult> {
    params.validate()?;
    let max = v.nrows().min(v.ncols());
    if k == 0 || k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    let runs: Vec<NmfResult> = (0..=params.restarts as u64)
        .into_par_iter()
        .map(|r| single_run(v, k, params, params.seed.wrapping_add(r)))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.objective < best.objective { run } else { best })
        .expect("at least one run");
    let polished = polish(v, &best, params);
    let best = if polished.objective < best.objective { polished } else { best };
    Ok(normalize_basis(best))
}

fn single_run(v: &DMatrix<f64>, k: usize, params: &NmfParams, seed: u64) -> NmfResult {
    let (d, t) = v.shape();
    let mut r = rng::seeded(seed);
    let mut w = DMatrix::from_fn(d, k, |_, _| r.random_range(0.1..1.1));
    let h = DMatrix::from_fn(k, t, |_, _| r.random_range(0.1..1.1));
    for mut col in w.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
    iterate(v, w, h, params)
}

/// Multiplicative updates approach exact zeros only sublinearly. This warm
/// start snaps entries below [`SNAP_REL`] of their column maximum to the
/// floor and iterates again; the caller keeps it only if it ends lower.
fn polish(v: &DMatrix<f64>, run: &NmfResult, params: &NmfParams) -> NmfResult {
    let snap = |m: &DMatrix<f64>| {
        let mut m = m.clone();
        for mut col in m.column_iter_mut() {
            let cut = SNAP_REL * col.max();
            col.apply(|x| {
                if *x < cut {
                    *x = FACTOR_FLOOR;
                }
            });
        }
        m
    };
    let f = &run.factorization;
    iterate(v, snap(&f.basis), snap(&f.weights), params)
}

fn iterate(v: &DMatrix<f64>, mut w: DMatrix<f64>, mut h: DMatrix<f64>, params: &NmfParams) -> NmfResult {
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iters {
        let obj = (v - &w * &h).norm();
        if let Some(&prev) = history.last() {
            debug_assert!(obj <= prev * (1.0 + 1e-9) + 1e-9, "objective rose from {prev} to {obj}");
            if prev - obj <= params.tol * prev {
                history.push(obj);
                converged = true;
                break;
            }
        }
        history.push(obj);
        iterations += 1;

        let wtv = w.tr_mul(v);
        let denom = w.tr_mul(&w) * &h;
        h.zip_zip_apply(&wtv, &denom, |hv, num, den| {
            *hv = (*hv * num / den.max(f64::MIN_POSITIVE)).max(FACTOR_FLOOR);
        });
        let vht = v * h.transpose();
        let hht = &h * h.transpose();
        let denom = &w * hht;
        w.zip_zip_apply(&vht, &denom, |wv, num, den| {
            *wv = (*wv * num / den.max(f64::MIN_POSITIVE)).max(FACTOR_FLOOR);
        });
    }
    let objective = (v - &w * &h).norm();
    NmfResult { factorization: Factorization { basis: w, weights: h }, objective, iterations, converged, history }
}

fn normalize_basis(mut res: NmfResult) -> NmfResult {
    let f = &mut res.factorization;
    for j in 0..f.basis.ncols() {
        let s = f.basis.column(j).sum();
        if s > 0.0 {
            f.basis.column_mut(j).unscale_mut(s);
            f.weights.row_mut(j).scale_mut(s);
        }
    }
    res
}

/// Labels each column by its largest weight, breaking exact ties uniformly at
/// random; prototypes are the basis columns scaled to sum to one.
pub fn map_assign(f: &Factorization, seed: u64) -> Result<ClusterModel> {
    let mut r = rng::seeded(seed);
    let mut ties = Vec::new();
    let labels = f
        .weights
        .column_iter()
        .map(|col| {
            let best = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ties.clear();
            ties.extend(col.iter().enumerate().filter(|(_, &v)| v == best).map(|(k, _)| k));
            if ties.len() == 1 {
                ties[0]
            } else {
                ties[r.random_range(0..ties.len())]
            }
        })
        .collect();
    let prototypes = normalize_columns(&f.basis);
    ClusterModel::new(labels, prototypes)
}

/// Projection, clipping, normalization, NMF and MAP assignment at `k`.
pub fn preliminary_estimate(x: &CountMatrix, k: usize, params: &NmfParams) -> Result<ClusterModel> {
    let projector = RankProjector::new(&x.to_f64());
    preliminary_estimate_with(&projector, k, params).map(|(m, _)| m)
}

/// As [`preliminary_estimate`], reusing an SVD of the count matrix.
pub fn preliminary_estimate_with(
    projector: &RankProjector,
    k: usize,
    params: &NmfParams,
) -> Result<(ClusterModel, NmfResult)> {
    let projected = projector.project(k)?;
    let p_hat = normalize_columns(&clip_negatives(&projected));
    let res = nmf(&p_hat, k, params)?;
    let model = map_assign(&res.factorization, rng::derive(params.seed, 0x4d4150))?;
    Ok((model, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowrank::RankProjector;

    fn prob(rows: usize, cols: usize, data: &[f64]) -> ProbabilityMatrix {
        ProbabilityMatrix::new(DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    #[test]
    fn exact_factorization_reaches_zero() {
        // W0 has two prototypes, H0 is an indicator matrix
        let w0 = DMatrix::from_row_slice(4, 2, &[0.5, 0.0, 0.3, 0.1, 0.2, 0.4, 0.0, 0.5]);
        let h0 = DMatrix::from_row_slice(2, 5, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let p = ProbabilityMatrix::new(&w0 * &h0).unwrap();
        let params = NmfParams { max_iters: 5000, tol: 1e-12, ..Default::default() };
        let res = nmf(&p, 2, &params).unwrap();
        assert!(res.objective <= 1e-6, "objective {} after {} iterations", res.objective, res.iterations);
    }

    #[test]
    fn identity_factorizes_exactly() {
        let p = prob(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let params = NmfParams { max_iters: 5000, tol: 1e-14, ..Default::default() };
        let res = nmf(&p, 2, &params).unwrap();
        assert!(res.objective <= 1e-6, "objective {} after {} iterations", res.objective, res.iterations);
    }

    #[test]
    fn rank_one_bounded_by_svd() {
        let p = prob(3, 3, &[0.6, 0.2, 0.1, 0.3, 0.3, 0.2, 0.1, 0.5, 0.7]);
        let res = nmf(&p, 1, &NmfParams::default()).unwrap();
        let svd_err = RankProjector::new(p.entries()).tail_norm(1);
        assert!(res.objective >= svd_err - 1e-12);
        assert!(res.objective <= svd_err + 1e-3);
    }

    #[test]
    fn basis_columns_sum_to_one_and_objective_monotone() {
        let p = prob(3, 4, &[0.6, 0.2, 0.1, 0.3, 0.3, 0.2, 0.1, 0.5, 0.1, 0.6, 0.8, 0.2]);
        let res = nmf(&p, 2, &NmfParams::default()).unwrap();
        for col in res.factorization.basis.column_iter() {
            assert!((col.sum() - 1.0).abs() < 1e-9);
        }
        assert!(res.factorization.basis.iter().chain(res.factorization.weights.iter()).all(|&v| v >= 0.0));
        assert!(res.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12));
    }

    #[test]
    fn rank_checked() {
        let p = prob(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(nmf(&p, 3, &NmfParams::default()), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(nmf(&p, 0, &NmfParams::default()), Err(Error::RankOutOfRange { .. })));
    }

    #[test]
    fn deterministic_given_seed() {
        let p = prob(3, 4, &[0.6, 0.2, 0.1, 0.3, 0.3, 0.2, 0.1, 0.5, 0.1, 0.6, 0.8, 0.2]);
        let a = nmf(&p, 2, &NmfParams::default()).unwrap();
        let b = nmf(&p, 2, &NmfParams::default()).unwrap();
        assert_eq!(a.factorization, b.factorization);
    }

    fn fact(w: &[f64], d: usize, h: &[f64], k: usize) -> Factorization {
        Factorization::new(DMatrix::from_column_slice(d, k, w), DMatrix::from_column_slice(k, h.len() / k, h))
            .unwrap()
    }

    #[test]
    fn map_strict_argmax() {
        let f = fact(&[0.5, 0.5, 0.2, 0.8], 2, &[0.9, 0.1], 2);
        let m = map_assign(&f, 0).unwrap();
        assert_eq!(m.labels(), &[0]);
    }

    #[test]
    fn map_identity_weights() {
        let f = fact(&[1.0, 0.0, 0.0, 1.0], 2, &[1.0, 0.0, 0.0, 1.0], 2);
        assert_eq!(map_assign(&f, 3).unwrap().labels(), &[0, 1]);
    }

    #[test]
    fn map_prototypes_renormalized() {
        let f = fact(&[2.0, 2.0, 1.0, 3.0], 2, &[0.9, 0.1], 2);
        let m = map_assign(&f, 0).unwrap();
        assert_eq!(m.prototypes().column(0), vec![0.5, 0.5]);
        assert_eq!(m.prototypes().column(1), vec![0.25, 0.75]);
    }

    #[test]
    fn map_ties_uniform() {
        let f = fact(&[0.5, 0.5, 0.2, 0.8], 2, &[0.5, 0.5], 2);
        let first = map_assign(&f, 17).unwrap().labels()[0];
        assert_eq!(first, map_assign(&f, 17).unwrap().labels()[0]);
        let ones = (0..10_000u64).filter(|&s| map_assign(&f, s).unwrap().labels()[0] == 1).count();
        let frac = ones as f64 / 10_000.0;
        assert!((frac - 0.5).abs() <= 0.02, "split {frac}");
    }

    #[test]
    fn preliminary_single_cluster_and_single_observation() {
        let x = CountMatrix::new(DMatrix::from_row_slice(3, 3, &[5, 1, 0, 3, 4, 2, 2, 5, 8])).unwrap();
        let m = preliminary_estimate(&x, 1, &NmfParams::default()).unwrap();
        assert!(m.labels().iter().all(|&l| l == 0));

        let x = CountMatrix::new(DMatrix::from_column_slice(3, 1, &[2, 5, 3])).unwrap();
        let m = preliminary_estimate(&x, 1, &NmfParams::default()).unwrap();
        let tv: f64 = m.prototypes().column(0).iter().zip([0.2, 0.5, 0.3]).map(|(a, b)| (a - b).abs()).sum();
        assert!(tv / 2.0 <= 1e-6, "tv {tv}");
    }

    proptest::proptest! {
        #[test]
        fn map_equivariant_under_factor_permutation(seed in 0u64..3000, d in 2usize..6, t in 1usize..8) {
            use rand::Rng;
            let mut r = rng::seeded(seed);
            let k = 3;
            let w = DMatrix::from_fn(d, k, |_, _| r.random_range(0.01..1.0));
            let h = DMatrix::from_fn(k, t, |_, _| r.random_range(0.0..1.0));
            let f = Factorization::new(w.clone(), h.clone()).unwrap();
            let perm = [2usize, 0, 1];
            let mut pw = DMatrix::zeros(d, k);
            let mut ph = DMatrix::zeros(k, t);
            for old in 0..k {
                pw.set_column(perm[old], &w.column(old));
                ph.set_row(perm[old], &h.row(old));
            }
            let a = map_assign(&f, seed).unwrap();
            let b = map_assign(&Factorization::new(pw, ph).unwrap(), seed).unwrap();
            let mapped: Vec<usize> = a.labels().iter().map(|&l| perm[l]).collect();
            proptest::prop_assert_eq!(b.labels(), &mapped[..]);
            for c in 0..k {
                let col = a.prototypes().column(c);
                proptest::prop_assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                proptest::prop_assert_eq!(col, b.prototypes().column(perm[c]));
            }
        }
    }
}
