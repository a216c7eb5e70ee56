//! Monte Carlo harnesses for the simulation studies and the empirical checks
//! of the asymptotic results. Replicate `r` always uses seed `base + r`.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::baselines::{elbow_kmeans, pam_silhouette};
use crate::datagen::{self, VectorizeMode};
use crate::domain::{ClusterModel, CountMatrix, CriterionParams, ProbabilityMatrix};
use crate::error::Result;
use crate::factorize::NmfParams;
use crate::lowrank::{projection_mse, truncate_counts, RankProjector};
use crate::metrics::{adjusted_rand_index, theorem1_limit_constant, weighted_discrepancy_phi};
use crate::mlqe::SearchParams;
use crate::rng;
use crate::selection::{delta, discrepancy, merge_last_two, split_last, sweep, ConventionalKind, SweepConfig};

/// Criterion and optimizer settings shared by every experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub criterion: CriterionParams,
    pub nmf: NmfParams,
    pub search: SearchParams,
    pub refine: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            criterion: CriterionParams::default(),
            nmf: NmfParams::default(),
            search: SearchParams::default(),
            refine: true,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn sweep_config(&self, k_min: usize, k_max: usize, seed: u64) -> SweepConfig {
        SweepConfig {
            k_min,
            k_max,
            criterion: self.criterion,
            nmf: NmfParams { seed, ..self.nmf },
            search: SearchParams { seed, ..self.search },
            refine: self.refine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Table2Row {
    pub d: usize,
    pub reps: usize,
    pub delta_successes: usize,
    pub aic_successes: usize,
}

/// For each `d`, counts replicates of the sparse two-cluster design where
/// `Δ` and the conventional AIC each select `K = 2`.
pub fn table2(d_list: &[usize], reps: usize, n_trials: u64, cfg: &ExperimentConfig) -> Result<Vec<Table2Row>> {
    d_list
        .iter()
        .map(|&d| {
            let hits: Vec<(bool, bool)> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let seed = cfg.seed.wrapping_add(r as u64);
                    let (x, _) = datagen::two_cluster_sparse(d, n_trials, seed)?;
                    let report = sweep(&x, &cfg.sweep_config(1, 2, seed))?;
                    let aic = report.chosen_by_conventional(ConventionalKind::Aic, x.dim(), x.total_trials());
                    Ok((report.chosen_k == 2, aic == 2))
                })
                .collect::<Result<_>>()?;
            Ok(Table2Row {
                d,
                reps,
                delta_successes: hits.iter().filter(|h| h.0).count(),
                aic_successes: hits.iter().filter(|h| h.1).count(),
            })
        })
        .collect()
}

/// Mean adjusted Rand index of the three methods against the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AriRow {
    pub ours: f64,
    pub pam: f64,
    pub elbow: f64,
}

fn mean_ari(rows: &[(f64, f64, f64)]) -> AriRow {
    let n = rows.len() as f64;
    AriRow {
        ours: rows.iter().map(|r| r.0).sum::<f64>() / n,
        pam: rows.iter().map(|r| r.1).sum::<f64>() / n,
        elbow: rows.iter().map(|r| r.2).sum::<f64>() / n,
    }
}

fn compare_methods(x: &CountMatrix, truth: &[usize], k_max: usize, seed: u64, cfg: &ExperimentConfig) -> Result<(f64, f64, f64)> {
    let k_max = k_max.min(x.dim()).min(x.len());
    let report = sweep(x, &cfg.sweep_config(1, k_max, seed))?;
    let ours = adjusted_rand_index(report.chosen().model.labels(), truth)?;
    let pam = pam_silhouette(x, 2, x.len().saturating_sub(1).max(2))?;
    let elbow = elbow_kmeans(x, k_max, seed)?;
    Ok((ours, adjusted_rand_index(&pam.labels, truth)?, adjusted_rand_index(&elbow.labels, truth)?))
}

/// Two block-Poisson graphs at intensity `rho`, aggregated to `c` vertices
/// and vectorized in full.
pub fn poisson_blocks_experiment(rho: f64, c: usize, reps: usize, cfg: &ExperimentConfig) -> Result<AriRow> {
    let specs = datagen::paper_block_specs(rho);
    let groups = datagen::contiguous_groups(specs[0].n(), c)?;
    let rows: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            let graphs = datagen::block_poisson_graphs(&specs, seed)?;
            let agg = graphs.iter().map(|g| datagen::aggregate_graph(g, &groups)).collect::<Result<Vec<_>>>()?;
            let x = datagen::vectorize_graphs(&agg, VectorizeMode::Full)?;
            compare_methods(&x, &[0, 1], 2, seed, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(mean_ari(&rows))
}

/// Three graphs from each of the two block models on `n` vertices.
pub fn sbm_experiment(n: usize, reps: usize, k_max: usize, cfg: &ExperimentConfig) -> Result<AriRow> {
    let specs = datagen::paper_sbm_pair(n)?;
    let rows: Vec<(f64, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            let (x, truth) = datagen::sbm_graphs(&specs, 3, seed)?;
            compare_methods(&x, &truth, k_max, seed, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(mean_ari(&rows))
}

/// The bias-check instance: two clusters of one observation each over six
/// outcomes, one structural zero per prototype.
pub fn theorem1_prototypes() -> ProbabilityMatrix {
    let q1 = [0.15, 0.2, 0.2, 0.2, 0.25, 0.0];
    let q2 = [0.0, 0.25, 0.2, 0.2, 0.2, 0.15];
    ProbabilityMatrix::new(DMatrix::from_fn(6, 2, |i, k| if k == 0 { q1[i] } else { q2[i] })).expect("stochastic")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Row {
    pub ell: u64,
    pub estimate: f64,
    pub std_error: f64,
    pub limit: f64,
    /// Replicates where some outcome with positive probability was never
    /// observed (the functional is infinite there); excluded from the mean.
    pub infinite: usize,
}

/// Monte Carlo estimate of `ℓ (E[φ(P̂)] − φ(P*))` with `N_t = ℓ`.
pub fn theorem1_check(ells: &[u64], reps: usize, seed: u64) -> Result<Vec<Theorem1Row>> {
    let truth = ClusterModel::new(vec![0, 1], theorem1_prototypes())?;
    let z: Vec<usize> = (0..2).map(|k| truth.prototypes().column(k).iter().filter(|&&v| v > 0.0).count()).collect();
    let limit = theorem1_limit_constant(&z, &[1.0, 1.0], &[1.0, 1.0])?;
    ells.iter()
        .map(|&ell| {
            let n = [ell, ell];
            let expected = truth.prototypes().entries() * ell as f64;
            let phi_star = weighted_discrepancy_phi(truth.prototypes(), &expected, &n, truth.labels(), 2)?;
            let draws: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let x = datagen::planted_multinomial(&truth, &n, seed.wrapping_add(r as u64))?;
                    let phi = weighted_discrepancy_phi(&x.empirical_probabilities(), &expected, &n, truth.labels(), 2)?;
                    Ok(ell as f64 * (phi - phi_star))
                })
                .collect::<Result<_>>()?;
            let finite: Vec<f64> = draws.iter().copied().filter(|v| v.is_finite()).collect();
            let m = finite.len() as f64;
            let mean = finite.iter().sum::<f64>() / m;
            let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            Ok(Theorem1Row { ell, estimate: mean, std_error: (var / m).sqrt(), limit, infinite: draws.len() - finite.len() })
        })
        .collect()
}

/// Block means of the smoothing study: a 2 x 2 checkerboard of Poisson rates.
pub const THEOREM3_RATES: [[f64; 2]; 2] = [[4.0, 1.0], [2.0, 6.0]];

/// Slowly growing truncation level `⌈2 log(dT)⌉`.
pub fn default_cap(d: usize, t: usize) -> u64 {
    (2.0 * ((d * t) as f64).ln()).ceil() as u64
}

fn theorem3_mean(d: usize, t: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, t, |i, j| THEOREM3_RATES[usize::from(2 * i >= d)][usize::from(2 * j >= t)])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem3Row {
    pub d: usize,
    pub t: usize,
    pub cap: u64,
    pub mse: f64,
    pub mse_untruncated: f64,
}

/// MSE of the rank-2 projection of the truncated matrix against `E[X]`,
/// averaged over replicates. `cap` overrides [`default_cap`].
pub fn theorem3_check(grid: &[(usize, usize)], reps: usize, seed: u64, cap: Option<u64>) -> Result<Vec<Theorem3Row>> {
    grid.iter()
        .map(|&(d, t)| {
            let mean = theorem3_mean(d, t);
            let c = cap.unwrap_or_else(|| default_cap(d, t));
            let pairs: Vec<(f64, f64)> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let mut g = rng::seeded(seed.wrapping_add(r as u64));
                    let raw = mean.map(|m| Poisson::new(m).expect("positive rate").sample(&mut g) as u64);
                    // a zero column would break CountMatrix; give it one count
                    let mut raw = raw;
                    for mut col in raw.column_iter_mut() {
                        if col.sum() == 0 {
                            col[0] = 1;
                        }
                    }
                    let x = CountMatrix::new(raw)?;
                    let y = truncate_counts(&x, c).map(|v| v as f64);
                    let yhat = RankProjector::new(&y).project(2)?;
                    let xhat = RankProjector::new(&x.to_f64()).project(2)?;
                    Ok((projection_mse(&yhat, &mean)?, projection_mse(&xhat, &mean)?))
                })
                .collect::<Result<_>>()?;
            let n = reps as f64;
            Ok(Theorem3Row {
                d,
                t,
                cap: c,
                mse: pairs.iter().map(|p| p.0).sum::<f64>() / n,
                mse_untruncated: pairs.iter().map(|p| p.1).sum::<f64>() / n,
            })
        })
        .collect()
}

/// Prototypes for the merge study: two clusters with partly overlapping
/// supports and two observations each.
pub fn merge_study_truth() -> ClusterModel {
    let q1 = [0.3, 0.25, 0.2, 0.15, 0.1, 0.0, 0.0, 0.0];
    let q2 = [0.0, 0.0, 0.1, 0.15, 0.2, 0.25, 0.15, 0.15];
    let p = ProbabilityMatrix::new(DMatrix::from_fn(8, 2, |i, k| if k == 0 { q1[i] } else { q2[i] })).expect("stochastic");
    ClusterModel::new(vec![0, 0, 1, 1], p).expect("valid labels")
}

/// Fraction of replicates where the merged model scores worse than the
/// truth under `(s, γ) = (1/2, log N)`. `n_total` trials are split evenly.
pub fn merge_fraction(truth: &ClusterModel, n_total: u64, reps: usize, seed: u64) -> Result<f64> {
    let t = truth.labels().len() as u64;
    let n = vec![n_total / t; t as usize];
    let wins: Vec<bool> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let x = datagen::planted_multinomial(truth, &n, seed.wrapping_add(r as u64))?;
            let params = CriterionParams::consistent(x.total_trials());
            let merged = merge_last_two(truth, &x)?;
            Ok(delta(&x, &merged, &params)? > delta(&x, truth, &params)?)
        })
        .collect::<Result<_>>()?;
    Ok(wins.iter().filter(|&&w| w).count() as f64 / reps as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitOutcome {
    pub delta_gap: f64,
    pub discrepancy_gap: f64,
}

/// Random planted instance with its last cluster split in two; reports
/// `Δ(split) − Δ(truth)` and the discrepancy difference.
pub fn split_instance(seed: u64) -> Result<SplitOutcome> {
    use rand::Rng as _;
    let mut g = rng::seeded(seed);
    let k = g.random_range(2..=4usize);
    let d = g.random_range(4..=12usize);
    let mut protos = DMatrix::zeros(d, k);
    for c in 0..k {
        loop {
            for i in 0..d {
                protos[(i, c)] = if g.random_bool(0.3) { 0.0 } else { g.random_range(0.05..1.0) };
            }
            // a single-outcome prototype carries no penalty, so the split
            // would be free
            if protos.column(c).iter().filter(|&&v| v > 0.0).count() >= 2 {
                break;
            }
        }
        let s = protos.column(c).sum();
        protos.column_mut(c).unscale_mut(s);
    }
    // every cluster gets one member; the last gets at least two
    let extra = g.random_range(0..6usize);
    let mut labels: Vec<usize> = (0..k).collect();
    labels.push(k - 1);
    labels.extend((0..extra).map(|_| g.random_range(0..k)));
    let truth = ClusterModel::new(labels, ProbabilityMatrix::new(protos)?)?;
    let n: Vec<u64> = (0..truth.labels().len()).map(|_| g.random_range(20..2000u64)).collect();
    let x = datagen::planted_multinomial(&truth, &n, g.random())?;
    let members: Vec<usize> = (0..truth.labels().len()).filter(|&t| truth.labels()[t] == k - 1).collect();
    let moved = &members[..g.random_range(1..members.len())];
    let split = split_last(&truth, moved)?;
    let params = CriterionParams::consistent(x.total_trials());
    Ok(SplitOutcome {
        delta_gap: delta(&x, &split, &params)? - delta(&x, &truth, &params)?,
        discrepancy_gap: discrepancy(&x, &split)? - discrepancy(&x, &truth)?,
    })
}
