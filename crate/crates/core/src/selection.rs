//! The selection criterion `Δ(K) = D(Q̂, κ̂) + penalty(K)`, the sweep over
//! candidate cluster counts, the conventional AIC/BIC penalties, and the
//! merge/split constructions used to probe the criterion.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::domain::{ClusterModel, CountMatrix, CriterionParams, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::factorize::{preliminary_estimate_with, NmfParams};
use crate::lowrank::RankProjector;
use crate::mlqe::{refine_labels, SearchParams};
use crate::rng;

/// Lower bound applied to prototype entries inside the logarithm.
pub const LOG_GUARD: f64 = 1e-300;

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    pub value: f64,
    /// Some observed outcome had (numerically) zero prototype probability.
    pub support_violation: bool,
}

fn check_model(x: &CountMatrix, model: &ClusterModel) -> Result<()> {
    if model.dim() != x.dim() || model.labels().len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} x {}", x.dim(), x.len()),
            found: format!("{} x {}", model.dim(), model.labels().len()),
        });
    }
    Ok(())
}

/// `Σ_t Σ_i P~_it · (−log Q̂_{i,κ̂(t)})`.
pub fn discrepancy(x: &CountMatrix, model: &ClusterModel) -> Result<f64> {
    discrepancy_detail(x, model).map(|d| d.value)
}

pub fn discrepancy_detail(x: &CountMatrix, model: &ClusterModel) -> Result<Discrepancy> {
    check_model(x, model)?;
    let protos = model.prototypes().entries();
    let mut value = 0.0;
    let mut support_violation = false;
    for (t, &k) in model.labels().iter().enumerate() {
        let n = x.trial_counts()[t] as f64;
        let mut term = 0.0;
        for i in 0..x.dim() {
            let c = x.get(i, t);
            if c == 0 {
                continue;
            }
            let q = protos[(i, k)];
            if q < LOG_GUARD {
                support_violation = true;
            }
            term -= c as f64 * q.max(LOG_GUARD).ln();
        }
        value += term / n;
    }
    Ok(Discrepancy { value, support_violation })
}

/// `−Σ_t Σ_i X_it log Q̂_{i,κ̂(t)}`: the negative multinomial log-likelihood
/// without the (model-independent) multinomial coefficients.
pub fn negative_log_likelihood(x: &CountMatrix, model: &ClusterModel) -> Result<f64> {
    check_model(x, model)?;
    let protos = model.prototypes().entries();
    let mut total = 0.0;
    for (t, &k) in model.labels().iter().enumerate() {
        for i in 0..x.dim() {
            let c = x.get(i, t);
            if c > 0 {
                total -= c as f64 * protos[(i, k)].max(LOG_GUARD).ln();
            }
        }
    }
    Ok(total)
}

/// `Ẑ_k`: entries of prototype `k` above `tau` times its largest entry.
pub fn nonzero_counts(prototypes: &ProbabilityMatrix, tau: f64) -> Vec<usize> {
    prototypes
        .entries()
        .column_iter()
        .map(|c| {
            let max = c.iter().copied().fold(0.0, f64::max);
            c.iter().filter(|&&v| v > tau * max).count()
        })
        .collect()
}

/// `N̂_k`: total trials of the observations assigned to each cluster.
pub fn cluster_trials(model: &ClusterModel, x: &CountMatrix) -> Vec<u64> {
    let mut n = vec![0; model.k()];
    for (&l, &nt) in model.labels().iter().zip(x.trial_counts()) {
        n[l] += nt;
    }
    n
}

/// `γ Σ_k (Ẑ_k − 1) / N̂_k^s`.
pub fn penalty(model: &ClusterModel, x: &CountMatrix, params: &CriterionParams) -> Result<f64> {
    check_model(x, model)?;
    let z = nonzero_counts(model.prototypes(), params.zero_threshold);
    let n = cluster_trials(model, x);
    let mut total = 0.0;
    for (k, (&zk, &nk)) in z.iter().zip(&n).enumerate() {
        if nk == 0 {
            return Err(Error::EmptyCluster(k));
        }
        total += (zk as f64 - 1.0) / (nk as f64).powf(params.s);
    }
    Ok(params.gamma * total)
}

/// `Δ = D + penalty`; a model with an empty cluster scores `+∞`.
pub fn delta(x: &CountMatrix, model: &ClusterModel, params: &CriterionParams) -> Result<f64> {
    let d = discrepancy(x, model)?;
    match penalty(model, x, params) {
        Ok(p) => Ok(d + p),
        Err(Error::EmptyCluster(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConventionalKind {
    Aic,
    Bic,
}

/// `(d−1)K` for AIC and `(d−1)K log N` for BIC.
pub fn conventional_penalty(kind: ConventionalKind, k: usize, d: usize, n_total: u64) -> f64 {
    let base = (d as f64 - 1.0) * k as f64;
    match kind {
        ConventionalKind::Aic => base,
        ConventionalKind::Bic => base * (n_total as f64).ln(),
    }
}

/// Classic information criterion: negative log-likelihood plus the
/// conventional penalty (up to a data-only constant).
pub fn conventional_delta(kind: ConventionalKind, x: &CountMatrix, model: &ClusterModel) -> Result<f64> {
    let nll = negative_log_likelihood(x, model)?;
    Ok(nll + conventional_penalty(kind, model.k(), x.dim(), x.total_trials()))
}

/// One candidate `K` in a sweep.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub k: usize,
    pub discrepancy: f64,
    pub penalty: f64,
    pub delta: f64,
    pub z_counts: Vec<usize>,
    pub n_counts: Vec<u64>,
    pub converged: bool,
    pub support_violation: bool,
    pub neg_log_likelihood: f64,
    pub model: ClusterModel,
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub per_k: Vec<SweepRecord>,
    pub chosen_k: usize,
    pub near_tie_rel: f64,
}

impl SelectionReport {
    pub fn record(&self, k: usize) -> Option<&SweepRecord> {
        self.per_k.iter().find(|r| r.k == k)
    }

    pub fn chosen(&self) -> &SweepRecord {
        self.record(self.chosen_k).expect("chosen k is in the sweep")
    }

    /// The K a conventional criterion would pick from the same fitted models.
    pub fn chosen_by_conventional(&self, kind: ConventionalKind, d: usize, n_total: u64) -> usize {
        let scores: Vec<(usize, f64)> = self
            .per_k
            .iter()
            .map(|r| (r.k, r.neg_log_likelihood + conventional_penalty(kind, r.k, d, n_total)))
            .collect();
        select_smallest_near_min(&scores, 0.0)
    }
}

impl fmt::Display for SelectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>4} {:>14} {:>12} {:>14}", "K", "D", "penalty", "Delta")?;
        for r in &self.per_k {
            let mark = if r.k == self.chosen_k { " *" } else { "" };
            writeln!(f, "{:>4} {:>14.4} {:>12.4} {:>14.4}{mark}", r.k, r.discrepancy, r.penalty, r.delta)?;
        }
        write!(f, "chosen K = {}", self.chosen_k)
    }
}

/// Smallest `k` whose score is within `(1 + rel)` of the minimum.
pub fn select_smallest_near_min(scores: &[(usize, f64)], rel: f64) -> usize {
    let min = scores.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let smallest = || scores.iter().map(|s| s.0).min().unwrap_or(1);
    if !min.is_finite() {
        return smallest();
    }
    let bound = min + rel * min.abs();
    scores.iter().filter(|s| s.1 <= bound).map(|s| s.0).min().unwrap_or_else(smallest)
}

/// Settings for [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub criterion: CriterionParams,
    pub nmf: NmfParams,
    /// `search.q` is overridden by `criterion.q`.
    pub search: SearchParams,
    /// Run the label search after the preliminary estimate.
    pub refine: bool,
}

impl SweepConfig {
    pub fn new(k_min: usize, k_max: usize) -> Self {
        Self {
            k_min,
            k_max,
            criterion: CriterionParams::default(),
            nmf: NmfParams::default(),
            search: SearchParams::default(),
            refine: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.nmf.seed = seed;
        self.search.seed = seed;
        self
    }
}

/// Fits every `K` in range and picks the smallest near-minimizer of `Δ`.
pub fn sweep(x: &CountMatrix, cfg: &SweepConfig) -> Result<SelectionReport> {
    cfg.criterion.validate()?;
    cfg.nmf.validate()?;
    let max = x.dim().min(x.len());
    if cfg.k_min == 0 || cfg.k_min > cfg.k_max || cfg.k_max > max {
        return Err(Error::RankOutOfRange { rank: cfg.k_max.max(cfg.k_min), max });
    }
    let projector = RankProjector::new(&x.to_f64());
    let per_k: Vec<SweepRecord> = (cfg.k_min..=cfg.k_max)
        .into_par_iter()
        .map(|k| evaluate_k(x, &projector, k, cfg))
        .collect::<Result<_>>()?;
    let scores: Vec<(usize, f64)> = per_k.iter().map(|r| (r.k, r.delta)).collect();
    let chosen_k = select_smallest_near_min(&scores, cfg.criterion.near_tie_rel);
    Ok(SelectionReport { per_k, chosen_k, near_tie_rel: cfg.criterion.near_tie_rel })
}

fn evaluate_k(x: &CountMatrix, projector: &RankProjector, k: usize, cfg: &SweepConfig) -> Result<SweepRecord> {
    let nmf = NmfParams { seed: rng::derive(cfg.nmf.seed, k as u64), ..cfg.nmf };
    let (prelim, fit) = preliminary_estimate_with(projector, k, &nmf)?;
    if !fit.objective.is_finite() {
        return Err(Error::NonFinite(format!("factorization objective at K = {k}")));
    }
    let model = if cfg.refine {
        let search = SearchParams { q: cfg.criterion.q, seed: rng::derive(cfg.search.seed, 1000 + k as u64), ..cfg.search };
        refine_labels(x, &prelim, &search)?
    } else {
        prelim
    };
    let disc = discrepancy_detail(x, &model)?;
    if disc.value.is_nan() {
        return Err(Error::NonFinite(format!("discrepancy at K = {k}")));
    }
    let (penalty, delta) = match penalty(&model, x, &cfg.criterion) {
        Ok(p) => (p, disc.value + p),
        Err(Error::EmptyCluster(_)) => (f64::INFINITY, f64::INFINITY),
        Err(e) => return Err(e),
    };
    Ok(SweepRecord {
        k,
        discrepancy: disc.value,
        penalty,
        delta,
        z_counts: nonzero_counts(model.prototypes(), cfg.criterion.zero_threshold),
        n_counts: cluster_trials(&model, x),
        converged: fit.converged,
        support_violation: disc.support_violation,
        neg_log_likelihood: negative_log_likelihood(x, &model)?,
        model,
    })
}

/// Fuses the last two clusters. The merged prototype is the trial-weighted
/// average of the two prototypes.
pub fn merge_last_two(truth: &ClusterModel, x: &CountMatrix) -> Result<ClusterModel> {
    check_model(x, truth)?;
    let k = truth.k();
    if k < 2 {
        return Err(Error::KTooSmall(k));
    }
    let n = cluster_trials(truth, x);
    let (na, nb) = (n[k - 2] as f64, n[k - 1] as f64);
    let (wa, wb) = if na + nb > 0.0 { (na / (na + nb), nb / (na + nb)) } else { (0.5, 0.5) };
    let protos = truth.prototypes().entries();
    let merged: DVector<f64> = protos.column(k - 2) * wa + protos.column(k - 1) * wb;
    let mut out = DMatrix::zeros(truth.dim(), k - 1);
    for j in 0..k - 2 {
        out.set_column(j, &protos.column(j));
    }
    out.set_column(k - 2, &(&merged / merged.sum()));
    let labels = truth.labels().iter().map(|&l| l.min(k - 2)).collect();
    ClusterModel::new(labels, ProbabilityMatrix::new(out)?)
}

/// Moves `members` (a proper, non-empty subset of the last cluster) into a
/// new cluster whose prototype duplicates the last one.
pub fn split_last(truth: &ClusterModel, members: &[usize]) -> Result<ClusterModel> {
    let k = truth.k();
    let last = k - 1;
    let in_last = truth.labels().iter().filter(|&&l| l == last).count();
    let mut moved = vec![false; truth.labels().len()];
    for &t in members {
        if t >= moved.len() || truth.labels()[t] != last {
            return Err(Error::InvalidSplit(format!("observation {t} is not in the last cluster")));
        }
        moved[t] = true;
    }
    let count = moved.iter().filter(|&&m| m).count();
    if count == 0 || count == in_last {
        return Err(Error::InvalidSplit("subset must be non-empty and proper".into()));
    }
    let protos = truth.prototypes().entries();
    let mut out = DMatrix::zeros(truth.dim(), k + 1);
    for j in 0..k {
        out.set_column(j, &protos.column(j));
    }
    out.set_column(k, &protos.column(last));
    let labels = truth.labels().iter().zip(&moved).map(|(&l, &m)| if m { k } else { l }).collect();
    ClusterModel::new(labels, ProbabilityMatrix::new_unchecked(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn protos(d: usize, cols: &[&[f64]]) -> ProbabilityMatrix {
        ProbabilityMatrix::new(DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i])).unwrap()
    }

    fn counts(d: usize, cols: &[&[u64]]) -> CountMatrix {
        CountMatrix::new(DMatrix::from_fn(d, cols.len(), |i, j| cols[j][i])).unwrap()
    }

    #[test]
    fn discrepancy_examples() {
        let x = counts(2, &[&[4, 0]]);
        let m = ClusterModel::new(vec![0], protos(2, &[&[1.0, 0.0]])).unwrap();
        assert_eq!(discrepancy(&x, &m).unwrap(), 0.0);

        let x = counts(2, &[&[3, 3]]);
        let m = ClusterModel::new(vec![0], protos(2, &[&[0.5, 0.5]])).unwrap();
        assert_relative_eq!(discrepancy(&x, &m).unwrap(), std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn discrepancy_equals_entropy_when_prototypes_match() {
        let x = counts(3, &[&[1, 2, 3], &[5, 0, 5], &[2, 2, 0]]);
        let p = x.empirical_probabilities();
        let m = ClusterModel::new(vec![0, 1, 2], p.clone()).unwrap();
        let expected: f64 = (0..3).map(|t| entropy(&p.column(t))).sum();
        assert_relative_eq!(discrepancy(&x, &m).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn support_violation_is_flagged_and_finite() {
        let x = counts(2, &[&[1, 1]]);
        let m = ClusterModel::new(vec![0], protos(2, &[&[1.0, 0.0]])).unwrap();
        let d = discrepancy_detail(&x, &m).unwrap();
        assert!(d.support_violation && d.value.is_finite() && d.value > 300.0);
    }

    #[test]
    fn penalty_examples() {
        let x = counts(3, &[&[60, 40, 0]]);
        let single = ClusterModel::new(vec![0], protos(3, &[&[1.0, 0.0, 0.0]])).unwrap();
        let params = CriterionParams { s: 0.3, gamma: 7.0, ..Default::default() };
        assert_eq!(penalty(&single, &x, &params).unwrap(), 0.0);

        let half = ClusterModel::new(vec![0], protos(3, &[&[0.5, 0.5, 0.0]])).unwrap();
        assert_relative_eq!(penalty(&half, &x, &CriterionParams::default()).unwrap(), 0.01, epsilon = 1e-15);

        // two dense clusters, N0 = 50 per observation, T = 4
        let d = 4;
        let x = counts(d, &[&[10, 10, 15, 15], &[20, 10, 10, 10], &[5, 5, 20, 20], &[25, 5, 10, 10]]);
        let dense = protos(d, &[&[0.25; 4], &[0.1, 0.2, 0.3, 0.4]]);
        let m = ClusterModel::new(vec![0, 0, 1, 1], dense).unwrap();
        let expect = 2.0 * (d as f64 - 1.0) / (50.0 * 4.0 / 2.0);
        assert_relative_eq!(penalty(&m, &x, &CriterionParams::default()).unwrap(), expect, epsilon = 1e-15);
    }

    #[test]
    fn penalty_rejects_empty_cluster_and_delta_dominates() {
        let x = counts(2, &[&[1, 1]]);
        let m = ClusterModel::new(vec![0], ProbabilityMatrix::uniform(2, 2)).unwrap();
        assert_eq!(penalty(&m, &x, &CriterionParams::default()), Err(Error::EmptyCluster(1)));
        assert_eq!(delta(&x, &m, &CriterionParams::default()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn conventional_examples() {
        assert_eq!(conventional_penalty(ConventionalKind::Aic, 2, 50, 400), 98.0);
        assert_relative_eq!(conventional_penalty(ConventionalKind::Bic, 2, 50, 400), 98.0 * 400f64.ln());
        assert_eq!(conventional_penalty(ConventionalKind::Aic, 1, 2, 10), 1.0);
    }

    #[test]
    fn zero_penalty_delta_is_discrepancy() {
        let x = counts(2, &[&[3, 0], &[4, 0]]);
        let m = ClusterModel::new(vec![0, 0], protos(2, &[&[1.0, 0.0]])).unwrap();
        let p = CriterionParams::default();
        assert_eq!(delta(&x, &m, &p).unwrap(), discrepancy(&x, &m).unwrap());
    }

    #[test]
    fn near_tie_prefers_smaller_k() {
        assert_eq!(select_smallest_near_min(&[(1, 10.005), (2, 10.0), (3, 11.0)], 1e-3), 1);
        assert_eq!(select_smallest_near_min(&[(1, 10.5), (2, 10.0), (3, 10.0)], 1e-3), 2);
        assert_eq!(select_smallest_near_min(&[(2, f64::INFINITY), (3, f64::INFINITY)], 1e-3), 2);
    }

    #[test]
    fn merge_examples() {
        let x = counts(2, &[&[1, 1], &[2, 2], &[3, 1]]);
        let two = ClusterModel::new(vec![0, 1, 1], protos(2, &[&[0.5, 0.5], &[0.7, 0.3]])).unwrap();
        let one = merge_last_two(&two, &x).unwrap();
        assert_eq!(one.k(), 1);
        assert!(one.labels().iter().all(|&l| l == 0));
        // weights 2/10 and 8/10
        assert_relative_eq!(one.prototypes().column(0)[0], 0.2 * 0.5 + 0.8 * 0.7, epsilon = 1e-15);

        let three = ClusterModel::new(
            vec![0, 1, 2],
            protos(2, &[&[0.5, 0.5], &[0.7, 0.3], &[0.1, 0.9]]),
        )
        .unwrap();
        let m = merge_last_two(&three, &x).unwrap();
        assert_eq!(m.labels(), &[0, 1, 1]);
        assert_relative_eq!(m.prototypes().entries().column(1).sum(), 1.0, epsilon = 1e-12);
        let single = ClusterModel::new(vec![0, 0, 0], protos(2, &[&[0.5, 0.5]])).unwrap();
        assert_eq!(merge_last_two(&single, &x), Err(Error::KTooSmall(1)));
    }

    #[test]
    fn split_examples() {
        let x = counts(2, &[&[1, 1], &[2, 2], &[3, 1]]);
        let m = ClusterModel::new(vec![0, 1, 1], protos(2, &[&[0.5, 0.5], &[0.7, 0.3]])).unwrap();
        let s = split_last(&m, &[2]).unwrap();
        assert_eq!(s.labels(), &[0, 1, 2]);
        assert!(s.is_surjective());
        assert_eq!(s.prototypes().column(1), s.prototypes().column(2));
        assert_eq!(discrepancy(&x, &s).unwrap(), discrepancy(&x, &m).unwrap());
        assert!(matches!(split_last(&m, &[]), Err(Error::InvalidSplit(_))));
        assert!(matches!(split_last(&m, &[1, 2]), Err(Error::InvalidSplit(_))));
        assert!(matches!(split_last(&m, &[0]), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn single_observation_sweep_picks_one() {
        let x = counts(3, &[&[3, 4, 5]]);
        let r = sweep(&x, &SweepConfig::new(1, 1)).unwrap();
        assert_eq!(r.chosen_k, 1);
        assert!(sweep(&x, &SweepConfig::new(1, 2)).is_err());
    }

    mod properties {
        use super::*;
        use crate::metrics::kl_divergence;
        use crate::rng;
        use proptest::prelude::*;
        use rand::Rng;

        fn random_model(r: &mut rng::Rng, d: usize, t: usize, k: usize, zero_prob: f64) -> ClusterModel {
            let mut p = DMatrix::zeros(d, k);
            for c in 0..k {
                for i in 0..d {
                    p[(i, c)] = if i > 0 && r.random_bool(zero_prob) { 0.0 } else { r.random_range(0.01..1.0) };
                }
                let s = p.column(c).sum();
                p.column_mut(c).unscale_mut(s);
            }
            let mut labels: Vec<usize> = (0..k).collect();
            labels.extend((k..t).map(|_| r.random_range(0..k)));
            ClusterModel::new(labels, ProbabilityMatrix::new(p).unwrap()).unwrap()
        }

        fn random_counts(r: &mut rng::Rng, d: usize, t: usize) -> CountMatrix {
            let mut m = DMatrix::from_fn(d, t, |_, _| if r.random_bool(0.3) { 0 } else { r.random_range(1..30u64) });
            for mut c in m.column_iter_mut() {
                c[0] += 1;
            }
            CountMatrix::new(m).unwrap()
        }

        proptest! {
            #[test]
            fn gibbs_lower_bound(seed in 0u64..5000, d in 2usize..7, t in 1usize..7) {
                let mut r = rng::seeded(seed);
                let x = random_counts(&mut r, d, t);
                let k = r.random_range(1..=t);
                let m = random_model(&mut r, d, t, k, 0.3);
                let p = x.empirical_probabilities();
                let floor: f64 = (0..t).map(|c| entropy(&p.column(c))).sum();
                prop_assert!(discrepancy(&x, &m).unwrap() >= floor - 1e-9);
                let exact = ClusterModel::new((0..t).collect(), p).unwrap();
                prop_assert!((discrepancy(&x, &exact).unwrap() - floor).abs() < 1e-9);
            }

            #[test]
            fn discrepancy_is_kl_plus_entropy(seed in 0u64..5000, d in 2usize..7, t in 1usize..7) {
                let mut r = rng::seeded(seed);
                let x = random_counts(&mut r, d, t);
                let k = r.random_range(1..=t);
                let m = random_model(&mut r, d, t, k, 0.0);
                let p = x.empirical_probabilities();
                let expected: f64 = (0..t)
                    .map(|c| {
                        let pc = p.column(c);
                        kl_divergence(&pc, &m.prototypes().column(m.labels()[c])).unwrap() + entropy(&pc)
                    })
                    .sum();
                prop_assert!((discrepancy(&x, &m).unwrap() - expected).abs() < 1e-9);
            }

            #[test]
            fn delta_invariant_under_cluster_permutation(seed in 0u64..5000, d in 2usize..6, t in 3usize..8) {
                let mut r = rng::seeded(seed);
                let x = random_counts(&mut r, d, t);
                let m = random_model(&mut r, d, t, 3, 0.3);
                let params = CriterionParams { s: 0.5, gamma: 2.0, ..Default::default() };
                let base = delta(&x, &m, &params).unwrap();
                for perm in [[1, 2, 0], [2, 1, 0], [0, 2, 1]] {
                    let other = delta(&x, &m.relabel(&perm).unwrap(), &params).unwrap();
                    prop_assert!((base - other).abs() <= 1e-12 * base.abs());
                }
            }

            #[test]
            fn penalty_reduces_to_aic_and_bic(seed in 0u64..5000, d in 2usize..9, k in 1usize..6, n0 in 1u64..500) {
                let mut r = rng::seeded(seed);
                // equal trials per observation, one observation per cluster
                let mut m = DMatrix::zeros(d, k);
                for c in 0..k {
                    let mut left = n0;
                    for i in 0..d - 1 {
                        let v = r.random_range(0..=left);
                        m[(i, c)] = v;
                        left -= v;
                    }
                    m[(d - 1, c)] = left;
                }
                let x = CountMatrix::new(m).unwrap();
                let dense = random_model(&mut r, d, k, k, 0.0);
                let dense = ClusterModel::new((0..k).collect(), dense.prototypes().clone()).unwrap();
                let n_total = x.total_trials() as f64;
                let aic = penalty(&dense, &x, &CriterionParams::default()).unwrap();
                let expected = ((d - 1) * k) as f64;
                prop_assert!((n0 as f64 * aic - expected).abs() <= 1e-12 * expected.max(1.0));
                let bic_params = CriterionParams { s: 0.5, gamma: n_total.ln() / (n0 as f64).sqrt(), ..Default::default() };
                let bic = penalty(&dense, &x, &bic_params).unwrap();
                let expected = ((d - 1) * k) as f64 * n_total.ln();
                prop_assert!((n0 as f64 * bic - expected).abs() <= 1e-12 * expected.max(1.0));
            }
        }
    }
}
