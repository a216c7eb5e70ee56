//! Comparison pipelines: Euclidean PAM with the silhouette rule for the
//! number of clusters, and a spectral elbow followed by k-means.

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;

use crate::domain::CountMatrix;
use crate::error::{Error, Result};
use crate::lowrank::RankProjector;
use crate::rng;

/// Pairwise Euclidean distances between columns.
pub fn column_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let t = x.ncols();
    let mut d = DMatrix::zeros(t, t);
    for a in 0..t {
        for b in a + 1..t {
            let v = (x.column(a) - x.column(b)).norm();
            d[(a, b)] = v;
            d[(b, a)] = v;
        }
    }
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct PamFit {
    pub medoids: Vec<usize>,
    pub labels: Vec<usize>,
    pub cost: f64,
    /// Total cost after BUILD and after each accepted swap.
    pub history: Vec<f64>,
}

fn assign(dist: &DMatrix<f64>, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let labels = (0..dist.nrows())
        .map(|i| {
            let (best, d) = medoids
                .iter()
                .enumerate()
                .map(|(k, &m)| (k, dist[(i, m)]))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            cost += d;
            best
        })
        .collect();
    (labels, cost)
}

/// Partitioning around medoids: greedy BUILD then best-improvement SWAP.
pub fn pam(dist: &DMatrix<f64>, k: usize) -> Result<PamFit> {
    let n = dist.nrows();
    if k == 0 || k > n {
        return Err(Error::RankOutOfRange { rank: k, max: n });
    }
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    for _ in 0..k {
        let best = (0..n)
            .filter(|c| !medoids.contains(c))
            .map(|c| {
                let total: f64 = (0..n).map(|i| nearest[i].min(dist[(i, c)])).sum();
                (c, total)
            })
            .fold((usize::MAX, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        medoids.push(best.0);
        for i in 0..n {
            nearest[i] = nearest[i].min(dist[(i, best.0)]);
        }
    }
    let (_, mut cost) = assign(dist, &medoids);
    let mut history = vec![cost];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for cand in (0..n).filter(|c| !medoids.contains(c)) {
                let mut trial = medoids.clone();
                trial[slot] = cand;
                let (_, c) = assign(dist, &trial);
                if c < cost - 1e-12 * cost.abs().max(1.0) && best.is_none_or(|b| c < b.2) {
                    best = Some((slot, cand, c));
                }
            }
        }
        match best {
            Some((slot, cand, c)) => {
                medoids[slot] = cand;
                cost = c;
                history.push(c);
            }
            None => break,
        }
    }
    let (labels, cost) = assign(dist, &medoids);
    Ok(PamFit { medoids, labels, cost, history })
}

/// Mean of `(b − a) / max(a, b)` over points; singletons score 0.
pub fn mean_silhouette(dist: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let n = labels.len();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    let mut total = 0.0;
    for i in 0..n {
        if sizes[labels[i]] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += dist[(i, j)];
            }
        }
        let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i] && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 && b.is_finite() {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PamSilhouette {
    pub labels: Vec<usize>,
    pub chosen_k: usize,
    pub silhouette: f64,
    /// The answer was forced because only one candidate was admissible
    /// (two observations end up as singleton clusters).
    pub forced: bool,
}

/// PAM for each `k` in range; keeps the `k` with the widest mean
/// silhouette (smaller `k` on ties).
pub fn pam_silhouette(x: &CountMatrix, k_min: usize, k_max: usize) -> Result<PamSilhouette> {
    let t = x.len();
    if t < 2 {
        return Err(Error::InvalidParameter("need at least two observations".into()));
    }
    if t == 2 {
        return Ok(PamSilhouette { labels: vec![0, 1], chosen_k: 2, silhouette: 0.0, forced: true });
    }
    let lo = k_min.max(2);
    let hi = k_max.min(t - 1);
    if lo > hi {
        return Err(Error::RankOutOfRange { rank: k_min, max: t - 1 });
    }
    let dist = column_distances(&x.to_f64());
    let mut best: Option<PamSilhouette> = None;
    for k in lo..=hi {
        let fit = pam(&dist, k)?;
        let s = mean_silhouette(&dist, &fit.labels);
        if best.as_ref().is_none_or(|b| s > b.silhouette + 1e-12) {
            best = Some(PamSilhouette { labels: fit.labels, chosen_k: k, silhouette: s, forced: false });
        }
    }
    Ok(best.expect("non-empty range"))
}

/// Profile-likelihood elbow on a decreasing sequence. The sequence is
/// extended with one zero so that "every value is signal" is a candidate.
/// Returns the size of the leading group, in `1..=values.len()`.
pub fn profile_likelihood_elbow(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.push(0.0);
    let n = v.len();
    let ss = |s: &[f64]| -> f64 {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        s.iter().map(|x| (x - m) * (x - m)).sum()
    };
    // with a shared variance the profile log-likelihood is
    // -(n/2) log(SS/n) + const, so the best split has the smallest SS
    (1..n)
        .map(|q| (q, ss(&v[..q]) + ss(&v[q..])))
        .reduce(|acc, cur| if cur.1 < acc.1 - 1e-12 * acc.1.abs() { cur } else { acc })
        .map_or(1, |best| best.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centers: DMatrix<f64>,
    pub objective: f64,
    pub history: Vec<f64>,
}

fn sq_dist(a: nalgebra::DVectorView<f64>, b: nalgebra::DVectorView<f64>) -> f64 {
    (a - b).norm_squared()
}

fn kmeans_once(points: &DMatrix<f64>, k: usize, seed: u64, max_iters: usize) -> KMeansFit {
    let (dim, n) = points.shape();
    let mut r = rng::seeded(seed);
    // k-means++ seeding
    let mut centers = DMatrix::zeros(dim, k);
    centers.set_column(0, &points.column(r.random_range(0..n)));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(points.column(i), centers.column(0))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = r.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if u < w {
                    idx = i;
                    break;
                }
                u -= w;
            }
            idx
        } else {
            r.random_range(0..n)
        };
        centers.set_column(c, &points.column(pick));
        for i in 0..n {
            nearest[i] = nearest[i].min(sq_dist(points.column(i), centers.column(c)));
        }
    }
    let mut labels = vec![0usize; n];
    let mut history = Vec::new();
    for _ in 0..max_iters {
        let mut objective = 0.0;
        for i in 0..n {
            let (best, d) = (0..k)
                .map(|c| (c, sq_dist(points.column(i), centers.column(c))))
                .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
            labels[i] = best;
            objective += d;
        }
        let stalled = history.last().is_some_and(|&prev: &f64| objective >= prev - 1e-12 * prev.abs());
        history.push(objective);
        if stalled {
            break;
        }
        let mut sums = DMatrix::zeros(dim, k);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let mut col = sums.column_mut(labels[i]);
            col += points.column(i);
            counts[labels[i]] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers.set_column(c, &(sums.column(c) / counts[c] as f64));
            }
        }
    }
    let objective = *history.last().expect("at least one iteration");
    KMeansFit { labels, centers, objective, history }
}

/// Lloyd's algorithm from `restarts` k-means++ seedings; the lowest
/// within-cluster sum of squares wins.
pub fn kmeans(points: &DMatrix<f64>, k: usize, restarts: usize, seed: u64) -> Result<KMeansFit> {
    let n = points.ncols();
    if k == 0 || k > n {
        return Err(Error::RankOutOfRange { rank: k, max: n });
    }
    let fits: Vec<KMeansFit> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| kmeans_once(points, k, seed.wrapping_add(r as u64), 100))
        .collect();
    Ok(fits
        .into_iter()
        .reduce(|a, b| if b.objective < a.objective { b } else { a })
        .expect("at least one restart"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElbowKMeans {
    pub labels: Vec<usize>,
    pub chosen_rank: usize,
}

/// Elbow of the singular values picks the rank `r`; columns projected onto
/// the top `r` left singular vectors are clustered by k-means into `r` groups.
pub fn elbow_kmeans(x: &CountMatrix, k_max: usize, seed: u64) -> Result<ElbowKMeans> {
    let m = x.to_f64();
    let proj = RankProjector::new(&m);
    if k_max == 0 || k_max > proj.max_rank() {
        return Err(Error::RankOutOfRange { rank: k_max, max: proj.max_rank() });
    }
    let rank = profile_likelihood_elbow(proj.singular_values()).min(k_max);
    let scores = proj.left_vectors(rank).transpose() * &m;
    let fit = kmeans(&scores, rank, 10, seed)?;
    Ok(ElbowKMeans { labels: fit.labels, chosen_rank: rank })
}
