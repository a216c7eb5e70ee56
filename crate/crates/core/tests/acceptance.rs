//! End-to-end acceptance criteria. Each test prints one PASS/FAIL line and
//! then asserts, so the run shows the full scorecard even when a criterion
//! fails.

use std::io::Write;
use std::time::{Duration, Instant};

use mnselect::datagen;
use mnselect::domain::{ClusterModel, CountMatrix, CriterionParams, ProbabilityMatrix};
use mnselect::experiments::{self, ExperimentConfig};
use mnselect::factorize::{nmf, preliminary_estimate, NmfParams};
use mnselect::lowrank::{reduced_rank_projection, RankProjector};
use mnselect::metrics::adjusted_rand_index;
use mnselect::mlqe::{closed_form_prototypes, cluster_counts, lq_objective, profile_objective, refine_labels_detailed, SearchParams};
use mnselect::rng;
use mnselect::selection::{delta, discrepancy, entropy, penalty, sweep, SweepConfig};
use nalgebra::DMatrix;
use rand::Rng;

/// Writes to the real stdout handle, which the test harness does not capture,
/// so passing criteria show up in a plain `cargo test` run too.
fn report(id: u32, pass: bool, what: &str, detail: String) {
    let line = format!("criterion {id:>2} {} {what}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).and_then(|()| out.flush()).expect("stdout");
}

fn within(elapsed: Duration, minutes: u64) -> bool {
    elapsed <= Duration::from_secs(60 * minutes)
}

fn random_simplex(r: &mut rng::Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| -r.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

#[test]
fn criterion_01_table2() {
    let start = Instant::now();
    let rows = experiments::table2(&[25, 50, 100], 100, 200, &ExperimentConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let floors = [50, 95, 95];
    let counts_ok = rows.iter().zip(floors).all(|(r, f)| r.delta_successes >= f && r.delta_successes > r.aic_successes);
    let pass = counts_ok && within(elapsed, 5);
    let detail = rows
        .iter()
        .map(|r| format!("d={} delta={} aic={}", r.d, r.delta_successes, r.aic_successes))
        .collect::<Vec<_>>()
        .join("; ");
    report(1, pass, "two-cluster success counts vs AIC", format!("{detail}; {:.1}s", elapsed.as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_02_swimmer() {
    let x = datagen::swimmer_matrix();
    let start = Instant::now();
    let r = sweep(&x, &SweepConfig::new(1, 20)).unwrap();
    let elapsed = start.elapsed();
    let pass = r.chosen_k == 16 && within(elapsed, 10);
    let tail: Vec<String> = r.per_k[12..].iter().map(|p| format!("{}:{:.2}", p.k, p.delta)).collect();
    report(
        2,
        pass,
        "swimmer inner dimension",
        format!("chosen K={} (Delta for K>=13: {}); {:.1}s", r.chosen_k, tail.join(" "), elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_03_reduction_identities() {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut r = rng::seeded(seed);
        let d = r.random_range(2..30usize);
        let k = r.random_range(1..8usize);
        let n0 = r.random_range(1..5000u64);
        // one observation per cluster, all with N0 trials
        let x = CountMatrix::new(DMatrix::from_fn(d, k, |i, _| if i == 0 { n0 } else { 0 })).unwrap();
        let protos = DMatrix::from_fn(d, k, |_, _| r.random_range(0.05..1.0));
        let protos = DMatrix::from_fn(d, k, |i, j| protos[(i, j)] / protos.column(j).sum());
        let model = ClusterModel::new((0..k).collect(), ProbabilityMatrix::new(protos).unwrap()).unwrap();
        let n = x.total_trials() as f64;
        let aic = n0 as f64 * penalty(&model, &x, &CriterionParams::default()).unwrap();
        let bic_params = CriterionParams { s: 0.5, gamma: n.ln() / (n0 as f64).sqrt(), ..Default::default() };
        let bic = n0 as f64 * penalty(&model, &x, &bic_params).unwrap();
        let want_aic = ((d - 1) * k) as f64;
        let want_bic = want_aic * n.ln();
        worst = worst.max((aic - want_aic).abs() / want_aic).max((bic - want_bic).abs() / want_bic.max(1e-300));
    }
    let pass = worst <= 1e-12;
    report(3, pass, "AIC/BIC reduction identities on 50 configurations", format!("worst relative error {worst:.2e}"));
    assert!(pass);
}

/// Global maximum of the profile objective over surjective two-cluster labelings.
fn brute_force_two_clusters(x: &CountMatrix, q: f64) -> f64 {
    let t = x.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 1..(1u32 << t) - 1 {
        let labels: Vec<usize> = (0..t).map(|j| ((mask >> j) & 1) as usize).collect();
        best = best.max(profile_objective(&cluster_counts(x, &labels, 2).unwrap(), q));
    }
    best
}

#[test]
fn criterion_04_mlqe_matches_brute_force() {
    let mut hits = 0;
    let mut stalls = Vec::new();
    for seed in 0..50u64 {
        let mut r = rng::seeded(1000 + seed);
        let d = r.random_range(2..=4usize);
        let t = r.random_range(2..=8usize);
        let q = if seed % 2 == 0 { 0.5 } else { 1.0 };
        let protos = [random_simplex(&mut r, d), random_simplex(&mut r, d)];
        let cols: Vec<Vec<u64>> = (0..t)
            .map(|j| {
                let n = r.random_range(5..60u64);
                let mut c = datagen::sample_multinomial(&mut r, n, &protos[j % 2]);
                c[0] += u64::from(c.iter().sum::<u64>() == 0);
                c
            })
            .collect();
        let x = CountMatrix::from_columns(&cols).unwrap();
        let params = NmfParams { seed, ..Default::default() };
        let mut init = preliminary_estimate(&x, 2, &params).unwrap();
        if !init.is_surjective() {
            let mut labels: Vec<usize> = (0..t).map(|_| r.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            init = ClusterModel::new(labels, init.prototypes().clone()).unwrap();
        }
        let out = refine_labels_detailed(&x, &init, &SearchParams { q, seed, ..Default::default() }).unwrap();
        let best = brute_force_two_clusters(&x, q);
        if out.objective >= best - 1e-9 * best.abs().max(1.0) {
            hits += 1;
        } else {
            stalls.push(format!("seed {seed} (q={q}, T={t}): {:.4} < {:.4}", out.objective, best));
        }
    }
    let pass = hits >= 45;
    report(4, pass, "label search reaches the brute-force optimum", format!("{hits}/50; stalls: [{}]", stalls.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_05_closed_form_optimality() {
    let mut failures = 0;
    let mut checked = 0;
    for (qi, q) in [0.3, 0.5, 0.9, 1.0].into_iter().enumerate() {
        for c in 0..100u64 {
            let mut r = rng::seeded(50_000 + 1000 * qi as u64 + c);
            let d = r.random_range(2..=6usize);
            let m: Vec<f64> = (0..d).map(|i| if i > 0 && r.random_bool(0.2) { 0.0 } else { r.random_range(0..100u32) as f64 + 1.0 }).collect();
            let best = closed_form_prototypes(&DMatrix::from_column_slice(d, 1, &m), q).unwrap().column(0);
            let at_best = lq_objective(&m, &best, q);
            let beaten = (0..10_000).any(|_| {
                let cand = random_simplex(&mut r, d);
                lq_objective(&m, &cand, q) > at_best + 1e-12 * at_best.abs()
            });
            failures += usize::from(beaten);
            checked += 1;
        }
    }
    let pass = failures == 0;
    report(5, pass, "closed-form prototypes beat 1e4 random candidates", format!("{failures} of {checked} columns beaten"));
    assert!(pass);
}

#[test]
fn criterion_06_theorem1_constant() {
    let start = Instant::now();
    let row = experiments::theorem1_check(&[10_000], 2_000, 6).unwrap()[0];
    let elapsed = start.elapsed();
    let rel = (row.estimate - row.limit).abs() / row.limit;
    let pass = rel <= 0.10 && within(elapsed, 2);
    report(
        6,
        pass,
        "bias constant at l = 1e4",
        format!("estimate {:.4} +- {:.4} vs limit {:.4} (rel {rel:.3}); {:.1}s", row.estimate, row.std_error, row.limit, elapsed.as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_07_split_direction() {
    let mut min_gap = f64::INFINITY;
    let mut max_cancel = 0.0f64;
    for seed in 0..100 {
        let out = experiments::split_instance(seed).unwrap();
        min_gap = min_gap.min(out.delta_gap);
        max_cancel = max_cancel.max(out.discrepancy_gap.abs());
    }
    let pass = min_gap > 0.0 && max_cancel < 1e-12;
    report(7, pass, "split model always scores worse", format!("min gap {min_gap:.4e}, max discrepancy difference {max_cancel:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_08_merge_direction() {
    let truth = experiments::merge_study_truth();
    let fractions: Vec<f64> = [100u64, 1_000, 10_000]
        .iter()
        .map(|&n| experiments::merge_fraction(&truth, n, 1_000, 8).unwrap())
        .collect();
    let pass = fractions.windows(2).all(|w| w[1] >= w[0]) && fractions[2] >= 0.99;
    report(8, pass, "merged model loses more often as N grows", format!("N=1e2,1e3,1e4: {fractions:?}"));
    assert!(pass);
}

#[test]
fn criterion_09_sbm_clustering() {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let small = experiments::sbm_experiment(40, 100, 6, &cfg).unwrap();
    let large = experiments::sbm_experiment(100, 100, 6, &cfg).unwrap();
    let elapsed = start.elapsed();
    let pass = small.ours >= 0.3 && large.ours >= 0.8 && within(elapsed, 10);
    report(
        9,
        pass,
        "SBM mean ARI",
        format!(
            "n=40: {:.3} (pam {:.3}, elbow {:.3}); n=100: {:.3} (pam {:.3}, elbow {:.3}); {:.1}s",
            small.ours, small.pam, small.elbow, large.ours, large.pam, large.elbow,
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

/// Pair-counting adjusted Rand index.
fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut sa, mut sb, mut total) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in i + 1..n {
            let x = a[i] == a[j];
            let y = b[i] == b[j];
            total += 1.0;
            both += f64::from(u8::from(x && y));
            sa += f64::from(u8::from(x));
            sb += f64::from(u8::from(y));
        }
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < 1e-12 {
        return if both == sa && both == sb { 1.0 } else { 0.0 };
    }
    (both - expected) / (max - expected)
}

#[test]
fn criterion_10_property_suites() {
    let mut failed: Vec<String> = Vec::new();

    // Eckart-Young: tail norm from the eigenvalues of M^T M, and random rank-k
    // candidates never beat the projection
    for seed in 0..50u64 {
        let mut r = rng::seeded(seed);
        let (d, t) = (r.random_range(2..7usize), r.random_range(2..7usize));
        let m = DMatrix::<f64>::from_fn(d, t, |_, _| r.random_range(-5.0..5.0));
        // Gram matrix of the smaller side, so there are exactly min(d, t) eigenvalues
        let gram = if d <= t { &m * m.transpose() } else { m.transpose() * &m };
        let mut eig: Vec<f64> = gram.symmetric_eigenvalues().iter().map(|v| v.max(0.0)).collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let k = r.random_range(1..=d.min(t));
        let err = (&m - reduced_rank_projection(&m, k).unwrap()).norm();
        let oracle = eig[k..].iter().sum::<f64>().sqrt();
        if (err - oracle).abs() > 1e-8 * (1.0 + oracle) {
            failed.push(format!("eckart-young tail seed {seed}"));
        }
        for _ in 0..100 {
            let a = DMatrix::from_fn(d, k, |_, _| r.random_range(-3.0..3.0));
            let b = DMatrix::from_fn(k, t, |_, _| r.random_range(-3.0..3.0));
            if (&m - a * b).norm() < err - 1e-9 {
                failed.push(format!("eckart-young candidate seed {seed}"));
                break;
            }
        }
    }

    // NMF objective never rises
    for seed in 0..30u64 {
        let mut r = rng::seeded(seed);
        let (d, t) = (r.random_range(2..8usize), r.random_range(2..8usize));
        let p = mnselect::lowrank::normalize_columns(&DMatrix::from_fn(d, t, |_, _| r.random_range(0.0..1.0)));
        let k = r.random_range(1..=d.min(t));
        let fit = nmf(&p, k, &NmfParams { seed, ..Default::default() }).unwrap();
        // exact fits bottom out at rounding noise on the scale of ||P||
        let slack = 1e-12 * (1.0 + p.entries().norm());
        if fit.history.windows(2).any(|w| w[1] > w[0] + slack) {
            failed.push(format!("nmf monotonicity seed {seed}"));
        }
    }

    // ARI against the pair-counting oracle
    for seed in 0..300u64 {
        let mut r = rng::seeded(seed);
        let t = r.random_range(2..=8usize);
        let a: Vec<usize> = (0..t).map(|_| r.random_range(0..4)).collect();
        let b: Vec<usize> = (0..t).map(|_| r.random_range(0..4)).collect();
        if (adjusted_rand_index(&a, &b).unwrap() - ari_pairs(&a, &b)).abs() > 1e-12 {
            failed.push(format!("ari oracle seed {seed}"));
        }
    }

    // Gibbs bound and invariance of Delta under relabeling
    for seed in 0..100u64 {
        let mut r = rng::seeded(seed);
        let (d, t) = (r.random_range(2..7usize), r.random_range(3..8usize));
        let cols: Vec<Vec<u64>> = (0..t)
            .map(|_| {
                let mut c: Vec<u64> = (0..d).map(|_| r.random_range(0..20u64)).collect();
                c[0] += 1;
                c
            })
            .collect();
        let x = CountMatrix::from_columns(&cols).unwrap();
        let p = DMatrix::from_fn(d, 3, |i, _| if i > 0 && r.random_bool(0.3) { 0.0 } else { r.random_range(0.01..1.0) });
        let p = DMatrix::from_fn(d, 3, |i, j| p[(i, j)] / p.column(j).sum());
        let mut labels: Vec<usize> = vec![0, 1, 2];
        labels.extend((3..t).map(|_| r.random_range(0..3)));
        let model = ClusterModel::new(labels, ProbabilityMatrix::new(p).unwrap()).unwrap();
        let emp = x.empirical_probabilities();
        let floor: f64 = (0..t).map(|j| entropy(&emp.column(j))).sum();
        if discrepancy(&x, &model).unwrap() < floor - 1e-9 {
            failed.push(format!("gibbs bound seed {seed}"));
        }
        let params = CriterionParams { s: 0.5, gamma: 3.0, ..Default::default() };
        let base = delta(&x, &model, &params).unwrap();
        let permuted = delta(&x, &model.relabel(&[2, 0, 1]).unwrap(), &params).unwrap();
        if (base - permuted).abs() > 1e-12 * base.abs() {
            failed.push(format!("delta permutation seed {seed}"));
        }
    }

    // generators are deterministic functions of their seed
    let pairs = [
        (datagen::two_cluster_sparse(40, 200, 3).unwrap().0, datagen::two_cluster_sparse(40, 200, 3).unwrap().0),
        (datagen::sbm_graphs(&datagen::paper_sbm_pair(20).unwrap(), 2, 4).unwrap().0, datagen::sbm_graphs(&datagen::paper_sbm_pair(20).unwrap(), 2, 4).unwrap().0),
        (datagen::swimmer_matrix(), datagen::swimmer_matrix()),
    ];
    if pairs.iter().any(|(a, b)| a != b) {
        failed.push("generator determinism".into());
    }
    let g1 = datagen::block_poisson_graphs(&datagen::paper_block_specs(0.5), 9).unwrap();
    let g2 = datagen::block_poisson_graphs(&datagen::paper_block_specs(0.5), 9).unwrap();
    if g1 != g2 {
        failed.push("block-poisson determinism".into());
    }
    let projector_a = RankProjector::new(&datagen::swimmer_matrix().to_f64());
    if projector_a.singular_values().iter().filter(|&&s| s > 1e-8 * projector_a.singular_values()[0]).count() != 13 {
        failed.push("swimmer rank".into());
    }

    let pass = failed.is_empty();
    report(10, pass, "property suites", if pass { "all checks hold".into() } else { failed.join(", ") });
    assert!(pass);
}
