//! Seeded synthetic data: sparse two-cluster multinomials, planted models,
//! block-Poisson and stochastic block model graphs, graph aggregation and
//! vectorization, and a procedural Swimmer matrix.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::domain::{ClusterModel, CountMatrix, ProbabilityMatrix};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Width of the shared band of heavy entries in [`two_cluster_sparse`].
pub const DEFAULT_BAND: usize = 10;

/// One multinomial draw via sequential conditional binomials.
pub fn sample_multinomial(rng: &mut Rng, n: u64, p: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; p.len()];
    let mut remaining = n;
    let mut mass = 1.0;
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == p.len() || mass <= 0.0 {
            out[i] = remaining;
            break;
        }
        let frac = (pi / mass).clamp(0.0, 1.0);
        let draw = if frac == 0.0 {
            0
        } else if frac == 1.0 {
            remaining
        } else {
            Binomial::new(remaining, frac).expect("valid binomial").sample(rng)
        };
        out[i] = draw;
        remaining -= draw;
        mass -= pi;
    }
    out
}

/// Column `t` is one draw of `MN(N_t, Q_{κ(t)})`.
pub fn planted_multinomial(model: &ClusterModel, trial_counts: &[u64], seed: u64) -> Result<CountMatrix> {
    if trial_counts.len() != model.labels().len() {
        return Err(Error::LengthMismatch(trial_counts.len(), model.labels().len()));
    }
    if let Some(t) = trial_counts.iter().position(|&n| n == 0) {
        return Err(Error::ZeroColumn(t));
    }
    let mut r = rng::seeded(seed);
    let protos: Vec<Vec<f64>> = (0..model.k()).map(|k| model.prototypes().column(k)).collect();
    let cols: Vec<Vec<u64>> = model
        .labels()
        .iter()
        .zip(trial_counts)
        .map(|(&k, &n)| sample_multinomial(&mut r, n, &protos[k]))
        .collect();
    CountMatrix::from_columns(&cols)
}

/// The pair of sparse prototypes: `(1,…,1, 10,…,10, 0,…,0)` and its reversal.
pub fn two_cluster_prototypes(d: usize, band: usize) -> Result<ProbabilityMatrix> {
    if d < band + 2 || d < 20 {
        return Err(Error::DTooSmall(d));
    }
    let ones = (d - band) / 2;
    let first: Vec<f64> = (0..d)
        .map(|i| match i {
            i if i < ones => 1.0,
            i if i < ones + band => 10.0,
            _ => 0.0,
        })
        .collect();
    let total: f64 = first.iter().sum();
    let m = DMatrix::from_fn(d, 2, |i, k| if k == 0 { first[i] } else { first[d - 1 - i] } / total);
    ProbabilityMatrix::new(m)
}

/// Two observations, one per sparse prototype, with a band of ten heavy
/// entries shared by both.
pub fn two_cluster_sparse(d: usize, n_trials: u64, seed: u64) -> Result<(CountMatrix, ClusterModel)> {
    two_cluster_sparse_with_band(d, DEFAULT_BAND, n_trials, seed)
}

pub fn two_cluster_sparse_with_band(
    d: usize,
    band: usize,
    n_trials: u64,
    seed: u64,
) -> Result<(CountMatrix, ClusterModel)> {
    let truth = ClusterModel::new(vec![0, 1], two_cluster_prototypes(d, band)?)?;
    let x = planted_multinomial(&truth, &[n_trials, n_trials], seed)?;
    Ok((x, truth))
}

/// Rates for one block-Poisson graph: entry `(i, j)` has mean
/// `scale · intensity · B[u, v]` where `u`, `v` are the blocks of `i`, `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGraphSpec {
    pub block_matrix: DMatrix<f64>,
    pub block_size: usize,
    pub intensity: f64,
    pub scale: f64,
}

impl BlockGraphSpec {
    pub fn n(&self) -> usize {
        self.block_matrix.nrows() * self.block_size
    }

    pub fn validate(&self) -> Result<()> {
        if !self.block_matrix.is_square() || self.block_size == 0 {
            return Err(Error::InvalidParameter("block matrix must be square with block_size >= 1".into()));
        }
        if self.block_matrix.iter().any(|&b| !(b >= 0.0)) || !(0.0..=1.0).contains(&self.intensity) || !(self.scale >= 0.0) {
            return Err(Error::InvalidParameter("rates, intensity and scale must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn paper_block_matrices() -> (DMatrix<f64>, DMatrix<f64>) {
    let b1 = DMatrix::from_row_slice(
        5,
        5,
        &[
            0.1, 0.045, 0.015, 0.19, 0.001, //
            0.045, 0.05, 0.035, 0.14, 0.03, //
            0.015, 0.035, 0.08, 0.105, 0.04, //
            0.19, 0.14, 0.105, 0.29, 0.13, //
            0.001, 0.03, 0.04, 0.13, 0.09,
        ],
    );
    let b2 = DMatrix::from_row_slice(
        5,
        5,
        &[
            0.19, 0.14, 0.29, 0.105, 0.13, //
            0.001, 0.03, 0.13, 0.04, 0.09, //
            0.015, 0.035, 0.105, 0.08, 0.04, //
            0.045, 0.05, 0.14, 0.035, 0.03, //
            0.1, 0.045, 0.19, 0.015, 0.001,
        ],
    );
    (b1, b2)
}

/// The two graph specs of the aggregation study: blocks of 20 vertices,
/// base rate 100.
pub fn paper_block_specs(intensity: f64) -> [BlockGraphSpec; 2] {
    let (b1, b2) = paper_block_matrices();
    let spec = |b| BlockGraphSpec { block_matrix: b, block_size: 20, intensity, scale: 100.0 };
    [spec(b1), spec(b2)]
}

/// One Poisson graph per spec, self-loops kept.
pub fn block_poisson_graphs(specs: &[BlockGraphSpec], seed: u64) -> Result<Vec<DMatrix<u64>>> {
    let mut r = rng::seeded(seed);
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        spec.validate()?;
        let n = spec.n();
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let mean = spec.scale * spec.intensity * spec.block_matrix[(i / spec.block_size, j / spec.block_size)];
                if mean > 0.0 {
                    g[(i, j)] = Poisson::new(mean).expect("positive mean").sample(&mut r) as u64;
                }
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// `n` vertices split into `c` contiguous groups of equal size.
pub fn contiguous_groups(n: usize, c: usize) -> Result<Vec<usize>> {
    if c == 0 || !n.is_multiple_of(c) {
        return Err(Error::InvalidPartition(format!("{n} vertices cannot form {c} equal groups")));
    }
    let size = n / c;
    Ok((0..n).map(|v| v / size).collect())
}

/// Sums `g` over group-by-group sub-blocks. `groups[v]` is the group of
/// vertex `v`; groups must be numbered `0..c` with none empty.
pub fn aggregate_graph(g: &DMatrix<u64>, groups: &[usize]) -> Result<DMatrix<u64>> {
    let n = g.nrows();
    if !g.is_square() || groups.len() != n {
        return Err(Error::InvalidPartition(format!("{} labels for a {}x{} graph", groups.len(), g.nrows(), g.ncols())));
    }
    let c = groups.iter().max().map_or(0, |m| m + 1);
    let mut used = vec![false; c];
    groups.iter().for_each(|&u| used[u] = true);
    if let Some(empty) = used.iter().position(|u| !u) {
        return Err(Error::InvalidPartition(format!("group {empty} is empty")));
    }
    let mut out = DMatrix::zeros(c, c);
    for j in 0..n {
        for i in 0..n {
            out[(groups[i], groups[j])] += g[(i, j)];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorizeMode {
    /// All `c²` entries, row-major.
    Full,
    /// Strict upper triangle, row-major, `c(c−1)/2` entries.
    Upper,
}

pub fn vectorize(g: &DMatrix<u64>, mode: VectorizeMode) -> Vec<u64> {
    let c = g.nrows();
    match mode {
        VectorizeMode::Full => (0..c).flat_map(|i| (0..c).map(move |j| (i, j))).map(|ij| g[ij]).collect(),
        VectorizeMode::Upper => (0..c).flat_map(|i| (i + 1..c).map(move |j| (i, j))).map(|ij| g[ij]).collect(),
    }
}

/// Inverse of upper vectorization; the lower triangle and diagonal are zero.
pub fn unvectorize_upper(v: &[u64], c: usize) -> Result<DMatrix<u64>> {
    if v.len() != c * c.saturating_sub(1) / 2 {
        return Err(Error::ShapeMismatch(format!("{} entries do not fill a {c}x{c} upper triangle", v.len())));
    }
    let mut g = DMatrix::zeros(c, c);
    let mut it = v.iter();
    for i in 0..c {
        for j in i + 1..c {
            g[(i, j)] = *it.next().expect("length checked");
        }
    }
    Ok(g)
}

/// Column `t` is graph `t` flattened.
pub fn vectorize_graphs(graphs: &[DMatrix<u64>], mode: VectorizeMode) -> Result<CountMatrix> {
    let c = graphs.first().map_or(0, |g| g.nrows());
    if let Some(bad) = graphs.iter().find(|g| g.nrows() != c || g.ncols() != c) {
        return Err(Error::ShapeMismatch(format!("expected {c}x{c}, found {}x{}", bad.nrows(), bad.ncols())));
    }
    let cols: Vec<Vec<u64>> = graphs.iter().map(|g| vectorize(g, mode)).collect();
    CountMatrix::from_columns(&cols)
}

/// An undirected stochastic block model.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub block_probabilities: DMatrix<f64>,
    pub block_sizes: Vec<usize>,
}

impl SbmSpec {
    pub fn n(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Per-vertex block index.
    pub fn membership(&self) -> Vec<usize> {
        self.block_sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b, s)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.block_probabilities;
        if !b.is_square() || b.nrows() != self.block_sizes.len() {
            return Err(Error::InvalidParameter("one block size per row of the probability matrix".into()));
        }
        if b.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (b - b.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidParameter("block probabilities must be symmetric and in [0, 1]".into()));
        }
        Ok(())
    }
}

/// The two-model setup scaled to `n` vertices: four equal blocks at
/// 0.75/0.25, and three blocks of sizes `(n/4, n/2, n/4)` at 0.6/0.4.
pub fn paper_sbm_pair(n: usize) -> Result<[SbmSpec; 2]> {
    if n < 8 {
        return Err(Error::InvalidParameter(format!("n = {n} is too small for four blocks")));
    }
    let quarter = n / 4;
    let four: Vec<usize> = (0..4).map(|b| quarter + usize::from(b < n % 4)).collect();
    let three = vec![quarter, n - 2 * quarter, quarter];
    let blocks = |b: usize, on: f64, off: f64| DMatrix::from_fn(b, b, |u, v| if u == v { on } else { off });
    Ok([
        SbmSpec { block_probabilities: blocks(4, 0.75, 0.25), block_sizes: four },
        SbmSpec { block_probabilities: blocks(3, 0.6, 0.4), block_sizes: three },
    ])
}

/// One loop-less undirected Bernoulli graph (symmetric adjacency matrix).
pub fn sbm_graph(spec: &SbmSpec, r: &mut Rng) -> DMatrix<u64> {
    let n = spec.n();
    let member = spec.membership();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let p = spec.block_probabilities[(member[i], member[j])];
            if r.random::<f64>() < p {
                g[(i, j)] = 1;
                g[(j, i)] = 1;
            }
        }
    }
    g
}

/// `copies_per_spec` graphs from each spec, vectorized over the strict upper
/// triangle. True labels follow the spec index.
pub fn sbm_graphs(specs: &[SbmSpec], copies_per_spec: usize, seed: u64) -> Result<(CountMatrix, Vec<usize>)> {
    if specs.is_empty() || copies_per_spec == 0 {
        return Err(Error::InvalidParameter("need at least one spec and one copy".into()));
    }
    let n = specs[0].n();
    for s in specs {
        s.validate()?;
        if s.n() != n {
            return Err(Error::ShapeMismatch(format!("specs disagree on vertex count: {n} vs {}", s.n())));
        }
    }
    let mut r = rng::seeded(seed);
    let mut graphs = Vec::new();
    let mut labels = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        for _ in 0..copies_per_spec {
            graphs.push(sbm_graph(spec, &mut r));
            labels.push(k);
        }
    }
    Ok((vectorize_graphs(&graphs, VectorizeMode::Upper)?, labels))
}

pub const SWIMMER_ROWS: usize = 11;
pub const SWIMMER_COLS: usize = 20;
const TORSO_ROWS: std::ops::RangeInclusive<usize> = 4..=6;
const TORSO_COLS: std::ops::RangeInclusive<usize> = 8..=11;

/// Upper-left limb offsets from its joint for each of the four positions.
const LIMB_OFFSETS: [[(i32, i32); 4]; 4] = [
    [(-1, 0), (-2, 0), (-3, 0), (-4, 0)],
    [(-1, -1), (-2, -2), (-3, -3), (-4, -4)],
    [(0, -1), (-1, -2), (-1, -3), (-2, -4)],
    [(0, -1), (0, -2), (0, -3), (0, -4)],
];

/// Joint position and (row, column) mirroring of each limb.
const LIMBS: [((usize, usize), (i32, i32)); 4] = [((4, 7), (1, 1)), ((4, 12), (1, -1)), ((6, 7), (-1, 1)), ((6, 12), (-1, -1))];

fn pixel(r: usize, c: usize) -> usize {
    r * SWIMMER_COLS + c
}

/// Pixels of the torso and the four joints, on in every image.
pub fn swimmer_body_pixels() -> Vec<usize> {
    let mut px: Vec<usize> = TORSO_ROWS.flat_map(|r| TORSO_COLS.map(move |c| pixel(r, c))).collect();
    px.extend(LIMBS.iter().map(|&((r, c), _)| pixel(r, c)));
    px.sort_unstable();
    px
}

/// Pixels drawn by `limb` (0..4) in `position` (0..4), excluding its joint.
pub fn swimmer_limb_pixels(limb: usize, position: usize) -> Vec<usize> {
    let ((jr, jc), (mr, mc)) = LIMBS[limb];
    LIMB_OFFSETS[position]
        .iter()
        .map(|&(dr, dc)| pixel((jr as i32 + mr * dr) as usize, (jc as i32 + mc * dc) as usize))
        .collect()
}

/// Limb positions of image `t`: `t = p0 + 4 p1 + 16 p2 + 64 p3`.
pub fn swimmer_positions(t: usize) -> [usize; 4] {
    [t % 4, (t / 4) % 4, (t / 16) % 4, (t / 64) % 4]
}

/// The 220 x 256 binary Swimmer matrix: each column is a row-major 11 x 20
/// image of a torso with four limbs in one of four positions each.
pub fn swimmer_matrix() -> CountMatrix {
    let body = swimmer_body_pixels();
    let mut x = DMatrix::zeros(SWIMMER_ROWS * SWIMMER_COLS, 256);
    for t in 0..256 {
        for &p in &body {
            x[(p, t)] = 1;
        }
        for (limb, &pos) in swimmer_positions(t).iter().enumerate() {
            for p in swimmer_limb_pixels(limb, pos) {
                x[(p, t)] = 1;
            }
        }
    }
    CountMatrix::new(x).expect("every image has body pixels")
}

/// The 16-factor exact non-negative factorization `X = W H`: factor
/// `4 limb + position` draws that limb position; the body is carried by
/// the four factors of limb 0.
pub fn swimmer_factors() -> (DMatrix<f64>, DMatrix<f64>) {
    let d = SWIMMER_ROWS * SWIMMER_COLS;
    let body = swimmer_body_pixels();
    let mut w = DMatrix::zeros(d, 16);
    let mut h = DMatrix::zeros(16, 256);
    for limb in 0..4 {
        for pos in 0..4 {
            let f = 4 * limb + pos;
            for p in swimmer_limb_pixels(limb, pos) {
                w[(p, f)] = 1.0;
            }
            if limb == 0 {
                for &p in &body {
                    w[(p, f)] = 1.0;
                }
            }
        }
    }
    for t in 0..256 {
        for (limb, &pos) in swimmer_positions(t).iter().enumerate() {
            h[(4 * limb + pos, t)] = 1.0;
        }
    }
    (w, h)
}

/// Plain-text PGM of one column rendered as an image.
pub fn to_pgm(column: &[u64], rows: usize, cols: usize) -> String {
    let max = column.iter().copied().max().unwrap_or(0).max(1);
    let mut out = format!("P2\n{cols} {rows}\n{max}\n");
    for r in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| column[r * cols + c].to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}
