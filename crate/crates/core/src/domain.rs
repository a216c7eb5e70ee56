//! Domain types shared by every stage of the pipeline.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column tolerance for [`ProbabilityMatrix`] validation.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// A `d x T` matrix of multinomial counts. Column `t` holds one observation
/// with `N_t` trials, where `N_t` is always the column sum.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    entries: DMatrix<u64>,
    trial_counts: Vec<u64>,
}

impl CountMatrix {
    /// Validates a raw signed matrix. Rejects negative entries and columns
    /// with no trials.
    pub fn from_signed(raw: &DMatrix<i64>) -> Result<Self> {
        if raw.nrows() == 0 || raw.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        for col in 0..raw.ncols() {
            for row in 0..raw.nrows() {
                let value = raw[(row, col)];
                if value < 0 {
                    return Err(Error::NegativeEntry { row, col, value });
                }
            }
        }
        Self::new(raw.map(|v| v as u64))
    }

    pub fn new(entries: DMatrix<u64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut trial_counts = Vec::with_capacity(entries.ncols());
        for (t, col) in entries.column_iter().enumerate() {
            let total: u64 = col.iter().sum();
            if total == 0 {
                return Err(Error::ZeroColumn(t));
            }
            trial_counts.push(total);
        }
        Ok(Self { entries, trial_counts })
    }

    /// Builds from column vectors (one observation each).
    pub fn from_columns(columns: &[Vec<u64>]) -> Result<Self> {
        let t = columns.len();
        let d = columns.first().map_or(0, Vec::len);
        if t == 0 || d == 0 {
            return Err(Error::EmptyMatrix);
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: format!("{d} rows"),
                found: format!("{} rows", bad.len()),
            });
        }
        Self::new(DMatrix::from_fn(d, t, |i, j| columns[j][i]))
    }

    pub fn entries(&self) -> &DMatrix<u64> {
        &self.entries
    }

    pub fn trial_counts(&self) -> &[u64] {
        &self.trial_counts
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn len(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.ncols() == 0
    }

    /// Total number of trials `N = sum_t N_t`.
    pub fn total_trials(&self) -> u64 {
        self.trial_counts.iter().sum()
    }

    pub fn get(&self, i: usize, t: usize) -> u64 {
        self.entries[(i, t)]
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.entries.map(|v| v as f64)
    }

    /// `P~_{it} = X_{it} / N_t`.
    pub fn empirical_probabilities(&self) -> ProbabilityMatrix {
        let mut p = self.to_f64();
        for (t, mut col) in p.column_iter_mut().enumerate() {
            col /= self.trial_counts[t] as f64;
        }
        ProbabilityMatrix { entries: p }
    }

    /// Swaps rows and columns. Fails if the transpose has an empty column.
    pub fn transpose(&self) -> Result<Self> {
        Self::new(self.entries.transpose())
    }
}

/// A non-negative matrix whose columns each sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    entries: DMatrix<f64>,
}

impl ProbabilityMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        for (col, c) in entries.column_iter().enumerate() {
            for (row, &value) in c.iter().enumerate() {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(Error::InvalidProbability { row, col, value });
                }
            }
            let sum = c.sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic { col, sum });
            }
        }
        Ok(Self { entries })
    }

    /// Wraps a matrix the caller has just normalized.
    pub(crate) fn new_unchecked(entries: DMatrix<f64>) -> Self {
        debug_assert!(Self::new(entries.clone()).is_ok());
        Self { entries }
    }

    /// Columns of the uniform distribution over `d` outcomes.
    pub fn uniform(d: usize, cols: usize) -> Self {
        Self { entries: DMatrix::from_element(d, cols, 1.0 / d as f64) }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.entries.column(k).iter().copied().collect()
    }
}

/// A clustering parameter: a label per observation plus one probability
/// vector per cluster. Labels are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    labels: Vec<usize>,
    prototypes: ProbabilityMatrix,
}

impl ClusterModel {
    pub fn new(labels: Vec<usize>, prototypes: ProbabilityMatrix) -> Result<Self> {
        let k = prototypes.ncols();
        if k == 0 {
            return Err(Error::InvalidParameter("model needs at least one cluster".into()));
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::LabelOutOfRange { index, label, k });
        }
        Ok(Self { labels, prototypes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn prototypes(&self) -> &ProbabilityMatrix {
        &self.prototypes
    }

    pub fn k(&self) -> usize {
        self.prototypes.ncols()
    }

    pub fn dim(&self) -> usize {
        self.prototypes.dim()
    }

    /// Number of observations assigned to each cluster.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// True when every cluster has at least one member.
    pub fn is_surjective(&self) -> bool {
        self.cluster_sizes().iter().all(|&n| n > 0)
    }

    /// Applies `perm` to cluster indices: old cluster `k` becomes `perm[k]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let k = self.k();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter(format!("{perm:?} is not a permutation of 0..{k}")));
        }
        let labels = self.labels.iter().map(|&l| perm[l]).collect();
        let mut protos = DMatrix::zeros(self.dim(), k);
        for old in 0..k {
            protos.set_column(perm[old], &self.prototypes.entries.column(old));
        }
        Ok(Self { labels, prototypes: ProbabilityMatrix { entries: protos } })
    }
}

/// Non-negative factors `W` (`d x K`) and `H` (`K x T`).
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub basis: DMatrix<f64>,
    pub weights: DMatrix<f64>,
}

impl Factorization {
    pub fn new(basis: DMatrix<f64>, weights: DMatrix<f64>) -> Result<Self> {
        if basis.ncols() != weights.nrows() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows in weights", basis.ncols()),
                found: format!("{}", weights.nrows()),
            });
        }
        if basis.iter().chain(weights.iter()).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("factors must be finite and non-negative".into()));
        }
        Ok(Self { basis, weights })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn product(&self) -> DMatrix<f64> {
        &self.basis * &self.weights
    }
}

/// Parameters of the selection criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionParams {
    /// Exponent on the cluster trial total in the penalty.
    pub s: f64,
    /// Penalty scale.
    pub gamma: f64,
    /// Lq exponent; 1 is maximum likelihood.
    pub q: f64,
    /// An entry counts as zero when it is at most `zero_threshold` times the
    /// largest entry of its prototype.
    pub zero_threshold: f64,
    /// Relative slack under which a smaller K wins a near-tie.
    pub near_tie_rel: f64,
}

impl Default for CriterionParams {
    fn default() -> Self {
        Self { s: 1.0, gamma: 1.0, q: 1.0, zero_threshold: 1e-6, near_tie_rel: 1e-3 }
    }
}

impl CriterionParams {
    /// `(s, gamma) = (1/2, log N)`.
    pub fn consistent(total_trials: u64) -> Self {
        Self { s: 0.5, gamma: (total_trials as f64).ln(), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return bad("s must be >= 0");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be > 0");
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return bad("q must lie in (0, 1]");
        }
        if !(self.zero_threshold > 0.0 && self.zero_threshold < 1.0) {
            return bad("zero threshold must lie in (0, 1)");
        }
        if !(0.0..=0.1).contains(&self.near_tie_rel) {
            return bad("near-tie tolerance must lie in [0, 0.1]");
        }
        Ok(())
    }
}
