//! Python bindings: count matrices, the K sweep, the generators and the
//! evaluation metrics.

use engine::datagen;
use engine::selection::{self, SweepConfig};
use engine::{ClusterModel, CriterionParams, Error, NmfParams, ProbabilityMatrix, SearchParams};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonFinite(_) | Error::NotStochastic { .. } | Error::InvalidProbability { .. } => {
            PyArithmeticError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows_to_matrix<T: Copy + nalgebra::Scalar>(rows: &[Vec<T>]) -> PyResult<DMatrix<T>> {
    let d = rows.len();
    let t = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != t) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(d, t, |i, j| rows[i][j]))
}

fn matrix_to_rows<T: Copy + nalgebra::Scalar>(m: &DMatrix<T>) -> Vec<Vec<T>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Non-negative integer matrix; rows are outcomes, columns are observations.
#[pyclass(frozen, module = "mnselect_py")]
pub struct CountMatrix {
    inner: engine::CountMatrix,
}

#[pymethods]
impl CountMatrix {
    #[new]
    fn new(rows: Vec<Vec<u64>>) -> PyResult<Self> {
        let m = rows_to_matrix(&rows)?;
        engine::CountMatrix::new(m).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn from_columns(columns: Vec<Vec<u64>>) -> PyResult<Self> {
        engine::CountMatrix::from_columns(&columns).map(|inner| Self { inner }).map_err(to_py)
    }

    /// Reads the CSV format used by the command-line tool.
    #[staticmethod]
    #[pyo3(signature = (path, header = false))]
    fn read_csv(path: &str, header: bool) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        engine::io::read_count_matrix(std::io::BufReader::new(file), header)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.dim(), self.inner.len())
    }

    #[getter]
    fn trial_counts(&self) -> Vec<u64> {
        self.inner.trial_counts().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn rows(&self) -> Vec<Vec<u64>> {
        matrix_to_rows(self.inner.entries())
    }

    /// Column-normalized frequencies as a list of rows.
    fn empirical_probabilities(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.empirical_probabilities().entries())
    }

    fn transpose(&self) -> PyResult<Self> {
        self.inner.transpose().map(|inner| Self { inner }).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("CountMatrix(dim={}, len={})", self.inner.dim(), self.inner.len())
    }
}

/// Per-K results of a sweep.
#[pyclass(frozen, module = "mnselect_py")]
pub struct SelectionReport {
    inner: engine::SelectionReport,
}

#[pymethods]
impl SelectionReport {
    #[getter]
    fn chosen_k(&self) -> usize {
        self.inner.chosen_k
    }

    #[getter]
    fn ks(&self) -> Vec<usize> {
        self.inner.per_k.iter().map(|r| r.k).collect()
    }

    #[getter]
    fn discrepancies(&self) -> Vec<f64> {
        self.inner.per_k.iter().map(|r| r.discrepancy).collect()
    }

    #[getter]
    fn penalties(&self) -> Vec<f64> {
        self.inner.per_k.iter().map(|r| r.penalty).collect()
    }

    #[getter]
    fn deltas(&self) -> Vec<f64> {
        self.inner.per_k.iter().map(|r| r.delta).collect()
    }

    /// Labels (0-based) at the chosen K, or at `k` when given.
    #[pyo3(signature = (k = None))]
    fn labels(&self, k: Option<usize>) -> PyResult<Vec<usize>> {
        let rec = match k {
            None => self.inner.chosen(),
            Some(k) => self.inner.record(k).ok_or_else(|| PyValueError::new_err(format!("K = {k} was not fitted")))?,
        };
        Ok(rec.model.labels().to_vec())
    }

    /// Prototype columns at the chosen K, or at `k`, as a list of rows.
    #[pyo3(signature = (k = None))]
    fn prototypes(&self, k: Option<usize>) -> PyResult<Vec<Vec<f64>>> {
        let rec = match k {
            None => self.inner.chosen(),
            Some(k) => self.inner.record(k).ok_or_else(|| PyValueError::new_err(format!("K = {k} was not fitted")))?,
        };
        Ok(matrix_to_rows(rec.model.prototypes().entries()))
    }

    /// K picked by the classic criterion (`"aic"` or `"bic"`).
    fn chosen_by(&self, kind: &str, x: &CountMatrix) -> PyResult<usize> {
        let kind = match kind {
            "aic" => selection::ConventionalKind::Aic,
            "bic" => selection::ConventionalKind::Bic,
            other => return Err(PyValueError::new_err(format!("unknown criterion '{other}'"))),
        };
        Ok(self.inner.chosen_by_conventional(kind, x.inner.dim(), x.inner.total_trials()))
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

/// Fits K = k_min..k_max and picks the smallest near-minimizer of the criterion.
#[pyfunction]
#[pyo3(signature = (x, k_min = 1, k_max = None, s = 1.0, gamma = 1.0, q = 1.0, tau = 1e-6, near_tie = 1e-3, seed = 0, refine = true, restarts = None, max_iters = None))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    x: &CountMatrix,
    k_min: usize,
    k_max: Option<usize>,
    s: f64,
    gamma: f64,
    q: f64,
    tau: f64,
    near_tie: f64,
    seed: u64,
    refine: bool,
    restarts: Option<usize>,
    max_iters: Option<usize>,
) -> PyResult<SelectionReport> {
    let dn = NmfParams::default();
    let cfg = SweepConfig {
        k_min,
        k_max: k_max.unwrap_or_else(|| x.inner.dim().min(x.inner.len())),
        criterion: CriterionParams { s, gamma, q, zero_threshold: tau, near_tie_rel: near_tie },
        nmf: NmfParams { restarts: restarts.unwrap_or(dn.restarts), max_iters: max_iters.unwrap_or(dn.max_iters), ..dn },
        search: SearchParams::default(),
        refine,
    }
    .with_seed(seed);
    let x = &x.inner;
    py.detach(|| selection::sweep(x, &cfg)).map(|inner| SelectionReport { inner }).map_err(to_py)
}

fn model_from(labels: Vec<usize>, prototypes: &[Vec<f64>]) -> PyResult<ClusterModel> {
    let p = ProbabilityMatrix::new(rows_to_matrix(prototypes)?).map_err(to_py)?;
    ClusterModel::new(labels, p).map_err(to_py)
}

/// Discrepancy plus penalty of a fixed model; `prototypes` is a list of rows.
#[pyfunction]
#[pyo3(signature = (x, labels, prototypes, s = 1.0, gamma = 1.0, tau = 1e-6))]
fn delta(x: &CountMatrix, labels: Vec<usize>, prototypes: Vec<Vec<f64>>, s: f64, gamma: f64, tau: f64) -> PyResult<f64> {
    let model = model_from(labels, &prototypes)?;
    let params = CriterionParams { s, gamma, zero_threshold: tau, ..Default::default() };
    params.validate().map_err(to_py)?;
    selection::delta(&x.inner, &model, &params).map_err(to_py)
}

#[pyfunction]
fn discrepancy(x: &CountMatrix, labels: Vec<usize>, prototypes: Vec<Vec<f64>>) -> PyResult<f64> {
    let model = model_from(labels, &prototypes)?;
    selection::discrepancy(&x.inner, &model).map_err(to_py)
}

#[pyfunction]
fn adjusted_rand_index(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    engine::metrics::adjusted_rand_index(&a, &b).map_err(to_py)
}

#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    engine::metrics::kl_divergence(&p, &q).map_err(to_py)
}

/// The 220 x 256 binary Swimmer matrix.
#[pyfunction]
fn swimmer_matrix() -> CountMatrix {
    CountMatrix { inner: datagen::swimmer_matrix() }
}

/// Two observations from the sparse two-cluster design; returns `(x, labels)`.
#[pyfunction]
#[pyo3(signature = (d, n_trials = 200, seed = 0, band = datagen::DEFAULT_BAND))]
fn two_cluster_sparse(d: usize, n_trials: u64, seed: u64, band: usize) -> PyResult<(CountMatrix, Vec<usize>)> {
    let (inner, truth) = datagen::two_cluster_sparse_with_band(d, band, n_trials, seed).map_err(to_py)?;
    Ok((CountMatrix { inner }, truth.labels().to_vec()))
}

/// `copies` graphs from each of the two block models on `n` vertices,
/// upper triangles vectorized; returns `(x, labels)`.
#[pyfunction]
#[pyo3(signature = (n, copies = 3, seed = 0))]
fn sbm_graphs(n: usize, copies: usize, seed: u64) -> PyResult<(CountMatrix, Vec<usize>)> {
    let specs = datagen::paper_sbm_pair(n).map_err(to_py)?;
    let (inner, truth) = datagen::sbm_graphs(&specs, copies, seed).map_err(to_py)?;
    Ok((CountMatrix { inner }, truth))
}

#[pymodule]
fn mnselect_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CountMatrix>()?;
    m.add_class::<SelectionReport>()?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(discrepancy, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(swimmer_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(two_cluster_sparse, m)?)?;
    m.add_function(wrap_pyfunction!(sbm_graphs, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
