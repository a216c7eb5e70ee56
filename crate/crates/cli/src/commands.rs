use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mnselect::datagen::{self, VectorizeMode};
use mnselect::experiments;
use mnselect::io::{count_matrix_table, labels_table, read_count_matrix, report_table, Provenance, Table};
use mnselect::selection::{sweep as run_sweep, SweepConfig};
use mnselect::CountMatrix;

use crate::config::PipelineArgs;
use crate::CliError;

/// Largest K tried by `sweep` when `--kmax` is not given.
pub const DEFAULT_KMAX_CAP: usize = 20;

fn write_table(table: &Table, provenance: &Provenance, output: Option<&Path>) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Input(format!("cannot write output: {e}"));
    match output {
        Some(path) => {
            let file = File::create(path).map_err(io_err)?;
            table.write(io::BufWriter::new(file), provenance)?;
        }
        None => {
            let stdout = io::stdout();
            table.write(stdout.lock(), provenance)?;
        }
    }
    Ok(())
}

fn read_matrix(path: &Path, header: bool) -> Result<CountMatrix, CliError> {
    if path == Path::new("-") {
        return Ok(read_count_matrix(io::stdin().lock(), header)?);
    }
    let file = File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    read_count_matrix(BufReader::new(file), header).map_err(|e| match e {
        mnselect::Error::Parse { line, col, msg } => {
            CliError::Input(format!("{}:{line}:{col}: {msg}", path.display()))
        }
        other => other.into(),
    })
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Count matrix CSV (rows are outcomes, columns are observations); `-` reads stdin.
    pub matrix: PathBuf,
    /// The first line of the CSV is a header.
    #[arg(long)]
    pub header: bool,
    /// Cluster the rows instead of the columns.
    #[arg(long)]
    pub transpose: bool,
    #[arg(long)]
    pub kmin: Option<usize>,
    /// Defaults to min(d, T, 20).
    #[arg(long)]
    pub kmax: Option<usize>,
    /// Write the report CSV here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Write the labels of the chosen K as CSV.
    #[arg(long = "labels-out")]
    pub labels_out: Option<PathBuf>,
    /// Do not print the summary table on stderr.
    #[arg(long)]
    pub quiet: bool,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let resolved = a.pipeline.resolve()?;
    let mut x = read_matrix(&a.matrix, a.header)?;
    if a.transpose {
        x = x.transpose()?;
    }
    let cap = x.dim().min(x.len());
    let kmin = a.kmin.or(resolved.kmin).unwrap_or(1);
    let kmax = a.kmax.or(resolved.kmax).unwrap_or(cap.min(DEFAULT_KMAX_CAP));
    let e = resolved.experiment;
    let cfg = SweepConfig { k_min: kmin, k_max: kmax, criterion: e.criterion, nmf: e.nmf, search: e.search, refine: e.refine };
    let report = run_sweep(&x, &cfg)?;
    let provenance = Provenance::new(e.seed);
    write_table(&report_table(&report), &provenance, a.output.as_deref())?;
    if let Some(path) = &a.labels_out {
        write_table(&labels_table(report.chosen().model.labels()), &provenance, Some(path))?;
    }
    if !a.quiet {
        eprintln!("{report}");
    }
    Ok(())
}

fn default_d_list() -> Vec<usize> {
    (20..=100).step_by(5).collect()
}

#[derive(Debug, Args)]
pub struct Table2Args {
    /// Comma-separated dimensions; defaults to 20, 25, ..., 100.
    #[arg(long = "d-list", value_delimiter = ',')]
    pub d_list: Vec<usize>,
    /// Replicates per dimension (default 100).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Trials per observation.
    #[arg(long = "n-trials", default_value_t = 200)]
    pub n_trials: u64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

pub fn mc_table2(a: &Table2Args) -> Result<(), CliError> {
    let resolved = a.pipeline.resolve()?;
    let d_list = if a.d_list.is_empty() { default_d_list() } else { a.d_list.clone() };
    let reps = a.reps.or(resolved.reps).unwrap_or(100);
    if reps == 0 || a.n_trials == 0 {
        return Err(CliError::Input("reps and n-trials must be positive".into()));
    }
    let rows = experiments::table2(&d_list, reps, a.n_trials, &resolved.experiment)?;
    let mut table = Table::new(["d", "delta_successes", "aic_successes"]);
    for r in rows {
        table.push([r.d, r.delta_successes, r.aic_successes]);
    }
    write_table(&table, &Provenance::new(resolved.experiment.seed), a.output.as_deref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphMode {
    PoissonBlocks,
    Sbm,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long, value_enum)]
    pub mode: GraphMode,
    /// Edge intensities for the block-Poisson mode.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub rho: Vec<f64>,
    /// Aggregated vertex counts for the block-Poisson mode.
    #[arg(long = "agg-c", value_delimiter = ',', default_value = "5")]
    pub agg_c: Vec<usize>,
    /// Vertex counts for the SBM mode.
    #[arg(long, value_delimiter = ',', default_value = "40,100")]
    pub n: Vec<usize>,
    /// Largest K tried in the SBM mode.
    #[arg(long = "k-max", default_value_t = 6)]
    pub k_max: usize,
    /// Replicates per setting (default 100).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

pub fn graph_experiment(a: &GraphArgs) -> Result<(), CliError> {
    let resolved = a.pipeline.resolve()?;
    let reps = a.reps.or(resolved.reps).unwrap_or(100);
    if reps == 0 {
        return Err(CliError::Input("reps must be positive".into()));
    }
    let cfg = &resolved.experiment;
    let table = match a.mode {
        GraphMode::PoissonBlocks => {
            let mut table = Table::new(["rho", "c", "ari_ours", "ari_pam", "ari_elbow"]);
            for &rho in &a.rho {
                if !(rho > 0.0 && rho.is_finite()) {
                    return Err(CliError::Input(format!("rho must be positive, got {rho}")));
                }
                for &c in &a.agg_c {
                    let row = experiments::poisson_blocks_experiment(rho, c, reps, cfg)?;
                    table.push([rho.to_string(), c.to_string(), row.ours.to_string(), row.pam.to_string(), row.elbow.to_string()]);
                }
            }
            table
        }
        GraphMode::Sbm => {
            let mut table = Table::new(["n", "ari_ours", "ari_pam", "ari_elbow"]);
            for &n in &a.n {
                let row = experiments::sbm_experiment(n, reps, a.k_max, cfg)?;
                table.push([n.to_string(), row.ours.to_string(), row.pam.to_string(), row.elbow.to_string()]);
            }
            table
        }
    };
    write_table(&table, &Provenance::new(cfg.seed), a.output.as_deref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    T1,
    T3,
}

#[derive(Debug, Args)]
pub struct TheoremArgs {
    #[arg(long, value_enum)]
    pub which: Which,
    /// t1: trial counts `l` such as `100,1000,10000`; t3: sizes `DxT` such as `20x20,40x40`.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<String>,
    /// Replicates per grid point (default 2000 for t1, 20 for t3).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Truncation level for t3; defaults to ceil(2 log(dT)).
    #[arg(long)]
    pub cap: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Input(format!("grid entry '{s}' is not of the form DxT"));
    let (d, t) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let d = d.trim().parse().map_err(|_| bad())?;
    let t = t.trim().parse().map_err(|_| bad())?;
    if d < 2 || t < 2 {
        return Err(CliError::Input(format!("grid entry '{s}' needs d, T >= 2")));
    }
    Ok((d, t))
}

pub fn theorem_check(a: &TheoremArgs) -> Result<(), CliError> {
    let seed = a.seed.unwrap_or(0);
    let table = match a.which {
        Which::T1 => {
            let ells: Vec<u64> = if a.grid.is_empty() {
                vec![100, 1_000, 10_000]
            } else {
                a.grid
                    .iter()
                    .map(|g| match g.trim().parse::<u64>() {
                        Ok(v) if v > 0 => Ok(v),
                        _ => Err(CliError::Input(format!("grid entry '{g}' is not a positive integer"))),
                    })
                    .collect::<Result<_, _>>()?
            };
            let reps = a.reps.unwrap_or(2_000);
            if reps < 2 {
                return Err(CliError::Input("t1 needs at least 2 replicates".into()));
            }
            let mut table = Table::new(["ell", "estimate", "std_error", "limit", "infinite"]);
            for r in experiments::theorem1_check(&ells, reps, seed)? {
                table.push([r.ell.to_string(), r.estimate.to_string(), r.std_error.to_string(), r.limit.to_string(), r.infinite.to_string()]);
            }
            table
        }
        Which::T3 => {
            let grid: Vec<(usize, usize)> = if a.grid.is_empty() {
                vec![(20, 20), (40, 40), (80, 80), (160, 160)]
            } else {
                a.grid.iter().map(|g| parse_size(g)).collect::<Result<_, _>>()?
            };
            let reps = a.reps.unwrap_or(20);
            if reps == 0 {
                return Err(CliError::Input("reps must be positive".into()));
            }
            let mut table = Table::new(["d", "t", "cap", "mse", "mse_untruncated"]);
            for r in experiments::theorem3_check(&grid, reps, seed, a.cap)? {
                table.push([r.d.to_string(), r.t.to_string(), r.cap.to_string(), r.mse.to_string(), r.mse_untruncated.to_string()]);
            }
            table
        }
    };
    write_table(&table, &Provenance::new(seed), a.output.as_deref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    TwoCluster,
    Swimmer,
    BlockPoisson,
    Sbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Vectorize {
    Full,
    Upper,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// two-cluster: number of outcomes.
    #[arg(long, default_value_t = 50)]
    pub d: usize,
    /// two-cluster: trials per observation.
    #[arg(long = "n-trials", default_value_t = 200)]
    pub n_trials: u64,
    /// two-cluster: number of shared high-probability outcomes.
    #[arg(long, default_value_t = datagen::DEFAULT_BAND)]
    pub band: usize,
    /// block-poisson: edge intensity.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// block-poisson: aggregated vertex count.
    #[arg(long = "agg-c", default_value_t = 5)]
    pub agg_c: usize,
    /// block-poisson: vectorization of each aggregated graph.
    #[arg(long, value_enum, default_value_t = Vectorize::Full)]
    pub vectorize: Vectorize,
    /// sbm: vertex count.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// sbm: graphs drawn from each block model.
    #[arg(long, default_value_t = 3)]
    pub copies: usize,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Write the generating labels as CSV (not available for swimmer).
    #[arg(long = "labels-out")]
    pub labels_out: Option<PathBuf>,
    /// swimmer: also write one PGM image per column into this directory.
    #[arg(long = "pgm-dir")]
    pub pgm_dir: Option<PathBuf>,
}

pub fn gen(a: &GenArgs) -> Result<(), CliError> {
    let (x, labels): (CountMatrix, Option<Vec<usize>>) = match a.kind {
        GenKind::TwoCluster => {
            let (x, truth) = datagen::two_cluster_sparse_with_band(a.d, a.band, a.n_trials, a.seed)?;
            (x, Some(truth.labels().to_vec()))
        }
        GenKind::Swimmer => (datagen::swimmer_matrix(), None),
        GenKind::BlockPoisson => {
            if !(a.rho > 0.0 && a.rho.is_finite()) {
                return Err(CliError::Input(format!("rho must be positive, got {}", a.rho)));
            }
            let specs = datagen::paper_block_specs(a.rho);
            let groups = datagen::contiguous_groups(specs[0].n(), a.agg_c)?;
            let graphs = datagen::block_poisson_graphs(&specs, a.seed)?;
            let agg = graphs.iter().map(|g| datagen::aggregate_graph(g, &groups)).collect::<Result<Vec<_>, _>>()?;
            let mode = match a.vectorize {
                Vectorize::Full => VectorizeMode::Full,
                Vectorize::Upper => VectorizeMode::Upper,
            };
            (datagen::vectorize_graphs(&agg, mode)?, Some(vec![0, 1]))
        }
        GenKind::Sbm => {
            let specs = datagen::paper_sbm_pair(a.n)?;
            let (x, truth) = datagen::sbm_graphs(&specs, a.copies, a.seed)?;
            (x, Some(truth))
        }
    };
    let provenance = Provenance::new(a.seed);
    write_table(&count_matrix_table(&x), &provenance, a.output.as_deref())?;
    if let Some(path) = &a.labels_out {
        let labels = labels.ok_or_else(|| CliError::Input("this generator has no labels".into()))?;
        write_table(&labels_table(&labels), &provenance, Some(path))?;
    }
    if let Some(dir) = &a.pgm_dir {
        if a.kind != GenKind::Swimmer {
            return Err(CliError::Input("--pgm-dir applies to the swimmer generator only".into()));
        }
        std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        for t in 0..x.len() {
            let column: Vec<u64> = x.entries().column(t).iter().copied().collect();
            let pgm = datagen::to_pgm(&column, datagen::SWIMMER_ROWS, datagen::SWIMMER_COLS);
            let path = dir.join(format!("swimmer_{:03}.pgm", t + 1));
            File::create(&path)
                .and_then(|mut f| f.write_all(pgm.as_bytes()))
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    Ok(())
}
