//! CSV input for count matrices and CSV output with a provenance trailer.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::domain::CountMatrix;
use crate::error::{Error, Result};
use crate::selection::SelectionReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reads a plain numeric CSV: rows are dimensions, columns are observations.
/// Lines starting with `#` are ignored; `header` skips the first line.
pub fn read_count_matrix<R: Read>(reader: R, header: bool) -> Result<CountMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { line, col: 0, msg: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            let value: i64 = field.parse().map_err(|_| Error::Parse {
                line,
                col: j + 1,
                msg: format!("'{field}' is not an integer"),
            })?;
            if value < 0 {
                return Err(Error::Parse { line, col: j + 1, msg: format!("negative count {value}") });
            }
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line,
                    col: row.len().min(first.len()) + 1,
                    msg: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let d = rows.len();
    let t = rows.first().map_or(0, Vec::len);
    if d == 0 || t == 0 {
        return Err(Error::EmptyMatrix);
    }
    CountMatrix::from_signed(&DMatrix::from_fn(d, t, |i, j| rows[i][j]))
}

/// Seed and version written as the last line of every CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(seed: u64) -> Self {
        Self { seed, version: VERSION.to_string() }
    }

    pub fn trailer(&self) -> String {
        format!("# seed={}, version={}", self.seed, self.version)
    }
}

/// A header plus string rows, written as CSV with the provenance trailer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|s| s.to_string()).collect());
    }

    pub fn write<W: Write>(&self, out: W, provenance: &Provenance) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        let mut inner = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        writeln!(inner, "{}", provenance.trailer())?;
        Ok(())
    }

    pub fn to_csv_string(&self, provenance: &Provenance) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, provenance).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Count matrix with a `t1,…,tT` header row.
pub fn count_matrix_table(x: &CountMatrix) -> Table {
    let mut table = Table::new((1..=x.len()).map(|t| format!("t{t}")));
    for row in x.entries().row_iter() {
        table.push(row.iter());
    }
    table
}

/// Columns `k, discrepancy, penalty, delta, chosen, converged, support_violation`.
pub fn report_table(report: &SelectionReport) -> Table {
    let mut table = Table::new(["k", "discrepancy", "penalty", "delta", "chosen", "converged", "support_violation"]);
    for r in &report.per_k {
        table.push([
            r.k.to_string(),
            r.discrepancy.to_string(),
            r.penalty.to_string(),
            r.delta.to_string(),
            u8::from(r.k == report.chosen_k).to_string(),
            u8::from(r.converged).to_string(),
            u8::from(r.support_violation).to_string(),
        ]);
    }
    table
}

/// One row per observation: `t, label` (both 1-based).
pub fn labels_table(labels: &[usize]) -> Table {
    let mut table = Table::new(["t", "label"]);
    for (t, &l) in labels.iter().enumerate() {
        table.push([t + 1, l + 1]);
    }
    table
}
