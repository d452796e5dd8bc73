//! CSV tables with fixed number formatting.

use std::io::Write;
use std::path::Path;

use balanced_spectral::format::format_complex;
use balanced_spectral::linalg::{CMat, CVec, C64};
use balanced_spectral::Error;

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("writes to memory");
        for row in &self.rows {
            w.write_record(row).expect("writes to memory");
        }
        String::from_utf8(w.into_inner().expect("writes to memory")).expect("CSV fields are UTF-8")
    }
}

/// Shortest representation that reads back to the same `f64`, in exponent
/// form outside `[1e-4, 1e15)`.
pub fn real(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn complex(z: C64) -> String {
    format_complex(z)
}

/// Column names `{prefix}_{i}_{j}`, 1-based, row-major.
pub fn matrix_columns(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    (1..=rows).flat_map(|i| (1..=cols).map(move |j| format!("{prefix}_{i}_{j}"))).collect()
}

pub fn vector_columns(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn matrix_cells(m: &CMat) -> Vec<String> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| complex(m[(i, j)]))).collect()
}

pub fn vector_cells(v: &CVec) -> Vec<String> {
    v.iter().map(|z| complex(*z)).collect()
}

/// Writes `text` to `out`, or to stdout.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Usage(format!("cannot write to stdout: {e}")))
        }
    }
}
