//! CSV tables.
//!
//! Floats are written with 17 significant digits (`{:.16e}`) so that reading
//! a file back reproduces every value bit for bit.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{EaiError, Result};
use crate::linalg::CMatrix;

/// A rectangular table of pre-formatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row of floats.
    pub fn push(&mut self, values: &[f64]) {
        self.rows.push(values.iter().map(|&v| fmt_float(v)).collect());
    }

    /// Appends a row that starts with a text label.
    pub fn push_labelled(&mut self, label: &str, values: &[f64]) {
        let mut row = vec![label.to_string()];
        row.extend(values.iter().map(|&v| fmt_float(v)));
        self.rows.push(row);
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.headers.len() {
                return Err(EaiError::Dimension(format!(
                    "table row {i} has {} cells but there are {} headers",
                    row.len(),
                    self.headers.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    table.validate()?;
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
    w.write_record(&table.headers)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok(Table { headers, rows })
}

/// Column names `{name}_re, {name}_im`.
pub fn complex_headers(name: &str) -> [String; 2] {
    [format!("{name}_re"), format!("{name}_im")]
}

pub fn complex_cells(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Amplitude and phase in degrees.
pub fn polar_cells(z: Complex64) -> [f64; 2] {
    [z.norm(), z.arg().to_degrees()]
}

/// H in the layout of a published fringe table: an amplitude block, a phase
/// block in degrees, then the eigenvalue row and optionally the row of
/// resonance frequencies assigned to each eigenvalue.
pub fn h_table(h: &CMatrix, eigenvalues: &[f64], resonances_ghz: Option<&[f64]>) -> Table {
    let s = h.nrows();
    let mut headers = vec!["block".to_string(), "row".to_string()];
    headers.extend((0..s).map(|j| format!("col{j}")));
    let mut t = Table::new(headers);
    let mut block = |name: &str, row: String, values: Vec<f64>| {
        let mut cells = vec![name.to_string(), row];
        cells.extend(values.into_iter().map(fmt_float));
        t.rows.push(cells);
    };
    for i in 0..s {
        block("amplitude", i.to_string(), (0..s).map(|j| h[(i, j)].norm()).collect());
    }
    for i in 0..s {
        block("phase_deg", i.to_string(), (0..s).map(|j| h[(i, j)].arg().to_degrees()).collect());
    }
    let pad = |v: &[f64]| (0..s).map(|j| v.get(j).copied().unwrap_or(f64::NAN)).collect::<Vec<_>>();
    block("eigenvalue", String::new(), pad(eigenvalues));
    if let Some(r) = resonances_ghz {
        block("resonance_ghz", String::new(), pad(r));
    }
    t
}
