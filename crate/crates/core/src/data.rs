//! CSV input: a header row, comma separators, `.` decimal points.

use std::fs::File;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::linalg::Matrix;
use crate::model::Dataset;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open `{path}`: {source}")]
    Open {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in `{path}`: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("`{path}` has no data rows")]
    Empty { path: PathBuf },

    #[error("unknown column `{column}` (available: {available})")]
    UnknownColumn { column: String, available: String },

    #[error("non-numeric value `{value}` at line {line}, column `{column}`")]
    NonNumeric { line: u64, column: String, value: String },

    #[error(transparent)]
    Model(#[from] crate::Error),
}

/// Raw cells of a CSV file, header split off.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// 1-based file line of each data row.
    pub lines: Vec<u64>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize, DataError> {
        let name = name.trim();
        self.headers.iter().position(|h| h == name).ok_or_else(|| DataError::UnknownColumn {
            column: name.to_string(),
            available: self.headers.join(", "),
        })
    }

    /// Every column except `exclude`, parsed as numbers.
    pub fn numeric_columns(&self, exclude: Option<usize>) -> Result<(Matrix, Vec<String>), DataError> {
        let keep: Vec<usize> = (0..self.headers.len()).filter(|&j| Some(j) != exclude).collect();
        let mut data = Vec::with_capacity(self.rows.len() * keep.len());
        for (row, &line) in self.rows.iter().zip(&self.lines) {
            for &j in &keep {
                let cell = row[j].trim();
                let v: f64 = cell.parse().map_err(|_| DataError::NonNumeric {
                    line,
                    column: self.headers[j].clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(DataError::NonNumeric {
                        line,
                        column: self.headers[j].clone(),
                        value: cell.to_string(),
                    });
                }
                data.push(v);
            }
        }
        let names = keep.iter().map(|&j| self.headers[j].clone()).collect();
        Ok((Matrix::from_vec(self.rows.len(), keep.len(), data)?, names))
    }
}

pub fn read_table(path: &Path) -> Result<Table, DataError> {
    let file = File::open(path).map_err(|source| DataError::Open { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let csv_err = |source| DataError::Csv { path: path.to_path_buf(), source };
    let headers = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        lines.push(record.position().map_or(0, |p| p.line()));
        rows.push(record.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(DataError::Empty { path: path.to_path_buf() });
    }
    Ok(Table { headers, rows, lines })
}

/// Builds the model dataset: `response` column as labels, all remaining
/// columns as numeric covariates.
pub fn dataset_from_table(
    table: &Table,
    response: &str,
    reference: Option<&str>,
    intercept: bool,
) -> Result<Dataset, DataError> {
    let ry = table.column_index(response)?;
    let (x, names) = table.numeric_columns(Some(ry))?;
    let labels: Vec<&str> = table.rows.iter().map(|r| r[ry].as_str()).collect();
    let reference = reference.filter(|r| !r.eq_ignore_ascii_case("last"));
    let ds = Dataset::new(x, &labels, reference)?.with_column_names(names)?;
    Ok(if intercept { ds.with_intercept()? } else { ds })
}
