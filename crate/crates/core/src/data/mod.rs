//! Tabular voice-feature data: loading, standardisation and train/test splitting.

mod scale;
mod split;
pub mod synthetic;

pub use scale::{apply_scaler, fit_scaler, Scaler};
pub use split::{split, TrialSplit};

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column holding the recording identifier.
pub const ID_COLUMN: &str = "name";
/// Column holding the one-bit class label (1 = PD).
pub const STATUS_COLUMN: &str = "status";

/// The 22 acoustic measurements of the voice dataset, spelled as in the public file.
pub const VOICE_FEATURES: [&str; 22] = [
    "MDVP:Fo(Hz)",
    "MDVP:Fhi(Hz)",
    "MDVP:Flo(Hz)",
    "MDVP:Jitter(%)",
    "MDVP:Jitter(Abs)",
    "MDVP:RAP",
    "MDVP:PPQ",
    "Jitter:DDP",
    "MDVP:Shimmer",
    "MDVP:Shimmer(dB)",
    "Shimmer:APQ3",
    "Shimmer:APQ5",
    "MDVP:APQ",
    "Shimmer:DDA",
    "NHR",
    "HNR",
    "RPDE",
    "DFA",
    "spread1",
    "spread2",
    "D2",
    "PPE",
];

/// Dense samples x features matrix with binary labels.
///
/// Rows are recordings, columns are features. Labels are 0 (healthy) or 1 (PD).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    values: DMatrix<f64>,
    feature_names: Vec<String>,
    labels: Vec<u8>,
    row_ids: Vec<String>,
}

impl FeatureTable {
    pub fn new(
        values: DMatrix<f64>,
        feature_names: Vec<String>,
        labels: Vec<u8>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        if values.nrows() != labels.len() || values.nrows() != row_ids.len() {
            return Err(Error::shape(
                format!("{} labels and ids", values.nrows()),
                format!("{} labels, {} ids", labels.len(), row_ids.len()),
            ));
        }
        if values.ncols() != feature_names.len() {
            return Err(Error::shape(
                format!("{} feature names", values.ncols()),
                feature_names.len(),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Parse {
                row: row + 1,
                column: feature_names[col].clone(),
                message: "non-finite value".into(),
            });
        }
        if let Some(row) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Label {
                row: row + 1,
                value: labels[row].to_string(),
            });
        }
        Ok(Self {
            values,
            feature_names,
            labels,
            row_ids,
        })
    }

    /// Builds a table from row-major data, generating `row<i>` ids.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[u8], feature_names: &[&str]) -> Result<Self> {
        let ncols = feature_names.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(Error::shape(ncols, bad.len()));
        }
        let values = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        let ids = (0..rows.len()).map(|i| format!("row{i}")).collect();
        Self::new(
            values,
            feature_names.iter().map(|s| s.to_string()).collect(),
            labels.to_vec(),
            ids,
        )
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// `[healthy, pd]` row counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// New table holding the given rows, in the given order.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows()) {
            return Err(Error::arg(format!(
                "row index {bad} out of range for {} rows",
                self.n_rows()
            )));
        }
        let values = self.values.select_rows(rows.iter());
        Ok(Self {
            values,
            feature_names: self.feature_names.clone(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r].clone()).collect(),
        })
    }

    /// Replaces the value matrix keeping labels and ids.
    pub(crate) fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        Self::new(
            values,
            self.feature_names.clone(),
            self.labels.clone(),
            self.row_ids.clone(),
        )
    }

    /// Projects onto the given columns (in order).
    pub(crate) fn with_columns(&self, indices: &[usize]) -> Self {
        Self {
            values: self.values.select_columns(indices.iter()),
            feature_names: indices
                .iter()
                .map(|&i| self.feature_names[i].clone())
                .collect(),
            labels: self.labels.clone(),
            row_ids: self.row_ids.clone(),
        }
    }
}

/// Loads the voice dataset, requiring exactly the id column, the status column and the
/// 22 voice features (in any order).
pub fn load_csv(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, Some(&VOICE_FEATURES))
}

/// Reads a comma separated table with a header row.
///
/// With `required = Some(names)` the feature columns must be exactly `names`; with `None`
/// every column other than the id and status columns is treated as a feature. Features
/// keep header order. Row numbers in errors are 1-based data rows.
pub fn read_csv<R: Read>(reader: R, required: Option<&[&str]>) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::Schema(format!("duplicate column `{h}`")));
        }
    }
    let id_col = headers
        .iter()
        .position(|h| h == ID_COLUMN)
        .ok_or_else(|| Error::Schema(format!("missing column `{ID_COLUMN}`")))?;
    let status_col = headers
        .iter()
        .position(|h| h == STATUS_COLUMN)
        .ok_or_else(|| Error::Schema(format!("missing column `{STATUS_COLUMN}`")))?;

    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != id_col && c != status_col)
        .collect();
    if let Some(required) = required {
        for name in required {
            if !headers.iter().any(|h| h == name) {
                return Err(Error::Schema(format!("missing column `{name}`")));
            }
        }
        if let Some(&extra) = feature_cols
            .iter()
            .find(|&&c| !required.contains(&headers[c].as_str()))
        {
            return Err(Error::Schema(format!("unexpected column `{}`", headers[extra])));
        }
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut ids = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::from("*"),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for &c in &feature_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: headers[c].clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[c].clone(),
                    message: format!("`{cell}` is not finite"),
                });
            }
            data.push(v);
        }
        let status = &record[status_col];
        let label = match status.parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            _ => {
                return Err(Error::Label {
                    row,
                    value: status.to_string(),
                })
            }
        };
        labels.push(label);
        ids.push(record[id_col].to_string());
    }

    let values = DMatrix::from_row_slice(labels.len(), feature_cols.len(), &data);
    let names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    FeatureTable::new(values, names, labels, ids)
}

/// Writes the canonical form: `name,<features...>,status`, floats in shortest
/// round-trip notation.
pub fn write_csv<W: Write>(table: &FeatureTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(table.feature_names.iter().cloned());
    header.push(STATUS_COLUMN.to_string());
    w.write_record(&header)?;
    for i in 0..table.n_rows() {
        let mut rec = vec![table.row_ids[i].clone()];
        rec.extend(table.values.row(i).iter().map(|v| format!("{v:?}")));
        rec.push(table.labels[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
