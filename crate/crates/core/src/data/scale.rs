use serde::{Deserialize, Serialize};

use super::FeatureTable;
use crate::error::{Error, Result};

/// Per-feature standardisation statistics (population std, divisor N).
///
/// Constant columns are flagged and carry std 1 so the transform stays finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Scaler {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = (*v - m) / s;
        }
    }

    /// Keeps only the listed features, in order.
    pub fn select(&self, indices: &[usize]) -> Scaler {
        Scaler {
            means: indices.iter().map(|&i| self.means[i]).collect(),
            stds: indices.iter().map(|&i| self.stds[i]).collect(),
            constant: indices.iter().map(|&i| self.constant[i]).collect(),
        }
    }
}

pub fn fit_scaler(table: &FeatureTable, rows: &[usize]) -> Result<Scaler> {
    if rows.is_empty() {
        return Err(Error::arg("cannot fit a scaler on an empty row list"));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= table.n_rows()) {
        return Err(Error::arg(format!("row index {bad} out of range")));
    }
    let n = rows.len() as f64;
    let values = table.values();
    let mut scaler = Scaler {
        means: Vec::with_capacity(table.n_features()),
        stds: Vec::with_capacity(table.n_features()),
        constant: Vec::with_capacity(table.n_features()),
    };
    for j in 0..table.n_features() {
        let col = values.column(j);
        let mean = rows.iter().map(|&r| col[r]).sum::<f64>() / n;
        let var = rows.iter().map(|&r| (col[r] - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        // relative cutoff: rounding noise on a constant column is not signal
        let constant = std <= 1e-12 * mean.abs().max(1.0);
        scaler.means.push(mean);
        scaler.stds.push(if constant { 1.0 } else { std });
        scaler.constant.push(constant);
    }
    Ok(scaler)
}

pub fn apply_scaler(scaler: &Scaler, table: &FeatureTable) -> Result<FeatureTable> {
    if scaler.n_features() != table.n_features() {
        return Err(Error::shape(
            format!("{} columns", scaler.n_features()),
            table.n_features(),
        ));
    }
    let mut values = table.values().clone();
    for (j, mut col) in values.column_iter_mut().enumerate() {
        let (m, s) = (scaler.means[j], scaler.stds[j]);
        col.apply(|v| *v = (*v - m) / s);
    }
    table.with_values(values)
}
