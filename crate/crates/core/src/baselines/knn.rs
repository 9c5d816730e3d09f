use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};

/// Stored training set for brute-force Euclidean k-nearest-neighbour voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub k: usize,
}

pub fn knn_fit(train: &FeatureTable, k: usize) -> Result<KnnModel> {
    if k == 0 || k > train.n_rows() {
        return Err(Error::arg(format!(
            "k = {k} must lie in 1..={} (training rows)",
            train.n_rows()
        )));
    }
    Ok(KnnModel {
        rows: (0..train.n_rows()).map(|i| train.row(i)).collect(),
        labels: train.labels().to_vec(),
        k,
    })
}

/// Majority label among the `k` nearest training rows.
///
/// Distance ties go to the lower row index; a tied vote goes to the nearest neighbour.
pub fn knn_predict(train: &FeatureTable, query: &[f64], k: usize) -> Result<u8> {
    let model = knn_fit(train, k)?;
    model.predict_one(query)
}

impl KnnModel {
    pub fn predict_one(&self, query: &[f64]) -> Result<u8> {
        let d = self.rows.first().map_or(0, Vec::len);
        if query.len() != d {
            return Err(Error::shape(format!("{d} features"), query.len()));
        }
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (sq_dist(r, query), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let ones = dist[..self.k]
            .iter()
            .filter(|&&(_, i)| self.labels[i] == 1)
            .count();
        let zeros = self.k - ones;
        Ok(match ones.cmp(&zeros) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => self.labels[dist[0].1],
        })
    }

    pub fn predict(&self, samples: &DMatrix<f64>) -> Result<Vec<u8>> {
        samples
            .row_iter()
            .map(|r| self.predict_one(&r.iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
