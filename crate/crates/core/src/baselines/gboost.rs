//! Second-order gradient boosting of regression trees on the logistic loss.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::tree::{grow_regressor, require_both_classes, Tree};
use crate::data::FeatureTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    /// Log-odds of the training prior.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Mean training logistic loss before the first round and after each round.
    pub loss_trace: Vec<f64>,
}

fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^f) - y f`, stable for large `|f|`.
fn logistic_loss(f: f64, y: f64) -> f64 {
    f.max(0.0) + (-f.abs()).exp().ln_1p() - y * f
}

/// Row order that depends only on row contents: lexicographic on (features, label).
///
/// Rows that tie are identical, so every floating-point reduction done in this order
/// gives the same result for any permutation of the training table.
fn canonical_order(x: &DMatrix<f64>, y: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    idx.sort_by(|&a, &b| {
        for j in 0..x.ncols() {
            match x[(a, j)].total_cmp(&x[(b, j)]) {
                Ordering::Equal => {}
                other => return other,
            }
        }
        y[a].total_cmp(&y[b])
    });
    idx
}

/// Boosting with Newton leaf values `sum r / sum p(1-p)` scaled by the learning rate.
///
/// Deterministic and seed-free; the seed argument of the common interface is unused.
pub fn gboost_fit(train: &FeatureTable, params: &BoostParams) -> Result<BoostModel> {
    require_both_classes(train, "gradient boosting")?;
    if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
        return Err(Error::arg(format!(
            "learning rate {} must be > 0",
            params.learning_rate
        )));
    }
    let x = train.values();
    let n = train.n_rows();
    let y: Vec<f64> = train.labels().iter().map(|&l| f64::from(l)).collect();
    let [n0, n1] = train.class_counts();
    let base_score = (n1 as f64 / n0 as f64).ln();
    let order = canonical_order(x, &y);

    let mut f = vec![base_score; n];
    let mean_loss = |f: &[f64]| order.iter().map(|&i| logistic_loss(f[i], y[i])).sum::<f64>() / n as f64;
    let mut loss_trace = vec![mean_loss(&f)];
    let mut trees = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        let r: Vec<f64> = (0..n).map(|i| y[i] - p[i]).collect();
        let h: Vec<f64> = p.iter().map(|&q| q * (1.0 - q)).collect();
        let leaf = |rows: &[usize]| {
            let g: f64 = rows.iter().map(|&i| r[i]).sum();
            let hs: f64 = rows.iter().map(|&i| h[i]).sum();
            if hs > 1e-12 {
                g / hs
            } else {
                0.0
            }
        };
        let tree = grow_regressor(x, &r, order.clone(), params.max_depth, &leaf);
        for (i, fi) in f.iter_mut().enumerate() {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            *fi += params.learning_rate * tree.value(&row);
        }
        loss_trace.push(mean_loss(&f));
        trees.push(tree);
    }
    Ok(BoostModel {
        base_score,
        learning_rate: params.learning_rate,
        trees,
        loss_trace,
    })
}

impl BoostModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.value(x))
                .sum::<f64>()
    }

    /// 1 iff `sigmoid(F(x)) >= 0.5`, i.e. `F(x) >= 0`.
    pub fn predict_one(&self, x: &[f64]) -> u8 {
        u8::from(sigmoid(self.margin(x)) >= 0.5)
    }

    pub fn predict(&self, samples: &DMatrix<f64>) -> Vec<u8> {
        samples
            .row_iter()
            .map(|r| self.predict_one(&r.iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

pub fn gboost_predict(model: &BoostModel, sample: &[f64]) -> u8 {
    model.predict_one(sample)
}
