use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_classifier, prior_label, require_both_classes, FeaturePicker, Tree, TreeParams};
use crate::data::FeatureTable;
use crate::error::{Error, Result};
use crate::seeds;

/// Features eligible at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))` features drawn per split.
    Sqrt,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree: TreeParams {
                max_depth: 8,
                min_samples_split: 2,
            },
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub prior: u8,
}

/// Random forest of Gini trees with majority voting.
///
/// Tree `t` draws its bootstrap sample and feature subsets from its own stream derived
/// from `(seed, t)`, so the ensemble does not depend on thread count. Bootstrap draws
/// are row indices, so a reordered training table gives a different forest.
pub fn rforest_fit(train: &FeatureTable, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    require_both_classes(train, "random forest")?;
    if params.n_trees == 0 {
        return Err(Error::arg("random forest needs at least one tree"));
    }
    let n = train.n_rows();
    let d = train.n_features();
    let m = match params.max_features {
        MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
        MaxFeatures::All => d,
    };
    let prior = prior_label(train.labels());
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, t as u64));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut picker = if m >= d {
                FeaturePicker::All(d)
            } else {
                FeaturePicker::Subset { d, m, rng: &mut rng }
            };
            grow_classifier(train.values(), train.labels(), rows, &params.tree, prior, &mut picker)
        })
        .collect();
    Ok(ForestModel { trees, prior })
}

impl ForestModel {
    pub fn predict_one(&self, x: &[f64]) -> u8 {
        let ones = self.trees.iter().filter(|t| t.value(x) >= 0.5).count();
        match (2 * ones).cmp(&self.trees.len()) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => 0,
            std::cmp::Ordering::Equal => self.prior,
        }
    }

    pub fn predict(&self, samples: &DMatrix<f64>) -> Vec<u8> {
        samples
            .row_iter()
            .map(|r| self.predict_one(&r.iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

pub fn rforest_predict(model: &ForestModel, sample: &[f64]) -> u8 {
    model.predict_one(sample)
}
