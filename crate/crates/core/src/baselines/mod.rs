//! Comparison classifiers: k-nearest neighbours, CART, random forest, gradient-boosted
//! trees and an SMO-trained SVM.

pub mod forest;
pub mod gboost;
pub mod knn;
pub mod svc;
pub mod tree;

pub use forest::{rforest_fit, rforest_predict, ForestModel, ForestParams, MaxFeatures};
pub use gboost::{gboost_fit, gboost_predict, BoostModel, BoostParams};
pub use knn::{knn_fit, knn_predict, KnnModel};
pub use svc::{svc_fit, svc_predict, Kernel, SvcModel, SvcParams};
pub use tree::{dtree_fit, dtree_predict, gini_impurity, Tree, TreeModel, TreeParams};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Knn,
    Dtree,
    Rforest,
    Gboost,
    Svc,
}

/// A baseline method with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum BaselineSpec {
    Knn { k: usize },
    Dtree(TreeParams),
    Rforest(ForestParams),
    Gboost(BoostParams),
    Svc(SvcParams),
}

impl BaselineSpec {
    pub fn default_for(kind: BaselineKind) -> Self {
        match kind {
            BaselineKind::Knn => BaselineSpec::Knn { k: 5 },
            BaselineKind::Dtree => BaselineSpec::Dtree(TreeParams::default()),
            BaselineKind::Rforest => BaselineSpec::Rforest(ForestParams::default()),
            BaselineKind::Gboost => BaselineSpec::Gboost(BoostParams::default()),
            BaselineKind::Svc => BaselineSpec::Svc(SvcParams::default()),
        }
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineSpec::Knn { .. } => BaselineKind::Knn,
            BaselineSpec::Dtree(_) => BaselineKind::Dtree,
            BaselineSpec::Rforest(_) => BaselineKind::Rforest,
            BaselineSpec::Gboost(_) => BaselineKind::Gboost,
            BaselineSpec::Svc(_) => BaselineKind::Svc,
        }
    }

    /// Checks the declared tuning ranges.
    ///
    /// The `*_fit` functions themselves accept anything structurally valid (a one-tree
    /// forest, a depth-0 tree); this check applies to specs built from configuration.
    pub fn validate(&self) -> Result<()> {
        fn within<T: PartialOrd + std::fmt::Display>(name: &str, v: T, lo: T, hi: T) -> Result<()> {
            if v >= lo && v <= hi {
                Ok(())
            } else {
                Err(Error::arg(format!("{name} = {v} outside [{lo}, {hi}]")))
            }
        }
        match self {
            BaselineSpec::Knn { k } => within("knn k", *k, 1, 25),
            BaselineSpec::Dtree(p) => {
                within("dt max_depth", p.max_depth, 1, 12)?;
                within("dt min_samples_split", p.min_samples_split, 2, 20)
            }
            BaselineSpec::Rforest(p) => {
                within("rf n_trees", p.n_trees, 50, 400)?;
                within("rf max_depth", p.tree.max_depth, 2, 12)
            }
            BaselineSpec::Gboost(p) => {
                within("xgb rounds", p.rounds, 20, 300)?;
                within("xgb max_depth", p.max_depth, 1, 4)?;
                within("xgb learning_rate", p.learning_rate, 0.01, 0.5)
            }
            BaselineSpec::Svc(p) => {
                within("svc C", p.c, 1e-2, 1e3)?;
                within("svc gamma", p.gamma, 1e-3, 1e1)
            }
        }
    }

    pub fn fit(&self, train: &FeatureTable, seed: u64) -> Result<BaselineModel> {
        Ok(match self {
            BaselineSpec::Knn { k } => BaselineModel::Knn(knn_fit(train, *k)?),
            BaselineSpec::Dtree(p) => BaselineModel::Dtree(dtree_fit(train, p)?),
            BaselineSpec::Rforest(p) => BaselineModel::Rforest(rforest_fit(train, p, seed)?),
            BaselineSpec::Gboost(p) => BaselineModel::Gboost(gboost_fit(train, p)?),
            BaselineSpec::Svc(p) => BaselineModel::Svc(svc_fit(train, p, seed)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaselineModel {
    Knn(KnnModel),
    Dtree(TreeModel),
    Rforest(ForestModel),
    Gboost(BoostModel),
    Svc(SvcModel),
}

impl BaselineModel {
    pub fn predict(&self, samples: &DMatrix<f64>) -> Result<Vec<u8>> {
        Ok(match self {
            BaselineModel::Knn(m) => m.predict(samples)?,
            BaselineModel::Dtree(m) => m.predict(samples),
            BaselineModel::Rforest(m) => m.predict(samples),
            BaselineModel::Gboost(m) => m.predict(samples),
            BaselineModel::Svc(m) => m.predict(samples),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::random_table;

    #[test]
    fn defaults_are_in_range_and_fit() {
        let t = random_table(40, 3, 1);
        for kind in [
            BaselineKind::Knn,
            BaselineKind::Dtree,
            BaselineKind::Rforest,
            BaselineKind::Gboost,
            BaselineKind::Svc,
        ] {
            let spec = BaselineSpec::default_for(kind);
            spec.validate().unwrap();
            assert_eq!(spec.kind(), kind);
            let m = spec.fit(&t, 3).unwrap();
            let p = m.predict(t.values()).unwrap();
            assert_eq!(p.len(), 40);
            assert!(p.iter().all(|&l| l <= 1));
        }
    }

    #[test]
    fn range_violations() {
        assert!(BaselineSpec::Knn { k: 30 }.validate().is_err());
        let p = ForestParams {
            n_trees: 1,
            ..ForestParams::default()
        };
        assert!(BaselineSpec::Rforest(p).validate().is_err());
    }
}
