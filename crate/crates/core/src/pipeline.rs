//! Method registry and the end-to-end train/predict pipeline:
//! standardise on training rows, select features, fit, predict.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, BaselineModel, BaselineSpec};
use crate::data::{apply_scaler, fit_scaler, FeatureTable, Scaler};
use crate::error::{Error, Result};
use crate::esn::{self, EsnHyperParams, EsnModel};
use crate::select::{anova_f_scores, project, select_top_k};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Esn,
    Rf,
    Knn,
    Svc,
    Xgb,
    Dt,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Esn,
        Method::Rf,
        Method::Knn,
        Method::Svc,
        Method::Xgb,
        Method::Dt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Esn => "esn",
            Method::Rf => "rf",
            Method::Knn => "knn",
            Method::Svc => "svc",
            Method::Xgb => "xgb",
            Method::Dt => "dt",
        }
    }

    pub fn baseline_kind(self) -> Option<BaselineKind> {
        match self {
            Method::Esn => None,
            Method::Rf => Some(BaselineKind::Rforest),
            Method::Knn => Some(BaselineKind::Knn),
            Method::Svc => Some(BaselineKind::Svc),
            Method::Xgb => Some(BaselineKind::Gboost),
            Method::Dt => Some(BaselineKind::Dtree),
        }
    }

    /// Parses a comma-separated list; `all` expands to every method. Duplicates are
    /// dropped, first occurrence kept.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let add: Vec<Method> = if part.eq_ignore_ascii_case("all") {
                Method::ALL.to_vec()
            } else {
                vec![part.parse()?]
            };
            for m in add {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::arg("empty method list"));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "esn" => Method::Esn,
            "rf" | "rforest" => Method::Rf,
            "knn" => Method::Knn,
            "svc" | "svm" => Method::Svc,
            "xgb" | "gboost" => Method::Xgb,
            "dt" | "dtree" => Method::Dt,
            other => {
                return Err(Error::arg(format!(
                    "unknown method `{other}` (expected esn, rf, knn, svc, xgb, dt or all)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Esn(EsnHyperParams),
    Baseline(BaselineSpec),
}

impl ModelSpec {
    pub fn default_for(method: Method) -> Self {
        match method.baseline_kind() {
            None => ModelSpec::Esn(EsnHyperParams::default()),
            Some(kind) => ModelSpec::Baseline(BaselineSpec::default_for(kind)),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            ModelSpec::Esn(_) => Method::Esn,
            ModelSpec::Baseline(b) => match b.kind() {
                BaselineKind::Knn => Method::Knn,
                BaselineKind::Dtree => Method::Dt,
                BaselineKind::Rforest => Method::Rf,
                BaselineKind::Gboost => Method::Xgb,
                BaselineKind::Svc => Method::Svc,
            },
        }
    }

    pub fn fit(&self, train: &FeatureTable, seed: u64) -> Result<FittedModel> {
        match self {
            ModelSpec::Esn(h) => {
                h.validate()?;
                Ok(FittedModel::Esn(esn::fit(train, h, seed)?))
            }
            ModelSpec::Baseline(b) => Ok(FittedModel::Baseline(b.fit(train, seed)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Esn(EsnModel),
    Baseline(BaselineModel),
}

impl FittedModel {
    pub fn predict(&self, samples: &DMatrix<f64>) -> Result<Vec<u8>> {
        match self {
            FittedModel::Esn(m) => esn::predict(m, samples),
            FittedModel::Baseline(m) => m.predict(samples),
        }
    }
}

/// How the feature subset is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    /// Top `k` ANOVA features on the training rows.
    TopK(usize),
    /// Column indices fixed in advance.
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    /// Statistics of the selected columns only.
    pub scaler: Scaler,
    pub features: Vec<usize>,
    pub feature_names: Vec<String>,
    pub model: FittedModel,
}

/// Fits scaler, selection and model on `train_rows` of `table` only.
pub fn fit_pipeline(
    table: &FeatureTable,
    train_rows: &[usize],
    selection: &Selection,
    spec: &ModelSpec,
    seed: u64,
) -> Result<Pipeline> {
    let scaler = fit_scaler(table, train_rows)?;
    let train = apply_scaler(&scaler, &table.subset_rows(train_rows)?)?;
    let features = match selection {
        Selection::TopK(k) => select_top_k(&anova_f_scores(&train)?, *k)?,
        Selection::Fixed(f) => f.clone(),
    };
    let train = project(&train, &features)?;
    let model = spec.fit(&train, seed)?;
    Ok(Pipeline {
        scaler: scaler.select(&features),
        feature_names: train.feature_names().to_vec(),
        features,
        model,
    })
}

impl Pipeline {
    /// Standardised, projected values of `rows` of the full-width `table`.
    pub fn transform(&self, table: &FeatureTable, rows: &[usize]) -> Result<DMatrix<f64>> {
        let sub = project(&table.subset_rows(rows)?, &self.features)?;
        Ok(apply_scaler(&self.scaler, &sub)?.values().clone())
    }

    pub fn predict(&self, table: &FeatureTable, rows: &[usize]) -> Result<Vec<u8>> {
        self.model.predict(&self.transform(table, rows)?)
    }
}
