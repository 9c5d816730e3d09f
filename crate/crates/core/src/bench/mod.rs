//! Repeated random-split benchmark: per trial, split, standardise, select, resolve
//! hyperparameters, fit, predict and score; then aggregate across trials.

mod config;
mod report;
mod svg;

pub use config::{BenchConfig, ReservoirSeed, SelectionMode, SpaceOverride, TuneMode};
pub use report::{emit_reports, emit_anova, emit_tuning, ReportBundle};

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, FeatureTable, TrialSplit};
use crate::error::{Error, Result};
use crate::esn::Encoding;
use crate::hyperopt::{cv_objective, point_from_spec, tune, HyperPoint, HyperSpace, TuneHistory, TuneSettings};
use crate::metrics::{confusion, metrics, ConfusionMatrix, TrialMetrics};
use crate::pipeline::{fit_pipeline, Method, ModelSpec, Pipeline, Selection};
use crate::select::{anova_f_scores, select_top_k};
use crate::seeds;

const MODEL_STREAM: u64 = 0x3d;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub spec: ModelSpec,
    pub point: HyperPoint,
    pub selected: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub metrics: TrialMetrics,
    /// Tuning run of this trial (per-trial tuning only).
    pub history: Option<TuneHistory>,
    /// Wall-clock time; reported in logs, never in data files.
    #[serde(skip)]
    pub duration: Duration,
}

/// Hyperparameters resolved ahead of the trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub spec: ModelSpec,
    pub history: Option<TuneHistory>,
}

/// Everything a trial needs besides its index: the table, the global feature set and
/// hyperparameters resolved before the trials.
#[derive(Debug, Clone)]
pub struct BenchContext {
    pub config: BenchConfig,
    pub table: FeatureTable,
    pub global_features: Option<Vec<usize>>,
    pub resolved: BTreeMap<Method, Resolved>,
}

impl BenchConfig {
    /// Default spec of `method` with the ESN encoding options applied.
    pub fn base_spec(&self, method: Method) -> ModelSpec {
        let mut spec = ModelSpec::default_for(method);
        if let ModelSpec::Esn(h) = &mut spec {
            h.include_bias = self.esn_bias;
            if self.sequence {
                h.encoding = Encoding::Sequence {
                    washout: self.washout,
                };
            }
        }
        spec
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    fn tune_settings(&self) -> TuneSettings {
        TuneSettings {
            budget: self.tune_budget,
            folds: self.folds,
            strategy: self.strategy,
        }
    }
}

impl BenchContext {
    /// Validates the config and resolves global selection and hyperparameters for
    /// `once` and `fixed` tuning.
    pub fn new(config: BenchConfig, table: FeatureTable) -> Result<Self> {
        config.validate(table.n_features())?;
        let global_features = match config.selection {
            SelectionMode::Global => Some(select_top_k(&anova_f_scores(&table)?, config.k_features)?),
            SelectionMode::PerTrial => None,
        };
        let mut ctx = Self {
            config,
            table,
            global_features,
            resolved: BTreeMap::new(),
        };
        for &method in &ctx.config.methods {
            let r = ctx.resolve(method)?;
            ctx.resolved.insert(method, r);
        }
        Ok(ctx)
    }

    pub fn selection(&self) -> Selection {
        match &self.global_features {
            Some(f) => Selection::Fixed(f.clone()),
            None => Selection::TopK(self.config.k_features),
        }
    }

    pub fn split(&self, trial: usize) -> Result<TrialSplit> {
        let c = &self.config;
        split(&self.table, c.test_fraction, c.trial_seed(trial), c.stratified)
    }

    fn resolve(&self, method: Method) -> Result<Resolved> {
        let c = &self.config;
        let base = c.base_spec(method);
        let seed = c.trial_seed(0);
        let wrap = |e| Error::Trial { seed, source: Box::new(e) };
        match c.tune_mode {
            TuneMode::PerTrial => Ok(Resolved { spec: base, history: None }),
            TuneMode::Once => {
                let train = self.table.subset_rows(&self.split(0)?.train_indices)?;
                let (spec, history) =
                    tune(&base, &c.space(method), &train, &self.selection(), &c.tune_settings(), seed)
                        .map_err(wrap)?;
                log_tuning(method, &history);
                Ok(Resolved { spec, history: Some(history) })
            }
            TuneMode::Fixed => {
                // a single CV evaluation of the default point documents the baseline
                let train = self.table.subset_rows(&self.split(0)?.train_indices)?;
                let cv = cv_objective(&base, &train, &self.selection(), c.folds, seed).map_err(wrap)?;
                let space = c.space(method);
                let mut history = TuneHistory::new(&space, seed, c.strategy, None);
                history.design.clear();
                history.record(space.restrict(&point_from_spec(&base)).unwrap_or(point_from_spec(&base)), cv);
                Ok(Resolved { spec: base, history: Some(history) })
            }
        }
    }

    fn model_seed(&self, method: Method, trial: usize) -> u64 {
        let c = &self.config;
        let from = if method == Method::Esn && c.reservoir_seed == ReservoirSeed::Fixed {
            c.base_seed
        } else {
            c.trial_seed(trial)
        };
        seeds::derive(from, MODEL_STREAM)
    }

    /// Fits the trial's pipeline on its training rows only.
    pub fn fit_trial(&self, method: Method, trial: usize) -> Result<(TrialSplit, Pipeline, ModelSpec, Option<TuneHistory>)> {
        let c = &self.config;
        let seed = c.trial_seed(trial);
        let inner = || -> Result<_> {
            let sp = self.split(trial)?;
            let selection = self.selection();
            let (spec, history) = match c.tune_mode {
                TuneMode::PerTrial => {
                    let train = self.table.subset_rows(&sp.train_indices)?;
                    let (spec, h) = tune(
                        &c.base_spec(method),
                        &c.space(method),
                        &train,
                        &selection,
                        &c.tune_settings(),
                        seed,
                    )?;
                    (spec, Some(h))
                }
                _ => {
                    let r = self
                        .resolved
                        .get(&method)
                        .ok_or_else(|| Error::arg(format!("method {method} is not configured")))?;
                    (r.spec.clone(), None)
                }
            };
            let pipe = fit_pipeline(&self.table, &sp.train_indices, &selection, &spec, self.model_seed(method, trial))?;
            Ok((sp, pipe, spec, history))
        };
        inner().map_err(|e| match e {
            e @ Error::Trial { .. } => e,
            e => Error::Trial { seed, source: Box::new(e) },
        })
    }
}

fn log_tuning(method: Method, h: &TuneHistory) {
    if let Some(best) = h.best_evaluation() {
        log::info!(
            "{method}: tuned over {} evaluations, best CV accuracy {:.4}",
            h.evaluations.len(),
            best.objective
        );
    }
}

/// One trial of one method.
pub fn run_trial(ctx: &BenchContext, method: Method, trial: usize) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = ctx.config.trial_seed(trial);
    let (sp, pipe, spec, history) = ctx.fit_trial(method, trial)?;
    let wrap = |e| Error::Trial { seed, source: Box::new(e) };
    let pred = pipe.predict(&ctx.table, &sp.test_indices).map_err(wrap)?;
    let truth: Vec<u8> = sp.test_indices.iter().map(|&r| ctx.table.labels()[r]).collect();
    let cm = confusion(&pred, &truth).map_err(wrap)?;
    let m = metrics(&cm).map_err(wrap)?;
    let duration = start.elapsed();
    log::debug!("{method} trial {trial} (seed {seed}): {cm:?} in {duration:?}");
    Ok(TrialRecord {
        trial,
        seed,
        method,
        point: point_from_spec(&spec),
        spec,
        selected: pipe.feature_names.clone(),
        confusion: cm,
        metrics: m,
        history,
        duration,
    })
}

/// All trials of all configured methods, in config method order then trial order.
pub fn run_benchmark(config: &BenchConfig, table: &FeatureTable) -> Result<ReportBundle> {
    let ctx = BenchContext::new(config.clone(), table.clone())?;
    let jobs: Vec<(Method, usize)> = config
        .methods
        .iter()
        .flat_map(|&m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(m, t)| run_trial(&ctx, m, t))
        .collect::<Result<_>>()?;
    for &m in &config.methods {
        let total: Duration = records.iter().filter(|r| r.method == m).map(|r| r.duration).sum();
        log::info!("{m}: {} trials, {:.2?} total fit/predict time", config.trials, total);
    }
    ReportBundle::assemble(&ctx, records)
}

/// Resolved search spaces of the configured methods, for reporting.
pub fn spaces(config: &BenchConfig) -> Vec<(Method, HyperSpace)> {
    config.methods.iter().map(|&m| (m, config.space(m))).collect()
}
