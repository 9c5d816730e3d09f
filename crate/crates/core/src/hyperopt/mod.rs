//! Bayesian optimisation of classifier hyperparameters against stratified
//! cross-validated accuracy.
//!
//! The loop starts from a Latin-hypercube design (with the method's default point
//! first), then proposes the candidate with the highest expected improvement under a
//! Gaussian-process surrogate fitted to everything seen so far.

pub mod gp;
pub mod space;

pub use gp::GaussianProcess;
pub use space::{DimKind, Dimension, HyperPoint, HyperSpace, HyperValue};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineSpec, Kernel};
use crate::data::FeatureTable;
use crate::error::{Error, Result};
use crate::pipeline::{fit_pipeline, Method, ModelSpec, Selection};
use crate::seeds;

pub const INITIAL_DESIGN: usize = 10;
pub const CANDIDATES: usize = 1024;
pub const DEFAULT_BUDGET: usize = 40;
pub const DEFAULT_FOLDS: usize = 5;

const DESIGN_STREAM: u64 = 0xd5;
const PROPOSAL_STREAM: u64 = 0xb0;
const CV_STREAM: u64 = 0xcf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Latin hypercube, then GP expected improvement.
    Bayesian,
    /// Uniform random proposals throughout (ablation).
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub point: HyperPoint,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneHistory {
    pub evaluations: Vec<Evaluation>,
    /// Index of the first evaluation attaining the maximum.
    pub best: Option<usize>,
    pub seed: u64,
    pub strategy: Strategy,
    /// Points returned before the surrogate takes over.
    pub design: Vec<HyperPoint>,
}

impl TuneHistory {
    /// Empty history. The initial design holds `start` (if any) followed by
    /// Latin-hypercube points up to [`INITIAL_DESIGN`] in total.
    pub fn new(space: &HyperSpace, seed: u64, strategy: Strategy, start: Option<HyperPoint>) -> Self {
        let mut design: Vec<HyperPoint> = start.into_iter().collect();
        if strategy == Strategy::Bayesian {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, DESIGN_STREAM));
            let n = INITIAL_DESIGN.saturating_sub(design.len());
            design.extend(
                latin_hypercube(n, space.len(), &mut rng)
                    .iter()
                    .map(|u| space.decode(u)),
            );
        }
        Self {
            evaluations: Vec::new(),
            best: None,
            seed,
            strategy,
            design,
        }
    }

    pub fn record(&mut self, point: HyperPoint, objective: f64) {
        let improves = self
            .best
            .is_none_or(|b| objective > self.evaluations[b].objective);
        self.evaluations.push(Evaluation { point, objective });
        if improves {
            self.best = Some(self.evaluations.len() - 1);
        }
    }

    pub fn best_evaluation(&self) -> Option<&Evaluation> {
        self.best.map(|b| &self.evaluations[b])
    }

    /// Running maximum of the objective.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut acc = f64::NEG_INFINITY;
        self.evaluations
            .iter()
            .map(|e| {
                acc = acc.max(e.objective);
                acc
            })
            .collect()
    }
}

/// `n` points in `[0,1]^d`: every axis has exactly one point per `1/n` stratum.
#[allow(clippy::needless_range_loop)]
pub fn latin_hypercube<R: Rng>(n: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (i, p) in perm.into_iter().enumerate() {
            pts[i][j] = (p as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

fn uniform_point<R: Rng>(space: &HyperSpace, rng: &mut R) -> HyperPoint {
    let u: Vec<f64> = (0..space.len()).map(|_| rng.random::<f64>()).collect();
    space.decode(&u)
}

/// Next point to evaluate.
pub fn propose<R: Rng>(history: &TuneHistory, space: &HyperSpace, rng: &mut R) -> Result<HyperPoint> {
    let seen = history.evaluations.len();
    if history.strategy == Strategy::Random {
        return Ok(uniform_point(space, rng));
    }
    if seen < history.design.len() {
        return Ok(history.design[seen].clone());
    }
    let x: Vec<Vec<f64>> = history
        .evaluations
        .iter()
        .map(|e| space.embed(&e.point))
        .collect::<Result<_>>()?;
    let y: Vec<f64> = history.evaluations.iter().map(|e| e.objective).collect();
    let Some(gp) = GaussianProcess::fit(&x, &y) else {
        log::debug!("surrogate fit degenerate after {seen} evaluations; proposing uniformly");
        return Ok(uniform_point(space, rng));
    };
    let mut best: Option<(HyperPoint, f64)> = None;
    for _ in 0..CANDIDATES {
        let p = uniform_point(space, rng);
        let ei = gp.expected_improvement(&space.embed(&p)?);
        if best.as_ref().is_none_or(|(_, b)| ei > *b) {
            best = Some((p, ei));
        }
    }
    Ok(best.expect("candidate set is non-empty").0)
}

/// Runs `budget` propose/evaluate rounds and returns the best point.
pub fn optimize<F>(
    space: &HyperSpace,
    start: Option<HyperPoint>,
    budget: usize,
    seed: u64,
    strategy: Strategy,
    mut objective: F,
) -> Result<(HyperPoint, TuneHistory)>
where
    F: FnMut(&HyperPoint) -> Result<f64>,
{
    if budget == 0 {
        return Err(Error::arg("tuning budget must be >= 1"));
    }
    if let Some(p) = &start {
        if !space.contains(p) {
            return Err(Error::arg("start point lies outside the search space"));
        }
    }
    let mut history = TuneHistory::new(space, seed, strategy, start);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, PROPOSAL_STREAM));
    for _ in 0..budget {
        let p = propose(&history, space, &mut rng)?;
        let v = objective(&p)?;
        if !v.is_finite() {
            return Err(Error::Degenerate(format!("objective returned {v}")));
        }
        history.record(p, v);
    }
    let best = history.best_evaluation().expect("budget >= 1").point.clone();
    Ok((best, history))
}

/// Default search space of a method.
pub fn space_for(method: Method) -> HyperSpace {
    let dims = match method {
        Method::Esn => vec![
            Dimension::integer("reservoir_size", 20, 300),
            Dimension::real("spectral_radius", 0.1, 1.5),
            Dimension::real("leaking_rate", 0.05, 1.0),
            Dimension::log_real("ridge", 1e-8, 10.0),
            Dimension::log_real("input_scaling", 0.05, 5.0),
            Dimension::categorical("bias", &["off", "on"]),
        ],
        Method::Knn => vec![Dimension::integer("k", 1, 25)],
        Method::Dt => vec![
            Dimension::integer("max_depth", 1, 12),
            Dimension::integer("min_samples_split", 2, 20),
        ],
        Method::Rf => vec![
            Dimension::integer("n_trees", 50, 400),
            Dimension::integer("max_depth", 2, 12),
        ],
        Method::Xgb => vec![
            Dimension::integer("rounds", 20, 300),
            Dimension::integer("max_depth", 1, 4),
            Dimension::log_real("learning_rate", 0.01, 0.5),
        ],
        Method::Svc => vec![
            Dimension::log_real("C", 1e-2, 1e3),
            Dimension::log_real("gamma", 1e-3, 1e1),
            Dimension::categorical("kernel", &["rbf", "linear"]),
        ],
    };
    HyperSpace::new(dims).expect("built-in spaces are valid")
}

/// Every tunable knob of a spec as a point.
pub fn point_from_spec(spec: &ModelSpec) -> HyperPoint {
    use HyperValue::{Cat, Int, Real};
    let values: Vec<(&str, HyperValue)> = match spec {
        ModelSpec::Esn(h) => vec![
            ("reservoir_size", Int(h.reservoir_size as i64)),
            ("spectral_radius", Real(h.spectral_radius)),
            ("leaking_rate", Real(h.leaking_rate)),
            ("ridge", Real(h.ridge)),
            ("input_scaling", Real(h.input_scaling)),
            ("sparsity", Real(h.sparsity)),
            ("encode_steps", Int(h.encode_steps as i64)),
            ("bias", Cat(if h.include_bias { "on" } else { "off" }.into())),
        ],
        ModelSpec::Baseline(BaselineSpec::Knn { k }) => vec![("k", Int(*k as i64))],
        ModelSpec::Baseline(BaselineSpec::Dtree(p)) => vec![
            ("max_depth", Int(p.max_depth as i64)),
            ("min_samples_split", Int(p.min_samples_split as i64)),
        ],
        ModelSpec::Baseline(BaselineSpec::Rforest(p)) => vec![
            ("n_trees", Int(p.n_trees as i64)),
            ("max_depth", Int(p.tree.max_depth as i64)),
            ("min_samples_split", Int(p.tree.min_samples_split as i64)),
        ],
        ModelSpec::Baseline(BaselineSpec::Gboost(p)) => vec![
            ("rounds", Int(p.rounds as i64)),
            ("max_depth", Int(p.max_depth as i64)),
            ("learning_rate", Real(p.learning_rate)),
        ],
        ModelSpec::Baseline(BaselineSpec::Svc(p)) => vec![
            ("C", Real(p.c)),
            ("gamma", Real(p.gamma)),
            ("kernel", Cat(p.kernel.name().into())),
        ],
    };
    HyperPoint {
        values: values.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
    }
}

/// Applies the values of `point` on top of `base`. Unknown names are an error.
pub fn spec_with_point(base: &ModelSpec, point: &HyperPoint) -> Result<ModelSpec> {
    let mut spec = base.clone();
    for (name, value) in &point.values {
        let bad = || Error::arg(format!("hyperparameter `{name}` = {value} is not valid for {}", base.method()));
        let int = || match value {
            HyperValue::Int(v) if *v >= 0 => Ok(*v as usize),
            _ => Err(bad()),
        };
        let real = || value.as_f64().ok_or_else(bad);
        match (&mut spec, name.as_str()) {
            (ModelSpec::Esn(h), "reservoir_size") => h.reservoir_size = int()?,
            (ModelSpec::Esn(h), "spectral_radius") => h.spectral_radius = real()?,
            (ModelSpec::Esn(h), "leaking_rate") => h.leaking_rate = real()?,
            (ModelSpec::Esn(h), "ridge") => h.ridge = real()?,
            (ModelSpec::Esn(h), "input_scaling") => h.input_scaling = real()?,
            (ModelSpec::Esn(h), "sparsity") => h.sparsity = real()?,
            (ModelSpec::Esn(h), "encode_steps") => h.encode_steps = int()?,
            (ModelSpec::Esn(h), "bias") => {
                h.include_bias = match value {
                    HyperValue::Cat(s) if s == "on" => true,
                    HyperValue::Cat(s) if s == "off" => false,
                    _ => return Err(bad()),
                }
            }
            (ModelSpec::Baseline(BaselineSpec::Knn { k }), "k") => *k = int()?,
            (ModelSpec::Baseline(BaselineSpec::Dtree(p)), "max_depth") => p.max_depth = int()?,
            (ModelSpec::Baseline(BaselineSpec::Dtree(p)), "min_samples_split") => {
                p.min_samples_split = int()?
            }
            (ModelSpec::Baseline(BaselineSpec::Rforest(p)), "n_trees") => p.n_trees = int()?,
            (ModelSpec::Baseline(BaselineSpec::Rforest(p)), "max_depth") => p.tree.max_depth = int()?,
            (ModelSpec::Baseline(BaselineSpec::Rforest(p)), "min_samples_split") => {
                p.tree.min_samples_split = int()?
            }
            (ModelSpec::Baseline(BaselineSpec::Gboost(p)), "rounds") => p.rounds = int()?,
            (ModelSpec::Baseline(BaselineSpec::Gboost(p)), "max_depth") => p.max_depth = int()?,
            (ModelSpec::Baseline(BaselineSpec::Gboost(p)), "learning_rate") => p.learning_rate = real()?,
            (ModelSpec::Baseline(BaselineSpec::Svc(p)), "C") => p.c = real()?,
            (ModelSpec::Baseline(BaselineSpec::Svc(p)), "gamma") => p.gamma = real()?,
            (ModelSpec::Baseline(BaselineSpec::Svc(p)), "kernel") => {
                p.kernel = match value {
                    HyperValue::Cat(s) if s == "rbf" => Kernel::Rbf,
                    HyperValue::Cat(s) if s == "linear" => Kernel::Linear,
                    _ => return Err(bad()),
                }
            }
            _ => return Err(bad()),
        }
    }
    Ok(spec)
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
/// Returns the held-out rows of every fold, sorted.
pub fn stratified_folds(labels: &[u8], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::arg(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut offset = 0;
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if rows.len() < folds {
            return Err(Error::arg(format!(
                "class {class} has {} rows, too few for {folds}-fold stratified CV",
                rows.len()
            )));
        }
        rows.shuffle(&mut rng);
        for (pos, r) in rows.into_iter().enumerate() {
            out[(offset + pos) % folds].push(r);
        }
        // continue the deal where the previous class stopped to balance fold sizes
        offset = (offset + labels.iter().filter(|&&l| l == class).count()) % folds;
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

/// Mean held-out accuracy of `fit_predict(table, train_rows, test_rows)` over
/// stratified folds. Folds run in parallel; the mean is taken in fold order.
pub fn cv_accuracy<F>(table: &FeatureTable, folds: usize, seed: u64, fit_predict: F) -> Result<f64>
where
    F: Fn(&[usize], &[usize], usize) -> Result<Vec<u8>> + Sync,
{
    let held_out = stratified_folds(table.labels(), folds, seed)?;
    let labels = table.labels();
    let accs: Vec<f64> = held_out
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let mut in_test = vec![false; table.n_rows()];
            for &r in test {
                in_test[r] = true;
            }
            let train: Vec<usize> = (0..table.n_rows()).filter(|&r| !in_test[r]).collect();
            let pred = fit_predict(&train, test, f)?;
            let hits = pred.iter().zip(test).filter(|(p, &r)| **p == labels[r]).count();
            Ok(hits as f64 / test.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}

/// Cross-validated accuracy of `spec` on `train`, with scaling and selection refitted
/// inside every fold.
pub fn cv_objective(
    spec: &ModelSpec,
    train: &FeatureTable,
    selection: &Selection,
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let fold_seed = seeds::derive(seed, CV_STREAM);
    cv_accuracy(train, folds, fold_seed, |tr, te, f| {
        let model_seed = seeds::derive(seed, f as u64);
        fit_pipeline(train, tr, selection, spec, model_seed)?.predict(train, te)
    })
}

/// Tuning settings shared by every method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSettings {
    pub budget: usize,
    pub folds: usize,
    pub strategy: Strategy,
}

impl Default for TuneSettings {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            folds: DEFAULT_FOLDS,
            strategy: Strategy::Bayesian,
        }
    }
}

/// Tunes `base` over `space` on the rows of `train`. The base point is evaluated
/// first when it lies inside the space. The CV folds are the same for every point.
pub fn tune(
    base: &ModelSpec,
    space: &HyperSpace,
    train: &FeatureTable,
    selection: &Selection,
    settings: &TuneSettings,
    seed: u64,
) -> Result<(ModelSpec, TuneHistory)> {
    let start = match settings.strategy {
        Strategy::Bayesian => space.restrict(&point_from_spec(base)),
        Strategy::Random => None,
    };
    let (best, history) = optimize(space, start, settings.budget, seed, settings.strategy, |p| {
        let spec = spec_with_point(base, p)?;
        cv_objective(&spec, train, selection, settings.folds, seed)
    })?;
    Ok((spec_with_point(base, &best)?, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::voice_like_table;

    fn unit_space() -> HyperSpace {
        HyperSpace::new(vec![Dimension::real("x", 0.0, 1.0)]).unwrap()
    }

    fn quad(p: &HyperPoint) -> Result<f64> {
        let x = p.get("x").unwrap().as_f64().unwrap();
        Ok(-(x - 0.3) * (x - 0.3))
    }

    #[test]
    fn lhs_has_one_point_per_stratum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = latin_hypercube(10, 3, &mut rng);
        for j in 0..3 {
            let mut cells: Vec<usize> = pts.iter().map(|p| (p[j] * 10.0) as usize).collect();
            cells.sort_unstable();
            assert_eq!(cells, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn first_proposal_is_first_design_point() {
        let s = unit_space();
        let h = TuneHistory::new(&s, 3, Strategy::Bayesian, None);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = propose(&h, &s, &mut rng).unwrap();
        assert_eq!(p, h.design[0]);
        assert_eq!(h, TuneHistory::new(&s, 3, Strategy::Bayesian, None));
    }

    #[test]
    fn flat_history_falls_back_to_uniform() {
        let s = unit_space();
        let mut h = TuneHistory::new(&s, 3, Strategy::Bayesian, None);
        for i in 0..INITIAL_DESIGN {
            h.record(s.decode(&[i as f64 / 10.0]), 0.5);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = propose(&h, &s, &mut rng).unwrap();
        assert!(s.contains(&p));
    }

    #[test]
    fn finds_quadratic_optimum() {
        let (best, h) = optimize(&unit_space(), None, 20, 7, Strategy::Bayesian, quad).unwrap();
        let x = best.get("x").unwrap().as_f64().unwrap();
        assert!((x - 0.3).abs() < 0.05, "{x}");
        assert_eq!(h.evaluations.len(), 20);
        assert_eq!(
            h.best_so_far().last().copied(),
            Some(h.best_evaluation().unwrap().objective)
        );
    }

    #[test]
    fn budget_one_and_zero() {
        let (best, h) = optimize(&unit_space(), None, 1, 2, Strategy::Bayesian, quad).unwrap();
        assert_eq!(h.evaluations.len(), 1);
        assert_eq!(best, h.evaluations[0].point);
        assert!(optimize(&unit_space(), None, 0, 2, Strategy::Bayesian, quad).is_err());
    }

    #[test]
    fn folds_are_stratified_partition() {
        let labels: Vec<u8> = (0..195).map(|i| u8::from(i >= 48)).collect();
        let f = stratified_folds(&labels, 5, 9).unwrap();
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..195).collect::<Vec<_>>());
        for fold in &f {
            let ones = fold.iter().filter(|&&r| labels[r] == 1).count();
            assert!((29..=30).contains(&ones));
            assert!((9..=10).contains(&(fold.len() - ones)));
        }
        assert!(stratified_folds(&[0, 1, 1, 1], 2, 0).is_err());
        assert!(stratified_folds(&labels, 1, 0).is_err());
    }

    #[test]
    fn constant_classifier_scores_prior() {
        let t = voice_like_table(2);
        let acc = cv_accuracy(&t, 5, 1, |_, te, _| Ok(vec![1; te.len()])).unwrap();
        assert!((acc - 147.0 / 195.0).abs() < 0.01, "{acc}");
    }

    #[test]
    fn spec_point_round_trip() {
        for m in Method::ALL {
            let spec = ModelSpec::default_for(m);
            let p = point_from_spec(&spec);
            assert_eq!(spec_with_point(&spec, &p).unwrap(), spec);
            let space = space_for(m);
            let start = space.restrict(&p).expect("default lies in the space");
            assert!(space.contains(&start));
        }
        let bad = HyperPoint { values: vec![("k".into(), HyperValue::Int(3))] };
        assert!(spec_with_point(&ModelSpec::default_for(Method::Esn), &bad).is_err());
    }

    #[test]
    fn tuning_is_deterministic_and_beats_default() {
        let t = voice_like_table(4);
        let base = ModelSpec::default_for(Method::Knn);
        let settings = TuneSettings { budget: 12, ..Default::default() };
        let sel = Selection::TopK(4);
        let (spec, h) = tune(&base, &space_for(Method::Knn), &t, &sel, &settings, 5).unwrap();
        let (_, h2) = tune(&base, &space_for(Method::Knn), &t, &sel, &settings, 5).unwrap();
        assert_eq!(h, h2);
        let default_cv = cv_objective(&base, &t, &sel, 5, 5).unwrap();
        assert_eq!(h.evaluations[0].objective, default_cv);
        assert!(h.best_evaluation().unwrap().objective >= default_cv);
        assert!(matches!(spec, ModelSpec::Baseline(BaselineSpec::Knn { .. })));
    }
}
