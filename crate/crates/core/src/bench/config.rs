use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperopt::{space_for, Dimension, HyperSpace, Strategy, DEFAULT_BUDGET, DEFAULT_FOLDS};
use crate::pipeline::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// ANOVA ranking refitted on every trial's training rows.
    PerTrial,
    /// One ranking on the full table, shared by all trials.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneMode {
    PerTrial,
    /// Tune on trial 0's training rows and reuse the result.
    Once,
    /// Default hyperparameters, no tuning.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReservoirSeed {
    PerTrial,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceOverride {
    pub method: Method,
    pub dimension: Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub data: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub test_fraction: f64,
    pub k_features: usize,
    pub selection: SelectionMode,
    pub tune_mode: TuneMode,
    pub tune_budget: usize,
    pub folds: usize,
    pub strategy: Strategy,
    pub base_seed: u64,
    pub stratified: bool,
    pub out: PathBuf,
    pub reservoir_seed: ReservoirSeed,
    /// Feed samples to the ESN as one sequence instead of per-sample resets.
    pub sequence: bool,
    pub washout: usize,
    pub esn_bias: bool,
    pub space_overrides: Vec<SpaceOverride>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            data: None,
            methods: Method::ALL.to_vec(),
            trials: 100,
            test_fraction: 0.2,
            k_features: 4,
            selection: SelectionMode::PerTrial,
            tune_mode: TuneMode::Once,
            tune_budget: DEFAULT_BUDGET,
            folds: DEFAULT_FOLDS,
            strategy: Strategy::Bayesian,
            base_seed: 42,
            stratified: true,
            out: PathBuf::from("results"),
            reservoir_seed: ReservoirSeed::PerTrial,
            sequence: false,
            washout: 10,
            esn_bias: false,
            space_overrides: Vec::new(),
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::arg(format!("{key}: expected true or false, got `{v}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::arg(format!("{key}: cannot parse `{v}`")))
}

impl BenchConfig {
    /// CI preset: 20 trials, budget 10, tune once.
    pub fn quick(mut self) -> Self {
        self.trials = 20;
        self.tune_budget = 10;
        self.tune_mode = TuneMode::Once;
        self
    }

    /// Sets one option by its flag name (`tune-budget` and `tune_budget` both work).
    ///
    /// `space.<method>.<dimension>` keys replace or add a search dimension, with values
    /// such as `log:1e-6:1`, `int:10:50`, `real:0:1` or `cat:rbf|linear`.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let v = value.trim();
        if let Some(rest) = key.strip_prefix("space.") {
            let (method, dim) = rest
                .split_once('.')
                .ok_or_else(|| Error::arg(format!("`{key}`: expected space.<method>.<dimension>")))?;
            let method: Method = method.parse()?;
            let dimension = Dimension::parse(dim, v)?;
            self.space_overrides.push(SpaceOverride { method, dimension });
            return Ok(());
        }
        match key.as_str() {
            "data" => self.data = Some(PathBuf::from(v)),
            "methods" | "method" => self.methods = Method::parse_list(v)?,
            "trials" => self.trials = parse_num(&key, v)?,
            "test-fraction" => self.test_fraction = parse_num(&key, v)?,
            "k-features" | "k" => self.k_features = parse_num(&key, v)?,
            "selection" => {
                self.selection = match v {
                    "per-trial" => SelectionMode::PerTrial,
                    "global" => SelectionMode::Global,
                    _ => return Err(Error::arg(format!("selection: expected per-trial or global, got `{v}`"))),
                }
            }
            "tune-mode" => {
                self.tune_mode = match v {
                    "per-trial" => TuneMode::PerTrial,
                    "once" => TuneMode::Once,
                    "fixed" => TuneMode::Fixed,
                    _ => {
                        return Err(Error::arg(format!(
                            "tune-mode: expected per-trial, once or fixed, got `{v}`"
                        )))
                    }
                }
            }
            "tune-budget" => self.tune_budget = parse_num(&key, v)?,
            "folds" => self.folds = parse_num(&key, v)?,
            "search" | "strategy" => {
                self.strategy = match v {
                    "bayes" | "bayesian" => Strategy::Bayesian,
                    "random" => Strategy::Random,
                    _ => return Err(Error::arg(format!("search: expected bayesian or random, got `{v}`"))),
                }
            }
            "seed" | "base-seed" => self.base_seed = parse_num(&key, v)?,
            "stratified" => self.stratified = parse_bool(&key, v)?,
            "out" => self.out = PathBuf::from(v),
            "reservoir-seed" => {
                self.reservoir_seed = match v {
                    "per-trial" => ReservoirSeed::PerTrial,
                    "fixed" => ReservoirSeed::Fixed,
                    _ => {
                        return Err(Error::arg(format!(
                            "reservoir-seed: expected per-trial or fixed, got `{v}`"
                        )))
                    }
                }
            }
            "sequence" => self.sequence = parse_bool(&key, v)?,
            "washout" => self.washout = parse_num(&key, v)?,
            "esn-bias" | "bias" => self.esn_bias = parse_bool(&key, v)?,
            "quick" => {
                if parse_bool(&key, v)? {
                    *self = self.clone().quick();
                }
            }
            _ => return Err(Error::arg(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn read_file(path: &Path) -> Result<Vec<(String, String)>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::arg(format!("{}:{}: expected key = value", path.display(), no + 1))
            })?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::arg("trials must be >= 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::arg(format!(
                "test fraction {} must lie in (0, 1)",
                self.test_fraction
            )));
        }
        let max_k = n_features.min(22);
        if self.k_features == 0 || self.k_features > max_k {
            return Err(Error::arg(format!(
                "k-features {} must lie in 1..={max_k}",
                self.k_features
            )));
        }
        if self.tune_mode != TuneMode::Fixed && self.tune_budget == 0 {
            return Err(Error::arg("tune budget must be >= 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::arg("no methods selected"));
        }
        for o in &self.space_overrides {
            let mut space = space_for(o.method);
            space.set(o.dimension.clone());
            HyperSpace::new(space.dimensions)?;
        }
        Ok(())
    }

    /// Search space of `method` after overrides.
    pub fn space(&self, method: Method) -> HyperSpace {
        let mut space = space_for(method);
        for o in self.space_overrides.iter().filter(|o| o.method == method) {
            space.set(o.dimension.clone());
        }
        space
    }
}
