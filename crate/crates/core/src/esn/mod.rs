//! Echo state network classifier: fixed sparse reservoir, leaky tanh units and a ridge
//! readout over the concatenated input and reservoir state.
//!
//! Static feature vectors are encoded per sample: the state is reset to zero, the
//! sample is held as a constant input for `encode_steps` updates and the final state
//! is kept. [`Encoding::Sequence`] instead threads one trajectory through the samples
//! in the order given.

mod readout;
mod reservoir;
pub mod spectral;

pub use readout::train_readout;
pub use reservoir::{
    build_sequence_states, build_state_matrix, encode_sample, init_reservoir, Reservoir,
    StateMatrix,
};
pub use spectral::{spectral_radius, spectral_radius_detailed, SpectralEstimate, SpectralMethod};

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Encoding {
    PerSample,
    Sequence { washout: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsnHyperParams {
    pub reservoir_size: usize,
    pub spectral_radius: f64,
    /// Leaky-integration blend in (0, 1]; 1 is the plain update.
    pub leaking_rate: f64,
    /// Ridge coefficient of the readout.
    pub ridge: f64,
    pub input_scaling: f64,
    /// Fraction of non-zero recurrent weights.
    pub sparsity: f64,
    pub encode_steps: usize,
    pub include_bias: bool,
    pub encoding: Encoding,
}

impl Default for EsnHyperParams {
    fn default() -> Self {
        Self {
            reservoir_size: 100,
            spectral_radius: 0.9,
            leaking_rate: 0.5,
            ridge: 1e-4,
            input_scaling: 1.0,
            sparsity: 0.1,
            encode_steps: 20,
            include_bias: false,
            encoding: Encoding::PerSample,
        }
    }
}

impl EsnHyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::arg(format!("invalid ESN hyperparameter: {what}")));
        if self.reservoir_size == 0 {
            return bad("reservoir_size must be >= 1");
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return bad("spectral_radius must be > 0");
        }
        if !(self.leaking_rate > 0.0 && self.leaking_rate <= 1.0) {
            return bad("leaking_rate must lie in (0, 1]");
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad("ridge must be >= 0");
        }
        if !(self.input_scaling > 0.0 && self.input_scaling.is_finite()) {
            return bad("input_scaling must be > 0");
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return bad("sparsity must lie in (0, 1]");
        }
        if self.encode_steps == 0 {
            return bad("encode_steps must be >= 1");
        }
        Ok(())
    }
}

/// How the readout design size compares with the number of training rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapacityNote {
    /// Fewer rows than readout columns: the readout can interpolate, ridge carries the fit.
    Underdetermined,
    /// At least as many rows as readout columns.
    Overdetermined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsnModel {
    pub reservoir: Reservoir,
    pub w_out: DVector<f64>,
    pub threshold: f64,
    pub capacity: CapacityNote,
    /// Reservoir state after the training sequence (sequence encoding only).
    pub final_state: Option<Vec<f64>>,
}

impl EsnModel {
    fn states(&self, samples: &DMatrix<f64>) -> Result<StateMatrix> {
        match (self.reservoir.hyper.encoding, &self.final_state) {
            (Encoding::Sequence { .. }, Some(x0)) => {
                build_sequence_states(&self.reservoir, samples, x0, 0).map(|(s, _)| s)
            }
            _ => build_state_matrix(&self.reservoir, samples),
        }
    }

    /// Raw readout outputs `X w_out`.
    pub fn decision_values(&self, samples: &DMatrix<f64>) -> Result<Vec<f64>> {
        let states = self.states(samples)?;
        Ok((&states.x * &self.w_out).iter().copied().collect())
    }

    /// Writes a plain-text dump of the hyperparameters and all weight matrices.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let hyper = serde_json::to_string(&self.reservoir.hyper).map_err(std::io::Error::other)?;
        writeln!(w, "esn-dump v1")?;
        writeln!(w, "hyper {hyper}")?;
        writeln!(w, "seed {}", self.reservoir.seed)?;
        writeln!(w, "threshold {:?}", self.threshold)?;
        for (name, m) in [("w_in", &self.reservoir.w_in), ("w", &self.reservoir.w)] {
            writeln!(w, "{name} {} {}", m.nrows(), m.ncols())?;
            for row in m.row_iter() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", cells.join(" "))?;
            }
        }
        writeln!(w, "w_out 1 {}", self.w_out.len())?;
        let cells: Vec<String> = self.w_out.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(" "))
    }
}

/// Trains an ESN on a (standardised, projected) table with targets 0/1.
pub fn fit(train: &FeatureTable, hyper: &EsnHyperParams, seed: u64) -> Result<EsnModel> {
    let [n0, n1] = train.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::arg("ESN training set must contain both classes"));
    }
    let reservoir = init_reservoir(hyper, train.n_features(), seed)?;
    let y: Vec<f64> = train.labels().iter().map(|&l| f64::from(l)).collect();
    let (states, targets, final_state) = match hyper.encoding {
        Encoding::PerSample => (build_state_matrix(&reservoir, train.values())?, y, None),
        Encoding::Sequence { washout } => {
            if washout >= train.n_rows() {
                return Err(Error::arg(format!(
                    "washout {washout} leaves no training rows out of {}",
                    train.n_rows()
                )));
            }
            let x0 = vec![0.0; reservoir.n_units()];
            let (s, last) = build_sequence_states(&reservoir, train.values(), &x0, washout)?;
            (s, y[washout..].to_vec(), Some(last))
        }
    };
    let columns = states.n_cols();
    let capacity = if states.n_rows() < columns {
        log::debug!(
            "ESN readout has {} rows for {columns} columns; relying on ridge {:e}",
            states.n_rows(),
            hyper.ridge
        );
        CapacityNote::Underdetermined
    } else {
        CapacityNote::Overdetermined
    };
    let w_out = train_readout(&states.x, &targets, hyper.ridge)?;
    Ok(EsnModel {
        reservoir,
        w_out,
        threshold: 0.5,
        capacity,
        final_state,
    })
}

/// Labels: 1 where the readout output is >= the threshold.
pub fn predict(model: &EsnModel, samples: &DMatrix<f64>) -> Result<Vec<u8>> {
    Ok(model
        .decision_values(samples)?
        .into_iter()
        .map(|v| u8::from(v >= model.threshold))
        .collect())
}
