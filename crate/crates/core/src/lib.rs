//! Reservoir-computing classification toolkit and benchmark harness for tabular
//! voice-feature data.

pub mod baselines;
pub mod bench;
pub mod data;
pub mod error;
pub mod esn;
pub mod hyperopt;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod seeds;
pub mod select;

pub use error::{Error, Result};
