//! Synthetic stand-in for the voice dataset.
//!
//! Produces a table with the exact voice schema (22 named features, 147 PD and 48
//! healthy rows) from class-conditional distributions with roughly the per-class
//! location and spread of the public recordings. Values are not real measurements;
//! the generator exists so the full pipeline can be exercised without the data file.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FeatureTable, VOICE_FEATURES};

pub const SYNTHETIC_HEALTHY: usize = 48;
pub const SYNTHETIC_PD: usize = 147;

/// How each feature is drawn for one class.
#[derive(Clone, Copy)]
enum Shape {
    /// Normal(mean, sd).
    Normal(f64, f64),
    /// Log-normal with the given median and log-sd, sharing a latent perturbation factor.
    Perturbation(f64, f64),
}

// (healthy, pd) per feature, in VOICE_FEATURES order.
const PROFILE: [(Shape, Shape); 22] = {
    use Shape::*;
    [
        (Normal(181.9, 45.0), Normal(145.2, 30.0)),
        (Normal(223.6, 90.0), Normal(188.4, 85.0)),
        (Normal(145.2, 55.0), Normal(106.9, 32.0)),
        (Perturbation(0.0036, 0.35), Perturbation(0.0058, 0.5)),
        (Perturbation(2.1e-5, 0.45), Perturbation(4.2e-5, 0.55)),
        (Perturbation(0.0018, 0.4), Perturbation(0.0031, 0.55)),
        (Perturbation(0.0020, 0.35), Perturbation(0.0032, 0.5)),
        (Perturbation(0.0055, 0.4), Perturbation(0.0093, 0.55)),
        (Perturbation(0.016, 0.4), Perturbation(0.029, 0.5)),
        (Perturbation(0.15, 0.4), Perturbation(0.28, 0.5)),
        (Perturbation(0.0088, 0.4), Perturbation(0.015, 0.5)),
        (Perturbation(0.0098, 0.4), Perturbation(0.017, 0.5)),
        (Perturbation(0.0125, 0.4), Perturbation(0.023, 0.55)),
        (Perturbation(0.026, 0.4), Perturbation(0.045, 0.5)),
        (Perturbation(0.0075, 0.7), Perturbation(0.015, 0.9)),
        (Normal(24.7, 3.4), Normal(21.0, 4.3)),
        (Normal(0.443, 0.092), Normal(0.517, 0.101)),
        (Normal(0.696, 0.052), Normal(0.725, 0.054)),
        (Normal(-6.76, 0.64), Normal(-5.33, 0.97)),
        (Normal(0.160, 0.062), Normal(0.248, 0.077)),
        (Normal(2.15, 0.31), Normal(2.46, 0.37)),
        (Normal(0.123, 0.044), Normal(0.234, 0.085)),
    ]
};

/// Deterministic synthetic table for `seed`. Rows alternate classes in a fixed
/// pattern; ids are `synth_<class>_<index>`.
pub fn voice_like_table(seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = SYNTHETIC_HEALTHY + SYNTHETIC_PD;
    let mut labels = Vec::with_capacity(n);
    let mut healthy_left = SYNTHETIC_HEALTHY;
    for i in 0..n {
        let remaining = n - i;
        let p0 = healthy_left as f64 / remaining as f64;
        if healthy_left > 0 && rng.random::<f64>() < p0 {
            labels.push(0u8);
            healthy_left -= 1;
        } else {
            labels.push(1u8);
        }
    }

    let mut values = DMatrix::zeros(n, VOICE_FEATURES.len());
    for (i, &label) in labels.iter().enumerate() {
        let latent: f64 = rng.sample(StandardNormal);
        for (j, (healthy, pd)) in PROFILE.iter().enumerate() {
            let shape = if label == 0 { healthy } else { pd };
            let z: f64 = rng.sample(StandardNormal);
            values[(i, j)] = match *shape {
                Shape::Normal(mean, sd) => mean + sd * z,
                Shape::Perturbation(median, log_sd) => {
                    median * (log_sd * (0.85 * latent + 0.53 * z)).exp()
                }
            };
        }
    }
    let ids = labels
        .iter()
        .enumerate()
        .map(|(i, l)| format!("synth_{l}_{i:03}"))
        .collect();
    FeatureTable::new(
        values,
        VOICE_FEATURES.iter().map(|s| s.to_string()).collect(),
        labels,
        ids,
    )
    .expect("synthetic table satisfies the table invariants")
}

/// Uniform noise draw used by a few tests that need an unrelated random table.
pub fn random_table(rows: usize, cols: usize, seed: u64) -> FeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..cols).map(|j| format!("f{j}")).collect();
    let values = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    let mut labels: Vec<u8> = (0..rows).map(|i| (i % 2) as u8).collect();
    for i in (1..rows).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let ids = (0..rows).map(|i| format!("row{i}")).collect();
    FeatureTable::new(values, names, labels, ids).expect("random table is valid")
}
