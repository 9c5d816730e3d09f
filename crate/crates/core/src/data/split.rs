use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureTable;
use crate::error::{Error, Result};

/// Disjoint train/test row partition. Both index lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSplit {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

/// Random train/test partition with `round(test_fraction * N)` test rows.
///
/// Stratified mode allocates the test rows to classes by largest remainder and keeps
/// at least one row of each class on both sides.
pub fn split(
    table: &FeatureTable,
    test_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<TrialSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::arg(format!(
            "test fraction {test_fraction} must lie in (0, 1)"
        )));
    }
    let n = table.n_rows();
    let counts = table.class_counts();
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::arg(format!(
            "both classes need at least 2 rows, found {counts:?}"
        )));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::arg(format!(
            "test fraction {test_fraction} leaves an empty side for {n} rows"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::with_capacity(n_test);
    let mut train = Vec::with_capacity(n - n_test);
    if stratified {
        let alloc = stratified_allocation(counts, n_test)?;
        for class in 0..2u8 {
            let mut rows: Vec<usize> = (0..n).filter(|&i| table.labels()[i] == class).collect();
            rows.shuffle(&mut rng);
            let k = alloc[class as usize];
            test.extend_from_slice(&rows[..k]);
            train.extend_from_slice(&rows[k..]);
        }
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    test.sort_unstable();
    train.sort_unstable();
    Ok(TrialSplit {
        train_indices: train,
        test_indices: test,
        seed,
    })
}

/// Largest-remainder allocation of `n_test` rows over the two classes.
fn stratified_allocation(counts: [usize; 2], n_test: usize) -> Result<[usize; 2]> {
    let n = (counts[0] + counts[1]) as f64;
    let quotas = counts.map(|c| c as f64 * n_test as f64 / n);
    let mut alloc = quotas.map(|q| q.floor() as usize);
    let mut left = n_test - alloc.iter().sum::<usize>();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        alloc[c] += 1;
        left -= 1;
    }
    // at least one row of each class on each side
    for c in 0..2 {
        let other = 1 - c;
        if alloc[c] == 0 && alloc[other] > 1 {
            alloc[c] += 1;
            alloc[other] -= 1;
        }
        if alloc[c] == counts[c] && alloc[other] + 1 < counts[other] {
            alloc[c] -= 1;
            alloc[other] += 1;
        }
    }
    for c in 0..2 {
        if alloc[c] == 0 || alloc[c] == counts[c] {
            return Err(Error::arg(format!(
                "cannot place both classes on both sides with {n_test} test rows and class counts {counts:?}"
            )));
        }
    }
    Ok(alloc)
}
