//! One-way ANOVA F-value ranking and column projection.

use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};

/// Per-feature group statistics behind one F-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    /// Rows per class present, ordered by class label.
    pub counts: Vec<usize>,
    pub group_means: Vec<f64>,
    pub overall_mean: f64,
    pub n_groups: usize,
    pub total: usize,
    pub between: f64,
    pub within: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FScoreReport {
    pub feature_names: Vec<String>,
    /// Non-negative; `+inf` when the within-group term vanishes.
    pub f_values: Vec<f64>,
    /// True where both variability terms are zero (F reported as 0).
    pub degenerate: Vec<bool>,
    pub group_stats: Vec<GroupStats>,
}

impl FScoreReport {
    /// 1-based rank of every feature under the `select_top_k` ordering.
    pub fn ranks(&self) -> Vec<usize> {
        let order = ranking(&self.f_values);
        let mut ranks = vec![0; order.len()];
        for (pos, &idx) in order.iter().enumerate() {
            ranks[idx] = pos + 1;
        }
        ranks
    }
}

/// Plain mean, exact for constant input. A correctly rounded quotient of exact sums
/// also maps equal rational means to the same double.
fn mean(vals: &[f64]) -> f64 {
    if vals.iter().all(|&v| v == vals[0]) {
        vals[0]
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

pub fn anova_f_scores(table: &FeatureTable) -> Result<FScoreReport> {
    let labels = table.labels();
    let classes: Vec<u8> = [0u8, 1]
        .into_iter()
        .filter(|c| labels.contains(c))
        .collect();
    let k = classes.len();
    let n = labels.len();
    if k < 2 {
        return Err(Error::arg("ANOVA needs at least two classes"));
    }
    if n <= k {
        return Err(Error::arg(format!(
            "ANOVA needs more rows ({n}) than groups ({k})"
        )));
    }

    let mut report = FScoreReport {
        feature_names: table.feature_names().to_vec(),
        f_values: Vec::with_capacity(table.n_features()),
        degenerate: Vec::with_capacity(table.n_features()),
        group_stats: Vec::with_capacity(table.n_features()),
    };
    for j in 0..table.n_features() {
        let col = table.values().column(j);
        let all: Vec<f64> = col.iter().copied().collect();
        // shift by the first value: exact for nearby values, so nearly equal group
        // means do not cancel against a large common offset
        let pivot = all[0];
        let shifted: Vec<f64> = all.iter().map(|v| v - pivot).collect();
        let grand = mean(&shifted);
        let overall_mean = pivot + grand;

        let mut counts = Vec::with_capacity(k);
        let mut group_means = Vec::with_capacity(k);
        let mut between = 0.0;
        let mut within = 0.0;
        for &c in &classes {
            let group: Vec<f64> = (0..n).filter(|&i| labels[i] == c).map(|i| shifted[i]).collect();
            let m = mean(&group);
            between += group.len() as f64 * (m - grand).powi(2);
            within += group.iter().map(|y| (y - m).powi(2)).sum::<f64>();
            counts.push(group.len());
            group_means.push(pivot + m);
        }
        between /= (k - 1) as f64;
        within /= (n - k) as f64;

        let (f, degenerate) = if within > 0.0 {
            (between / within, false)
        } else if between > 0.0 {
            (f64::INFINITY, false)
        } else {
            (0.0, true)
        };
        report.f_values.push(f);
        report.degenerate.push(degenerate);
        report.group_stats.push(GroupStats {
            counts,
            group_means,
            overall_mean,
            n_groups: k,
            total: n,
            between,
            within,
        });
    }
    Ok(report)
}

/// All indices ordered by descending F, ties by ascending index.
fn ranking(f_values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..f_values.len()).collect();
    idx.sort_by(|&a, &b| f_values[b].total_cmp(&f_values[a]).then(a.cmp(&b)));
    idx
}

pub fn select_top_k(report: &FScoreReport, k: usize) -> Result<Vec<usize>> {
    let d = report.f_values.len();
    if k == 0 || k > d {
        return Err(Error::arg(format!("k = {k} outside 1..={d}")));
    }
    let mut order = ranking(&report.f_values);
    order.truncate(k);
    Ok(order)
}

/// New table holding only the named columns, in the given order.
pub fn project(table: &FeatureTable, indices: &[usize]) -> Result<FeatureTable> {
    let d = table.n_features();
    let mut seen = vec![false; d];
    for &i in indices {
        if i >= d {
            return Err(Error::arg(format!("column index {i} out of range for {d}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::arg(format!("duplicate column index {i}")));
        }
    }
    Ok(table.with_columns(indices))
}
