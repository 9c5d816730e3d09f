//! Confusion-matrix metrics, cross-trial summaries, binned cumulative distributions and
//! kernel density curves.
//!
//! Class 1 (PD) is the positive class. Ratio metrics keep their integer numerator and
//! denominator so identities such as `recall + fn_rate = 1` can be checked exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(predicted: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    if predicted.len() != truth.len() {
        return Err(Error::arg(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::arg("no samples to evaluate"));
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (1, 1) => cm.tp += 1,
            (0, 0) => cm.tn += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            _ => return Err(Error::arg(format!("labels must be 0 or 1, got ({p}, {t})"))),
        }
    }
    Ok(cm)
}

/// Exact ratio of two counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    fn new(num: u64, den: u64) -> Option<Self> {
        (den > 0).then_some(Self { num, den })
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Metrics of one evaluation. `None` marks an undefined (zero-denominator) metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub accuracy: Ratio,
    pub precision: Option<Ratio>,
    pub recall: Option<Ratio>,
    pub fn_rate: Option<Ratio>,
    pub f1: Option<Ratio>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Accuracy,
    Precision,
    Recall,
    FnRate,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Accuracy,
        Metric::Precision,
        Metric::Recall,
        Metric::FnRate,
        Metric::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::FnRate => "fn_rate",
            Metric::F1 => "f1",
        }
    }
}

impl TrialMetrics {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Accuracy => Some(self.accuracy.value()),
            Metric::Precision => self.precision.map(|r| r.value()),
            Metric::Recall => self.recall.map(|r| r.value()),
            Metric::FnRate => self.fn_rate.map(|r| r.value()),
            Metric::F1 => self.f1.map(|r| r.value()),
        }
    }
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<TrialMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::arg("confusion matrix is empty"));
    }
    let positives = cm.tp + cm.fn_;
    let precision = Ratio::new(cm.tp, cm.tp + cm.fp);
    let recall = Ratio::new(cm.tp, positives);
    // harmonic mean of precision and recall in count form: 2TP / (2TP + FP + FN)
    let f1 = match (precision, recall) {
        (Some(_), Some(_)) => Ratio::new(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn_),
        _ => None,
    };
    Ok(TrialMetrics {
        accuracy: Ratio {
            num: cm.tp + cm.tn,
            den: total,
        },
        precision,
        recall,
        fn_rate: Ratio::new(cm.fn_, positives),
        f1,
    })
}

/// Mean and sample standard deviation (n - 1) over the defined values of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    /// Missing for fewer than two defined values.
    pub std: Option<f64>,
    pub n_used: usize,
    pub n_excluded: usize,
}

impl MetricSummary {
    pub fn from_values(values: &[Option<f64>]) -> Self {
        let used: Vec<f64> = values.iter().flatten().copied().collect();
        let n = used.len();
        let mean = (n > 0).then(|| used.iter().sum::<f64>() / n as f64);
        let std = match mean {
            Some(m) if n > 1 => {
                Some((used.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt())
            }
            _ => None,
        };
        Self {
            mean,
            std,
            n_used: n,
            n_excluded: values.len() - n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub accuracy: MetricSummary,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub fn_rate: MetricSummary,
    pub f1: MetricSummary,
}

impl Summary {
    pub fn get(&self, metric: Metric) -> &MetricSummary {
        match metric {
            Metric::Accuracy => &self.accuracy,
            Metric::Precision => &self.precision,
            Metric::Recall => &self.recall,
            Metric::FnRate => &self.fn_rate,
            Metric::F1 => &self.f1,
        }
    }

    /// Harmonic mean of the mean precision and mean recall.
    pub fn f1_from_means(&self) -> Option<f64> {
        let p = self.precision.mean?;
        let r = self.recall.mean?;
        (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
    }
}

pub fn aggregate(per_trial: &[TrialMetrics]) -> Summary {
    let column = |m: Metric| {
        let vals: Vec<Option<f64>> = per_trial.iter().map(|t| t.get(m)).collect();
        MetricSummary::from_values(&vals)
    };
    Summary {
        accuracy: column(Metric::Accuracy),
        precision: column(Metric::Precision),
        recall: column(Metric::Recall),
        fn_rate: column(Metric::FnRate),
        f1: column(Metric::F1),
    }
}

/// Percentage with three decimals, or `NA`.
pub fn format_percent(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.3}", 100.0 * v),
        None => "NA".to_string(),
    }
}

/// Cumulative fraction of values at or below each bin's upper edge over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfTable {
    pub bin_width: f64,
    pub upper_edges: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl CdfTable {
    /// Column labels such as `0%-2%`.
    pub fn labels(&self) -> Vec<String> {
        let n = self.upper_edges.len();
        (0..n)
            .map(|k| {
                let lo = 100.0 * k as f64 / n as f64;
                let hi = 100.0 * (k + 1) as f64 / n as f64;
                format!("{}%-{}%", trim_num(lo), trim_num(hi))
            })
            .collect()
    }

    /// Cumulative fraction at the bin whose upper edge is `edge`.
    pub fn at_edge(&self, edge: f64) -> Option<f64> {
        self.upper_edges
            .iter()
            .position(|e| (e - edge).abs() < 1e-9)
            .map(|k| self.cumulative[k])
    }
}

fn trim_num(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn cdf_bins(values: &[f64], bin_width: f64) -> Result<CdfTable> {
    if values.is_empty() {
        return Err(Error::arg("no values to bin"));
    }
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::arg(format!("bin width {bin_width} must lie in (0, 1]")));
    }
    let bins = (1.0 / bin_width).round();
    if (bins * bin_width - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("bin width {bin_width} does not divide [0, 1]")));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::arg(format!("value {v} outside [0, 1]")));
    }
    let bins = bins as usize;
    // edges as k / bins so that count ratios landing on an edge compare equal
    let upper_edges: Vec<f64> = (1..=bins).map(|k| k as f64 / bins as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = upper_edges
            .iter()
            .position(|&e| v <= e + 1e-12)
            .unwrap_or(bins - 1);
        counts[k] += 1;
    }
    let n = values.len();
    let mut running = 0;
    let cumulative = counts
        .iter()
        .map(|c| {
            running += c;
            running as f64 / n as f64
        })
        .collect();
    Ok(CdfTable {
        bin_width,
        upper_edges,
        cumulative,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub bandwidth: f64,
    pub points: Vec<(f64, f64)>,
}

pub const KDE_GRID_POINTS: usize = 256;

/// Silverman bandwidth `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Degenerate(
            "automatic bandwidth needs at least two values; pass an explicit bandwidth".into(),
        ));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if sd == 0.0 {
        return Err(Error::Degenerate(
            "all values are identical; pass an explicit bandwidth".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Gaussian kernel density estimate on a 256-point grid over `[min - 3h, max + 3h]`.
pub fn kde(values: &[f64], bandwidth: Bandwidth) -> Result<DensityCurve> {
    if values.is_empty() {
        return Err(Error::arg("no values for density estimate"));
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(values)?,
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(Error::arg(format!("bandwidth {h} must be > 0"))),
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = (min - 3.0 * h, max + 3.0 * h);
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let points = (0..KDE_GRID_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (KDE_GRID_POINTS - 1) as f64;
            let d = values
                .iter()
                .map(|v| (-0.5 * ((x - v) / h).powi(2)).exp())
                .sum::<f64>()
                * norm;
            (x, d)
        })
        .collect();
    Ok(DensityCurve {
        bandwidth: h,
        points,
    })
}
