use std::path::{Path, PathBuf};

use serde::Serialize;

use super::svg::{density_plot, Series};
use super::{BenchConfig, BenchContext, TrialRecord};
use crate::error::{Error, Result};
use crate::hyperopt::{HyperSpace, TuneHistory};
use crate::metrics::{
    aggregate, cdf_bins, format_percent, kde, Bandwidth, CdfTable, DensityCurve, Metric, Summary,
};
use crate::pipeline::{Method, ModelSpec};
use crate::select::{anova_f_scores, FScoreReport};

pub const CDF_BIN_WIDTH: f64 = 0.02;
/// Bandwidth used when the automatic rule is undefined (all values equal).
const FALLBACK_BANDWIDTH: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: Method,
    pub summary: Summary,
    pub f1_from_means: Option<f64>,
    pub acc_cdf: CdfTable,
    /// Missing when no trial had a positive test row.
    pub fn_cdf: Option<CdfTable>,
    pub accuracy_values: Vec<f64>,
    pub fn_rate_values: Vec<f64>,
    pub accuracy_density: Option<DensityCurve>,
    pub fn_rate_density: Option<DensityCurve>,
    pub tuning: Option<(HyperSpace, TuneHistory)>,
    pub resolved: Option<ModelSpec>,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub config: BenchConfig,
    pub records: Vec<TrialRecord>,
    pub methods: Vec<MethodReport>,
    pub anova: FScoreReport,
    pub k_features: usize,
}

fn density(values: &[f64]) -> Option<DensityCurve> {
    if values.is_empty() {
        return None;
    }
    kde(values, Bandwidth::Auto)
        .or_else(|_| kde(values, Bandwidth::Fixed(FALLBACK_BANDWIDTH)))
        .ok()
}

impl ReportBundle {
    pub(crate) fn assemble(ctx: &BenchContext, records: Vec<TrialRecord>) -> Result<Self> {
        let config = &ctx.config;
        let mut methods = Vec::new();
        for &method in &config.methods {
            let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.method == method).collect();
            if rows.len() != config.trials {
                return Err(Error::arg(format!(
                    "{method}: {} trial records for {} trials",
                    rows.len(),
                    config.trials
                )));
            }
            let per_trial: Vec<_> = rows.iter().map(|r| r.metrics).collect();
            let summary = aggregate(&per_trial);
            let accuracy_values: Vec<f64> = per_trial.iter().map(|m| m.accuracy.value()).collect();
            let fn_rate_values: Vec<f64> = per_trial
                .iter()
                .filter_map(|m| m.fn_rate.map(|r| r.value()))
                .collect();
            let acc_cdf = cdf_bins(&accuracy_values, CDF_BIN_WIDTH)?;
            let fn_cdf = if fn_rate_values.is_empty() {
                None
            } else {
                Some(cdf_bins(&fn_rate_values, CDF_BIN_WIDTH)?)
            };
            let resolved = ctx.resolved.get(&method);
            let tuning = match resolved.and_then(|r| r.history.clone()) {
                Some(h) => Some((config.space(method), h)),
                None => rows[0].history.clone().map(|h| (config.space(method), h)),
            };
            methods.push(MethodReport {
                method,
                f1_from_means: summary.f1_from_means(),
                summary,
                acc_cdf,
                fn_cdf,
                accuracy_density: density(&accuracy_values),
                fn_rate_density: density(&fn_rate_values),
                accuracy_values,
                fn_rate_values,
                tuning,
                resolved: resolved
                    .filter(|_| config.tune_mode != super::TuneMode::PerTrial)
                    .map(|r| r.spec.clone()),
            });
        }
        Ok(Self {
            config: config.clone(),
            records,
            methods,
            anova: anova_f_scores(&ctx.table)?,
            k_features: config.k_features,
        })
    }
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], manifest: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    manifest.push(path);
    Ok(())
}

/// Creates `dir` and checks that a file can be written there.
fn probe_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn strings<const N: usize>(items: [&str; N]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn summary_csv(b: &ReportBundle) -> Result<Vec<u8>> {
    let mut header = strings(["method", "trials"]);
    for m in [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::FnRate] {
        header.push(format!("{}_mean", m.name()));
        header.push(format!("{}_std", m.name()));
    }
    for m in [Metric::Precision, Metric::Recall, Metric::FnRate] {
        header.push(format!("{}_excluded", m.name()));
    }
    let rows: Vec<Vec<String>> = b
        .methods
        .iter()
        .map(|r| {
            let mut row = vec![r.method.to_string(), b.config.trials.to_string()];
            for m in [Metric::Accuracy, Metric::Precision, Metric::Recall, Metric::FnRate] {
                let s = r.summary.get(m);
                row.push(format_percent(s.mean));
                row.push(format_percent(s.std));
            }
            for m in [Metric::Precision, Metric::Recall, Metric::FnRate] {
                row.push(r.summary.get(m).n_excluded.to_string());
            }
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

fn f1_csv(b: &ReportBundle) -> Result<Vec<u8>> {
    let header = strings(["method", "f1_from_mean_precision_recall", "f1_mean", "f1_std", "f1_excluded"]);
    let rows: Vec<Vec<String>> = b
        .methods
        .iter()
        .map(|r| {
            vec![
                r.method.to_string(),
                format_percent(r.f1_from_means),
                format_percent(r.summary.f1.mean),
                format_percent(r.summary.f1.std),
                r.summary.f1.n_excluded.to_string(),
            ]
        })
        .collect();
    csv_bytes(&header, &rows)
}

fn cdf_csv(b: &ReportBundle, pick: impl Fn(&MethodReport) -> Option<&CdfTable>) -> Result<Vec<u8>> {
    let labels = b
        .methods
        .iter()
        .find_map(&pick)
        .map(CdfTable::labels)
        .unwrap_or_default();
    let mut header = vec!["method".to_string()];
    header.extend(labels.iter().cloned());
    let rows: Vec<Vec<String>> = b
        .methods
        .iter()
        .map(|r| {
            let mut row = vec![r.method.to_string()];
            match pick(r) {
                Some(t) => row.extend(t.cumulative.iter().map(|c| format!("{c:.3}"))),
                None => row.extend(labels.iter().map(|_| "NA".to_string())),
            }
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

fn fraction(r: Option<crate::metrics::Ratio>) -> String {
    r.map_or_else(|| "NA".into(), |r| format!("{:?}", r.value()))
}

fn per_trial_csv(b: &ReportBundle) -> Result<Vec<u8>> {
    let header = strings([
        "method", "trial", "seed", "tp", "tn", "fp", "fn", "accuracy", "precision", "recall",
        "fn_rate", "f1", "features", "hyperparameters",
    ]);
    let rows: Vec<Vec<String>> = b
        .records
        .iter()
        .map(|r| {
            let cm = r.confusion;
            let m = r.metrics;
            let hyper: Vec<String> = r.point.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
            vec![
                r.method.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                cm.tp.to_string(),
                cm.tn.to_string(),
                cm.fp.to_string(),
                cm.fn_.to_string(),
                fraction(Some(m.accuracy)),
                fraction(m.precision),
                fraction(m.recall),
                fraction(m.fn_rate),
                fraction(m.f1),
                r.selected.join(";"),
                hyper.join(";"),
            ]
        })
        .collect();
    csv_bytes(&header, &rows)
}

fn anova_csv(report: &FScoreReport, k: usize) -> Result<Vec<u8>> {
    let header = strings(["rank", "feature", "f_value", "degenerate", "selected"]);
    let ranks = report.ranks();
    let mut order: Vec<usize> = (0..ranks.len()).collect();
    order.sort_by_key(|&i| ranks[i]);
    let rows: Vec<Vec<String>> = order
        .iter()
        .map(|&i| {
            vec![
                ranks[i].to_string(),
                report.feature_names[i].clone(),
                format!("{:?}", report.f_values[i]),
                report.degenerate[i].to_string(),
                (ranks[i] <= k).to_string(),
            ]
        })
        .collect();
    csv_bytes(&header, &rows)
}

fn tuning_csv(space: &HyperSpace, history: &TuneHistory) -> Result<Vec<u8>> {
    let mut header = vec!["eval_index".to_string()];
    header.extend(space.dimensions.iter().map(|d| d.name.clone()));
    header.push("cv_accuracy".into());
    header.push("best_so_far".into());
    let best = history.best_so_far();
    let rows: Vec<Vec<String>> = history
        .evaluations
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut row = vec![i.to_string()];
            row.extend(
                space
                    .dimensions
                    .iter()
                    .map(|d| e.point.get(&d.name).map_or("NA".into(), |v| v.to_string())),
            );
            row.push(format!("{:?}", e.objective));
            row.push(format!("{:?}", best[i]));
            row
        })
        .collect();
    csv_bytes(&header, &rows)
}

#[derive(Serialize)]
struct ConfigJson<'a> {
    artifact_version: &'static str,
    config: &'a BenchConfig,
    search_spaces: Vec<(Method, HyperSpace)>,
    resolved_hyperparameters: Vec<(Method, &'a ModelSpec)>,
}

/// Writes every report file into `dir` and returns their paths in write order.
pub fn emit_reports(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    probe_writable(dir)?;
    let mut manifest = Vec::new();
    write_file(dir, "summary.csv", &summary_csv(bundle)?, &mut manifest)?;
    write_file(dir, "f1.csv", &f1_csv(bundle)?, &mut manifest)?;
    write_file(dir, "acc_cdf.csv", &cdf_csv(bundle, |r| Some(&r.acc_cdf))?, &mut manifest)?;
    write_file(dir, "fn_cdf.csv", &cdf_csv(bundle, |r| r.fn_cdf.as_ref())?, &mut manifest)?;
    write_file(dir, "per_trial.csv", &per_trial_csv(bundle)?, &mut manifest)?;
    write_file(
        dir,
        "anova_scores.csv",
        &anova_csv(&bundle.anova, bundle.k_features)?,
        &mut manifest,
    )?;
    let cfg = ConfigJson {
        artifact_version: env!("CARGO_PKG_VERSION"),
        config: &bundle.config,
        search_spaces: super::spaces(&bundle.config),
        resolved_hyperparameters: bundle
            .methods
            .iter()
            .filter_map(|r| r.resolved.as_ref().map(|s| (r.method, s)))
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&cfg)?;
    json.push(b'\n');
    write_file(dir, "config.json", &json, &mut manifest)?;
    for r in &bundle.methods {
        if let Some((space, history)) = &r.tuning {
            write_file(
                dir,
                &format!("tuning_{}.csv", r.method),
                &tuning_csv(space, history)?,
                &mut manifest,
            )?;
        }
    }
    for (metric, label) in [(Metric::Accuracy, "accuracy"), (Metric::FnRate, "false negative rate")] {
        let series: Vec<Series<'_>> = bundle
            .methods
            .iter()
            .map(|r| {
                let (values, curve) = match metric {
                    Metric::Accuracy => (&r.accuracy_values, r.accuracy_density.as_ref()),
                    _ => (&r.fn_rate_values, r.fn_rate_density.as_ref()),
                };
                Series {
                    name: r.method.name(),
                    values,
                    curve,
                }
            })
            .collect();
        let title = format!("Per-trial {label} over {} trials", bundle.config.trials);
        let svg = density_plot(&title, label, &series, CDF_BIN_WIDTH);
        write_file(dir, &format!("density_{}.svg", metric.name()), svg.as_bytes(), &mut manifest)?;
    }
    Ok(manifest)
}

/// Writes `anova_scores.csv` alone.
pub fn emit_anova(report: &FScoreReport, k: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    probe_writable(dir)?;
    let mut manifest = Vec::new();
    write_file(dir, "anova_scores.csv", &anova_csv(report, k)?, &mut manifest)?;
    Ok(manifest)
}

/// Writes `tuning_<method>.csv` alone.
pub fn emit_tuning(method: Method, space: &HyperSpace, history: &TuneHistory, dir: &Path) -> Result<Vec<PathBuf>> {
    probe_writable(dir)?;
    let mut manifest = Vec::new();
    write_file(dir, &format!("tuning_{method}.csv"), &tuning_csv(space, history)?, &mut manifest)?;
    Ok(manifest)
}
