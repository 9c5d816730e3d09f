//! Independent oracles and the checks built on them. Shared by the integration tests
//! and the acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use resbench::baselines::tree::best_gini_split;
use resbench::baselines::{
    dtree_fit, gboost_fit, knn_predict, svc_fit, BoostParams, Kernel, SvcParams, TreeParams,
};
use resbench::bench::{emit_reports, run_benchmark, BenchConfig, BenchContext, ReportBundle, TuneMode};
use resbench::data::{load_csv, synthetic, FeatureTable};
use resbench::esn::{build_state_matrix, init_reservoir, train_readout, EsnHyperParams, Reservoir};
use resbench::metrics::{metrics, ConfusionMatrix};
use resbench::pipeline::Method;
use resbench::select::{anova_f_scores, select_top_k};

pub type Check = Result<String, String>;

pub const REFERENCE_TOP4: [&str; 4] = ["MDVP:Fo(Hz)", "spread1", "spread2", "PPE"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("f{j}")).collect()
}

pub fn table(rows: &[Vec<f64>], labels: &[u8]) -> FeatureTable {
    let n = names(rows[0].len());
    let refs: Vec<&str> = n.iter().map(String::as_str).collect();
    FeatureTable::from_rows(rows, labels, &refs).unwrap()
}

// ---------------------------------------------------------------------------
// real data

/// The UCI voice table, from `RESBENCH_PD_DATA` or `data/parkinsons.data` in the
/// workspace root.
pub fn data_path() -> Option<PathBuf> {
    if let Ok(p) = std::env::var("RESBENCH_PD_DATA") {
        let p = PathBuf::from(p);
        return p.exists().then_some(p);
    }
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/parkinsons.data");
    p.exists().then_some(p)
}

pub fn blocked() -> String {
    "BLOCKED: UCI voice table not found (set RESBENCH_PD_DATA or add data/parkinsons.data)".into()
}

pub fn check_anova_selection(path: &Path) -> Check {
    let start = Instant::now();
    let t = load_csv(path).map_err(|e| e.to_string())?;
    let a = anova_f_scores(&t).map_err(|e| e.to_string())?;
    let b = anova_f_scores(&t).map_err(|e| e.to_string())?;
    let bits = |r: &resbench::select::FScoreReport| r.f_values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    if bits(&a) != bits(&b) {
        return Err("F-values differ between runs".into());
    }
    let top = select_top_k(&a, 4).map_err(|e| e.to_string())?;
    let chosen: BTreeSet<&str> = top.iter().map(|&i| a.feature_names[i].as_str()).collect();
    let elapsed = start.elapsed();
    let want: BTreeSet<&str> = REFERENCE_TOP4.into_iter().collect();
    if chosen != want {
        return Err(format!("selected {chosen:?}"));
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{chosen:?} in {elapsed:?}"))
}

/// The reference run: 100 trials, k = 4, budget 40, tuned once.
pub fn reference_run(path: &Path) -> Result<ReportBundle, String> {
    let t = load_csv(path).map_err(|e| e.to_string())?;
    let cfg = BenchConfig {
        data: Some(path.to_path_buf()),
        ..BenchConfig::default()
    };
    run_benchmark(&cfg, &t).map_err(|e| e.to_string())
}

fn mean_of(b: &ReportBundle, m: Method, metric: resbench::metrics::Metric) -> Result<f64, String> {
    b.methods
        .iter()
        .find(|r| r.method == m)
        .and_then(|r| r.summary.get(metric).mean)
        .ok_or_else(|| format!("no {} mean for {m}", metric.name()))
}

pub fn check_table2_bands(b: &ReportBundle) -> Check {
    use resbench::metrics::Metric::{Accuracy, FnRate};
    let esn_acc = 100.0 * mean_of(b, Method::Esn, Accuracy)?;
    let esn_fn = 100.0 * mean_of(b, Method::Esn, FnRate)?;
    let rf_acc = 100.0 * mean_of(b, Method::Rf, Accuracy)?;
    let dt_fn = 100.0 * mean_of(b, Method::Dt, FnRate)?;
    let detail = format!("ESN acc {esn_acc:.3} fn {esn_fn:.3}, RF acc {rf_acc:.3}, DT fn {dt_fn:.3}");
    let ok = (84.0..=92.0).contains(&esn_acc) && esn_fn <= 9.0 && (83.0..=92.0).contains(&rf_acc) && dt_fn > esn_fn;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn check_fn_rate_distribution(b: &ReportBundle) -> Check {
    let fns: Vec<Option<f64>> = b
        .records
        .iter()
        .filter(|r| r.method == Method::Esn)
        .map(|r| r.metrics.fn_rate.map(|x| x.value()))
        .collect();
    let n = fns.len() as f64;
    let le14 = fns.iter().filter(|v| matches!(v, Some(x) if *x <= 0.14)).count() as f64 / n;
    let lt8 = fns.iter().filter(|v| matches!(v, Some(x) if *x < 0.08)).count() as f64 / n;
    let detail = format!("fn<=14% in {:.0}%, fn<8% in {:.0}% of trials", 100.0 * le14, 100.0 * lt8);
    if le14 >= 0.95 && lt8 >= 0.65 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn check_f1(b: &ReportBundle) -> Check {
    let f1 = b
        .methods
        .iter()
        .find(|r| r.method == Method::Esn)
        .and_then(|r| r.f1_from_means)
        .ok_or("ESN F1 undefined")?;
    let detail = format!("ESN F1 {:.3}", 100.0 * f1);
    if 100.0 * f1 >= 89.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// ridge readout

/// Ridge solution through the thin SVD: `V diag(s / (s^2 + beta)) U^T y`.
pub fn ridge_oracle(x: &DMatrix<f64>, y: &[f64], beta: f64) -> DVector<f64> {
    let svd = x.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let uty = u.transpose() * DVector::from_column_slice(y);
    let smax = svd.singular_values.max();
    let coef = DVector::from_iterator(
        uty.len(),
        svd.singular_values.iter().zip(uty.iter()).map(|(&s, &c)| {
            if beta == 0.0 && s <= smax * 1e-12 {
                0.0
            } else {
                s * c / (s * s + beta)
            }
        }),
    );
    vt.transpose() * coef
}

pub struct RidgeProblem {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub beta: f64,
}

/// Gaussian designs (some unregularised and overdetermined, some wide) and ESN state
/// matrices with binary targets.
pub fn ridge_problem(seed: u64) -> RidgeProblem {
    let mut r = rng(seed);
    match seed % 4 {
        0 => {
            let p = r.random_range(2..40);
            let d = p + r.random_range(5..150);
            let x = DMatrix::from_fn(d, p, |_, _| normal(&mut r));
            let y = (0..d).map(|_| normal(&mut r)).collect();
            RidgeProblem { x, y, beta: 0.0 }
        }
        1 | 2 => {
            let p = r.random_range(2..80);
            let d = r.random_range(3..200);
            let scales: Vec<f64> = (0..p).map(|_| 10f64.powf(r.random_range(-1.0..1.0))).collect();
            let x = DMatrix::from_fn(d, p, |_, j| scales[j] * normal(&mut r));
            let y = (0..d).map(|_| normal(&mut r)).collect();
            let beta = 10f64.powf(r.random_range(-6.0..1.0));
            RidgeProblem { x, y, beta }
        }
        _ => {
            let inputs = r.random_range(1..6);
            let hyper = EsnHyperParams {
                reservoir_size: r.random_range(10..120),
                spectral_radius: r.random_range(0.2..1.3),
                leaking_rate: r.random_range(0.1..1.0),
                include_bias: r.random(),
                ..EsnHyperParams::default()
            };
            let d = r.random_range(20..200);
            let samples = DMatrix::from_fn(d, inputs, |_, _| normal(&mut r));
            let res = init_reservoir(&hyper, inputs, seed).unwrap();
            let x = build_state_matrix(&res, &samples).unwrap().x;
            let y = (0..d).map(|_| f64::from(r.random_range(0..2u8))).collect();
            let beta = 10f64.powf(r.random_range(-4.0..1.0));
            RidgeProblem { x, y, beta }
        }
    }
}

pub fn check_ridge_suite(problems: u64) -> Check {
    let mut worst_rel = 0.0f64;
    let mut worst_res = 0.0f64;
    for seed in 0..problems {
        let p = ridge_problem(seed);
        let w = train_readout(&p.x, &p.y, p.beta).map_err(|e| format!("problem {seed}: {e}"))?;
        let o = ridge_oracle(&p.x, &p.y, p.beta);
        let rel = (&w - &o).norm() / o.norm().max(f64::MIN_POSITIVE);
        let y = DVector::from_column_slice(&p.y);
        let residual = (p.x.transpose() * (&p.x * &w - y) + p.beta * &w).norm();
        worst_rel = worst_rel.max(rel);
        worst_res = worst_res.max(residual);
        if rel > 1e-6 || residual > 1e-8 {
            return Err(format!("problem {seed}: relative error {rel:e}, residual {residual:e}"));
        }
    }
    Ok(format!("{problems} problems, max rel err {worst_rel:.1e}, max residual {worst_res:.1e}"))
}

// ---------------------------------------------------------------------------
// ANOVA

/// One-way ANOVA written term by term (between-group mean square over within-group
/// mean square) in exact rational arithmetic. Returns (F, both terms zero).
pub fn anova_literal(col: &[f64], labels: &[u8]) -> (f64, bool) {
    use num::{BigRational, ToPrimitive, Zero};
    let q = |v: f64| BigRational::from_float(v).unwrap();
    let int = |v: usize| BigRational::from_integer(v.into());
    let n = col.len();
    let groups: Vec<u8> = [0u8, 1].into_iter().filter(|g| labels.contains(g)).collect();
    let k = groups.len();
    let grand = col.iter().map(|&v| q(v)).fold(BigRational::zero(), |a, b| a + b) / int(n);
    let mut between = BigRational::zero();
    let mut within = BigRational::zero();
    for &g in &groups {
        let members: Vec<BigRational> = col.iter().zip(labels).filter(|(_, &l)| l == g).map(|(&v, _)| q(v)).collect();
        let ni = members.len();
        let mean = members.iter().fold(BigRational::zero(), |a, b| a + b) / int(ni);
        let d = &mean - &grand;
        between += int(ni) * &d * &d / int(k - 1);
        for v in &members {
            let e = v - &mean;
            within += &e * &e / int(n - k);
        }
    }
    if !within.is_zero() {
        ((between / within).to_f64().unwrap(), false)
    } else if !between.is_zero() {
        (f64::INFINITY, false)
    } else {
        (0.0, true)
    }
}

#[derive(Debug, Default)]
pub struct AnovaCounts {
    pub infinite: usize,
    pub zero_nondegenerate: usize,
    pub degenerate: usize,
    pub finite: usize,
}

/// Random table whose columns mix Gaussian noise, small integers, group-constant
/// columns (F = inf), equal-mean groups (F = 0) and constant columns.
pub fn anova_table(seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut r = rng(seed);
    let sizes = [2 * r.random_range(1..16usize), 2 * r.random_range(1..16usize)];
    let d = r.random_range(1..7);
    let mut cols_by_group: Vec<[Vec<f64>; 2]> = Vec::new();
    for _ in 0..d {
        let kind = r.random_range(0..5);
        let scale = 10f64.powf(r.random_range(-3.0..3.0));
        let offset = r.random_range(-100.0..100.0);
        let group = |g: usize, r: &mut ChaCha8Rng| -> Vec<f64> {
            let n = sizes[g];
            match kind {
                0 => (0..n).map(|_| offset + scale * normal(r)).collect(),
                1 => (0..n).map(|_| f64::from(r.random_range(0..6u8))).collect(),
                2 => vec![f64::from(g as u8 * 3 + 1); n],
                3 => (0..n / 2)
                    .flat_map(|_| {
                        let dlt = f64::from(r.random_range(1..5u8));
                        [7.0 - dlt, 7.0 + dlt]
                    })
                    .collect(),
                _ => vec![2.0; n],
            }
        };
        let g0 = group(0, &mut r);
        let g1 = group(1, &mut r);
        cols_by_group.push([g0, g1]);
    }
    let mut slots: Vec<(usize, usize)> = (0..sizes[0]).map(|i| (0, i)).chain((0..sizes[1]).map(|i| (1, i))).collect();
    slots.shuffle(&mut r);
    let rows = slots
        .iter()
        .map(|&(g, i)| cols_by_group.iter().map(|c| c[g][i]).collect())
        .collect();
    let labels = slots.iter().map(|&(g, _)| g as u8).collect();
    (rows, labels)
}

pub fn check_anova_suite(tables: u64) -> Check {
    let mut counts = AnovaCounts::default();
    for seed in 0..tables {
        let (rows, labels) = anova_table(seed);
        let t = table(&rows, &labels);
        let report = anova_f_scores(&t).map_err(|e| format!("table {seed}: {e}"))?;
        for j in 0..t.n_features() {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let (f, degenerate) = anova_literal(&col, &labels);
            let got = report.f_values[j];
            if !rel_close(got, f, 1e-9) || report.degenerate[j] != degenerate {
                return Err(format!("table {seed} column {j}: got {got} ({}), oracle {f} ({degenerate})", report.degenerate[j]));
            }
            match (f, degenerate) {
                (_, true) => counts.degenerate += 1,
                (v, _) if v.is_infinite() => counts.infinite += 1,
                (0.0, _) => counts.zero_nondegenerate += 1,
                _ => counts.finite += 1,
            }
        }
    }
    if counts.infinite == 0 || counts.zero_nondegenerate == 0 || counts.degenerate == 0 {
        return Err(format!("degenerate cases not exercised: {counts:?}"));
    }
    Ok(format!("{tables} tables, {counts:?}"))
}

// ---------------------------------------------------------------------------
// metrics

pub fn random_confusion(r: &mut ChaCha8Rng) -> ConfusionMatrix {
    let draw = |r: &mut ChaCha8Rng| if r.random_bool(0.15) { 0 } else { r.random_range(0..500u64) };
    loop {
        let cm = ConfusionMatrix {
            tp: draw(r),
            tn: draw(r),
            fp: draw(r),
            fn_: draw(r),
        };
        if cm.total() > 0 {
            return cm;
        }
    }
}

pub fn check_metric_identities(n: usize) -> Check {
    let mut r = rng(7);
    let mut f1_checked = 0;
    for i in 0..n {
        let cm = random_confusion(&mut r);
        let m = metrics(&cm).map_err(|e| e.to_string())?;
        if m.accuracy.den != cm.total() || m.accuracy.num != cm.tp + cm.tn {
            return Err(format!("matrix {i} {cm:?}: accuracy {:?}", m.accuracy));
        }
        match (m.recall, m.fn_rate) {
            (Some(rec), Some(fnr)) => {
                if rec.den != fnr.den || rec.num + fnr.num != rec.den {
                    return Err(format!("matrix {i} {cm:?}: recall {rec:?} + fn rate {fnr:?} != 1"));
                }
            }
            (None, None) if cm.tp + cm.fn_ == 0 => {}
            other => return Err(format!("matrix {i} {cm:?}: recall/fn rate {other:?}")),
        }
        if let (Some(p), Some(rc)) = (m.precision, m.recall) {
            let (p, rc) = (p.value(), rc.value());
            let harmonic = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
            let f1 = m.f1.ok_or("F1 missing with precision and recall defined")?.value();
            if (f1 - harmonic).abs() > 1e-12 {
                return Err(format!("matrix {i} {cm:?}: F1 {f1} vs harmonic {harmonic}"));
            }
            f1_checked += 1;
        } else if m.f1.is_some() {
            return Err(format!("matrix {i} {cm:?}: F1 defined without precision or recall"));
        }
    }
    Ok(format!("{n} matrices, F1 compared on {f1_checked}"))
}

// ---------------------------------------------------------------------------
// reservoir

pub fn eigen_radius(w: &DMatrix<f64>) -> f64 {
    w.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn check_spectral_rescale(seeds: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut r = rng(1000 + seed);
        let hyper = EsnHyperParams {
            reservoir_size: r.random_range(20..160),
            spectral_radius: r.random_range(0.1..1.5),
            sparsity: r.random_range(0.1..0.6),
            ..EsnHyperParams::default()
        };
        let res = init_reservoir(&hyper, 4, seed).map_err(|e| format!("seed {seed}: {e}"))?;
        let err = (eigen_radius(&res.w) - hyper.spectral_radius).abs();
        worst = worst.max(err);
        if err > 1e-6 {
            return Err(format!("seed {seed}: radius off by {err:e}"));
        }
    }
    Ok(worst)
}

/// Two trajectories from different starts under the same input sequence, with the
/// recurrent matrix scaled to largest singular value `sigma` and no leak.
pub fn contraction_gap(seed: u64, sigma: f64, steps: usize) -> f64 {
    let mut r = rng(seed);
    let n = 80;
    let inputs = 3;
    let mut w = DMatrix::from_fn(n, n, |_, _| normal(&mut r));
    let smax = w.singular_values().max();
    w *= sigma / smax;
    let w_in = DMatrix::from_fn(n, inputs, |_, _| r.random_range(-1.0..1.0));
    let hyper = EsnHyperParams {
        reservoir_size: n,
        leaking_rate: 1.0,
        ..EsnHyperParams::default()
    };
    let res = Reservoir::from_parts(w_in, w, hyper, seed).unwrap();
    let mut a: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut b: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    for _ in 0..steps {
        let u: Vec<f64> = (0..inputs).map(|_| normal(&mut r)).collect();
        a = res.run_constant_input(&u, &a, 1);
        b = res.run_constant_input(&u, &b, 1);
    }
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Largest state magnitude over encoded standard-normal samples.
pub fn max_state_magnitude(seed: u64) -> f64 {
    let mut r = rng(seed);
    let inputs = r.random_range(1..6);
    let hyper = EsnHyperParams {
        reservoir_size: r.random_range(10..150),
        spectral_radius: r.random_range(0.1..1.5),
        leaking_rate: r.random_range(0.05..1.0),
        input_scaling: r.random_range(0.05..2.0),
        include_bias: r.random(),
        ..EsnHyperParams::default()
    };
    let samples = DMatrix::from_fn(60, inputs, |_, _| normal(&mut r));
    let res = init_reservoir(&hyper, inputs, seed).unwrap();
    let sm = build_state_matrix(&res, &samples).unwrap();
    let first = sm.n_inputs + usize::from(sm.bias);
    sm.x.columns(first, sm.n_units).iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn check_reservoir_suite() -> Check {
    let worst_radius = check_spectral_rescale(100)?;
    let gap = (0..10).map(|s| contraction_gap(s, 0.8, 100)).fold(0.0, f64::max);
    if gap >= 1e-8 {
        return Err(format!("contraction gap {gap:e}"));
    }
    let peak = (0..50).map(max_state_magnitude).fold(0.0, f64::max);
    if peak >= 1.0 {
        return Err(format!("state magnitude {peak}"));
    }
    Ok(format!("radius err {worst_radius:.1e}, contraction gap {gap:.1e}, max |x| = 1 - {:.1e}", 1.0 - peak))
}

// ---------------------------------------------------------------------------
// baselines

/// Majority of the `k` nearest rows by squared distance, equal distances broken by
/// lower row index, equal votes by the nearest row's label.
pub fn knn_oracle(rows: &[Vec<f64>], labels: &[u8], q: &[f64], k: usize) -> u8 {
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let ones = d[..k].iter().filter(|&&(_, i)| labels[i] == 1).count();
    match (2 * ones).cmp(&k) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => labels[d[0].1],
    }
}

pub fn check_knn(queries: usize) -> Check {
    let mut r = rng(11);
    let mut ties = 0;
    for q in 0..queries {
        let n = r.random_range(5..60);
        let d = r.random_range(1..5);
        let grid = q % 2 == 0;
        let val = |r: &mut ChaCha8Rng| if grid { f64::from(r.random_range(0..4u8)) } else { normal(r) };
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| val(&mut r)).collect()).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let query: Vec<f64> = (0..d).map(|_| val(&mut r)).collect();
        let k = r.random_range(1..=n.min(15));
        let t = table(&rows, &labels);
        let got = knn_predict(&t, &query, k).map_err(|e| e.to_string())?;
        let want = knn_oracle(&rows, &labels, &query, k);
        if k % 2 == 0 {
            ties += 1;
        }
        if got != want {
            return Err(format!("query {q}: got {got}, oracle {want} (k = {k})"));
        }
    }
    Ok(format!("{queries} queries ({ties} with even k)"))
}

/// Exhaustive CART split: every feature, every midpoint between consecutive distinct
/// values, weighted Gini in floating point. Ties keep the earlier candidate.
#[allow(clippy::needless_range_loop)]
pub fn gini_split_oracle(rows: &[Vec<f64>], labels: &[u8], idx: &[usize]) -> Option<(usize, f64, usize)> {
    let gini = |set: &[usize]| {
        let n = set.len() as f64;
        let p = set.iter().filter(|&&i| labels[i] == 1).count() as f64 / n;
        1.0 - p * p - (1.0 - p) * (1.0 - p)
    };
    let n = idx.len() as f64;
    let mut best: Option<(f64, usize, f64, usize)> = None;
    for f in 0..rows[0].len() {
        let mut vals: Vec<f64> = idx.iter().map(|&i| rows[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| rows[i][f] <= t);
            let score = left.len() as f64 / n * gini(&left) + right.len() as f64 / n * gini(&right);
            if best.is_none_or(|b| score < b.0 - 1e-12) {
                best = Some((score, f, t, left.len()));
            }
        }
    }
    best.map(|(_, f, t, nl)| (f, t, nl))
}

/// Pre-order split list of the oracle tree under the same stopping rules.
pub fn oracle_tree(rows: &[Vec<f64>], labels: &[u8], idx: &[usize], depth: usize, p: &TreeParams, out: &mut Vec<(usize, f64)>) {
    let ones = idx.iter().filter(|&&i| labels[i] == 1).count();
    if depth >= p.max_depth || idx.len() < p.min_samples_split.max(2) || ones == 0 || ones == idx.len() {
        return;
    }
    let Some((f, t, _)) = gini_split_oracle(rows, labels, idx) else {
        return;
    };
    out.push((f, t));
    let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| rows[i][f] <= t);
    oracle_tree(rows, labels, &left, depth + 1, p, out);
    oracle_tree(rows, labels, &right, depth + 1, p, out);
}

pub fn split_problem(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut r = rng(seed);
    let d = r.random_range(1..5);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|j| if j % 2 == 0 { f64::from(r.random_range(0..8u8)) } else { (normal(&mut r) * 1000.0).round() / 1000.0 })
                .collect()
        })
        .collect();
    let mut labels: Vec<u8> = rows
        .iter()
        .map(|row| u8::from(row[0] + 0.8 * normal(&mut r) > 3.5))
        .collect();
    labels[0] = 0;
    labels[1] = 1;
    (rows, labels)
}

pub fn check_cart(sets: u64) -> Check {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
    let mut splits = 0;
    for seed in 0..sets {
        let (rows, labels) = split_problem(seed, 50);
        let t = table(&rows, &labels);
        let all: Vec<usize> = (0..rows.len()).collect();
        let features: Vec<usize> = (0..rows[0].len()).collect();
        let got = best_gini_split(t.values(), &labels, &all, &features).map(|c| (c.feature, c.threshold, c.n_left));
        let want = gini_split_oracle(&rows, &labels, &all);
        match (got, want) {
            (None, None) => {}
            (Some(g), Some(w)) if g.0 == w.0 && close(g.1, w.1) && g.2 == w.2 => {}
            _ => return Err(format!("set {seed}: root split {got:?}, oracle {want:?}")),
        }
        let params = TreeParams {
            max_depth: 1 + (seed % 4) as usize,
            min_samples_split: 2 + (seed % 3) as usize * 4,
        };
        let model = dtree_fit(&t, &params).map_err(|e| e.to_string())?;
        let mut oracle = Vec::new();
        oracle_tree(&rows, &labels, &all, 0, &params, &mut oracle);
        let ours = model.tree.splits();
        let same = ours.len() == oracle.len() && ours.iter().zip(&oracle).all(|(a, b)| a.0 == b.0 && close(a.1, b.1));
        if !same {
            return Err(format!("set {seed}: tree splits {ours:?}, oracle {oracle:?}"));
        }
        splits += ours.len();
    }
    Ok(format!("{sets} sets, {splits} tree splits matched"))
}

fn logistic_table(seed: u64) -> FeatureTable {
    let mut r = rng(seed);
    let n = r.random_range(30..120);
    let d = r.random_range(1..6);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(&mut r)).collect()).collect();
    let mut labels: Vec<u8> = rows.iter().map(|x| u8::from(x[0] - 0.5 * x[d - 1] + normal(&mut r) > 0.3)).collect();
    labels[0] = 0;
    labels[1] = 1;
    table(&rows, &labels)
}

pub fn check_gboost_loss(problems: u64) -> Check {
    let mut rounds_total = 0;
    for seed in 0..problems {
        let mut r = rng(500 + seed);
        let t = logistic_table(seed);
        let params = BoostParams {
            rounds: r.random_range(20..80),
            max_depth: r.random_range(1..=4),
            learning_rate: 10f64.powf(r.random_range(-2.0..(0.5f64).log10())),
        };
        let m = gboost_fit(&t, &params).map_err(|e| e.to_string())?;
        if m.loss_trace.len() != params.rounds + 1 {
            return Err(format!("problem {seed}: {} loss entries", m.loss_trace.len()));
        }
        if let Some(i) = m.loss_trace.windows(2).position(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            return Err(format!("problem {seed}: loss rose at round {} ({} -> {})", i + 1, m.loss_trace[i], m.loss_trace[i + 1]));
        }
        // the trace must agree with the loss of the returned model
        let final_loss = (0..t.n_rows())
            .map(|i| {
                let f = m.margin(&t.row(i));
                let y = if t.labels()[i] == 1 { 1.0 } else { -1.0 };
                (1.0 + (-y * f).exp()).ln()
            })
            .sum::<f64>()
            / t.n_rows() as f64;
        let last = *m.loss_trace.last().unwrap();
        if !rel_close(final_loss, last, 1e-9) {
            return Err(format!("problem {seed}: trace ends at {last}, model loss {final_loss}"));
        }
        rounds_total += params.rounds;
    }
    Ok(format!("{problems} problems, {rounds_total} rounds"))
}

/// Worst KKT violation of a trained SVC recomputed from its multipliers, plus the
/// equality-constraint residual and a bound violation flag.
pub fn kkt_audit(t: &FeatureTable, m: &resbench::baselines::SvcModel) -> (f64, f64, bool) {
    let n = t.n_rows();
    let y: Vec<f64> = t.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| t.row(i)).collect();
    let kernel = |a: &[f64], b: &[f64]| match m.kernel {
        Kernel::Linear => a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>(),
        Kernel::Rbf => (-m.gamma * a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).exp(),
    };
    let mut worst = 0.0f64;
    let mut out_of_bounds = false;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| m.alphas[j] * y[j] * kernel(&rows[j], &rows[i])).sum::<f64>() + m.bias;
        let margin = y[i] * f;
        let a = m.alphas[i];
        if a < 0.0 || a > m.c {
            out_of_bounds = true;
        }
        let v = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= m.c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    let eq = m.alphas.iter().zip(&y).map(|(a, y)| a * y).sum::<f64>().abs();
    (worst, eq, out_of_bounds)
}

pub fn check_smo_kkt(problems: u64) -> Check {
    let mut worst = 0.0f64;
    for seed in 0..problems {
        let t = logistic_table(100 + seed);
        let params = SvcParams {
            c: [0.1, 1.0, 10.0][(seed % 3) as usize],
            gamma: [0.1, 0.5][(seed % 2) as usize],
            kernel: if seed % 4 == 3 { Kernel::Linear } else { Kernel::Rbf },
            ..SvcParams::default()
        };
        let m = svc_fit(&t, &params, seed).map_err(|e| e.to_string())?;
        let (v, eq, oob) = kkt_audit(&t, &m);
        worst = worst.max(v);
        if v > params.tol || eq > 1e-9 * params.c * t.n_rows() as f64 || oob || !m.converged {
            return Err(format!(
                "problem {seed} ({params:?}): KKT violation {v:e}, sum alpha y {eq:e}, out of bounds {oob}, converged {}",
                m.converged
            ));
        }
    }
    Ok(format!("{problems} problems, worst violation {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// determinism and leakage

pub fn small_config() -> BenchConfig {
    BenchConfig {
        trials: 4,
        tune_budget: 12,
        folds: 3,
        ..BenchConfig::default()
    }
}

/// Runs the benchmark inside a pool of `threads` workers and returns every written
/// file with its bytes, sorted by name.
pub fn run_in_pool(cfg: &BenchConfig, t: &FeatureTable, threads: usize, dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
    let manifest = pool.install(|| {
        let bundle = run_benchmark(cfg, t)?;
        emit_reports(&bundle, dir)
    });
    let mut files: Vec<(String, Vec<u8>)> = manifest
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    Ok(files)
}

pub fn check_determinism(cfg: &BenchConfig, t: &FeatureTable) -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let one = run_in_pool(cfg, t, 1, a.path())?;
    let four = run_in_pool(cfg, t, 4, b.path())?;
    if one.len() != four.len() {
        return Err(format!("{} vs {} files", one.len(), four.len()));
    }
    for ((na, ba), (nb, bb)) in one.iter().zip(&four) {
        if na != nb || ba != bb {
            return Err(format!("{na} differs between 1 and 4 threads"));
        }
    }
    Ok(format!("{} files identical at 1 and 4 threads", one.len()))
}

/// Copy of `t` with the given rows' features replaced by large random values. Labels
/// stay, so the stratified split is unchanged.
pub fn perturb_rows(t: &FeatureTable, rows: &[usize], seed: u64) -> FeatureTable {
    let mut r = rng(seed);
    let mut values = t.values().clone();
    for &i in rows {
        for j in 0..values.ncols() {
            values[(i, j)] = 50.0 * normal(&mut r);
        }
    }
    FeatureTable::new(values, t.feature_names().to_vec(), t.labels().to_vec(), t.row_ids().to_vec()).unwrap()
}

/// Fits every (method, trial) twice, once with the trial's test rows scrambled, and
/// requires identical splits, hyperparameters, tuning histories and fitted pipelines.
pub fn check_leakage(cfg: &BenchConfig, t: &FeatureTable) -> Check {
    let ctx = BenchContext::new(cfg.clone(), t.clone()).map_err(|e| e.to_string())?;
    let mut fits = 0;
    for &m in &cfg.methods {
        for trial in 0..cfg.trials {
            let (sp, pipe, spec, hist) = ctx.fit_trial(m, trial).map_err(|e| e.to_string())?;
            let scrambled = perturb_rows(t, &sp.test_indices, 99 + trial as u64);
            let ctx2 = BenchContext::new(cfg.clone(), scrambled).map_err(|e| e.to_string())?;
            let (sp2, pipe2, spec2, hist2) = ctx2.fit_trial(m, trial).map_err(|e| e.to_string())?;
            if sp != sp2 || spec != spec2 || hist != hist2 || pipe != pipe2 {
                return Err(format!("{m} trial {trial}: fitted state depends on test rows"));
            }
            fits += 1;
        }
    }
    Ok(format!("{fits} fits unchanged"))
}

pub fn audit_configs() -> Vec<BenchConfig> {
    vec![
        BenchConfig {
            trials: 2,
            tune_mode: TuneMode::PerTrial,
            ..small_config()
        },
        BenchConfig {
            trials: 3,
            tune_mode: TuneMode::Fixed,
            ..small_config()
        },
    ]
}

pub fn synthetic_table() -> FeatureTable {
    synthetic::voice_like_table(5)
}
