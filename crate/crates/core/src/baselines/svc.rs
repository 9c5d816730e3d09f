//! Soft-margin support vector classifier trained by Platt's SMO.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::require_both_classes;
use crate::data::FeatureTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    Rbf,
    Linear,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Rbf => "rbf",
            Kernel::Linear => "linear",
        }
    }

    pub fn eval(self, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    pub c: f64,
    pub gamma: f64,
    pub kernel: Kernel,
    pub tol: f64,
    /// Cap on outer SMO sweeps.
    pub max_passes: usize,
}

impl Default for SvcParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 0.25,
            kernel: Kernel::Rbf,
            tol: 1e-3,
            max_passes: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    pub kernel: Kernel,
    pub gamma: f64,
    pub c: f64,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    /// Multipliers for every training row (zero outside the support set).
    pub alphas: Vec<f64>,
    /// Dual objective after each successful pair update.
    pub dual_trace: Vec<f64>,
    pub converged: bool,
    pub passes: usize,
}

impl SvcModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.dual_coef)
            .map(|(s, a)| a * self.kernel.eval(self.gamma, s, x))
            .sum::<f64>()
            + self.bias
    }

    /// Sign of the decision value; 0 maps to class 1.
    pub fn predict_one(&self, x: &[f64]) -> u8 {
        u8::from(self.decision(x) >= 0.0)
    }

    pub fn predict(&self, samples: &DMatrix<f64>) -> Vec<u8> {
        samples
            .row_iter()
            .map(|r| self.predict_one(&r.iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

struct Smo {
    k: DMatrix<f64>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    b: f64,
    c: f64,
    tol: f64,
    /// `f(x_i) - y_i` with `f = sum_j alpha_j y_j K_ij + b`.
    err: Vec<f64>,
    trace: Vec<f64>,
    rng: ChaCha8Rng,
}

const STEP_EPS: f64 = 1e-10;

impl Smo {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn dual(&self) -> f64 {
        // sum_j alpha_j y_j K_ij = f_i - b = E_i + y_i - b
        (0..self.n())
            .map(|i| {
                let a = self.alpha[i];
                a - 0.5 * a * self.y[i] * (self.err[i] + self.y[i] - self.b)
            })
            .sum()
    }

    fn bounded(&self, a: f64) -> bool {
        a <= 0.0 || a >= self.c
    }

    /// Dual gain of moving `(alpha_1, alpha_2)` by `(d1, d2)`.
    fn gain(&self, i1: usize, i2: usize, d1: f64, d2: f64) -> f64 {
        let g = |i: usize| self.y[i] * (self.err[i] - self.b) + 1.0;
        let s = self.y[i1] * self.y[i2];
        d1 + d2
            - (d1 * g(i1) + d2 * g(i2))
            - 0.5
                * (d1 * d1 * self.k[(i1, i1)]
                    + d2 * d2 * self.k[(i2, i2)]
                    + 2.0 * d1 * d2 * s * self.k[(i1, i2)])
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.err[i1], self.err[i2]);
        let s = y1 * y2;
        let (lo, hi) = if y1 != y2 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let (k11, k12, k22) = (self.k[(i1, i1)], self.k[(i1, i2)], self.k[(i2, i2)]);
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2n = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            let at = |v: f64| self.gain(i1, i2, s * (a2 - v), v - a2);
            let (gl, gh) = (at(lo), at(hi));
            if gl > gh + STEP_EPS {
                lo
            } else if gh > gl + STEP_EPS {
                hi
            } else {
                a2
            }
        };
        let snap = 1e-12 * self.c;
        if a2n < snap {
            a2n = 0.0;
        } else if a2n > self.c - snap {
            a2n = self.c;
        }
        if (a2n - a2).abs() < STEP_EPS * (a2n + a2 + STEP_EPS) {
            return false;
        }
        let mut a1n = a1 + s * (a2 - a2n);
        if a1n < snap {
            a1n = 0.0;
        } else if a1n > self.c - snap {
            a1n = self.c;
        }
        let (d1, d2) = (a1n - a1, a2n - a2);
        if self.gain(i1, i2, d1, d2) < 0.0 {
            return false;
        }

        let b1 = self.b - e1 - y1 * d1 * k11 - y2 * d2 * k12;
        let b2 = self.b - e2 - y1 * d1 * k12 - y2 * d2 * k22;
        let bn = if !self.bounded(a1n) {
            b1
        } else if !self.bounded(a2n) {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = bn - self.b;
        for i in 0..self.n() {
            self.err[i] += y1 * d1 * self.k[(i, i1)] + y2 * d2 * self.k[(i, i2)] + db;
        }
        self.alpha[i1] = a1n;
        self.alpha[i2] = a2n;
        self.b = bn;
        self.trace.push(self.dual());
        true
    }

    fn violates(&self, i: usize) -> bool {
        let r = self.err[i] * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn examine(&mut self, i2: usize) -> bool {
        if !self.violates(i2) {
            return false;
        }
        let n = self.n();
        let non_bound: Vec<usize> = (0..n).filter(|&i| !self.bounded(self.alpha[i])).collect();
        if non_bound.len() > 1 {
            let e2 = self.err[i2];
            let mut best = non_bound[0];
            for &i in &non_bound {
                if (self.err[i] - e2).abs() > (self.err[best] - e2).abs() {
                    best = i;
                }
            }
            if self.take_step(best, i2) {
                return true;
            }
        }
        if !non_bound.is_empty() {
            let start = self.rng.random_range(0..non_bound.len());
            for k in 0..non_bound.len() {
                if self.take_step(non_bound[(start + k) % non_bound.len()], i2) {
                    return true;
                }
            }
        }
        let start = self.rng.random_range(0..n);
        (0..n).any(|k| self.take_step((start + k) % n, i2))
    }

    /// Re-derives `b` from the current multipliers: the mean over free vectors, or the
    /// midpoint of the interval allowed by the KKT conditions when every multiplier
    /// sits at a bound.
    fn settle_bias(&mut self) {
        let n = self.n();
        // value of b that puts row i exactly on its margin
        let on_margin = |s: &Self, i: usize| s.y[i] - (s.err[i] + s.y[i] - s.b);
        let free: Vec<usize> = (0..n).filter(|&i| !self.bounded(self.alpha[i])).collect();
        let b = if !free.is_empty() {
            free.iter().map(|&i| on_margin(self, i)).sum::<f64>() / free.len() as f64
        } else {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..n {
                let v = on_margin(self, i);
                let raises = (self.alpha[i] <= 0.0) == (self.y[i] > 0.0);
                if raises {
                    lo = lo.max(v);
                } else {
                    hi = hi.min(v);
                }
            }
            match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo,
                (false, true) => hi,
                (false, false) => self.b,
            }
        };
        let db = b - self.b;
        for e in &mut self.err {
            *e += db;
        }
        self.b = b;
    }

    fn refresh_errors(&mut self) {
        for i in 0..self.n() {
            let f: f64 = (0..self.n())
                .map(|j| self.alpha[j] * self.y[j] * self.k[(i, j)])
                .sum();
            self.err[i] = f + self.b - self.y[i];
        }
    }
}

pub fn svc_fit(train: &FeatureTable, params: &SvcParams, seed: u64) -> Result<SvcModel> {
    require_both_classes(train, "SVC")?;
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::arg(format!("SVC C = {} must be > 0", params.c)));
    }
    if params.kernel == Kernel::Rbf && !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(Error::arg(format!("SVC gamma = {} must be > 0", params.gamma)));
    }
    let n = train.n_rows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| train.row(i)).collect();
    let k = DMatrix::from_fn(n, n, |i, j| params.kernel.eval(params.gamma, &rows[i], &rows[j]));
    let y: Vec<f64> = train
        .labels()
        .iter()
        .map(|&l| if l == 1 { 1.0 } else { -1.0 })
        .collect();
    let err = y.iter().map(|v| -v).collect();
    let mut smo = Smo {
        k,
        y,
        alpha: vec![0.0; n],
        b: 0.0,
        c: params.c,
        tol: params.tol,
        err,
        trace: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };

    let mut examine_all = true;
    let mut passes = 0;
    loop {
        let mut changed = 0;
        if examine_all {
            for i in 0..n {
                changed += usize::from(smo.examine(i));
            }
        } else {
            for i in 0..n {
                if !smo.bounded(smo.alpha[i]) {
                    changed += usize::from(smo.examine(i));
                }
            }
        }
        passes += 1;
        if examine_all && changed == 0 {
            // no pair can move; a stale threshold may still leave violations
            let before = smo.b;
            smo.settle_bias();
            if smo.b == before || (0..n).all(|i| !smo.violates(i)) || passes >= params.max_passes {
                break;
            }
            continue;
        }
        if passes >= params.max_passes {
            break;
        }
        if examine_all {
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }
    smo.refresh_errors();
    let converged = (0..n).all(|i| !smo.violates(i));
    if !converged {
        log::debug!("SMO stopped after {passes} passes with KKT violations above {}", params.tol);
    }

    let support_idx: Vec<usize> = (0..n).filter(|&i| smo.alpha[i] > 0.0).collect();
    Ok(SvcModel {
        kernel: params.kernel,
        gamma: params.gamma,
        c: params.c,
        support: support_idx.iter().map(|&i| rows[i].clone()).collect(),
        dual_coef: support_idx.iter().map(|&i| smo.alpha[i] * smo.y[i]).collect(),
        bias: smo.b,
        alphas: smo.alpha,
        dual_trace: smo.trace,
        converged,
        passes,
    })
}

pub fn svc_predict(model: &SvcModel, sample: &[f64]) -> u8 {
    model.predict_one(sample)
}
