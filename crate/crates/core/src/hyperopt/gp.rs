//! Gaussian-process surrogate with a squared-exponential ARD kernel and the expected
//! improvement acquisition.

use nalgebra::{DMatrix, DVector};

use crate::linalg::Cholesky;

pub const JITTER: f64 = 1e-6;
/// Length-scale grid searched per coordinate.
pub const LENGTH_GRID: [f64; 8] = [0.05, 0.1, 0.2, 0.35, 0.6, 1.0, 2.0, 4.0];

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    lengths: Vec<f64>,
    chol: Cholesky,
    alpha: DVector<f64>,
    y_mean: f64,
    y_std: f64,
    /// Best standardised observation.
    y_best: f64,
}

fn kernel(a: &[f64], b: &[f64], lengths: &[f64]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .zip(lengths)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    (-0.5 * s).exp()
}

fn gram(x: &[Vec<f64>], lengths: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        kernel(&x[i], &x[j], lengths) + if i == j { JITTER } else { 0.0 }
    })
}

/// Log marginal likelihood of standardised targets, `None` if the Gram matrix is not
/// numerically positive definite.
fn log_marginal(x: &[Vec<f64>], y: &DVector<f64>, lengths: &[f64]) -> Option<f64> {
    let chol = Cholesky::factor(&gram(x, lengths), 1e-14)?;
    let a = chol.solve(y);
    let n = y.len() as f64;
    Some(-0.5 * y.dot(&a) - 0.5 * chol.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl GaussianProcess {
    /// Fits on observations; `None` when all targets are equal or the fit is singular.
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Option<Self> {
        let n = y.len();
        if n == 0 {
            return None;
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = var.sqrt();
        if y_std <= 1e-12 * y_mean.abs().max(1.0) {
            return None;
        }
        let ys = DVector::from_iterator(n, y.iter().map(|v| (v - y_mean) / y_std));
        let d = x[0].len();

        // coordinate-wise grid search, two sweeps, from a shared isotropic start
        let mut lengths = vec![LENGTH_GRID[0]; d];
        let mut best = f64::NEG_INFINITY;
        for &l in &LENGTH_GRID {
            let cand = vec![l; d];
            if let Some(v) = log_marginal(x, &ys, &cand) {
                if v > best {
                    best = v;
                    lengths = cand;
                }
            }
        }
        if !best.is_finite() {
            return None;
        }
        for _ in 0..2 {
            for j in 0..d {
                for &l in &LENGTH_GRID {
                    let mut cand = lengths.clone();
                    cand[j] = l;
                    if let Some(v) = log_marginal(x, &ys, &cand) {
                        if v > best {
                            best = v;
                            lengths = cand;
                        }
                    }
                }
            }
        }
        let chol = Cholesky::factor(&gram(x, &lengths), 1e-14)?;
        let alpha = chol.solve(&ys);
        let y_best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            x: x.to_vec(),
            lengths,
            chol,
            alpha,
            y_mean,
            y_std,
            y_best,
        })
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.lengths
    }

    /// Posterior mean and standard deviation in standardised units.
    fn posterior_std_units(&self, z: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| kernel(xi, z, &self.lengths)));
        let mean = k.dot(&self.alpha);
        let v = self.chol.solve_lower(&k);
        let var = (1.0 - v.norm_squared()).max(0.0);
        (mean, var.sqrt())
    }

    /// Posterior mean and standard deviation in objective units.
    pub fn posterior(&self, z: &[f64]) -> (f64, f64) {
        let (m, s) = self.posterior_std_units(z);
        (self.y_mean + self.y_std * m, self.y_std * s)
    }

    /// Expected improvement over the best observation, in objective units. Never negative.
    pub fn expected_improvement(&self, z: &[f64]) -> f64 {
        let (mu, sigma) = self.posterior_std_units(z);
        let gap = mu - self.y_best;
        let ei = if sigma <= 1e-12 {
            gap.max(0.0)
        } else {
            let t = gap / sigma;
            gap * norm_cdf(t) + sigma * norm_pdf(t)
        };
        self.y_std * ei.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_helpers() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.96) - 0.975_002_104_851_78).abs() < 1e-12);
        assert!((norm_pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn interpolates_and_ei_vanishes_at_data() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let y: Vec<f64> = x.iter().map(|v| -(v[0] - 0.3).powi(2)).collect();
        let gp = GaussianProcess::fit(&x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (m, _) = gp.posterior(xi);
            assert!((m - yi).abs() < 1e-3);
            let ei = gp.expected_improvement(xi);
            assert!((0.0..1e-4).contains(&ei), "{ei}");
        }
        assert!(gp.expected_improvement(&[0.3]) > 0.0);
    }

    #[test]
    fn constant_targets_give_no_model() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(GaussianProcess::fit(&x, &[0.5, 0.5]).is_none());
    }
}
