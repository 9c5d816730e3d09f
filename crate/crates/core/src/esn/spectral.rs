//! Spectral radius by two-vector subspace iteration.
//!
//! A plain power iteration stalls when the dominant eigenvalues form a complex
//! conjugate pair, which is the common case for random reservoirs. Iterating a
//! two-dimensional subspace and reading the eigenvalues of its 2x2 Rayleigh quotient
//! covers both a real dominant eigenvalue and a dominant pair. A dense Schur-based
//! eigensolve is the fallback when the iteration cap is hit.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    /// Converged on a single dominant real eigenvector.
    PowerReal,
    /// Converged on a dominant two-dimensional invariant subspace.
    PowerPair,
    /// Iteration cap reached or iteration broke down; dense eigensolve used.
    DenseFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub method: SpectralMethod,
    pub iterations: usize,
}

/// Largest eigenvalue magnitude of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    spectral_radius_detailed(m).map(|e| e.radius)
}

pub fn spectral_radius_detailed(m: &DMatrix<f64>) -> Result<SpectralEstimate> {
    if m.nrows() != m.ncols() {
        return Err(Error::shape(
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("matrix has non-finite entries"));
    }
    let n = m.nrows();
    match n {
        0 => {
            return Ok(SpectralEstimate {
                radius: 0.0,
                method: SpectralMethod::PowerReal,
                iterations: 0,
            })
        }
        1 => {
            return Ok(SpectralEstimate {
                radius: m[(0, 0)].abs(),
                method: SpectralMethod::PowerReal,
                iterations: 0,
            })
        }
        _ => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_5bec);
    let mut q1 = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut q2 = random_orthogonal(&q1, &mut rng);

    for iter in 1..=POWER_MAX_ITER {
        let z1 = m * &q1;
        let z2 = m * &q2;
        let h11 = q1.dot(&z1);
        let h12 = q1.dot(&z2);
        let h21 = q2.dot(&z1);
        let h22 = q2.dot(&z2);
        let scale = (z1.norm_squared() + z2.norm_squared()).sqrt();
        if scale == 0.0 {
            if n == 2 {
                // the subspace is the whole space and M vanishes on it
                return Ok(SpectralEstimate {
                    radius: 0.0,
                    method: SpectralMethod::PowerPair,
                    iterations: iter,
                });
            }
            break;
        }

        let r1 = &z1 - &q1 * h11;
        let growth2 = (&z2 - &q1 * q1.dot(&z2)).norm();

        // single dominant real eigenvector
        if r1.norm() <= POWER_TOL * z1.norm() && growth2 <= (1.0 + 1e-3) * h11.abs() + 1e-300 {
            return Ok(SpectralEstimate {
                radius: h11.abs(),
                method: SpectralMethod::PowerReal,
                iterations: iter,
            });
        }

        let res1 = &z1 - &q1 * h11 - &q2 * h21;
        let res2 = &z2 - &q1 * h12 - &q2 * h22;
        let res = (res1.norm_squared() + res2.norm_squared()).sqrt();
        if res <= POWER_TOL * scale {
            return Ok(SpectralEstimate {
                radius: max_eig_modulus_2x2(h11, h12, h21, h22),
                method: SpectralMethod::PowerPair,
                iterations: iter,
            });
        }

        // re-orthonormalise the iterated pair
        let n1 = z1.norm();
        if n1 == 0.0 {
            q1 = random_orthogonal(&q2, &mut rng);
        } else {
            q1 = z1 / n1;
        }
        let mut w2 = z2;
        w2 -= &q1 * q1.dot(&w2);
        w2 -= &q1 * q1.dot(&w2);
        let n2 = w2.norm();
        q2 = if n2 <= 1e-14 * scale {
            random_orthogonal(&q1, &mut rng)
        } else {
            w2 / n2
        };
    }

    let radius = m
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    Ok(SpectralEstimate {
        radius,
        method: SpectralMethod::DenseFallback,
        iterations: POWER_MAX_ITER,
    })
}

fn random_orthogonal(q: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let mut v = DVector::from_fn(q.len(), |_, _| rng.random_range(-1.0..1.0));
        v -= q * q.dot(&v);
        v -= q * q.dot(&v);
        let norm = v.norm();
        if norm > 1e-8 {
            return v / norm;
        }
    }
}

fn max_eig_modulus_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let half_trace = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = half_trace * half_trace - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        (half_trace + s).abs().max((half_trace - s).abs())
    } else {
        det.max(0.0).sqrt()
    }
}
