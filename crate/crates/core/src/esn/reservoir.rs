use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spectral::spectral_radius;
use super::EsnHyperParams;
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

/// Fixed random input and recurrent weights. Never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct Reservoir {
    /// `N_x x N_u` input weights.
    pub w_in: DMatrix<f64>,
    /// `N_x x N_x` recurrent weights.
    pub w: DMatrix<f64>,
    pub hyper: EsnHyperParams,
    pub seed: u64,
    w_sparse: CsrMatrix,
}

impl Reservoir {
    /// Wraps explicit weights, e.g. for analysis or tests. No rescaling is applied.
    pub fn from_parts(
        w_in: DMatrix<f64>,
        w: DMatrix<f64>,
        hyper: EsnHyperParams,
        seed: u64,
    ) -> Result<Self> {
        if w.nrows() != w.ncols() || w.nrows() != w_in.nrows() {
            return Err(Error::shape(
                format!("W {0}x{0} matching W_in rows", w_in.nrows()),
                format!("{}x{}", w.nrows(), w.ncols()),
            ));
        }
        let w_sparse = CsrMatrix::from_dense(&w);
        Ok(Self {
            w_in,
            w,
            hyper,
            seed,
            w_sparse,
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.w_in.ncols()
    }

    pub fn n_units(&self) -> usize {
        self.w.nrows()
    }

    /// Runs `steps` leaky-tanh updates with `u` held constant, starting from `x0`.
    pub fn run_constant_input(&self, u: &[f64], x0: &[f64], steps: usize) -> Vec<f64> {
        let n = self.n_units();
        let alpha = self.hyper.leaking_rate;
        let drive: Vec<f64> = (0..n)
            .map(|i| (0..u.len()).map(|j| self.w_in[(i, j)] * u[j]).sum())
            .collect();
        let mut x = x0.to_vec();
        let mut wx = vec![0.0; n];
        for _ in 0..steps {
            self.w_sparse.mul_into(&x, &mut wx);
            for i in 0..n {
                let candidate = (drive[i] + wx[i]).tanh();
                x[i] = (1.0 - alpha) * x[i] + alpha * candidate;
            }
        }
        x
    }

    /// One leaky update from `x` with input `u`, in place.
    pub(crate) fn step(&self, u: &[f64], x: &mut [f64]) {
        let next = self.run_constant_input(u, x, 1);
        x.copy_from_slice(&next);
    }
}

/// Draws a reservoir: `W_in ~ U[-s, s]`, `W` entries `U[-1, 1]` kept with probability
/// `sparsity`, then rescaled to the requested spectral radius.
pub fn init_reservoir(hyper: &EsnHyperParams, n_inputs: usize, seed: u64) -> Result<Reservoir> {
    hyper.validate()?;
    if n_inputs == 0 {
        return Err(Error::arg("reservoir needs at least one input"));
    }
    let n = hyper.reservoir_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = hyper.input_scaling;
    let w_in = DMatrix::from_fn(n, n_inputs, |_, _| rng.random_range(-s..=s));
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let keep = rng.random::<f64>() < hyper.sparsity;
            let v = rng.random_range(-1.0..=1.0);
            if keep {
                w[(i, j)] = v;
            }
        }
    }
    let radius = spectral_radius(&w)?;
    if radius < 1e-12 {
        return Err(Error::Init(format!(
            "recurrent matrix drawn with seed {seed} has spectral radius {radius:e}; \
             use a different seed or a higher sparsity"
        )));
    }
    w *= hyper.spectral_radius / radius;
    Reservoir::from_parts(w_in, w, hyper.clone(), seed)
}

/// Final state after holding `u` for `encode_steps` updates from the zero state.
pub fn encode_sample(res: &Reservoir, u: &[f64]) -> Result<DVector<f64>> {
    if u.len() != res.n_inputs() {
        return Err(Error::shape(
            format!("{} inputs", res.n_inputs()),
            u.len(),
        ));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("sample has non-finite entries"));
    }
    let x0 = vec![0.0; res.n_units()];
    Ok(DVector::from_vec(res.run_constant_input(
        u,
        &x0,
        res.hyper.encode_steps,
    )))
}

/// Design matrix of the readout: one row `[1?, u, x]` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub x: DMatrix<f64>,
    pub n_inputs: usize,
    pub n_units: usize,
    pub bias: bool,
}

impl StateMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    fn assemble(rows: &[(Vec<f64>, Vec<f64>)], n_inputs: usize, n_units: usize, bias: bool) -> Self {
        let offset = usize::from(bias);
        let mut x = DMatrix::zeros(rows.len(), offset + n_inputs + n_units);
        for (r, (u, state)) in rows.iter().enumerate() {
            if bias {
                x[(r, 0)] = 1.0;
            }
            for (j, v) in u.iter().chain(state).enumerate() {
                x[(r, offset + j)] = *v;
            }
        }
        Self {
            x,
            n_inputs,
            n_units,
            bias,
        }
    }
}

fn check_samples(res: &Reservoir, samples: &DMatrix<f64>) -> Result<()> {
    if samples.ncols() != res.n_inputs() {
        return Err(Error::shape(
            format!("{} input columns", res.n_inputs()),
            samples.ncols(),
        ));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("samples have non-finite entries"));
    }
    Ok(())
}

/// Per-sample encoding: every row starts from the zero state.
pub fn build_state_matrix(res: &Reservoir, samples: &DMatrix<f64>) -> Result<StateMatrix> {
    check_samples(res, samples)?;
    let x0 = vec![0.0; res.n_units()];
    let rows: Vec<(Vec<f64>, Vec<f64>)> = samples
        .row_iter()
        .map(|r| {
            let u: Vec<f64> = r.iter().copied().collect();
            let state = res.run_constant_input(&u, &x0, res.hyper.encode_steps);
            (u, state)
        })
        .collect();
    Ok(StateMatrix::assemble(
        &rows,
        res.n_inputs(),
        res.n_units(),
        res.hyper.include_bias,
    ))
}

/// Sequence encoding: rows are consecutive time steps sharing one trajectory.
/// The first `washout` rows are dropped. Returns the matrix and the final state.
pub fn build_sequence_states(
    res: &Reservoir,
    samples: &DMatrix<f64>,
    x0: &[f64],
    washout: usize,
) -> Result<(StateMatrix, Vec<f64>)> {
    check_samples(res, samples)?;
    let mut x = x0.to_vec();
    let mut rows = Vec::with_capacity(samples.nrows().saturating_sub(washout));
    for (t, r) in samples.row_iter().enumerate() {
        let u: Vec<f64> = r.iter().copied().collect();
        res.step(&u, &mut x);
        if t >= washout {
            rows.push((u, x.clone()));
        }
    }
    Ok((
        StateMatrix::assemble(&rows, res.n_inputs(), res.n_units(), res.hyper.include_bias),
        x,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::esn::spectral::spectral_radius;

    fn hyper(n: usize) -> EsnHyperParams {
        EsnHyperParams {
            reservoir_size: n,
            ..EsnHyperParams::default()
        }
    }

    #[test]
    fn init_is_deterministic_and_rescaled() {
        let h = hyper(50);
        let a = init_reservoir(&h, 4, 7).unwrap();
        let b = init_reservoir(&h, 4, 7).unwrap();
        assert_eq!(a, b);
        assert!((spectral_radius(&a.w).unwrap() - 0.9).abs() < 1e-6);
        assert!(a.w_in.iter().all(|v| v.abs() <= 1.0));
        assert_ne!(a, init_reservoir(&h, 4, 8).unwrap());
    }

    #[test]
    fn sparsity_fraction() {
        let h = EsnHyperParams {
            reservoir_size: 100,
            sparsity: 0.1,
            ..EsnHyperParams::default()
        };
        for seed in 0..5 {
            let r = init_reservoir(&h, 3, seed).unwrap();
            let frac = r.w.iter().filter(|v| **v != 0.0).count() as f64 / 10_000.0;
            assert!((frac - 0.1).abs() <= 0.02, "{frac}");
        }
    }

    #[test]
    fn nilpotent_draw_is_init_error() {
        // a 1x1 reservoir keeps its only entry with probability 1e-9
        let h = EsnHyperParams {
            reservoir_size: 1,
            sparsity: 1e-9,
            ..EsnHyperParams::default()
        };
        assert!(matches!(init_reservoir(&h, 2, 1), Err(Error::Init(_))));
    }

    fn zero_reservoir(alpha: f64, w_in: f64, steps: usize) -> Reservoir {
        let h = EsnHyperParams {
            reservoir_size: 1,
            leaking_rate: alpha,
            encode_steps: steps,
            ..EsnHyperParams::default()
        };
        Reservoir::from_parts(
            DMatrix::from_element(1, 1, w_in),
            DMatrix::zeros(1, 1),
            h,
            0,
        )
        .unwrap()
    }

    #[test]
    fn zero_drive_is_a_fixed_point() {
        let r = zero_reservoir(1.0, 0.0, 20);
        assert_eq!(encode_sample(&r, &[3.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn leaky_closed_form() {
        let r = zero_reservoir(0.5, 0.7, 3);
        let c = (0.7f64 * 1.3).tanh();
        let x = encode_sample(&r, &[1.3]).unwrap()[0];
        assert!((x - 0.875 * c).abs() < 1e-15);
        for n in 1..10 {
            let xn = r.run_constant_input(&[1.3], &[0.0], n)[0];
            assert!((xn - c * (1.0 - 0.5f64.powi(n as i32))).abs() < 1e-14);
        }
    }

    #[test]
    fn length_mismatch() {
        let r = zero_reservoir(1.0, 1.0, 2);
        assert!(matches!(encode_sample(&r, &[1.0, 2.0]), Err(Error::Shape { .. })));
        let m = DMatrix::zeros(3, 2);
        assert!(matches!(build_state_matrix(&r, &m), Err(Error::Shape { .. })));
    }

    #[test]
    fn state_matrix_layout() {
        let h = hyper(100);
        let r = init_reservoir(&h, 4, 1).unwrap();
        let samples = DMatrix::from_fn(156, 4, |i, j| ((i * 7 + j) % 11) as f64 / 5.0 - 1.0);
        let s = build_state_matrix(&r, &samples).unwrap();
        assert_eq!((s.n_rows(), s.n_cols()), (156, 104));

        let single = samples.rows(3, 1).into_owned();
        let one = build_state_matrix(&r, &single).unwrap();
        let u: Vec<f64> = single.iter().copied().collect();
        let enc = encode_sample(&r, &u).unwrap();
        let expected: Vec<f64> = u.iter().copied().chain(enc.iter().copied()).collect();
        assert_eq!(one.x.row(0).iter().copied().collect::<Vec<_>>(), expected);
        assert_eq!(s.x.row(3), one.x.row(0));

        let hb = EsnHyperParams {
            include_bias: true,
            ..h
        };
        let rb = init_reservoir(&hb, 4, 1).unwrap();
        let sb = build_state_matrix(&rb, &samples).unwrap();
        assert_eq!(sb.n_cols(), 105);
        assert!(sb.x.column(0).iter().all(|v| *v == 1.0));
    }

    #[test]
    fn rows_are_independent() {
        let r = init_reservoir(&hyper(30), 2, 3).unwrap();
        let samples = DMatrix::from_fn(6, 2, |i, j| (i as f64 - 2.5) * (j as f64 + 0.5));
        let perm = [4usize, 0, 5, 2, 1, 3];
        let permuted = samples.select_rows(perm.iter());
        let a = build_state_matrix(&r, &samples).unwrap();
        let b = build_state_matrix(&r, &permuted).unwrap();
        for (k, &p) in perm.iter().enumerate() {
            assert_eq!(b.x.row(k), a.x.row(p));
        }
    }

    #[test]
    fn sequence_states_drop_washout() {
        let r = init_reservoir(&hyper(20), 2, 3).unwrap();
        let samples = DMatrix::from_fn(15, 2, |i, j| ((i + j) % 3) as f64 - 1.0);
        let (s, last) = build_sequence_states(&r, &samples, &[0.0; 20], 10).unwrap();
        assert_eq!(s.n_rows(), 5);
        assert_eq!(s.x.row(4).columns(2, 20).iter().copied().collect::<Vec<_>>(), last);
    }
}
