use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;

/// Ridge readout: solves `(X^T X + beta I) w = X^T y` by Cholesky.
///
/// The identity has the readout's column dimension. With `beta = 0` the design must
/// have full column rank.
pub fn train_readout(x: &DMatrix<f64>, y: &[f64], beta: f64) -> Result<DVector<f64>> {
    if x.nrows() == 0 {
        return Err(Error::arg("readout needs at least one row"));
    }
    if y.len() != x.nrows() {
        return Err(Error::shape(format!("{} targets", x.nrows()), y.len()));
    }
    if beta < 0.0 || !beta.is_finite() {
        return Err(Error::arg(format!("ridge coefficient {beta} must be >= 0")));
    }
    let mut gram = x.tr_mul(x);
    for i in 0..gram.nrows() {
        gram[(i, i)] += beta;
    }
    let rhs = x.tr_mul(&DVector::from_column_slice(y));
    let chol = Cholesky::factor(&gram, 1e-13).ok_or_else(|| {
        Error::Singular(format!(
            "X^T X + {beta:e} I is not positive definite ({} rows, {} columns); use a ridge coefficient > 0",
            x.nrows(),
            x.ncols()
        ))
    })?;
    Ok(chol.solve(&rhs))
}
