use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `log det M` for symmetric positive definite `M`. The empty matrix gives 0.
pub fn logdet_pd(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = m.clone().cholesky().ok_or_else(not_pd)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `log det M` through an LU factorization; the determinant must be positive.
pub fn logdet_general(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let det = m.clone().lu().determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::Numeric(format!(
            "determinant {det} is not positive; the kernel is too close to singular, raise the jitter"
        )));
    }
    Ok(det.ln())
}

/// `M⁻¹ B` for symmetric positive definite `M`.
pub(crate) fn solve_pd(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let chol = m.clone().cholesky().ok_or_else(not_pd)?;
    Ok(chol.solve(b))
}

/// Inverse of a symmetric positive definite matrix.
pub(crate) fn inverse_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    Ok(m.clone().cholesky().ok_or_else(not_pd)?.inverse())
}

fn not_pd() -> Error {
    Error::Numeric("kernel submatrix is not positive definite; raise the jitter".into())
}
