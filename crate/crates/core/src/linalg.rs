use nalgebra::{Cholesky, DMatrix, SMatrix};

use crate::error::{Error, Result};
use crate::kinematics::Mat4;

pub fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse<const N: usize>(
    m: &SMatrix<f64, N, N>,
    what: &'static str,
) -> Result<SMatrix<f64, N, N>> {
    let chol = Cholesky::new(symmetrize(m)).ok_or(Error::SingularMatrix(what))?;
    Ok(symmetrize(&chol.inverse()))
}

/// SPD inverse, retrying once with `jitter * I` added. Returns whether the
/// jitter was needed.
pub fn jittered_inverse(m: &Mat4, jitter: f64, what: &'static str) -> Result<(Mat4, bool)> {
    match spd_inverse(m, what) {
        Ok(inv) => Ok((inv, false)),
        Err(e) if jitter > 0.0 => spd_inverse(&(m + Mat4::identity() * jitter), what)
            .map(|inv| (inv, true))
            .map_err(|_| e),
        Err(e) => Err(e),
    }
}

pub fn is_psd<const N: usize>(m: &SMatrix<f64, N, N>, rel_tol: f64) -> bool {
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    let d = DMatrix::from_column_slice(N, N, symmetrize(m).as_slice());
    d.symmetric_eigenvalues()
        .iter()
        .all(|e| *e >= -rel_tol * scale)
}
