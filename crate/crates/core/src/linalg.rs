//! Thin SVD through faer. nalgebra's bidiagonal SVD can return inaccurate
//! factors for tall rank-deficient inputs, which centered snapshot matrices
//! always are.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SskError};

/// `A = U diag(s) Vᵀ` with `s` non-increasing and `k = min(rows, cols)`.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub(crate) fn thin_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| SskError::InvalidMatrix(format!("SVD failed: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let k = a.nrows().min(a.ncols());
    Ok(ThinSvd {
        u: DMatrix::from_fn(a.nrows(), k, |i, j| u[(i, j)]),
        s: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(a.ncols(), k, |i, j| v[(i, j)]),
    })
}

/// Singular values, non-increasing.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let s = to_faer(a)
        .singular_values()
        .map_err(|e| SskError::InvalidMatrix(format!("SVD failed: {e:?}")))?;
    Ok(DVector::from_vec(s))
}
