//! Linear measurement model `y = H U z`, least-squares estimation of the
//! latent state and the A-optimality criterion.
//!
//! All objectives here are computed with unit noise variance. A
//! [`NoiseModel`] only rescales reported values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SskError};
use crate::linalg::{singular_values, thin_svd};

/// Condition number of `CᵀC` above which a least-squares solve is refused.
pub const MAX_FIM_CONDITION: f64 = 1e12;

/// Sensor-candidate matrix `U` (`n` candidate locations by `r` latent modes).
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateMatrix(DMatrix<f64>);

impl CandidateMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (n, r) = entries.shape();
        if r == 0 || n == 0 {
            return Err(SskError::InvalidMatrix("candidate matrix is empty".into()));
        }
        if n < r {
            return Err(SskError::InvalidMatrix(format!(
                "candidate matrix must be tall ({n} rows < {r} columns)"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(SskError::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self(entries))
    }

    /// Number of candidate locations.
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Number of latent modes.
    pub fn r(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Rows permuted so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        Self(DMatrix::from_fn(self.n(), self.r(), |i, j| self.0[(perm[i], j)]))
    }
}

/// Ordered set of distinct candidate indices; implicitly the row selector `H`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SensorSelection {
    indices: Vec<usize>,
}

impl SensorSelection {
    /// Validates distinctness, non-emptiness and that every index is `< n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(SskError::InvalidSelection("selection is empty".into()));
        }
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(SskError::InvalidSelection(format!(
                    "index {i} out of range for {n} candidates"
                )));
            }
            if seen[i] {
                return Err(SskError::InvalidSelection(format!("duplicate index {i}")));
            }
            seen[i] = true;
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of sensors `p`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    /// Indices in ascending order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }
}

/// Measurement matrix `C = H U` (`p` by `r`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix(DMatrix<f64>);

impl MeasurementMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn r(&self) -> usize {
        self.0.ncols()
    }

    /// Fisher information matrix `CᵀC` for unit noise.
    pub fn fim(&self) -> DMatrix<f64> {
        self.0.tr_mul(&self.0)
    }
}

/// Estimated latent state `z̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentEstimate(pub DVector<f64>);

/// Decoder `K` (`r` by `n`) mapping full-length measurements to the latent state.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix(pub DMatrix<f64>);

/// I.i.d. Gaussian sensor noise with standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(SskError::InvalidParameter(format!("sigma = {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Expected squared estimation error `σ² tr((CᵀC)⁻¹)` from a unit-noise trace.
    pub fn scale_trace(&self, unit_trace: f64) -> f64 {
        self.sigma * self.sigma * unit_trace
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

/// Picks the rows of `u` named by `s`, in selection order.
pub fn select_rows(u: &CandidateMatrix, s: &SensorSelection) -> Result<MeasurementMatrix> {
    let m = u.matrix();
    if let Some(&bad) = s.indices().iter().find(|&&i| i >= m.nrows()) {
        return Err(SskError::InvalidSelection(format!(
            "index {bad} out of range for {} candidates",
            m.nrows()
        )));
    }
    Ok(MeasurementMatrix(m.select_rows(s.indices())))
}

/// Reusable least-squares solver for a fixed measurement matrix.
///
/// Factorizes `C` once with an SVD so that many snapshots can be decoded
/// against the same sensor set.
#[derive(Debug, Clone)]
pub struct LatentEstimator {
    pinv: DMatrix<f64>,
    condition: f64,
}

impl LatentEstimator {
    pub fn new(c: &MeasurementMatrix) -> Result<Self> {
        let (p, r) = c.matrix().shape();
        if p < r {
            return Err(SskError::Singular {
                condition: f64::INFINITY,
            });
        }
        let svd = thin_svd(c.matrix())?;
        let smax = svd.s.max();
        let smin = svd.s.min();
        let condition = if smin > 0.0 {
            (smax / smin).powi(2)
        } else {
            f64::INFINITY
        };
        if !(condition <= MAX_FIM_CONDITION) {
            return Err(SskError::Singular { condition });
        }
        let mut ut_scaled = svd.u.transpose();
        for (k, s) in svd.s.iter().enumerate() {
            ut_scaled.row_mut(k).scale_mut(1.0 / s);
        }
        let pinv = svd.v * ut_scaled;
        Ok(Self { pinv, condition })
    }

    /// Condition number estimate of `CᵀC`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn estimate(&self, y: &DVector<f64>) -> Result<LatentEstimate> {
        if y.len() != self.pinv.ncols() {
            return Err(SskError::InvalidParameter(format!(
                "measurement length {} != {} sensors",
                y.len(),
                self.pinv.ncols()
            )));
        }
        Ok(LatentEstimate(&self.pinv * y))
    }
}

/// Least-squares latent estimate `z̃ = (CᵀC)⁻¹Cᵀy`.
pub fn estimate_latent(c: &MeasurementMatrix, y: &DVector<f64>) -> Result<LatentEstimate> {
    LatentEstimator::new(c)?.estimate(y)
}

/// A-optimality criterion `tr((CᵀC)⁻¹)`.
///
/// Returns `f64::INFINITY` when `CᵀC` is numerically singular (fewer sensors
/// than modes, or rank deficiency at the usual SVD rank tolerance), so that
/// infeasible selections rank last instead of aborting a sweep.
pub fn a_optimality(c: &MeasurementMatrix) -> f64 {
    let (p, r) = c.matrix().shape();
    if p < r || r == 0 {
        return f64::INFINITY;
    }
    let Ok(sv) = singular_values(c.matrix()) else {
        return f64::INFINITY;
    };
    let smax = sv.max();
    let tol = smax * f64::EPSILON * p.max(r) as f64;
    if !(smax > 0.0) || sv.iter().any(|&s| s <= tol) {
        return f64::INFINITY;
    }
    sv.iter().map(|s| 1.0 / (s * s)).sum()
}

/// A-optimality of the rows of `u` named by `s`.
pub fn selection_trace(u: &CandidateMatrix, s: &SensorSelection) -> Result<f64> {
    Ok(a_optimality(&select_rows(u, s)?))
}

/// `tr(KKᵀ)`, the unit-noise error variance of an unbiased decoder.
pub fn decoder_trace(k: &GainMatrix) -> f64 {
    k.0.norm_squared()
}

/// Least-squares decoder for a selection embedded back at full width:
/// column `s[i]` of the result is column `i` of `(CᵀC)⁻¹Cᵀ`, others are zero.
pub fn embedded_decoder(u: &CandidateMatrix, s: &SensorSelection) -> Result<GainMatrix> {
    let c = select_rows(u, s)?;
    let est = LatentEstimator::new(&c)?;
    let mut k = DMatrix::zeros(u.r(), u.n());
    for (col, &idx) in s.indices().iter().enumerate() {
        k.set_column(idx, &est.pinv.column(col));
    }
    Ok(GainMatrix(k))
}
