//! Group thresholding operators.
//!
//! Each operator acts on an `r × n` matrix whose columns are the groups: one
//! column per sensor candidate. A column either survives or is zeroed as a
//! whole.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Result, SskError};

/// Which thresholding rule to apply, with its single parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    /// Block soft thresholding, proximal map of the group L1 penalty.
    Soft { gamma_lambda: f64 },
    /// Block hard thresholding, proximal map of the group L0 penalty.
    Hard { gamma_lambda: f64 },
    /// Keep exactly the `p` largest-norm columns.
    TopP { p: usize },
}

impl ThresholdSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            ThresholdSpec::Soft { gamma_lambda } | ThresholdSpec::Hard { gamma_lambda } => {
                if !(gamma_lambda >= 0.0 && gamma_lambda.is_finite()) {
                    return Err(SskError::InvalidParameter(format!(
                        "threshold must be a finite nonnegative value, got {gamma_lambda}"
                    )));
                }
            }
            ThresholdSpec::TopP { p } => {
                if p == 0 || p > n {
                    return Err(SskError::InvalidParameter(format!(
                        "p = {p} must be in 1..={n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn column_norms(v: &DMatrix<f64>) -> Vec<f64> {
    v.column_iter().map(|c| c.norm()).collect()
}

/// `v_i (1 - γλ/‖v_i‖)` for columns with `‖v_i‖ ≥ γλ`, zero otherwise.
pub fn block_soft_threshold(v: &DMatrix<f64>, gamma_lambda: f64) -> DMatrix<f64> {
    let mut out = v.clone();
    block_soft_threshold_mut(&mut out, gamma_lambda);
    out
}

pub fn block_soft_threshold_mut(v: &mut DMatrix<f64>, gamma_lambda: f64) {
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        if norm >= gamma_lambda && norm > 0.0 {
            col.scale_mut(1.0 - gamma_lambda / norm);
        } else {
            col.fill(0.0);
        }
    }
}

/// Columns with `‖v_i‖ ≥ γλ` pass through untouched, the rest are zeroed.
pub fn block_hard_threshold(v: &DMatrix<f64>, gamma_lambda: f64) -> DMatrix<f64> {
    let mut out = v.clone();
    block_hard_threshold_mut(&mut out, gamma_lambda);
    out
}

pub fn block_hard_threshold_mut(v: &mut DMatrix<f64>, gamma_lambda: f64) {
    for mut col in v.column_iter_mut() {
        if col.norm() < gamma_lambda {
            col.fill(0.0);
        }
    }
}

/// Indices of the `p` largest-norm columns. Equal norms resolve to the lower
/// index, so exactly `p` indices come back even under ties.
pub fn top_p_columns(norms: &[f64], p: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    let p = p.min(norms.len());
    if p == 0 {
        return Vec::new();
    }
    let by_rank = |&a: &usize, &b: &usize| -> Ordering {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    };
    if p < order.len() {
        order.select_nth_unstable_by(p - 1, by_rank);
        order.truncate(p);
    }
    order.sort_unstable();
    order
}

/// Keeps the `p` largest-norm columns and zeros every other column.
pub fn l0_constrained_hard_threshold(v: &DMatrix<f64>, p: usize) -> Result<DMatrix<f64>> {
    let mut out = v.clone();
    l0_constrained_hard_threshold_mut(&mut out, p)?;
    Ok(out)
}

pub fn l0_constrained_hard_threshold_mut(v: &mut DMatrix<f64>, p: usize) -> Result<()> {
    let n = v.ncols();
    if p == 0 || p > n {
        return Err(SskError::InvalidParameter(format!(
            "p = {p} must be in 1..={n}"
        )));
    }
    if p == n {
        return Ok(());
    }
    let keep = top_p_columns(&column_norms(v), p);
    let mut mask = vec![false; n];
    for k in keep {
        mask[k] = true;
    }
    for (mut col, keep) in v.column_iter_mut().zip(mask) {
        if !keep {
            col.fill(0.0);
        }
    }
    Ok(())
}

/// Applies `spec` in place.
pub fn apply_threshold(v: &mut DMatrix<f64>, spec: &ThresholdSpec) -> Result<()> {
    match *spec {
        ThresholdSpec::Soft { gamma_lambda } => {
            block_soft_threshold_mut(v, gamma_lambda);
            Ok(())
        }
        ThresholdSpec::Hard { gamma_lambda } => {
            block_hard_threshold_mut(v, gamma_lambda);
            Ok(())
        }
        ThresholdSpec::TopP { p } => l0_constrained_hard_threshold_mut(v, p),
    }
}
