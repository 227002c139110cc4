//! Greedy A-optimal selection.
//!
//! Sensors are added one at a time, each time taking the candidate that
//! minimizes the trace of the (pseudo-)inverse FIM of the enlarged set.
//!
//! While the set holds at most `r` sensors the FIM `CᵀC` is rank deficient.
//! Then the score is `tr(pinv(CᵀC)) = tr((CCᵀ)⁻¹)`, kept through a bordered
//! inverse of the small Gram matrix `CCᵀ`. A candidate that does not raise
//! the rank scores `+∞`. Once `r` sensors are in, `(CᵀC)⁻¹` is carried
//! forward with Sherman–Morrison updates, giving `O(nr²)` per step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SskError};
use crate::model::{CandidateMatrix, SensorSelection};

/// Relative Schur-complement floor below which a candidate adds no rank.
const RANK_TOLERANCE: f64 = 1e-10;

/// Scoring rule while fewer than `r` sensors are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnderdeterminedRule {
    #[default]
    PseudoInverseTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyConfig {
    pub p: usize,
    pub underdetermined_rule: UnderdeterminedRule,
}

impl GreedyConfig {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            underdetermined_rule: UnderdeterminedRule::default(),
        }
    }
}

enum Phase {
    /// `(CCᵀ)⁻¹`, `k × k`.
    Under(DMatrix<f64>),
    /// `(CᵀC)⁻¹`, `r × r`; `None` if the full-rank FIM could not be inverted.
    Over(Option<DMatrix<f64>>),
}

struct GreedyState<'a> {
    u: &'a CandidateMatrix,
    selected: Vec<usize>,
    taken: Vec<bool>,
    phase: Phase,
    row_norms2: Vec<f64>,
}

impl<'a> GreedyState<'a> {
    fn new(u: &'a CandidateMatrix) -> Self {
        let row_norms2 = u.matrix().row_iter().map(|r| r.norm_squared()).collect();
        Self {
            u,
            selected: Vec::new(),
            taken: vec![false; u.n()],
            phase: Phase::Under(DMatrix::zeros(0, 0)),
            row_norms2,
        }
    }

    fn from_selection(u: &'a CandidateMatrix, current: &SensorSelection) -> Self {
        let mut st = Self::new(u);
        for &i in current.indices() {
            st.taken[i] = true;
        }
        st.selected = current.indices().to_vec();
        let c = u.matrix().select_rows(&st.selected);
        st.phase = if st.selected.len() < u.r() {
            match (&c * c.transpose()).try_inverse() {
                Some(inv) => Phase::Under(inv),
                None => Phase::Over(None),
            }
        } else {
            Phase::Over(c.tr_mul(&c).try_inverse())
        };
        st
    }

    fn candidate(&self, j: usize) -> DVector<f64> {
        self.u.matrix().row(j).transpose()
    }

    /// Step objective for every candidate; `+∞` for taken ones.
    fn scores(&self) -> Vec<f64> {
        let n = self.u.n();
        let mut out = vec![f64::INFINITY; n];
        match &self.phase {
            Phase::Under(minv) => {
                let k = self.selected.len();
                let base = minv.trace();
                // B = C Uᵀ, column j is C u_j
                let c = self.u.matrix().select_rows(&self.selected);
                let b = &c * self.u.matrix().transpose();
                let w = minv * &b;
                for j in (0..n).filter(|&j| !self.taken[j]) {
                    let d = self.row_norms2[j];
                    let (s, w2) = if k == 0 {
                        (d, 0.0)
                    } else {
                        (d - b.column(j).dot(&w.column(j)), w.column(j).norm_squared())
                    };
                    if s > RANK_TOLERANCE * d && d > 0.0 {
                        out[j] = base + (w2 + 1.0) / s;
                    }
                }
            }
            Phase::Over(Some(pinv)) => {
                let base = pinv.trace();
                let pu = pinv * self.u.matrix().transpose();
                for j in (0..n).filter(|&j| !self.taken[j]) {
                    let col = pu.column(j);
                    let denom = 1.0 + self.u.matrix().row(j).dot(&col.transpose());
                    out[j] = base - col.norm_squared() / denom;
                }
            }
            Phase::Over(None) => {}
        }
        out
    }

    fn commit(&mut self, j: usize) {
        let r = self.u.r();
        let uj = self.candidate(j);
        let phase = std::mem::replace(&mut self.phase, Phase::Over(None));
        self.phase = match phase {
            Phase::Under(minv) => {
                let k = self.selected.len();
                let c = self.u.matrix().select_rows(&self.selected);
                let b = &c * &uj;
                let w = &minv * &b;
                let s = self.row_norms2[j] - b.dot(&w);
                let mut next = DMatrix::zeros(k + 1, k + 1);
                if s > RANK_TOLERANCE * self.row_norms2[j] {
                    let tl = minv + &w * w.transpose() / s;
                    next.view_mut((0, 0), (k, k)).copy_from(&tl);
                    for i in 0..k {
                        next[(i, k)] = -w[i] / s;
                        next[(k, i)] = -w[i] / s;
                    }
                    next[(k, k)] = 1.0 / s;
                    self.selected.push(j);
                    self.taken[j] = true;
                    if k + 1 == r {
                        let c = self.u.matrix().select_rows(&self.selected);
                        Phase::Over(c.tr_mul(&c).try_inverse())
                    } else {
                        Phase::Under(next)
                    }
                } else {
                    // rank did not grow; scores are degenerate from here on
                    self.selected.push(j);
                    self.taken[j] = true;
                    Phase::Over(None)
                }
            }
            Phase::Over(Some(pinv)) => {
                let pu = &pinv * &uj;
                let denom = 1.0 + uj.dot(&pu);
                self.selected.push(j);
                self.taken[j] = true;
                Phase::Over(Some(pinv - &pu * pu.transpose() / denom))
            }
            Phase::Over(None) => {
                self.selected.push(j);
                self.taken[j] = true;
                Phase::Over(None)
            }
        };
    }
}

fn argmin_lowest(scores: &[f64], taken: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &s) in scores.iter().enumerate() {
        if taken[j] {
            continue;
        }
        match best {
            None => best = Some((j, s)),
            Some((_, b)) if s < b => best = Some((j, s)),
            _ => {}
        }
    }
    best.map(|(j, _)| j)
}

/// Greedy A-optimal selection of `cfg.p` sensors. Equal scores go to the
/// lowest index.
pub fn greedy_select(u: &CandidateMatrix, cfg: &GreedyConfig) -> Result<SensorSelection> {
    if cfg.p == 0 || cfg.p > u.n() {
        return Err(SskError::InvalidParameter(format!(
            "p = {} must be in 1..={}",
            cfg.p,
            u.n()
        )));
    }
    let mut st = GreedyState::new(u);
    for _ in 0..cfg.p {
        let scores = st.scores();
        let j = argmin_lowest(&scores, &st.taken).expect("fewer than n selected");
        st.commit(j);
    }
    SensorSelection::new(st.selected, u.n())
}

/// Score of `current ∪ {j}` for every candidate `j`; `+∞` if `j` is already chosen.
/// An empty `current` is allowed.
pub fn greedy_step_scores(current: &[usize], u: &CandidateMatrix) -> Result<Vec<f64>> {
    if current.is_empty() {
        return Ok(GreedyState::new(u).scores());
    }
    let sel = SensorSelection::new(current.to_vec(), u.n())?;
    Ok(GreedyState::from_selection(u, &sel).scores())
}
