//! Convex relaxation of A-optimal selection.
//!
//! Boolean sensor indicators become weights `zᵢ ∈ (0, 1)` with `Σzᵢ = p`,
//! and the box is enforced by a log barrier:
//!
//! ```text
//! Ψ(z) = tr(W⁻¹) − κ Σ (log zᵢ + log(1 − zᵢ)),   W = Σ zᵢ uᵢuᵢᵀ
//! ```
//!
//! The problem is solved with equality-constrained Newton steps and the
//! relaxed weights are rounded to the `p` largest entries. The dense `n × n`
//! Hessian makes every step `O(n³)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SskError};
use crate::model::{CandidateMatrix, SensorSelection};
use crate::prox::top_p_columns;

/// Weights are kept inside `[BOUNDARY_MARGIN, 1 − BOUNDARY_MARGIN]`.
pub const BOUNDARY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    /// Armijo sufficient-decrease fraction, in `(0, 0.5)`.
    pub alpha: f64,
    /// Backtracking factor, in `(0, 1)`.
    pub beta: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationProblem {
    pub u: CandidateMatrix,
    pub p: usize,
    pub kappa: f64,
    /// Stop once `λ²/2` falls below this value.
    pub newton_tolerance: f64,
    pub max_newton_steps: usize,
    pub line_search: LineSearch,
}

impl RelaxationProblem {
    /// Defaults: `κ = 1e-4 (r/p)²`, decrement tolerance `1e-4`, 200 steps.
    pub fn new(u: CandidateMatrix, p: usize) -> Result<Self> {
        let n = u.n();
        if p == 0 || p >= n {
            return Err(SskError::InvalidParameter(format!(
                "relaxation needs 0 < p < n, got p = {p}, n = {n}"
            )));
        }
        let ratio = u.r() as f64 / p as f64;
        Ok(Self {
            u,
            p,
            kappa: 1e-4 * ratio * ratio,
            newton_tolerance: 1e-4,
            max_newton_steps: 200,
            line_search: LineSearch::default(),
        })
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn n(&self) -> usize {
        self.u.n()
    }

    /// Uniform `zᵢ = p/n`, always feasible.
    pub fn uniform_start(&self) -> WeightVector {
        WeightVector {
            z: DVector::from_element(self.n(), self.p as f64 / self.n() as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        let la = self.line_search;
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(SskError::InvalidParameter(format!("kappa = {}", self.kappa)));
        }
        if !(la.alpha > 0.0 && la.alpha < 0.5 && la.beta > 0.0 && la.beta < 1.0) {
            return Err(SskError::InvalidParameter(format!(
                "line search alpha = {}, beta = {}",
                la.alpha, la.beta
            )));
        }
        if !(self.newton_tolerance > 0.0) {
            return Err(SskError::InvalidParameter("newton tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Relaxed selection weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub z: DVector<f64>,
}

impl WeightVector {
    /// Checks `zᵢ ∈ (0, 1)` and `Σzᵢ = p` to `1e-8`.
    pub fn new(z: DVector<f64>, p: usize) -> Result<Self> {
        if z.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(SskError::BarrierDomain("weights must lie in (0, 1)".into()));
        }
        if (z.sum() - p as f64).abs() > 1e-8 {
            return Err(SskError::BarrierDomain(format!(
                "weights sum to {} instead of {p}",
                z.sum()
            )));
        }
        Ok(Self { z })
    }
}

/// Quantities shared by value, gradient and Hessian at one point.
struct Eval {
    /// `W⁻¹`
    w_inv: DMatrix<f64>,
    /// `(U W⁻¹)ᵀ`, column `i` is `W⁻¹uᵢ`.
    b_t: DMatrix<f64>,
}

fn eval(z: &DVector<f64>, u: &CandidateMatrix) -> Result<Eval> {
    if z.len() != u.n() {
        return Err(SskError::InvalidParameter(format!(
            "weight length {} != {} candidates",
            z.len(),
            u.n()
        )));
    }
    if z.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(SskError::BarrierDomain("weights must lie in (0, 1)".into()));
    }
    let um = u.matrix();
    let mut scaled = um.clone();
    for (mut row, &zi) in scaled.row_iter_mut().zip(z.iter()) {
        row *= zi;
    }
    let w = um.tr_mul(&scaled);
    let chol = w
        .cholesky()
        .ok_or_else(|| SskError::BarrierDomain("weighted FIM is singular".into()))?;
    let w_inv = chol.inverse();
    let b_t = &w_inv * um.transpose();
    Ok(Eval { w_inv, b_t })
}

fn barrier(z: &DVector<f64>) -> f64 {
    z.iter().map(|&v| v.ln() + (1.0 - v).ln()).sum()
}

/// `Ψ(z) = tr(W⁻¹) − κ Σ (log zᵢ + log(1 − zᵢ))`
pub fn objective(z: &WeightVector, problem: &RelaxationProblem) -> Result<f64> {
    objective_at(&z.z, problem)
}

fn objective_at(z: &DVector<f64>, problem: &RelaxationProblem) -> Result<f64> {
    let e = eval(z, &problem.u)?;
    Ok(e.w_inv.trace() - problem.kappa * barrier(z))
}

/// `(∇Ψ)ᵢ = −uᵢᵀW⁻²uᵢ − κ/zᵢ + κ/(1 − zᵢ)`
pub fn gradient(z: &WeightVector, problem: &RelaxationProblem) -> Result<DVector<f64>> {
    let e = eval(&z.z, &problem.u)?;
    Ok(gradient_from(&e, &z.z, problem.kappa))
}

fn gradient_from(e: &Eval, z: &DVector<f64>, kappa: f64) -> DVector<f64> {
    DVector::from_fn(z.len(), |i, _| {
        let zi = z[i];
        -e.b_t.column(i).norm_squared() - kappa / zi + kappa / (1.0 - zi)
    })
}

/// `∇²Ψ = 2 (UW⁻²Uᵀ) ∘ (UW⁻¹Uᵀ) + κ diag(1/zᵢ² + 1/(1 − zᵢ)²)`
pub fn hessian(z: &WeightVector, problem: &RelaxationProblem) -> Result<DMatrix<f64>> {
    let e = eval(&z.z, &problem.u)?;
    Ok(hessian_from(&e, &z.z, &problem.u, problem.kappa))
}

fn hessian_from(e: &Eval, z: &DVector<f64>, u: &CandidateMatrix, kappa: f64) -> DMatrix<f64> {
    let n = z.len();
    // UW⁻²Uᵀ = BBᵀ, built in place; the Hadamard factor UW⁻¹Uᵀ = BUᵀ is
    // taken entrywise to avoid a second n × n buffer.
    let mut h = e.b_t.tr_mul(&e.b_t);
    let u_t = u.matrix().transpose();
    for j in 0..n {
        let uj = u_t.column(j);
        for i in 0..n {
            h[(i, j)] *= 2.0 * e.b_t.column(i).dot(&uj);
        }
    }
    for i in 0..n {
        let zi = z[i];
        h[(i, i)] += kappa * (1.0 / (zi * zi) + 1.0 / ((1.0 - zi) * (1.0 - zi)));
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonRecord {
    pub step: usize,
    pub objective: f64,
    /// `λ²/2` at the start of this step.
    pub decrement: f64,
    pub step_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub weights: WeightVector,
    pub steps: usize,
    pub converged: bool,
    /// Final `λ²/2`.
    pub decrement: f64,
    pub objective: f64,
    pub trace: Vec<NewtonRecord>,
}

/// Equality-constrained Newton method from the uniform start.
pub fn newton_solve(problem: &RelaxationProblem) -> Result<NewtonOutcome> {
    newton_solve_from(problem, problem.uniform_start())
}

struct Direction {
    value: f64,
    dz: DVector<f64>,
    /// `∇Ψᵀ Δz`, equal to `−λ²`.
    slope: f64,
}

impl Direction {
    fn decrement(&self) -> f64 {
        (-self.slope / 2.0).max(0.0)
    }
}

/// Solves `[∇²Ψ 1; 1ᵀ 0][Δz; ν] = [−∇Ψ; 0]` by block elimination through one
/// Cholesky factorization of the Hessian.
fn newton_direction(problem: &RelaxationProblem, z: &DVector<f64>) -> Result<Direction> {
    let n = problem.n();
    let kappa = problem.kappa;
    let e = eval(z, &problem.u)?;
    let value = e.w_inv.trace() - kappa * barrier(z);
    let g = gradient_from(&e, z, kappa);
    let h = hessian_from(&e, z, &problem.u, kappa);
    drop(e);
    let chol = h
        .cholesky()
        .ok_or_else(|| SskError::BarrierDomain("Hessian is not positive definite".into()))?;
    let mut rhs = DMatrix::from_element(n, 2, 1.0);
    rhs.set_column(0, &g);
    let sol = chol.solve(&rhs);
    drop(chol);
    let (hg, h1) = (sol.column(0), sol.column(1));
    let nu = -hg.sum() / h1.sum();
    let dz: DVector<f64> = -(hg + h1 * nu);
    let slope = g.dot(&dz);
    Ok(Direction { value, dz, slope })
}

/// Backtracking from the fraction-to-boundary step; returns the accepted point and length.
fn line_search(
    problem: &RelaxationProblem,
    z: &DVector<f64>,
    dir: &Direction,
    steps: usize,
) -> Result<(DVector<f64>, f64)> {
    let ls = problem.line_search;
    let mut t = max_interior_step(z, &dir.dz).min(1.0);
    loop {
        let trial = z + &dir.dz * t;
        if let Ok(v) = objective_at(&trial, problem) {
            if v <= dir.value + ls.alpha * t * dir.slope {
                return Ok((trial, t));
            }
        }
        t *= ls.beta;
        if t < 1e-14 {
            return Err(SskError::StalledDescent {
                steps,
                decrement: dir.decrement(),
                step: t,
            });
        }
    }
}

/// One damped Newton step from `z`. Returns `z` unchanged with a zero step
/// length when the decrement is already below tolerance.
pub fn newton_step(problem: &RelaxationProblem, z: &WeightVector) -> Result<(WeightVector, NewtonRecord)> {
    problem.validate()?;
    let dir = newton_direction(problem, &z.z)?;
    let decrement = dir.decrement();
    let (next, t) = if decrement < problem.newton_tolerance {
        (z.z.clone(), 0.0)
    } else {
        line_search(problem, &z.z, &dir, 0)?
    };
    let record = NewtonRecord {
        step: 1,
        objective: dir.value,
        decrement,
        step_length: t,
    };
    Ok((WeightVector { z: next }, record))
}

/// Newton's method from a caller-supplied interior point on `1ᵀz = p`.
pub fn newton_solve_from(problem: &RelaxationProblem, start: WeightVector) -> Result<NewtonOutcome> {
    problem.validate()?;
    let mut z = start.z;
    let mut trace = Vec::new();
    let mut steps = 0;
    loop {
        let dir = newton_direction(problem, &z)?;
        let decrement = dir.decrement();
        let converged = decrement < problem.newton_tolerance;
        if converged || steps >= problem.max_newton_steps {
            if converged {
                trace.push(NewtonRecord {
                    step: steps,
                    objective: dir.value,
                    decrement,
                    step_length: 0.0,
                });
            }
            return Ok(NewtonOutcome {
                weights: WeightVector { z },
                steps,
                converged,
                decrement,
                objective: dir.value,
                trace,
            });
        }
        let (next, t) = line_search(problem, &z, &dir, steps)?;
        z = next;
        steps += 1;
        trace.push(NewtonRecord {
            step: steps,
            objective: dir.value,
            decrement,
            step_length: t,
        });
    }
}

/// Largest `t` keeping `z + tΔz` inside `[BOUNDARY_MARGIN, 1 − BOUNDARY_MARGIN]`.
fn max_interior_step(z: &DVector<f64>, dz: &DVector<f64>) -> f64 {
    let mut t = f64::INFINITY;
    for (&zi, &di) in z.iter().zip(dz.iter()) {
        if di < 0.0 {
            t = t.min((zi - BOUNDARY_MARGIN) / -di);
        } else if di > 0.0 {
            t = t.min((1.0 - BOUNDARY_MARGIN - zi) / di);
        }
    }
    t
}

/// Runs Newton's method for each `κ` in turn, warm-starting from the
/// previous solution.
pub fn newton_solve_continuation(
    problem: &RelaxationProblem,
    kappas: &[f64],
) -> Result<Vec<NewtonOutcome>> {
    let mut start = problem.uniform_start();
    let mut out = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let stage = problem.clone().with_kappa(kappa);
        let outcome = newton_solve_from(&stage, start)?;
        start = outcome.weights.clone();
        out.push(outcome);
    }
    Ok(out)
}

/// The `p` largest weights, ties to the lower index, returned in ascending index order.
pub fn round_to_selection(z: &WeightVector, p: usize) -> Result<SensorSelection> {
    let n = z.z.len();
    if p == 0 || p > n {
        return Err(SskError::InvalidParameter(format!("p = {p} must be in 1..={n}")));
    }
    SensorSelection::new(top_p_columns(z.z.as_slice(), p), n)
}

/// Solve and round in one call.
pub fn relaxed_select(problem: &RelaxationProblem) -> Result<(SensorSelection, NewtonOutcome)> {
    let outcome = newton_solve(problem)?;
    Ok((round_to_selection(&outcome.weights, problem.p)?, outcome))
}

/// Writes `step,objective,decrement,step_length` rows.
pub fn write_newton_trace_csv<W: Write>(trace: &[NewtonRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "step,objective,decrement,step_length")?;
    for r in trace {
        writeln!(out, "{},{:e},{:e},{:e}", r.step, r.objective, r.decrement, r.step_length)?;
    }
    Ok(())
}
