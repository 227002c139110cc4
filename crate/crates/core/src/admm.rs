//! ADMM for the sparsity-promoting A-optimal decoder problem
//!
//! ```text
//! minimize  tr(XᵀX) + h(X)   subject to  A X = I,   A = Uᵀ
//! ```
//!
//! split as `Z = G X` with `G = [I; A]`. `h` is a group penalty on the rows
//! of `X` (one row per sensor candidate). The constraint block `Z₂` is the
//! indicator of `{I}`, so its proximal step is the constant `I`.
//!
//! Every `n × r` block (`X`, `Z₁`, `Y₁`) is stored transposed, as an `r × n`
//! matrix in decoder orientation `K = Xᵀ`. A sensor group is then a column,
//! which is what the operators in [`crate::prox`] act on, and the `r × r`
//! blocks are stored as `Z₂ᵀ` and `Y₂ᵀ`.
//!
//! The `X` step is the closed-form minimizer of the augmented Lagrangian
//! with the `n × n` inverse expanded through the matrix inversion lemma, so
//! only an `r × r` Cholesky factor is needed. It is refactorized only when
//! the step size changes.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Result, SskError};
use crate::model::{a_optimality, select_rows, CandidateMatrix, GainMatrix, SensorSelection};
use crate::prox::{self, ThresholdSpec};

/// Default step size.
pub const DEFAULT_GAMMA: f64 = 0.4;
/// Step size used for timing studies.
pub const TIMING_GAMMA: f64 = 0.2;
/// Column-norm floor above which a sensor counts as active when polishing.
pub const DEFAULT_NORM_FLOOR: f64 = 1e-4;

/// Sparsity-promoting term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// Group L1 penalty `λ Σ‖xᵢ‖`, handled by block soft thresholding.
    Soft { lambda: f64 },
    /// Group L0 penalty `λ ‖(‖x₁‖,…,‖xₙ‖)‖₀`, handled by block hard thresholding.
    Hard { lambda: f64 },
    /// Constraint `‖(‖x₁‖,…,‖xₙ‖)‖₀ ≤ p`, handled by keeping the `p` largest rows.
    TopP { p: usize },
}

impl Penalty {
    /// Threshold rule at the current step size.
    pub fn threshold(&self, gamma: f64) -> ThresholdSpec {
        match *self {
            Penalty::Soft { lambda } => ThresholdSpec::Soft {
                gamma_lambda: gamma * lambda,
            },
            Penalty::Hard { lambda } => ThresholdSpec::Hard {
                gamma_lambda: gamma * lambda,
            },
            Penalty::TopP { p } => ThresholdSpec::TopP { p },
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, Penalty::Soft { .. })
    }

    pub fn with_lambda(&self, lambda: f64) -> Penalty {
        match *self {
            Penalty::Soft { .. } => Penalty::Soft { lambda },
            Penalty::Hard { .. } => Penalty::Hard { lambda },
            Penalty::TopP { p } => Penalty::TopP { p },
        }
    }
}

/// Multiply `gamma` by `factor` every `interval` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDecay {
    pub factor: f64,
    pub interval: usize,
}

impl GammaDecay {
    pub const DEFAULT: GammaDecay = GammaDecay {
        factor: 0.99,
        interval: 200,
    };
}

/// Solver configuration. [`AdmmConfig::new`] fills in the defaults that fit
/// each penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub penalty: Penalty,
    pub gamma: f64,
    pub gamma_decay: Option<GammaDecay>,
    pub max_iterations: usize,
    /// Bound on both the primal and the dual residual (Frobenius norms).
    pub tolerance: f64,
    pub norm_floor: f64,
    /// Nonconvex penalties also exit when the combined residual changes by
    /// less than `stall_tolerance` (relative) across `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tolerance: f64,
    pub record_history: bool,
}

impl AdmmConfig {
    pub fn new(penalty: Penalty) -> Self {
        let gamma_decay = if penalty.is_convex() {
            None
        } else {
            Some(GammaDecay::DEFAULT)
        };
        Self {
            penalty,
            gamma: DEFAULT_GAMMA,
            gamma_decay,
            max_iterations: 10_000,
            tolerance: 1e-6,
            norm_floor: DEFAULT_NORM_FLOOR,
            stall_window: 200,
            stall_tolerance: 1e-10,
            record_history: false,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SskError::InvalidParameter(format!("gamma = {}", self.gamma)));
        }
        if let Some(d) = self.gamma_decay {
            if !(d.factor > 0.0 && d.factor <= 1.0) || d.interval == 0 {
                return Err(SskError::InvalidParameter(format!(
                    "gamma decay factor {} every {} iterations",
                    d.factor, d.interval
                )));
            }
        }
        if self.max_iterations == 0 || !(self.tolerance > 0.0) || !(self.norm_floor > 0.0) {
            return Err(SskError::InvalidParameter(
                "max_iterations, tolerance and norm_floor must be positive".into(),
            ));
        }
        self.penalty.threshold(self.gamma).validate(n)
    }
}

/// ADMM iterate. All `n × r` blocks are held transposed (`r × n`).
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    /// `Xᵀ`, the dense decoder iterate.
    pub x: DMatrix<f64>,
    /// `Z₁ᵀ`, the group-sparse split copy of `Xᵀ`.
    pub z1: DMatrix<f64>,
    /// `Z₂ᵀ`, pinned to the identity.
    pub z2: DMatrix<f64>,
    /// `Y₁ᵀ`, scaled multiplier of `X = Z₁`.
    pub y1: DMatrix<f64>,
    /// `Y₂ᵀ`, scaled multiplier of `AX = Z₂`.
    pub y2: DMatrix<f64>,
    pub gamma: f64,
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl AdmmState {
    /// All-zero state of the right shape.
    pub fn zeros(r: usize, n: usize, gamma: f64) -> Self {
        Self {
            x: DMatrix::zeros(r, n),
            z1: DMatrix::zeros(r, n),
            z2: DMatrix::zeros(r, r),
            y1: DMatrix::zeros(r, n),
            y2: DMatrix::zeros(r, r),
            gamma,
            iteration: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
        }
    }
}

/// How the iteration loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitReason {
    Converged,
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `tr(XᵀX)`
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub nonzero_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub selection: SensorSelection,
    /// Group-sparse decoder `Z₁ᵀ` before polishing.
    pub raw_gain: GainMatrix,
    pub polished: bool,
    pub iterations_used: usize,
    pub converged: bool,
    pub exit: ExitReason,
    /// A-optimality of the polished selection; infinite for a rank-deficient support.
    pub objective_trace: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub final_gamma: f64,
    /// Nonzero columns of the raw gain whose norm did not clear the floor.
    pub dropped_small_columns: usize,
    pub history: Option<Vec<IterationRecord>>,
}

/// A solver bound to one candidate matrix.
pub struct AdmmSolver<'a> {
    u: &'a CandidateMatrix,
    /// `A = Uᵀ`
    a: DMatrix<f64>,
    /// `AAᵀ = UᵀU`
    gram: DMatrix<f64>,
    config: AdmmConfig,
    factor: Option<(f64, Cholesky<f64, Dyn>)>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(u: &'a CandidateMatrix, config: AdmmConfig) -> Result<Self> {
        config.validate(u.n())?;
        let a = u.matrix().transpose();
        let gram = u.matrix().tr_mul(u.matrix());
        Ok(Self {
            u,
            a,
            gram,
            config,
            factor: None,
        })
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.config
    }

    /// Feasible start `X⁰ = Aᵀ(AAᵀ)⁻¹`, `Z⁰ = GX⁰`, `Y⁰ = 0`.
    pub fn initial_state(&self) -> Result<AdmmState> {
        let r = self.u.r();
        let n = self.u.n();
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| SskError::InvalidMatrix("candidate matrix is rank deficient".into()))?;
        // Xᵀ = (AAᵀ)⁻¹A
        let x = chol.solve(&self.a);
        let mut state = AdmmState::zeros(r, n, self.config.gamma);
        state.z1 = x.clone();
        state.x = x;
        state.z2 = DMatrix::identity(r, r);
        Ok(state)
    }

    fn inner_factor(&mut self, gamma: f64, iteration: usize) -> Result<&Cholesky<f64, Dyn>> {
        let stale = !matches!(&self.factor, Some((g, _)) if *g == gamma);
        if stale {
            let c = 1.0 / (2.0 + 1.0 / gamma);
            let r = self.gram.nrows();
            let s = DMatrix::identity(r, r) + &self.gram * (c / gamma);
            let chol = s
                .cholesky()
                .ok_or(SskError::SolverBreakdown { gamma, iteration })?;
            self.factor = Some((gamma, chol));
        }
        Ok(&self.factor.as_ref().expect("factor set above").1)
    }

    /// Closed-form `X` step, returned transposed (`r × n`):
    ///
    /// `X = {(2 + 1/γ)I + (1/γ)AᵀA}⁻¹ (1/γ){(Z₁ − Y₁) + Aᵀ(Z₂ − Y₂)}`
    pub fn x_update(&mut self, state: &AdmmState) -> Result<DMatrix<f64>> {
        Ok(self.x_update_with_constraint(state)?.0)
    }

    /// `X` step together with `(AX)ᵀ`, which falls out of the same factors:
    /// `XᵀAᵀ = c RᵀAᵀ − (c²/γ) Qᵀ AAᵀ`.
    fn x_update_with_constraint(
        &mut self,
        state: &AdmmState,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let gamma = state.gamma;
        let c = 1.0 / (2.0 + 1.0 / gamma);
        let inv_gamma = 1.0 / gamma;
        // Rᵀ = (1/γ)[(Z₁ − Y₁)ᵀ + (Z₂ − Y₂)ᵀ A]
        let e = &state.z2 - &state.y2;
        let mut rt = &state.z1 - &state.y1;
        rt.gemm(1.0, &e, &self.a, 1.0);
        rt *= inv_gamma;
        // Rᵀ M⁻¹ = c Rᵀ − (c²/γ) (RᵀAᵀ) S⁻¹ A,  S = I + (c/γ) AAᵀ
        let t = &rt * self.u.matrix();
        let q = self.inner_factor(gamma, state.iteration)?.solve(&t.transpose());
        let mut x = rt;
        x *= c;
        x.gemm_tr(-(c * c) * inv_gamma, &q, &self.a, 1.0);
        let mut ax_t = t;
        ax_t *= c;
        ax_t.gemm_tr(-(c * c) * inv_gamma, &q, &self.gram, 1.0);
        Ok((x, ax_t))
    }

    /// Proximal step: `Z₁ = prox(X + Y₁)` on sensor groups, `Z₂ = I`.
    pub fn z_update(&self, state: &AdmmState) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let mut z1 = &state.x + &state.y1;
        prox::apply_threshold(&mut z1, &self.config.penalty.threshold(state.gamma))?;
        let r = state.z2.nrows();
        Ok((z1, DMatrix::identity(r, r)))
    }

    /// Multiplier step `Y ← Y + GX − Z`.
    pub fn y_update(&self, state: &AdmmState) -> (DMatrix<f64>, DMatrix<f64>) {
        let y1 = &state.y1 + &state.x - &state.z1;
        let mut y2 = &state.y2 - &state.z2;
        // (AX)ᵀ = XᵀAᵀ, i.e. stored x times U
        y2.gemm(1.0, &state.x, self.u.matrix(), 1.0);
        (y1, y2)
    }

    /// One full x/z/y sweep, updating residuals in place.
    pub fn step(&mut self, state: &mut AdmmState) -> Result<()> {
        let (x, ax_t) = self.x_update_with_constraint(state)?;
        state.x = x;
        let (z1, z2) = self.z_update(state)?;
        let dz = (&z1 - &state.z1).norm();
        state.z1 = z1;
        state.z2 = z2;

        let r1 = (&state.x - &state.z1).norm_squared();
        let r2 = (&ax_t - &state.z2).norm_squared();
        state.y1 += &state.x;
        state.y1 -= &state.z1;
        state.y2 += ax_t;
        state.y2 -= &state.z2;

        state.primal_residual = (r1 + r2).sqrt();
        state.dual_residual = dz / state.gamma;
        state.iteration += 1;
        Ok(())
    }

    /// Iterates from [`Self::initial_state`] and polishes the result.
    pub fn solve(&mut self) -> Result<SolveReport> {
        let mut state = self.initial_state()?;
        let (exit, history) = self.run(&mut state)?;
        self.finish(state, exit, history)
    }

    /// Iterates an arbitrary starting state to termination.
    pub fn run(
        &mut self,
        state: &mut AdmmState,
    ) -> Result<(ExitReason, Option<Vec<IterationRecord>>)> {
        let cfg = self.config.clone();
        let mut history = cfg.record_history.then(Vec::new);
        let mut window_start = f64::NAN;
        let mut exit = ExitReason::MaxIterations;
        while state.iteration < cfg.max_iterations {
            self.step(state)?;
            if let Some(h) = history.as_mut() {
                h.push(IterationRecord {
                    iteration: state.iteration,
                    objective: state.x.norm_squared(),
                    primal_residual: state.primal_residual,
                    dual_residual: state.dual_residual,
                    nonzero_rows: count_nonzero_columns(&state.z1),
                });
            }
            if state.primal_residual <= cfg.tolerance && state.dual_residual <= cfg.tolerance {
                exit = ExitReason::Converged;
                break;
            }
            if !cfg.penalty.is_convex() && cfg.stall_window > 0 {
                if state.iteration % cfg.stall_window == 0 {
                    let combined = state.primal_residual + state.dual_residual;
                    if window_start.is_finite()
                        && (combined - window_start).abs()
                            <= cfg.stall_tolerance * window_start.max(f64::MIN_POSITIVE)
                    {
                        exit = ExitReason::Stalled;
                        break;
                    }
                    window_start = combined;
                }
            }
            if let Some(d) = cfg.gamma_decay {
                if state.iteration % d.interval == 0 {
                    state.gamma *= d.factor;
                }
            }
        }
        Ok((exit, history))
    }

    fn finish(
        &self,
        state: AdmmState,
        exit: ExitReason,
        history: Option<Vec<IterationRecord>>,
    ) -> Result<SolveReport> {
        let polished = polish(&state.z1, self.u, self.config.norm_floor)?;
        Ok(SolveReport {
            selection: polished.selection,
            raw_gain: GainMatrix(state.z1),
            polished: true,
            iterations_used: state.iteration,
            converged: exit == ExitReason::Converged,
            exit,
            objective_trace: polished.trace,
            primal_residual: state.primal_residual,
            dual_residual: state.dual_residual,
            final_gamma: state.gamma,
            dropped_small_columns: polished.dropped_small_columns,
            history,
        })
    }
}

fn count_nonzero_columns(m: &DMatrix<f64>) -> usize {
    m.column_iter()
        .filter(|c| c.iter().any(|v| *v != 0.0))
        .count()
}

/// Outcome of the polishing step.
#[derive(Debug, Clone, PartialEq)]
pub struct Polished {
    pub selection: SensorSelection,
    /// `tr((CᵀC)⁻¹)` of the refit; infinite when the support is rank deficient.
    pub trace: f64,
    pub dropped_small_columns: usize,
}

/// Keeps only the support of a raw decoder (columns with norm above
/// `norm_floor`) and refits by least squares. The refit decoder itself is
/// [`crate::model::embedded_decoder`]; here only its trace is reported.
pub fn polish(raw_gain: &DMatrix<f64>, u: &CandidateMatrix, norm_floor: f64) -> Result<Polished> {
    if raw_gain.iter().any(|v| !v.is_finite()) {
        return Err(SskError::InvalidMatrix("raw gain has non-finite entries".into()));
    }
    let norms = prox::column_norms(raw_gain);
    let active: Vec<usize> = (0..norms.len()).filter(|&i| norms[i] > norm_floor).collect();
    let dropped_small_columns = norms
        .iter()
        .filter(|&&v| v > 0.0 && v <= norm_floor)
        .count();
    if active.is_empty() {
        return Err(SskError::EmptySelection);
    }
    let selection = SensorSelection::new(active, u.n())?;
    let trace = a_optimality(&select_rows(u, &selection)?);
    Ok(Polished {
        selection,
        trace,
        dropped_small_columns,
    })
}

/// Runs [`AdmmSolver::solve`] once.
pub fn solve(u: &CandidateMatrix, config: AdmmConfig) -> Result<SolveReport> {
    AdmmSolver::new(u, config)?.solve()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub penalty: Penalty,
    /// Polished solve, or the error that ended it.
    pub outcome: std::result::Result<SolveReport, SskError>,
}

impl SweepPoint {
    /// Selected count. Failed solves count as zero sensors, and so do BST
    /// solves that stopped before converging: the soft-thresholding problem is
    /// convex, so only its converged support is a determined sensor set.
    pub fn selected(&self) -> usize {
        match &self.outcome {
            Ok(r) if counts_as_selection(&self.penalty, r) => r.selection.len(),
            _ => 0,
        }
    }
}

fn counts_as_selection(penalty: &Penalty, report: &SolveReport) -> bool {
    report.converged || !penalty.is_convex()
}

/// One independent solve per `λ`.
pub fn lambda_sweep(u: &CandidateMatrix, template: &AdmmConfig, lambdas: &[f64]) -> Result<Vec<SweepPoint>> {
    if template.penalty.is_convex() || matches!(template.penalty, Penalty::Hard { .. }) {
        Ok(lambdas
            .iter()
            .map(|&lambda| {
                let mut cfg = template.clone();
                cfg.penalty = template.penalty.with_lambda(lambda);
                SweepPoint {
                    lambda,
                    penalty: cfg.penalty,
                    outcome: solve(u, cfg),
                }
            })
            .collect())
    } else {
        Err(SskError::InvalidParameter(
            "lambda sweep needs a soft or hard threshold penalty".into(),
        ))
    }
}

/// Result of tuning `λ` for a target sensor count.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedSolve {
    pub lambda: f64,
    pub report: SolveReport,
    pub solves: usize,
}

/// Bisects `log λ` in `[lambda_lo, lambda_hi]` for a λ-parameterized penalty
/// until a solve selects exactly `target` sensors. Returns the closest
/// nonempty outcome seen if no bisection point hits the target. Unconverged
/// BST solves are treated like empty selections.
pub fn solve_for_count(
    u: &CandidateMatrix,
    template: &AdmmConfig,
    target: usize,
    lambda_lo: f64,
    lambda_hi: f64,
    max_solves: usize,
) -> Result<TunedSolve> {
    if matches!(template.penalty, Penalty::TopP { .. }) {
        return Err(SskError::InvalidParameter(
            "count targeting applies to soft/hard penalties only".into(),
        ));
    }
    if !(lambda_lo > 0.0 && lambda_hi > lambda_lo) {
        return Err(SskError::InvalidParameter(format!(
            "lambda bracket [{lambda_lo}, {lambda_hi}]"
        )));
    }
    let run = |lambda: f64| {
        let mut cfg = template.clone();
        cfg.penalty = template.penalty.with_lambda(lambda);
        solve(u, cfg)
    };
    let (mut lo, mut hi) = (lambda_lo.ln(), lambda_hi.ln());
    let mut best: Option<(usize, f64, SolveReport)> = None;
    let mut solves = 0;
    while solves < max_solves {
        let mid = 0.5 * (lo + hi);
        let lambda = mid.exp();
        solves += 1;
        match run(lambda) {
            Ok(report) if !counts_as_selection(&template.penalty, &report) => hi = mid,
            Ok(report) => {
                let count = report.selection.len();
                let miss = count.abs_diff(target);
                if best.as_ref().map_or(true, |(m, _, _)| miss < *m) {
                    best = Some((miss, lambda, report));
                }
                if count == target {
                    break;
                }
                if count > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Err(SskError::EmptySelection) => hi = mid,
            Err(e) => return Err(e),
        }
    }
    best.map(|(_, lambda, report)| TunedSolve {
        lambda,
        report,
        solves,
    })
    .ok_or(SskError::EmptySelection)
}

/// Count targeting over many targets on one candidate matrix. Every solve is
/// cached by `λ`, so brackets found for one target narrow the search for the
/// next; targets are cheapest when visited in decreasing order.
pub struct CountTuner<'a> {
    u: &'a CandidateMatrix,
    template: AdmmConfig,
    lambda_lo: f64,
    lambda_hi: f64,
    /// Stop bisecting once `hi / lo` falls below this ratio.
    pub min_ratio: f64,
    pub max_solves_per_target: usize,
    probes: Vec<(f64, usize, Option<SolveReport>)>,
    solves: usize,
}

impl<'a> CountTuner<'a> {
    pub fn new(u: &'a CandidateMatrix, template: AdmmConfig, lambda_lo: f64, lambda_hi: f64) -> Result<Self> {
        if matches!(template.penalty, Penalty::TopP { .. }) {
            return Err(SskError::InvalidParameter(
                "count targeting applies to soft/hard penalties only".into(),
            ));
        }
        if !(lambda_lo > 0.0 && lambda_hi > lambda_lo && lambda_hi.is_finite()) {
            return Err(SskError::InvalidParameter(format!(
                "lambda bracket [{lambda_lo}, {lambda_hi}]"
            )));
        }
        template.validate(u.n())?;
        Ok(Self {
            u,
            template,
            lambda_lo,
            lambda_hi,
            min_ratio: 1.02,
            max_solves_per_target: 12,
            probes: Vec::new(),
            solves: 0,
        })
    }

    /// Solves run so far across all targets.
    pub fn solves(&self) -> usize {
        self.solves
    }

    /// Selected count at `λ`, zero for empty or unconverged BST outcomes.
    fn probe(&mut self, lambda: f64) -> Result<usize> {
        if let Some((_, count, _)) = self.probes.iter().find(|(l, _, _)| *l == lambda) {
            return Ok(*count);
        }
        let mut cfg = self.template.clone();
        cfg.penalty = self.template.penalty.with_lambda(lambda);
        self.solves += 1;
        let (count, report) = match solve(self.u, cfg) {
            Ok(r) if counts_as_selection(&self.template.penalty, &r) => (r.selection.len(), Some(r)),
            Ok(_) | Err(SskError::EmptySelection) => (0, None),
            Err(e) => return Err(e),
        };
        self.probes.push((lambda, count, report));
        Ok(count)
    }

    /// Tightest cached bracket around `target`.
    fn bracket(&self, target: usize) -> (f64, f64) {
        let mut lo = self.lambda_lo;
        let mut hi = self.lambda_hi;
        for &(l, c, _) in &self.probes {
            if c > target && l > lo && l < hi {
                lo = l;
            }
        }
        for &(l, c, _) in &self.probes {
            if c < target && l < hi && l > lo {
                hi = l;
            }
        }
        (lo, hi)
    }

    /// Best outcome for `target`: an exact hit when one is found, otherwise
    /// the cached nonempty outcome with the closest count (smaller `λ` on ties).
    pub fn tune(&mut self, target: usize) -> Result<Option<TunedSolve>> {
        let start = self.solves;
        while !self.has_exact(target) && self.solves - start < self.max_solves_per_target {
            let (lo, hi) = self.bracket(target);
            if hi / lo < self.min_ratio {
                break;
            }
            self.probe((0.5 * (lo.ln() + hi.ln())).exp())?;
        }
        let used = self.solves - start;
        let best = self
            .probes
            .iter()
            .filter_map(|(l, c, r)| r.as_ref().map(|r| (*l, *c, r)))
            .min_by(|a, b| {
                a.1.abs_diff(target)
                    .cmp(&b.1.abs_diff(target))
                    .then(a.0.total_cmp(&b.0))
            });
        Ok(best.map(|(lambda, _, report)| TunedSolve {
            lambda,
            report: report.clone(),
            solves: used,
        }))
    }

    fn has_exact(&self, target: usize) -> bool {
        self.probes.iter().any(|(_, c, r)| *c == target && r.is_some())
    }
}

/// Writes `iteration,objective,primal_residual,dual_residual,nonzero_rows` rows.
pub fn write_history_csv<W: Write>(history: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,objective,primal_residual,dual_residual,nonzero_rows")?;
    for h in history {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{}",
            h.iteration, h.objective, h.primal_residual, h.dual_residual, h.nonzero_rows
        )?;
    }
    Ok(())
}
