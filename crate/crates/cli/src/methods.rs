//! One entry point per selection method.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use ssk_core::admm::{self, AdmmConfig, CountTuner, IterationRecord, Penalty};
use ssk_core::greedy::{greedy_select, GreedyConfig};
use ssk_core::model::selection_trace;
use ssk_core::relax::{self, NewtonRecord, RelaxationProblem};
use ssk_core::{CandidateMatrix, Result, SensorSelection, SskError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AdmmBst,
    AdmmBht,
    AdmmL0bht,
    Greedy,
    Convex,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::AdmmBst,
        Method::AdmmBht,
        Method::AdmmL0bht,
        Method::Greedy,
        Method::Convex,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::AdmmBst => "admm-bst",
            Method::AdmmBht => "admm-bht",
            Method::AdmmL0bht => "admm-l0bht",
            Method::Greedy => "greedy",
            Method::Convex => "convex",
        }
    }

    /// BST and BHT fix `λ`, not `p`.
    pub fn is_lambda_parameterized(&self) -> bool {
        matches!(self, Method::AdmmBst | Method::AdmmBht)
    }

    fn penalty(&self, lambda: f64, p: usize) -> Penalty {
        match self {
            Method::AdmmBst => Penalty::Soft { lambda },
            Method::AdmmBht => Penalty::Hard { lambda },
            _ => Penalty::TopP { p },
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = SskError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                SskError::InvalidParameter(format!(
                    "unknown method '{s}', expected one of admm-bst, admm-bht, admm-l0bht, greedy, convex"
                ))
            })
    }
}

/// Tuning knobs shared by all methods; each method reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub gamma: f64,
    /// Fixed `λ` for BST/BHT. When absent, `λ` is tuned to hit the requested `p`.
    pub lambda: Option<f64>,
    /// Barrier weight; defaults to `1e-4 (r/p)²`.
    pub kappa: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub norm_floor: f64,
    pub newton_tolerance: f64,
    pub max_newton_steps: usize,
    /// `λ` search interval for count targeting.
    pub lambda_range: (f64, f64),
    pub max_tuning_solves: usize,
    pub record_history: bool,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            gamma: admm::DEFAULT_GAMMA,
            lambda: None,
            kappa: None,
            tolerance: 1e-6,
            max_iterations: 10_000,
            norm_floor: admm::DEFAULT_NORM_FLOOR,
            newton_tolerance: 1e-4,
            max_newton_steps: 200,
            lambda_range: (1e-3, 1e3),
            max_tuning_solves: 12,
            record_history: false,
        }
    }
}

impl MethodParams {
    fn admm_config(&self, penalty: Penalty) -> AdmmConfig {
        let mut cfg = AdmmConfig::new(penalty).with_gamma(self.gamma);
        cfg.tolerance = self.tolerance;
        cfg.max_iterations = self.max_iterations;
        cfg.norm_floor = self.norm_floor;
        cfg.record_history = self.record_history;
        cfg
    }

    fn relaxation(&self, u: &CandidateMatrix, p: usize) -> Result<RelaxationProblem> {
        let mut prob = RelaxationProblem::new(u.clone(), p)?;
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k.is_finite()) {
                return Err(SskError::InvalidParameter(format!("kappa = {k} must be positive")));
            }
            prob.kappa = k;
        }
        prob.newton_tolerance = self.newton_tolerance;
        prob.max_newton_steps = self.max_newton_steps;
        Ok(prob)
    }
}

/// Per-iteration record of whichever solver ran.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverTrace {
    Admm(Vec<IterationRecord>),
    Newton(Vec<NewtonRecord>),
}

impl SolverTrace {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        match self {
            SolverTrace::Admm(h) => admm::write_history_csv(h, out),
            SolverTrace::Newton(t) => relax::write_newton_trace_csv(t, out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub selection: SensorSelection,
    /// `tr((CᵀC)⁻¹)` of the selection; infinite when rank deficient.
    pub trace: f64,
    /// ADMM iterations or Newton steps; greedy reports its `p` selection rounds.
    pub iterations: usize,
    pub converged: bool,
    pub lambda: Option<f64>,
    pub wall_time_s: f64,
    /// Extra solves spent searching for `λ`.
    pub tuning_solves: usize,
    pub history: Option<SolverTrace>,
}

/// Runs `method` once. `p` is the target count; BST/BHT with a fixed `λ`
/// ignore it.
pub fn run_method(method: Method, params: &MethodParams, u: &CandidateMatrix, p: Option<usize>) -> Result<MethodOutcome> {
    let start = Instant::now();
    let need_p = || {
        p.ok_or_else(|| SskError::InvalidParameter(format!("{method} needs a sensor count p")))
    };
    let mut outcome = match method {
        Method::Greedy => {
            let p = need_p()?;
            let selection = greedy_select(u, &GreedyConfig::new(p))?;
            finish(method, u, selection, p, true, None, None)?
        }
        Method::Convex => {
            let p = need_p()?;
            let prob = params.relaxation(u, p)?;
            let out = relax::newton_solve(&prob)?;
            let selection = relax::round_to_selection(&out.weights, p)?;
            let history = params.record_history.then(|| SolverTrace::Newton(out.trace.clone()));
            finish(method, u, selection, out.steps, out.converged, None, history)?
        }
        Method::AdmmL0bht => {
            let p = need_p()?;
            let report = admm::solve(u, params.admm_config(method.penalty(0.0, p)))?;
            from_admm(method, report, None)
        }
        Method::AdmmBst | Method::AdmmBht => match params.lambda {
            Some(lambda) => {
                let report = admm::solve(u, params.admm_config(method.penalty(lambda, 0)))?;
                from_admm(method, report, Some(lambda))
            }
            None => {
                let p = need_p()?;
                let mut all = run_lambda_targets(method, params, u, &[p])?;
                return all.pop().expect("one target requested");
            }
        },
    };
    outcome.wall_time_s = start.elapsed().as_secs_f64();
    Ok(outcome)
}

/// Tunes `λ` for every target with one shared solve cache. A target counts
/// only when some `λ` selects exactly that many sensors; otherwise its entry
/// is an error naming the closest count reached. Wall times are the solves
/// spent on each target.
pub fn run_lambda_targets(
    method: Method,
    params: &MethodParams,
    u: &CandidateMatrix,
    targets: &[usize],
) -> Result<Vec<Result<MethodOutcome>>> {
    if !method.is_lambda_parameterized() {
        return Err(SskError::InvalidParameter(format!("{method} is not tuned by lambda")));
    }
    let (lo, hi) = params.lambda_range;
    let mut tuner = CountTuner::new(u, params.admm_config(method.penalty(1.0, 0)), lo, hi)?;
    tuner.max_solves_per_target = params.max_tuning_solves;
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[b].cmp(&targets[a]));
    let mut out: Vec<Option<Result<MethodOutcome>>> = vec![None; targets.len()];
    for k in order {
        let target = targets[k];
        let start = Instant::now();
        let tuned = tuner.tune(target);
        let elapsed = start.elapsed().as_secs_f64();
        out[k] = Some(match tuned {
            Ok(Some(t)) if t.report.selection.len() == target => {
                let mut o = from_admm(method, t.report, Some(t.lambda));
                o.tuning_solves = t.solves;
                o.wall_time_s = elapsed;
                Ok(o)
            }
            Ok(Some(t)) => Err(SskError::InvalidSelection(format!(
                "no lambda selected exactly {target} sensors (closest {} at lambda {:.4e})",
                t.report.selection.len(),
                t.lambda
            ))),
            Ok(None) => Err(SskError::EmptySelection),
            Err(e) => Err(e),
        });
    }
    Ok(out.into_iter().map(|o| o.expect("every target visited")).collect())
}

fn from_admm(method: Method, report: admm::SolveReport, lambda: Option<f64>) -> MethodOutcome {
    MethodOutcome {
        method,
        trace: report.objective_trace,
        iterations: report.iterations_used,
        converged: report.converged,
        lambda,
        wall_time_s: 0.0,
        tuning_solves: 0,
        history: report.history.map(SolverTrace::Admm),
        selection: report.selection,
    }
}

fn finish(
    method: Method,
    u: &CandidateMatrix,
    selection: SensorSelection,
    iterations: usize,
    converged: bool,
    lambda: Option<f64>,
    history: Option<SolverTrace>,
) -> Result<MethodOutcome> {
    Ok(MethodOutcome {
        method,
        trace: selection_trace(u, &selection)?,
        selection,
        iterations,
        converged,
        lambda,
        wall_time_s: 0.0,
        tuning_solves: 0,
        history,
    })
}
