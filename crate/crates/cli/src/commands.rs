//! The command implementations behind each CLI verb.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ssk_core::admm::{self, AdmmConfig, Penalty};
use ssk_core::data::{
    self, load_snapshots, make_cv_splits, pod_reduce_with, PodOptions, RandomProblemSpec, SnapshotFormat,
};
use ssk_core::{CandidateMatrix, Result, SensorSelection, SskError};

use crate::methods::{run_lambda_targets, run_method, Method, MethodOutcome, MethodParams};
use crate::report::{sibling, BenchmarkReport, OutputFormat, TrialRecord, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Random { n: usize, r: usize },
    Dataset { path: PathBuf, r: usize, center: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub params: MethodParams,
    pub p: Option<usize>,
    pub source: ProblemSource,
    pub output: PathBuf,
    pub format: OutputFormat,
    pub seed: u64,
    /// Write the per-iteration history next to the report.
    pub trace: bool,
}

fn invalid(msg: impl Into<String>) -> SskError {
    SskError::InvalidParameter(msg.into())
}

/// Checks the parameters the chosen method reads.
pub fn validate_params(method: Method, params: &MethodParams, p: Option<usize>, n: Option<usize>) -> Result<()> {
    if !(params.gamma > 0.0 && params.gamma.is_finite()) {
        return Err(invalid(format!("gamma = {} must be positive", params.gamma)));
    }
    if let Some(l) = params.lambda {
        if !method.is_lambda_parameterized() {
            return Err(invalid(format!("{method} does not take lambda")));
        }
        if !(l >= 0.0 && l.is_finite()) {
            return Err(invalid(format!("lambda = {l} must be nonnegative")));
        }
    }
    if params.kappa.is_some() && method != Method::Convex {
        return Err(invalid(format!("{method} does not take kappa")));
    }
    if let Some(k) = params.kappa {
        if !(k > 0.0 && k.is_finite()) {
            return Err(invalid(format!("kappa = {k} must be positive")));
        }
    }
    let needs_p = !(method.is_lambda_parameterized() && params.lambda.is_some());
    match (needs_p, p) {
        (true, None) => return Err(invalid(format!("{method} needs --p"))),
        (_, Some(0)) => return Err(invalid("p must be at least 1")),
        _ => {}
    }
    if let (Some(p), Some(n)) = (p, n) {
        if method == Method::Convex && p >= n {
            return Err(invalid(format!("convex relaxation needs p < n (p = {p}, n = {n})")));
        }
        if p > n {
            return Err(invalid(format!("p = {p} exceeds n = {n}")));
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let n = match &self.source {
            ProblemSource::Random { n, r } => {
                if *n == 0 || *r == 0 || r > n {
                    return Err(invalid(format!("random problem needs 0 < r <= n (n = {n}, r = {r})")));
                }
                Some(*n)
            }
            ProblemSource::Dataset { r, .. } => {
                if *r == 0 {
                    return Err(invalid("r must be at least 1"));
                }
                None
            }
        };
        validate_params(self.method, &self.params, self.p, n)
    }

    pub fn candidates(&self) -> Result<CandidateMatrix> {
        load_candidates(&self.source, self.seed)
    }
}

pub fn load_candidates(source: &ProblemSource, seed: u64) -> Result<CandidateMatrix> {
    match source {
        ProblemSource::Random { n, r } => RandomProblemSpec {
            n: *n,
            r: *r,
            seed,
            trials: 1,
        }
        .trial(0),
        ProblemSource::Dataset { path, r, center } => {
            let dataset = load_snapshots(path, SnapshotFormat::from_path(path))?;
            pod_reduce_with(&dataset, *r, PodOptions { center: *center })?.candidates()
        }
    }
}

/// What `select` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectReport {
    pub schema_version: u32,
    pub method: Method,
    pub n: usize,
    pub r: usize,
    pub p_requested: Option<usize>,
    pub selection: Vec<usize>,
    pub selected: usize,
    /// `null` when the selection is rank deficient.
    pub trace: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub lambda: Option<f64>,
    pub tuning_solves: usize,
    pub wall_time_s: f64,
}

/// Runs one method once. Writes the JSON report to `output` and the
/// selection as `<stem>.selection.csv`; `trace` adds `<stem>.trace.csv`.
/// Returns the paths written.
pub fn cmd_select(config: &RunConfig) -> Result<(SelectReport, Vec<PathBuf>)> {
    config.validate()?;
    let u = config.candidates()?;
    validate_params(config.method, &config.params, config.p, Some(u.n()))?;
    let mut params = config.params.clone();
    params.record_history = config.trace;
    let outcome = run_method(config.method, &params, &u, config.p)?;
    let report = SelectReport {
        schema_version: SCHEMA_VERSION,
        method: config.method,
        n: u.n(),
        r: u.r(),
        p_requested: config.p,
        selection: outcome.selection.sorted(),
        selected: outcome.selection.len(),
        trace: outcome.trace.is_finite().then_some(outcome.trace),
        iterations: outcome.iterations,
        converged: outcome.converged,
        lambda: outcome.lambda,
        tuning_solves: outcome.tuning_solves,
        wall_time_s: outcome.wall_time_s,
    };
    let mut written = vec![config.output.clone()];
    match config.format {
        OutputFormat::Json => {
            let mut out = BufWriter::new(File::create(&config.output)?);
            serde_json::to_writer_pretty(&mut out, &report).map_err(|e| SskError::Io(e.to_string()))?;
            writeln!(out)?;
            out.flush()?;
        }
        OutputFormat::Csv => write_select_csv(&report, File::create(&config.output)?)?,
    }
    let sel_path = sibling(&config.output, "selection.csv");
    write_selection_csv(&outcome.selection, File::create(&sel_path)?)?;
    written.push(sel_path);
    if config.trace {
        if let Some(history) = &outcome.history {
            let trace_path = sibling(&config.output, "trace.csv");
            history.write_csv(BufWriter::new(File::create(&trace_path)?))?;
            written.push(trace_path);
        }
    }
    Ok((report, written))
}

fn csv_err(e: csv::Error) -> SskError {
    SskError::Io(e.to_string())
}

/// One row per sensor: `rank,index`, in selection order.
pub fn write_selection_csv<W: Write>(selection: &SensorSelection, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "index"]).map_err(csv_err)?;
    for (k, i) in selection.indices().iter().enumerate() {
        w.write_record([k.to_string(), i.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_select_csv<W: Write>(report: &SelectReport, out: W) -> Result<()> {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method", "n", "r", "p_requested", "selected", "trace", "iterations", "converged", "lambda", "tuning_solves",
    ])
    .map_err(csv_err)?;
    w.write_record([
        report.method.to_string(),
        report.n.to_string(),
        report.r.to_string(),
        opt(report.p_requested.map(|p| p.to_string())),
        report.selected.to_string(),
        opt(report.trace.map(|t| t.to_string())),
        report.iterations.to_string(),
        report.converged.to_string(),
        opt(report.lambda.map(|l| l.to_string())),
        report.tuning_solves.to_string(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}

/// Thread cap from `SSK_THREADS`, else the machine's parallelism.
pub fn thread_count() -> usize {
    std::env::var("SSK_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Maps `f` over `0..count` on a pool capped by [`thread_count`], keeping order.
fn parallel_trials<T: Send>(count: usize, label: &str, f: impl Fn(usize) -> T + Sync) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let done = AtomicUsize::new(0);
    Ok(pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|t| {
                let out = f(t);
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                eprintln!("{label} {k}/{count} done");
                out
            })
            .collect()
    }))
}

/// Every method at every `p` on one matrix. Selections are returned
/// alongside the records for scoring.
pub fn run_trial(
    trial: usize,
    u: &CandidateMatrix,
    methods: &[Method],
    p_values: &[usize],
    params: &MethodParams,
) -> Vec<(TrialRecord, Option<SensorSelection>)> {
    let (n, r) = (u.n(), u.r());
    let mut rows = Vec::new();
    let mut push = |p: usize, method: Method, outcome: Result<MethodOutcome>| {
        let rec = TrialRecord::from_outcome(trial, n, r, p, &outcome, method);
        let sel = outcome.ok().filter(|_| rec.is_ok()).map(|o| o.selection);
        rows.push((rec, sel));
    };
    for &method in methods {
        if method.is_lambda_parameterized() {
            if let Some(lambda) = params.lambda {
                let outcome = run_method(method, params, u, None);
                let p = outcome.as_ref().map(|o| o.selection.len()).unwrap_or(0);
                let outcome = outcome.map(|mut o| {
                    o.lambda = Some(lambda);
                    o
                });
                push(p, method, outcome);
                continue;
            }
            let targets: Vec<usize> = p_values.iter().copied().filter(|&p| p <= n).collect();
            match run_lambda_targets(method, params, u, &targets) {
                Ok(outcomes) => {
                    for (&p, o) in targets.iter().zip(outcomes) {
                        push(p, method, o);
                    }
                }
                Err(e) => {
                    for &p in &targets {
                        push(p, method, Err(e.clone()));
                    }
                }
            }
            for &p in p_values.iter().filter(|&&p| p > n) {
                push(p, method, Err(invalid(format!("p = {p} exceeds n = {n}"))));
            }
        } else {
            for &p in p_values {
                let outcome = validate_params(method, params, Some(p), Some(n)).and_then(|_| run_method(method, params, u, Some(p)));
                push(p, method, outcome);
            }
        }
    }
    rows
}

fn check_methods(methods: &[Method], p_values: &[usize], params: &MethodParams) -> Result<()> {
    if methods.is_empty() {
        return Err(invalid("at least one method is required"));
    }
    if p_values.is_empty() && !(params.lambda.is_some() && methods.iter().all(|m| m.is_lambda_parameterized())) {
        return Err(invalid("at least one p value is required"));
    }
    for &m in methods {
        validate_params(m, &params_for(m, params), p_values.first().copied().or(Some(1)), None)?;
    }
    Ok(())
}

/// Per-method copies of `params` with the fields that method does not read cleared.
fn params_for(method: Method, params: &MethodParams) -> MethodParams {
    let mut p = params.clone();
    if !method.is_lambda_parameterized() {
        p.lambda = None;
    }
    if method != Method::Convex {
        p.kappa = None;
    }
    p
}

fn run_trial_all(
    trial: usize,
    u: &CandidateMatrix,
    methods: &[Method],
    p_values: &[usize],
    params: &MethodParams,
) -> Vec<(TrialRecord, Option<SensorSelection>)> {
    methods
        .iter()
        .flat_map(|&m| run_trial(trial, u, &[m], p_values, &params_for(m, params)))
        .collect()
}

/// Every method at every `p` on each random trial matrix. Trials run in
/// parallel; records come back in trial order.
pub fn cmd_benchmark_random(
    spec: &RandomProblemSpec,
    methods: &[Method],
    p_values: &[usize],
    params: &MethodParams,
) -> Result<BenchmarkReport> {
    check_methods(methods, p_values, params)?;
    if spec.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if spec.n == 0 || spec.r == 0 || spec.r > spec.n {
        return Err(invalid(format!("random problem needs 0 < r <= n (n = {}, r = {})", spec.n, spec.r)));
    }
    let per_trial = parallel_trials(spec.trials, "trial", |t| match spec.trial(t) {
        Ok(u) => run_trial_all(t, &u, methods, p_values, params)
            .into_iter()
            .map(|(rec, _)| rec)
            .collect(),
        Err(e) => failed_rows(t, spec.n, spec.r, methods, p_values, &e),
    })?;
    Ok(BenchmarkReport::new(
        "benchmark-random",
        methods.to_vec(),
        p_values.to_vec(),
        per_trial.into_iter().flatten().collect(),
    ))
}

fn failed_rows(trial: usize, n: usize, r: usize, methods: &[Method], p_values: &[usize], e: &SskError) -> Vec<TrialRecord> {
    methods
        .iter()
        .flat_map(|&m| p_values.iter().map(move |&p| TrialRecord::failed(trial, m, n, r, p, e)))
        .collect()
}

/// Cross-validated trace and reconstruction error. Fold `k` tests on the
/// `k`-th contiguous block of snapshots and builds the basis from the rest;
/// the record's `trial` is the fold index.
pub fn cmd_crossval(
    path: &Path,
    r: usize,
    methods: &[Method],
    p_values: &[usize],
    folds: usize,
    params: &MethodParams,
    center: bool,
) -> Result<BenchmarkReport> {
    let dataset = load_snapshots(path, SnapshotFormat::from_path(path))?;
    crossval_dataset(&dataset, r, methods, p_values, folds, params, center)
}

pub fn crossval_dataset(
    dataset: &data::SnapshotDataset,
    r: usize,
    methods: &[Method],
    p_values: &[usize],
    folds: usize,
    params: &MethodParams,
    center: bool,
) -> Result<BenchmarkReport> {
    if folds < 2 {
        return Err(invalid(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    check_methods(methods, p_values, params)?;
    let splits = make_cv_splits(dataset.m(), folds)?;
    let smallest_train = (0..folds).map(|k| splits.train_indices(k).len()).min().unwrap_or(0);
    if r == 0 || r > dataset.n().min(smallest_train) {
        return Err(invalid(format!(
            "r = {r} must be in 1..=min(n = {}, training snapshots = {smallest_train})",
            dataset.n()
        )));
    }
    let n = dataset.n();
    let per_fold = parallel_trials(folds, "fold", |k| -> Vec<TrialRecord> {
        let prepared = dataset
            .select_snapshots(&splits.train_indices(k))
            .and_then(|train| pod_reduce_with(&train, r, PodOptions { center }))
            .and_then(|basis| {
                let test = dataset.select_snapshots(&splits.test_indices(k))?;
                let u = basis.candidates()?;
                Ok((basis, test, u))
            });
        let (basis, test, u) = match prepared {
            Ok(x) => x,
            Err(e) => return failed_rows(k, n, r, methods, p_values, &e),
        };
        run_trial_all(k, &u, methods, p_values, params)
            .into_iter()
            .map(|(mut rec, sel)| {
                if let Some(sel) = sel {
                    match data::reconstruction_error(&basis, &sel, &test) {
                        Ok(score) => rec.reconstruction_error = Some(score.mean_relative_error),
                        Err(e) => rec.status = format!("failed: {e}"),
                    }
                }
                rec
            })
            .collect()
    })?;
    Ok(BenchmarkReport::new(
        "crossval",
        methods.to_vec(),
        p_values.to_vec(),
        per_fold.into_iter().flatten().collect(),
    ))
}

/// One `λ` of a sweep, averaged over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mean_selected: f64,
    pub sd_selected: f64,
    pub min_selected: usize,
    pub max_selected: usize,
    /// Solves that errored or, for BST, stopped unconverged. They count as 0.
    pub failures: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub method: Method,
    pub n: usize,
    pub r: usize,
    pub rows: Vec<SweepRow>,
    /// `counts[t][k]`: sensors selected on trial `t` at the `k`-th `λ`.
    pub counts: Vec<Vec<usize>>,
}

impl SweepReport {
    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Json => {
                let mut out = BufWriter::new(File::create(path)?);
                serde_json::to_writer_pretty(&mut out, self).map_err(|e| SskError::Io(e.to_string()))?;
                writeln!(out)?;
                out.flush()?;
            }
            OutputFormat::Csv => {
                let mut w = csv::Writer::from_writer(File::create(path)?);
                w.write_record([
                    "lambda",
                    "mean_selected",
                    "sd_selected",
                    "min_selected",
                    "max_selected",
                    "failures",
                    "trials",
                ])
                .map_err(csv_err)?;
                for row in &self.rows {
                    w.write_record([
                        row.lambda.to_string(),
                        row.mean_selected.to_string(),
                        row.sd_selected.to_string(),
                        row.min_selected.to_string(),
                        row.max_selected.to_string(),
                        row.failures.to_string(),
                        row.trials.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

/// Selected-sensor count against `λ` for BST or BHT, one independent solve per point.
pub fn cmd_lambda_sweep(
    spec: &RandomProblemSpec,
    method: Method,
    lambdas: &[f64],
    params: &MethodParams,
) -> Result<SweepReport> {
    let penalty = match method {
        Method::AdmmBst => Penalty::Soft { lambda: 0.0 },
        Method::AdmmBht => Penalty::Hard { lambda: 0.0 },
        _ => return Err(invalid(format!("lambda sweep needs admm-bst or admm-bht, got {method}"))),
    };
    if lambdas.is_empty() {
        return Err(invalid("lambda grid is empty"));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(invalid(format!("lambda = {l} must be nonnegative")));
    }
    if spec.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let mut swept = params_for(method, params);
    swept.lambda = None;
    validate_params(method, &swept, Some(1), None)?;
    let mut template = AdmmConfig::new(penalty).with_gamma(params.gamma);
    template.tolerance = params.tolerance;
    template.max_iterations = params.max_iterations;
    template.norm_floor = params.norm_floor;

    let per_trial = parallel_trials(spec.trials, "trial", |t| -> (Vec<usize>, Vec<bool>) {
        match spec.trial(t).and_then(|u| admm::lambda_sweep(&u, &template, lambdas)) {
            Ok(points) => points
                .iter()
                .map(|pt| {
                    let failed = match &pt.outcome {
                        Ok(r) => pt.penalty.is_convex() && !r.converged,
                        Err(_) => true,
                    };
                    (pt.selected(), failed)
                })
                .unzip(),
            Err(_) => (vec![0; lambdas.len()], vec![true; lambdas.len()]),
        }
    })?;
    let rows = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let counts: Vec<f64> = per_trial.iter().map(|(c, _)| c[k] as f64).collect();
            let summary = crate::report::Summary::of(&counts).expect("trials > 0");
            SweepRow {
                lambda,
                mean_selected: summary.mean,
                sd_selected: summary.sd,
                min_selected: per_trial.iter().map(|(c, _)| c[k]).min().unwrap_or(0),
                max_selected: per_trial.iter().map(|(c, _)| c[k]).max().unwrap_or(0),
                failures: per_trial.iter().filter(|(_, f)| f[k]).count(),
                trials: spec.trials,
            }
        })
        .collect();
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        method,
        n: spec.n,
        r: spec.r,
        rows,
        counts: per_trial.into_iter().map(|(c, _)| c).collect(),
    })
}

/// Summary of a standalone reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PodReport {
    pub schema_version: u32,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub centered: bool,
    pub singular_values: Vec<f64>,
    /// Share of the snapshot energy `‖X‖²_F` captured by the `r` modes.
    pub energy_fraction: f64,
    pub dropped_locations: usize,
}

/// Reduces a snapshot file. The `n × r` modes go to `output` as CSV
/// (`mode_0 … mode_{r-1}` header) and the summary to `<stem>.pod.json`.
pub fn cmd_pod(input: &Path, r: usize, center: bool, output: &Path) -> Result<(PodReport, Vec<PathBuf>)> {
    let raw = match SnapshotFormat::from_path(input) {
        SnapshotFormat::Csv => data::read_csv_matrix(File::open(input)?)?,
        SnapshotFormat::Binary => data::read_binary_matrix(std::io::BufReader::new(File::open(input)?))?,
    };
    let dataset = data::SnapshotDataset::from_masked(raw.clone())?;
    let basis = pod_reduce_with(&dataset, r, PodOptions { center })?;
    let mut field = dataset.data.clone();
    if let Some(mean) = &basis.mean {
        for mut col in field.column_iter_mut() {
            col -= mean;
        }
    }
    let total = field.norm_squared();
    let captured: f64 = basis.singular_values.iter().map(|s| s * s).sum();
    let report = PodReport {
        schema_version: SCHEMA_VERSION,
        n: dataset.n(),
        m: dataset.m(),
        r,
        centered: center,
        singular_values: basis.singular_values.iter().copied().collect(),
        energy_fraction: if total > 0.0 { captured / total } else { 0.0 },
        dropped_locations: raw.nrows() - dataset.n(),
    };
    {
        let mut w = csv::Writer::from_writer(File::create(output)?);
        w.write_record((0..r).map(|k| format!("mode_{k}"))).map_err(csv_err)?;
        for row in basis.modes.row_iter() {
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
        }
        w.flush()?;
    }
    let summary = sibling(output, "pod.json");
    let mut out = BufWriter::new(File::create(&summary)?);
    serde_json::to_writer_pretty(&mut out, &report).map_err(|e| SskError::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok((report, vec![output.to_path_buf(), summary]))
}
