//! Benchmark reports: per-trial rows plus aggregates derived from them.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ssk_core::{Result, SskError};

use crate::methods::{Method, MethodOutcome};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One method at one `p` on one trial matrix (or one fold).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    pub n: usize,
    pub r: usize,
    /// Requested sensor count.
    pub p: usize,
    /// Sensors actually selected.
    pub selected: Option<usize>,
    pub trace: Option<f64>,
    /// `trace / greedy trace` on the same trial and `p`.
    pub normalized_trace: Option<f64>,
    pub reconstruction_error: Option<f64>,
    pub wall_time_s: f64,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub lambda: Option<f64>,
    /// `ok`, or the reason the trial produced no usable selection.
    pub status: String,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn from_outcome(trial: usize, n: usize, r: usize, p: usize, outcome: &Result<MethodOutcome>, method: Method) -> Self {
        match outcome {
            Ok(o) => {
                let finite = o.trace.is_finite();
                TrialRecord {
                    trial,
                    method,
                    n,
                    r,
                    p,
                    selected: Some(o.selection.len()),
                    trace: finite.then_some(o.trace),
                    normalized_trace: None,
                    reconstruction_error: None,
                    wall_time_s: o.wall_time_s,
                    iterations: Some(o.iterations),
                    converged: Some(o.converged),
                    lambda: o.lambda,
                    status: if method == Method::AdmmBst && !o.converged {
                        // A stopped soft-threshold iterate has no determined support.
                        "not-converged".into()
                    } else if finite {
                        "ok".into()
                    } else {
                        "rank-deficient".into()
                    },
                }
            }
            Err(e) => TrialRecord::failed(trial, method, n, r, p, e),
        }
    }

    pub fn failed(trial: usize, method: Method, n: usize, r: usize, p: usize, err: &SskError) -> Self {
        TrialRecord {
            trial,
            method,
            n,
            r,
            p,
            selected: None,
            trace: None,
            normalized_trace: None,
            reconstruction_error: None,
            wall_time_s: 0.0,
            iterations: None,
            converged: None,
            lambda: None,
            status: format!("failed: {err}"),
        }
    }
}

/// Mean, sample standard deviation and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary {
            count,
            mean,
            sd,
            se: sd / (count as f64).sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub p: usize,
    pub completed: usize,
    pub failures: usize,
    pub trace: Option<Summary>,
    pub normalized_trace: Option<Summary>,
    pub reconstruction_error: Option<Summary>,
    pub wall_time_s: Option<Summary>,
    pub iterations: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    /// `benchmark-random` or `crossval`.
    pub kind: String,
    pub methods: Vec<Method>,
    pub p_values: Vec<usize>,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

/// Fills `normalized_trace` from the greedy record of the same trial and `p`.
pub fn normalize_against_greedy(records: &mut [TrialRecord]) {
    let reference: HashMap<(usize, usize), f64> = records
        .iter()
        .filter(|r| r.method == Method::Greedy && r.is_ok())
        .filter_map(|r| r.trace.map(|t| ((r.trial, r.p), t)))
        .collect();
    for rec in records.iter_mut() {
        rec.normalized_trace = match (rec.is_ok(), rec.trace, reference.get(&(rec.trial, rec.p))) {
            (true, Some(t), Some(&g)) if g > 0.0 => Some(t / g),
            _ => None,
        };
    }
}

/// Aggregates in `(method, p)` order, from the records alone.
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(Method, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for rec in records {
        groups.entry((rec.method, rec.p)).or_default().push(rec);
    }
    groups
        .into_iter()
        .map(|((method, p), rows)| {
            let ok: Vec<&TrialRecord> = rows.iter().copied().filter(|r| r.is_ok()).collect();
            let collect = |f: &dyn Fn(&TrialRecord) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|r| f(r)).collect()
            };
            Aggregate {
                method,
                p,
                completed: ok.len(),
                failures: rows.len() - ok.len(),
                trace: Summary::of(&collect(&|r| r.trace)),
                normalized_trace: Summary::of(&collect(&|r| r.normalized_trace)),
                reconstruction_error: Summary::of(&collect(&|r| r.reconstruction_error)),
                wall_time_s: Summary::of(&collect(&|r| Some(r.wall_time_s))),
                iterations: Summary::of(&collect(&|r| r.iterations.map(|i| i as f64))),
            }
        })
        .collect()
}

impl BenchmarkReport {
    pub fn new(kind: &str, methods: Vec<Method>, p_values: Vec<usize>, mut records: Vec<TrialRecord>) -> Self {
        normalize_against_greedy(&mut records);
        let aggregates = aggregate(&records);
        Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.into(),
            methods,
            p_values,
            records,
            aggregates,
        }
    }

    /// Recomputes normalization and aggregates from the records and compares.
    pub fn self_check(&self) -> Result<()> {
        let mut records = self.records.clone();
        normalize_against_greedy(&mut records);
        if records != self.records {
            return Err(SskError::InvalidParameter(
                "normalized ratios differ from a recomputation".into(),
            ));
        }
        if aggregate(&records) != self.aggregates {
            return Err(SskError::InvalidParameter(
                "aggregates differ from a recomputation over the records".into(),
            ));
        }
        Ok(())
    }

    pub fn aggregate_for(&self, method: Method, p: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.p == p)
    }

    /// Every requested method finished at least one trial.
    pub fn every_method_completed(&self) -> bool {
        self.methods.iter().all(|m| {
            self.aggregates
                .iter()
                .any(|a| a.method == *m && a.completed > 0)
        })
    }

    pub fn failure_count(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }

    /// JSON writes one file. CSV writes the aggregates to `path` and the
    /// per-trial rows next to it with a `.trials.csv` suffix. Returns the
    /// paths written. The self-check runs first.
    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        self.self_check()?;
        match format {
            OutputFormat::Json => {
                let mut out = BufWriter::new(File::create(path)?);
                serde_json::to_writer_pretty(&mut out, self).map_err(|e| SskError::Io(e.to_string()))?;
                writeln!(out)?;
                out.flush()?;
                Ok(vec![path.to_path_buf()])
            }
            OutputFormat::Csv => {
                let trials = sibling(path, "trials.csv");
                write_aggregates_csv(&self.aggregates, File::create(path)?)?;
                write_records_csv(&self.records, File::create(&trials)?)?;
                Ok(vec![path.to_path_buf(), trials])
            }
        }
    }
}

/// `dir/stem.suffix` for `dir/stem.ext`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> SskError {
    SskError::Io(e.to_string())
}

pub const RECORD_HEADER: [&str; 14] = [
    "trial",
    "method",
    "n",
    "r",
    "p",
    "selected",
    "trace",
    "normalized_trace",
    "reconstruction_error",
    "wall_time_s",
    "iterations",
    "converged",
    "lambda",
    "status",
];

pub fn write_records_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.method.to_string(),
            r.n.to_string(),
            r.r.to_string(),
            r.p.to_string(),
            opt(r.selected),
            opt(r.trace),
            opt(r.normalized_trace),
            opt(r.reconstruction_error),
            r.wall_time_s.to_string(),
            opt(r.iterations),
            opt(r.converged),
            opt(r.lambda),
            r.status.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub const AGGREGATE_HEADER: [&str; 15] = [
    "method",
    "p",
    "completed",
    "failures",
    "trace_mean",
    "trace_sd",
    "normalized_mean",
    "normalized_sd",
    "normalized_se",
    "reconstruction_mean",
    "reconstruction_sd",
    "reconstruction_se",
    "wall_time_mean_s",
    "wall_time_sd_s",
    "iterations_mean",
];

pub fn write_aggregates_csv<W: Write>(aggregates: &[Aggregate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER).map_err(csv_err)?;
    for a in aggregates {
        let mean = |s: &Option<Summary>| opt(s.map(|s| s.mean));
        let sd = |s: &Option<Summary>| opt(s.map(|s| s.sd));
        let se = |s: &Option<Summary>| opt(s.map(|s| s.se));
        w.write_record([
            a.method.to_string(),
            a.p.to_string(),
            a.completed.to_string(),
            a.failures.to_string(),
            mean(&a.trace),
            sd(&a.trace),
            mean(&a.normalized_trace),
            sd(&a.normalized_trace),
            se(&a.normalized_trace),
            mean(&a.reconstruction_error),
            sd(&a.reconstruction_error),
            se(&a.reconstruction_error),
            mean(&a.wall_time_s),
            sd(&a.wall_time_s),
            mean(&a.iterations),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
