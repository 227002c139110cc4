use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssk_cli::commands::{
    cmd_benchmark_random, cmd_crossval, cmd_lambda_sweep, cmd_pod, cmd_select, ProblemSource, RunConfig,
};
use ssk_cli::methods::{Method, MethodParams};
use ssk_cli::report::OutputFormat;
use ssk_core::data::RandomProblemSpec;
use ssk_core::SskError;

#[derive(Parser)]
#[command(name = "ssk", version, about = "A-optimal sparse sensor selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method once and write its selection.
    Select(SelectArgs),
    /// Every method at every p over random trial matrices.
    BenchmarkRandom(BenchArgs),
    /// Selected-sensor count against lambda (admm-bst, admm-bht).
    LambdaSweep(SweepArgs),
    /// Cross-validated trace and reconstruction error on a snapshot file.
    Crossval(CrossvalArgs),
    /// POD reduction of a snapshot file.
    Pod(PodArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = ssk_core::admm::DEFAULT_GAMMA)]
    gamma: f64,
    /// Barrier weight for convex; default 1e-4 (r/p)^2.
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iterations: usize,
}

impl SolverArgs {
    fn params(&self, lambda: Option<f64>) -> MethodParams {
        MethodParams {
            gamma: self.gamma,
            kappa: self.kappa,
            lambda,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..MethodParams::default()
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    method: Method,
    #[arg(long)]
    p: Option<usize>,
    /// Fixed lambda for admm-bst/admm-bht; tuned to hit --p when absent.
    #[arg(long)]
    lambda: Option<f64>,
    /// Random problem size; ignored with --input.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    r: usize,
    /// Snapshot file (CSV or SSKSNAP1 binary) reduced to r POD modes.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    center: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the per-iteration history to <stem>.trace.csv.
    #[arg(long)]
    trace: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    method: Vec<Method>,
    #[arg(long, value_delimiter = ',')]
    p: Vec<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    r: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    method: Method,
    #[arg(long, value_delimiter = ',', required = true)]
    lambda: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    r: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct CrossvalArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 10)]
    r: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    method: Vec<Method>,
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long)]
    center: bool,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct PodArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    center: bool,
    /// Modes CSV; the summary goes to <stem>.pod.json.
    #[arg(long)]
    output: PathBuf,
}

enum Failure {
    Config(SskError),
    Solver(SskError),
    Incomplete(Vec<Method>),
}

impl From<SskError> for Failure {
    fn from(e: SskError) -> Self {
        match e {
            SskError::InvalidParameter(_) => Failure::Config(e),
            other => Failure::Solver(other),
        }
    }
}

fn incomplete(report: &ssk_cli::report::BenchmarkReport) -> Result<(), Failure> {
    let missing: Vec<Method> = report
        .methods
        .iter()
        .copied()
        .filter(|m| !report.aggregates.iter().any(|a| a.method == *m && a.completed > 0))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Incomplete(missing))
    }
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Select(a) => {
            let source = match a.input {
                Some(path) => ProblemSource::Dataset {
                    path,
                    r: a.r,
                    center: a.center,
                },
                None => ProblemSource::Random { n: a.n, r: a.r },
            };
            let config = RunConfig {
                method: a.method,
                params: a.solver.params(a.lambda),
                p: a.p,
                source,
                output: a.output,
                format: a.format.into(),
                seed: a.seed,
                trace: a.trace,
            };
            let (report, paths) = cmd_select(&config)?;
            announce(&paths);
            println!("{}: {} sensors, trace {:?}", report.method, report.selected, report.trace);
        }
        Command::BenchmarkRandom(a) => {
            let spec = RandomProblemSpec {
                n: a.n,
                r: a.r,
                seed: a.seed,
                trials: a.trials,
            };
            let report = cmd_benchmark_random(&spec, &a.method, &a.p, &a.solver.params(a.lambda))?;
            announce(&report.write(&a.output, a.format.into())?);
            if report.failure_count() > 0 {
                eprintln!("{} trial records failed", report.failure_count());
            }
            incomplete(&report)?;
        }
        Command::LambdaSweep(a) => {
            let spec = RandomProblemSpec {
                n: a.n,
                r: a.r,
                seed: a.seed,
                trials: a.trials,
            };
            let report = cmd_lambda_sweep(&spec, a.method, &a.lambda, &a.solver.params(None))?;
            report.write(&a.output, a.format.into())?;
            announce(&[a.output]);
        }
        Command::Crossval(a) => {
            let report = cmd_crossval(
                &a.input,
                a.r,
                &a.method,
                &a.p,
                a.folds,
                &a.solver.params(None),
                a.center,
            )?;
            announce(&report.write(&a.output, a.format.into())?);
            if report.failure_count() > 0 {
                eprintln!("{} fold records failed and were excluded from the averages", report.failure_count());
            }
            incomplete(&report)?;
        }
        Command::Pod(a) => {
            let (report, paths) = cmd_pod(&a.input, a.r, a.center, &a.output)?;
            announce(&paths);
            println!("{} modes capture {:.6} of the energy", report.r, report.energy_fraction);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Incomplete(methods)) => {
            let names: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
            eprintln!("error: no trial completed for {}", names.join(", "));
            ExitCode::from(1)
        }
    }
}
