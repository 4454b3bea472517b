mod problem;
mod report;
mod tasks;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qsdp::estimation::EstimationOptions;
use serde::Serialize;

use crate::report::Report;
use crate::tasks::RunError;

/// Consistency, closeness and marginal problems for quantum states,
/// solved as semidefinite programs.
#[derive(Debug, Parser)]
#[command(name = "qsdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file, or every `.json` file in a directory.
    ///
    /// Exit status: 0 feasible or solved, 2 certified infeasible, 1 input
    /// error, 3 numerical failure or undecided.
    Run(RunArgs),
    /// Check a problem file against the schema without solving it.
    Validate {
        path: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Problem file.
    #[arg(required_unless_present = "batch", conflicts_with = "batch")]
    path: Option<PathBuf>,

    /// Solve every `.json` file in this directory concurrently.
    #[arg(long, value_name = "DIR")]
    batch: Option<PathBuf>,

    /// Emit JSON instead of a prose table.
    #[arg(long)]
    json: bool,

    /// Solver duality-gap tolerance; feasibility residuals use a tenth of it.
    #[arg(long, value_name = "FLOAT")]
    tol: Option<f64>,

    /// Solver iteration cap.
    #[arg(long, value_name = "INT")]
    max_iter: Option<usize>,

    /// Re-verify every emitted witness and certificate by arithmetic only.
    #[arg(long)]
    recheck: bool,

    /// Recorded in the report. The solver itself is deterministic.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
}

impl RunArgs {
    fn options(&self) -> Result<EstimationOptions, RunError> {
        let mut opts = EstimationOptions::default();
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(RunError::Invalid(format!("--tol {tol} must be positive")));
            }
            opts.solver.gap_tol = tol;
            opts.solver.feas_tol = tol / 10.0;
        }
        if let Some(n) = self.max_iter {
            if n == 0 {
                return Err(RunError::Invalid("--max-iter must be positive".into()));
            }
            opts.solver.max_iter = n;
        }
        Ok(opts)
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum JsonOut<'a> {
    Report(&'a Report),
    Failure {
        source: &'a str,
        error: String,
        exit_code: i32,
    },
}

/// A finished run of one file: a report, or an error with its exit code.
enum Finished {
    Report(Box<Report>),
    Failed { source: String, error: RunError },
}

impl Finished {
    fn exit_code(&self) -> i32 {
        match self {
            Finished::Report(r) => r.exit_code(),
            Finished::Failed { error, .. } => error.exit_code(),
        }
    }

    fn to_json(&self) -> JsonOut<'_> {
        match self {
            Finished::Report(r) => JsonOut::Report(r),
            Finished::Failed { source, error } => JsonOut::Failure {
                source,
                error: error.to_string(),
                exit_code: error.exit_code(),
            },
        }
    }

    fn to_prose(&self) -> String {
        match self {
            Finished::Report(r) => r.to_prose(),
            Finished::Failed { source, error } => format!("{source}: {error}\n"),
        }
    }
}

/// Writes to standard output; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn pretty(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

fn solve_file(path: &Path, args: &RunArgs, opts: &EstimationOptions) -> Finished {
    let source = path.display().to_string();
    let start = Instant::now();
    let result = fs::read_to_string(path)
        .map_err(|e| RunError::Invalid(format!("cannot read {source}: {e}")))
        .and_then(|text| problem::parse(&text).map_err(|e| RunError::Invalid(e.to_string())))
        .and_then(|p| tasks::run(&p, opts).map(|f| (p, f)));
    match result {
        Ok((p, findings)) => Finished::Report(Box::new(findings.into_report(
            &source,
            p.name.as_str(),
            args.seed,
            start.elapsed().as_secs_f64(),
            args.recheck,
        ))),
        Err(error) => Finished::Failed { source, error },
    }
}

fn batch_files(dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| RunError::Invalid(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn run(args: RunArgs) -> i32 {
    let opts = match args.options() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let Some(dir) = &args.batch else {
        let finished = solve_file(args.path.as_deref().expect("clap requires a path"), &args, &opts);
        match (&finished, args.json) {
            (Finished::Failed { .. }, _) => eprint!("{}", finished.to_prose()),
            (_, true) => emit(&format!("{}\n", pretty(&finished.to_json()))),
            (_, false) => emit(&finished.to_prose()),
        }
        return finished.exit_code();
    };
    let files = match batch_files(dir) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let results: Vec<Finished> = std::thread::scope(|s| {
        let handles: Vec<_> = files
            .iter()
            .map(|f| s.spawn(|| solve_file(f, &args, &opts)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("solver thread panicked"))
            .collect()
    });
    if args.json {
        let all: Vec<JsonOut> = results.iter().map(Finished::to_json).collect();
        emit(&format!("{}\n", pretty(&all)));
    } else {
        for r in &results {
            emit(&format!("{}\n", r.to_prose()));
        }
    }
    results.iter().map(Finished::exit_code).max().unwrap_or(0)
}

fn validate(path: &Path) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return 1;
        }
    };
    match problem::parse(&text) {
        Ok(p) => {
            emit(&format!("ok: {}\n", p.summary()));
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { path } => validate(&path),
    };
    ExitCode::from(code as u8)
}
