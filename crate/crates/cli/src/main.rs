mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nlsylv::expr::{load_problem, load_problem_str, Overrides, ProblemSpec};
use output::{print_table, Sink};
use run::CliError;

/// Partial nonlinear eigenvalue assignment for polynomial systems.
///
/// Exit status: 0 when every verdict passes, 2 when any verdict fails,
/// 1 on input or parse errors.
#[derive(Parser)]
#[command(name = "nlsylv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the eigenpairs listed under `checks`.
    VerifyEig(FileArgs),
    /// Solve the (dual) nonlinear Sylvester equation by power series.
    SolveSylvester(FileArgs),
    /// Partial right eigenvalue assignment by state feedback.
    AssignRight(FileArgs),
    /// Partial left eigenvalue assignment by output injection.
    AssignLeft(FileArgs),
    /// Simulate the configured field (and sweep its parameter, if any).
    Simulate(FileArgs),
    /// Run a bundled reproduction.
    Reproduce {
        name: Bundled,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct FileArgs {
    /// Problem file (JSON).
    input: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Truncation degree for series solutions.
    #[arg(long)]
    degree: Option<u32>,
    /// Relative tolerance for identity checks.
    #[arg(long)]
    tol: Option<f64>,
    /// Grid points per axis for pointwise checks.
    #[arg(long)]
    grid: Option<usize>,
    /// Output directory for reports and CSVs.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Simulation horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Integration step.
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bundled {
    Motivating,
    Example1,
    #[value(name = "example1-preserve")]
    Example1Preserve,
    Observer,
}

impl Bundled {
    fn text(self) -> &'static str {
        match self {
            Bundled::Motivating => include_str!("../problems/motivating.json"),
            Bundled::Example1 => include_str!("../problems/example1.json"),
            Bundled::Example1Preserve => include_str!("../problems/example1-preserve.json"),
            Bundled::Observer => include_str!("../problems/observer.json"),
        }
    }
}

type Runner = fn(&ProblemSpec<f64>, &mut Sink) -> Result<(), CliError>;

fn load(path: &Path) -> Result<ProblemSpec<f64>, CliError> {
    let mut spec = load_problem::<f64>(path).map_err(|e| CliError::Input(e.to_string()))?;
    if spec.name.is_empty() {
        spec.name = path.file_stem().map_or("problem".into(), |s| s.to_string_lossy().into_owned());
    }
    Ok(spec)
}

fn execute(spec: &mut ProblemSpec<f64>, common: &Common, verb: &str, runner: Runner) -> Result<bool, CliError> {
    spec.apply_overrides(&Overrides {
        degree: common.degree,
        tol: common.tol,
        grid: common.grid,
        horizon: common.horizon,
        step: common.step,
    });
    let mut sink = Sink::new(&common.out, &spec.name)?;
    runner(spec, &mut sink)?;
    run::write_summary(&mut sink, spec, verb)?;
    print_table(&format!("{verb}: {}", spec.name), &sink.rows);
    let ok = sink.verdict();
    println!("verdict: {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::VerifyEig(a) => load(&a.input).and_then(|mut s| execute(&mut s, &a.common, "verify-eig", run::verify_eig)),
        Command::SolveSylvester(a) => {
            load(&a.input).and_then(|mut s| execute(&mut s, &a.common, "solve-sylvester", run::solve_sylvester))
        }
        Command::AssignRight(a) => {
            load(&a.input).and_then(|mut s| execute(&mut s, &a.common, "assign-right", run::assign_right_cmd))
        }
        Command::AssignLeft(a) => {
            load(&a.input).and_then(|mut s| execute(&mut s, &a.common, "assign-left", run::assign_left_cmd))
        }
        Command::Simulate(a) => load(&a.input).and_then(|mut s| execute(&mut s, &a.common, "simulate", run::simulate)),
        Command::Reproduce { name, common } => load_problem_str::<f64>(name.text())
            .map_err(|e| CliError::Input(format!("bundled problem: {e}")))
            .and_then(|mut s| execute(&mut s, common, "reproduce", run::run_all)),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
