//! `hbvm` — run HBVM(k, s) integrations and the experiment drivers from the
//! command line, emitting CSV (default) or JSON.
//!
//! Exit codes: 0 on success, 2 when a time step fails to converge, 1 for
//! invalid arguments or I/O problems.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use hbvm::blended::SelectionRule;
use hbvm::harness::{
    condition_sweep, convergence_table, drift_experiment, gamma_table, gauss_lobatto_compare,
    ExperimentReport, MethodSpec, SolverKind,
};
use hbvm::integrator::integrate;
use hbvm::problems::{self, ProblemSpec};
use hbvm::tableau::Family;

#[derive(Parser)]
#[command(
    name = "hbvm",
    version,
    about = "Energy-conserving HBVM(k,s) integrators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gauss,
    Lobatto,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gauss => Family::Gauss,
            FamilyArg::Lobatto => Family::Lobatto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Fixed,
    Newton,
    Blended,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Fixed => SolverKind::FixedPoint,
            SolverArg::Newton => SolverKind::SimplifiedNewton,
            SolverArg::Blended => SolverKind::Blended,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    RuleOfThumb,
    FirstS,
}

#[derive(Args)]
struct MethodArgs {
    /// Problem name: faou, fpu, biot, sitnikov, harmonic
    #[arg(long)]
    problem: String,
    /// Number of steps k of the method (k >= s)
    #[arg(long)]
    k: usize,
    /// Polynomial degree s (the order is 2s)
    #[arg(long)]
    s: usize,
    #[arg(long, value_enum, default_value = "gauss")]
    family: FamilyArg,
    #[arg(long, value_enum, default_value = "blended")]
    solver: SolverArg,
}

impl MethodArgs {
    fn resolve(&self) -> Result<(ProblemSpec, MethodSpec), String> {
        let problem = problems::by_name(&self.problem)
            .ok_or_else(|| format!("unknown problem '{}'", self.problem))?;
        let method = MethodSpec::new(self.k, self.s, self.family.into(), self.solver.into());
        Ok((problem, method))
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit a JSON document instead of CSV
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and emit it as CSV
    Integrate {
        #[command(flatten)]
        method: MethodArgs,
        /// Step size (defaults to the problem's reference value)
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step energy deviation with the drift classifier
    Drift {
        #[command(flatten)]
        method: MethodArgs,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Step-halving error/order table against an h_min/8 reference
    Convergence {
        #[command(flatten)]
        method: MethodArgs,
        /// Halving step sizes, e.g. 0.32,0.16,0.08 (defaults per problem)
        #[arg(long, value_delimiter = ',')]
        h_list: Option<Vec<f64>>,
        /// Integration interval length, divisible by every h
        #[arg(long)]
        t_final: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Max trajectory difference between Gauss and Lobatto abscissae per k
    CompareKl {
        /// Problem name: faou, fpu, biot, sitnikov, harmonic
        #[arg(long)]
        problem: String,
        #[arg(long)]
        s: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10")]
        k_list: Vec<usize>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, value_enum, default_value = "newton")]
        solver: SolverArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Optimal blended parameter and amplification factor per degree s
    GammaTable {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10")]
        s_list: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Condition number of the reduced matrix C(k,s) over k
    CondSweep {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        s_list: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        k_max: usize,
        #[arg(long, value_enum, default_value = "rule-of-thumb")]
        selection: SelectionArg,
        #[command(flatten)]
        output: OutputArgs,
    },
}

enum CliError {
    /// Bad arguments or I/O: exit 1.
    Usage(String),
    /// A step failed to converge: exit 2.
    StepFailure(String),
}

impl From<hbvm::Error> for CliError {
    fn from(e: hbvm::Error) -> Self {
        match e {
            hbvm::Error::StepFailure { .. } => CliError::StepFailure(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            // A closed pipe (e.g. `hbvm ... | head`) is not an error.
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Usage(format!("cannot write to stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn emit_report(report: &ExperimentReport, output: &OutputArgs) -> Result<(), CliError> {
    let text = if output.json {
        let mut j = report.to_json();
        j.push('\n');
        j
    } else {
        report.to_csv()
    };
    emit(&text, &output.out)
}

fn default_h_list(problem: &str) -> Option<Vec<f64>> {
    let pi = std::f64::consts::PI;
    match problem {
        "faou" => Some(vec![0.32, 0.16, 0.08, 0.04, 0.02]),
        "fpu" => Some(vec![1.6e-2, 8e-3, 4e-3, 2e-3, 1e-3]),
        "biot" => Some(vec![3.2e-2, 1.6e-2, 8e-3, 4e-3, 2e-3]),
        "harmonic" => Some(vec![pi / 4.0, pi / 8.0, pi / 16.0, pi / 32.0]),
        _ => None,
    }
}

fn default_t_final(problem: &str) -> Option<f64> {
    match problem {
        "faou" | "biot" => Some(51.2),
        "fpu" => Some(10.0),
        "harmonic" => Some(2.0 * std::f64::consts::PI),
        _ => None,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Integrate {
            method,
            h,
            steps,
            t0,
            out,
        } => {
            let (problem, spec) = method.resolve().map_err(CliError::Usage)?;
            let h = h.unwrap_or(problem.default_h);
            let (tableau, solver) = spec.build()?;
            let names = problem.system.invariant_names();
            let traj = integrate(
                &problem.system,
                &tableau,
                &solver,
                &problem.y0,
                t0,
                h,
                steps,
                &names,
            )?;
            emit(&traj.to_csv(), &out)?;
            if let Some(f) = traj.failure {
                return Err(CliError::StepFailure(format!(
                    "step {} failed at t = {}: {} (residual {:.3e})",
                    f.step, f.t, f.reason, f.residual
                )));
            }
            Ok(())
        }
        Command::Drift {
            method,
            h,
            steps,
            output,
        } => {
            let (problem, spec) = method.resolve().map_err(CliError::Usage)?;
            let h = h.unwrap_or(problem.default_h);
            let report = drift_experiment(&problem, &spec, h, steps)?;
            emit_report(&report, &output)?;
            if report.summary_value("failed") == Some(1.0) {
                return Err(CliError::StepFailure(
                    "drift run aborted on a step failure".into(),
                ));
            }
            Ok(())
        }
        Command::Convergence {
            method,
            h_list,
            t_final,
            output,
        } => {
            let (problem, spec) = method.resolve().map_err(CliError::Usage)?;
            let h_list = h_list
                .or_else(|| default_h_list(problem.name))
                .ok_or_else(|| {
                    CliError::Usage(format!("--h-list is required for '{}'", problem.name))
                })?;
            let t_final = t_final
                .or_else(|| default_t_final(problem.name))
                .ok_or_else(|| {
                    CliError::Usage(format!("--t-final is required for '{}'", problem.name))
                })?;
            let report = convergence_table(&problem, &spec, &h_list, t_final)?;
            emit_report(&report, &output)
        }
        Command::CompareKl {
            problem,
            s,
            k_list,
            h,
            steps,
            solver,
            output,
        } => {
            let problem = problems::by_name(&problem)
                .ok_or_else(|| CliError::Usage(format!("unknown problem '{problem}'")))?;
            let h = h.unwrap_or(problem.default_h);
            let report = gauss_lobatto_compare(&problem, s, &k_list, h, steps, solver.into())?;
            emit_report(&report, &output)
        }
        Command::GammaTable { s_list, output } => {
            let report = gamma_table(&s_list)?;
            emit_report(&report, &output)
        }
        Command::CondSweep {
            s_list,
            k_max,
            selection,
            output,
        } => {
            let rule = match selection {
                SelectionArg::RuleOfThumb => SelectionRule::RuleOfThumb,
                SelectionArg::FirstS => SelectionRule::FirstS,
            };
            let report = condition_sweep(&s_list, k_max, rule)?;
            emit_report(&report, &output)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::StepFailure(msg)) => {
            eprintln!("step failure: {msg}");
            ExitCode::from(2)
        }
    }
}
