//! `ascent`: solve problem files and run seeded benchmark sweeps.

mod bench;
mod solve;

use std::path::PathBuf;
use std::process::ExitCode;

use ascent_core::{ProblemKind, SolverError};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "ascent", version, about = "Convex minimization under ascending constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dual,
    Gp,
    Ps,
}

impl MethodArg {
    pub fn name(self) -> &'static str {
        match self {
            MethodArg::Dual => "dual",
            MethodArg::Gp => "gp",
            MethodArg::Ps => "ps",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    /// mu_k = 1 / sqrt(k)
    InvSqrt,
    /// backtracking from a Barzilai-Borwein step
    Armijo,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a JSON problem file and write a JSON report
    Solve(SolveArgs),
    /// Run a seeded sweep and print CSV rows
    Bench(BenchArgs),
    /// Write a seeded testbed instance as a problem file
    Generate(GenerateArgs),
}

#[derive(clap::Args)]
pub struct SolveArgs {
    /// Problem file
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, value_enum, default_value = "dual")]
    pub method: MethodArg,
    /// Equation tolerance for the dual method, KKT target for gradient projection
    #[arg(long, default_value_t = 1.5e-8)]
    pub tol: f64,
    /// Seed for randomized choices (penalty weight estimation)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "inv-sqrt")]
    pub gp_step: StepArg,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Print gradient projection progress to stderr
    #[arg(long)]
    pub verbose: bool,
}

#[derive(clap::Args)]
pub struct BenchArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: ProblemKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 30)]
    pub instances: u64,
    /// Seed of the first instance; instance i uses seed + i
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "dual,gp,ps")]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 1.5e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "inv-sqrt")]
    pub gp_step: StepArg,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// CSV path; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: ProblemKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<ProblemKind, String> {
    s.parse().map_err(|e: SolverError| e.to_string())
}

/// Error type of the subcommands, carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn other(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let code = match e {
            SolverError::Infeasible(_) => 2,
            SolverError::Numerical(_) => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

pub fn write_output(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::other(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let problem = ascent_core::InstanceSpec::new(args.kind, args.n, args.seed).generate()?;
    let mut text = ascent_core::to_problem_json(&problem)?;
    text.push('\n');
    write_output(args.out.as_ref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => solve::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Generate(args) => generate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
