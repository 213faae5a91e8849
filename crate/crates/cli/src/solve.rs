use ascent_core::{
    eliminate_equality, parse_problem_file, ps_solve, run_dual, solve_gp, solve_gp_with_progress,
    AscendingProblem, DualConfig, EliminationOptions, GpConfig, GpSolution, LastConstraint,
    ReportFile, StepRule,
};

use crate::{write_output, Failure, MethodArg, SolveArgs, StepArg};

pub fn gp_config(step: StepArg, tol: f64, max_iter: usize) -> GpConfig {
    GpConfig {
        step_rule: match step {
            StepArg::InvSqrt => StepRule::DiminishingInvSqrt,
            StepArg::Armijo => StepRule::armijo(),
        },
        kkt_tol: tol,
        max_iter,
        ..GpConfig::default()
    }
}

fn run_gp(problem: &AscendingProblem, cfg: &GpConfig, verbose: bool) -> Result<GpSolution, Failure> {
    let sol = if verbose {
        solve_gp_with_progress(problem, cfg, None, |p| {
            let kkt = p.kkt_residual.map_or("-".to_string(), |r| format!("{r:.3e}"));
            eprintln!("iter {:>6}  f = {:.12e}  kkt = {kkt}", p.iteration, p.objective);
        })?
    } else {
        solve_gp(problem, cfg, None)?
    };
    Ok(sol)
}

/// Solver settings shared by `solve` and `bench`.
pub struct Settings {
    pub tol: f64,
    pub seed: u64,
    pub gp: GpConfig,
    pub verbose: bool,
}

impl Settings {
    pub fn new(tol: f64, seed: u64, step: StepArg, max_iter: usize) -> Result<Self, Failure> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Failure::other(format!("--tol must be positive, got {tol}")));
        }
        Ok(Settings {
            tol,
            seed,
            gp: gp_config(step, tol, max_iter),
            verbose: false,
        })
    }
}

pub fn solve(
    problem: &AscendingProblem,
    method: MethodArg,
    settings: &Settings,
) -> Result<ReportFile, Failure> {
    if problem.last_constraint() == LastConstraint::Equality {
        if method != MethodArg::Gp {
            eprintln!(
                "note: equality total is handled by elimination and gradient projection, not `{}`",
                method.name()
            );
        }
        let opts = EliminationOptions {
            seed: settings.seed,
            ..EliminationOptions::default()
        };
        let e = eliminate_equality(problem, &opts)?;
        let sol = run_gp(&e.problem, &settings.gp, settings.verbose)?;
        let y = e.reconstruct(&sol.y);
        let objective = problem.value(&y);
        return Ok(ReportFile::new(y, objective, None, &sol.report));
    }
    let report = match method {
        MethodArg::Dual => {
            let cfg = DualConfig {
                eq_tol: settings.tol,
                ..DualConfig::default()
            };
            let sol = run_dual(problem, &cfg)?;
            let c = &sol.certificate;
            ReportFile::new(c.y.clone(), problem.value(&c.y), Some(c), &sol.report)
        }
        MethodArg::Ps => {
            let sol = ps_solve(problem)?;
            let objective = problem.value(&sol.y);
            ReportFile::new(sol.y, objective, Some(&sol.certificate), &sol.report)
        }
        MethodArg::Gp => {
            let sol = run_gp(problem, &settings.gp, settings.verbose)?;
            ReportFile::new(sol.y, sol.objective, sol.certificate.as_ref(), &sol.report)
        }
    };
    Ok(report)
}

pub fn run(args: &SolveArgs) -> Result<(), Failure> {
    let problem = parse_problem_file(&args.problem).map_err(|e| Failure::other(e.to_string()))?;
    let mut settings = Settings::new(args.tol, args.seed, args.gp_step, args.max_iter)?;
    settings.verbose = args.verbose;
    let report = solve(&problem, args.method, &settings)?;
    let mut text = report.to_json();
    text.push('\n');
    write_output(args.out.as_ref(), &text)
}
