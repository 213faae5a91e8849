//! Gradient projection for smooth strictly convex objectives on the ascending
//! polytope: `x <- project(x - mu * grad F(x))`, with the projection computed
//! exactly by the dual method.

use std::collections::VecDeque;
use std::time::Instant;

use crate::dual::DualConfig;
use crate::error::{Result, SolverError};
use crate::oracles::kkt_residual;
use crate::problem::{AscendingProblem, KktCertificate, LastConstraint, FEASIBILITY_TOL};
use crate::projection::{project_with, Projection};
use crate::report::{Method, SolveReport, Termination};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// `mu_k = 1 / sqrt(k)`.
    DiminishingInvSqrt,
    Fixed(f64),
    /// Backtracking along the projection arc, starting from a
    /// Barzilai-Borwein trial step.
    Armijo { shrink: f64, c1: f64 },
}

impl StepRule {
    pub fn armijo() -> Self {
        StepRule::Armijo {
            shrink: 0.5,
            c1: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GpConfig {
    pub step_rule: StepRule,
    pub max_iter: usize,
    /// Relative objective decrease over `stall_window` iterations below which
    /// the run stops.
    pub obj_tol: f64,
    /// KKT residual target (separable objectives only).
    pub kkt_tol: f64,
    pub stall_window: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            step_rule: StepRule::DiminishingInvSqrt,
            max_iter: 10_000,
            obj_tol: 1e-13,
            kkt_tol: 1e-7,
            stall_window: 20,
        }
    }
}

impl GpConfig {
    fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let step_ok = match self.step_rule {
            StepRule::DiminishingInvSqrt => true,
            StepRule::Fixed(mu) => positive(mu),
            StepRule::Armijo { shrink, c1 } => shrink > 0.0 && shrink < 1.0 && c1 > 0.0 && c1 < 1.0,
        };
        if !step_ok {
            return Err(SolverError::invalid("step_rule", format!("{:?}", self.step_rule)));
        }
        if !positive(self.obj_tol) || !positive(self.kkt_tol) || self.stall_window == 0 {
            return Err(SolverError::invalid("gp config", "tolerances must be > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub objective: f64,
    pub kkt_residual: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct GpSolution {
    pub y: Vec<f64>,
    pub objective: f64,
    /// Multipliers recovered from the last projection (separable objectives).
    pub certificate: Option<KktCertificate>,
    pub report: SolveReport,
}

fn projection_cfg() -> DualConfig {
    DualConfig {
        check_invariants: false,
        ..DualConfig::default()
    }
}

fn project_step(problem: &AscendingProblem, x: &[f64], grad: &[f64], mu: f64) -> Result<Projection> {
    let z: Vec<f64> = x.iter().zip(grad).map(|(xi, gi)| xi - mu * gi).collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::Numerical(format!("gradient step with mu = {mu} is not finite")));
    }
    project_with(&z, problem.alpha(), problem.beta(), &projection_cfg())
}

/// Projection work counts toward the inner counters only.
fn add_inner(report: &mut SolveReport, projection: &SolveReport) {
    let c = &projection.counters;
    report.counters.inner_solves += c.inner_solves;
    report.counters.predicate_evals += c.predicate_evals;
    report.counters.comparisons += c.comparisons;
    report.diagnostics.merge(&projection.diagnostics);
}

/// Projects the start point. Without a caller-supplied start, a point where
/// the objective or its gradient is not finite (a reciprocal term at zero,
/// say) is replaced by the projection of the box minimizers.
fn start_point(
    problem: &AscendingProblem,
    start: &[f64],
    user_supplied: bool,
    report: &mut SolveReport,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let mut candidates = vec![start.to_vec()];
    if !user_supplied {
        if let Some(pieces) = problem.pieces() {
            candidates.push(pieces.iter().map(|p| p.ubar()).collect());
        }
    }
    for z in &candidates {
        let proj = project_with(z, problem.alpha(), problem.beta(), &projection_cfg())?;
        add_inner(report, &proj.report);
        let value = problem.value(&proj.y);
        let grad = problem.gradient(&proj.y);
        if value.is_finite() && grad.iter().all(|g| g.is_finite()) {
            return Ok((proj.y, value, grad));
        }
    }
    Err(SolverError::invalid(
        "x0",
        "objective or gradient is not finite at the projected start point",
    ))
}

/// One iteration `project(x - mu * grad F(x))` from a feasible `x`.
pub fn gp_step(x: &[f64], problem: &AscendingProblem, mu: f64) -> Result<Vec<f64>> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(SolverError::invalid("mu", format!("step {mu} must be finite and >= 0")));
    }
    let feas = problem.check_feasibility(x, FEASIBILITY_TOL)?;
    if !feas.feasible {
        return Err(SolverError::invalid(
            "x",
            format!("start point violates constraints by {}", feas.worst_violation),
        ));
    }
    let grad = problem.gradient(x);
    Ok(project_step(problem, x, &grad, mu)?.y)
}

pub fn solve_gp(problem: &AscendingProblem, cfg: &GpConfig, x0: Option<&[f64]>) -> Result<GpSolution> {
    solve_gp_with_progress(problem, cfg, x0, |_| {})
}

pub fn solve_gp_with_progress(
    problem: &AscendingProblem,
    cfg: &GpConfig,
    x0: Option<&[f64]>,
    mut progress: impl FnMut(Progress),
) -> Result<GpSolution> {
    cfg.validate()?;
    if problem.last_constraint() == LastConstraint::Equality {
        return Err(SolverError::Unsupported(
            "gradient projection with an equality total; eliminate it first",
        ));
    }
    let started = Instant::now();
    let n = problem.n();
    let mut report = SolveReport::new(Method::Gp);
    let separable = problem.pieces().is_some();

    let start = match x0 {
        Some(x) if x.len() != n => {
            return Err(SolverError::DimensionMismatch {
                what: "x0",
                expected: n,
                found: x.len(),
            })
        }
        Some(x) => x.to_vec(),
        None => vec![0.0; n],
    };
    let (mut x, mut fx, mut grad) = start_point(problem, &start, x0.is_some(), &mut report)?;
    let mut best = (fx, x.clone(), None::<KktCertificate>);
    let mut history: VecDeque<f64> = VecDeque::with_capacity(cfg.stall_window + 1);
    history.push_back(fx);
    let mut bb_step: Option<f64> = None;
    report.termination = Termination::MaxIterations;

    for k in 1..=cfg.max_iter {
        report.counters.outer_iterations += 1;
        let (mu, proj) = match cfg.step_rule {
            StepRule::DiminishingInvSqrt => {
                let mu = 1.0 / (k as f64).sqrt();
                (mu, project_step(problem, &x, &grad, mu)?)
            }
            StepRule::Fixed(mu) => (mu, project_step(problem, &x, &grad, mu)?),
            StepRule::Armijo { shrink, c1 } => {
                let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                let mut mu = bb_step.unwrap_or(1.0 / gnorm.max(1.0));
                let mut accepted = None;
                for _ in 0..60 {
                    let proj = project_step(problem, &x, &grad, mu)?;
                    add_inner(&mut report, &proj.report);
                    let descent: f64 = grad.iter().zip(&proj.y).zip(&x).map(|((g, yn), xo)| g * (yn - xo)).sum();
                    if problem.value(&proj.y) <= fx + c1 * descent {
                        accepted = Some((mu, proj));
                        break;
                    }
                    mu *= shrink;
                }
                match accepted {
                    Some(found) => found,
                    None => {
                        report.termination = Termination::LineSearchFailed;
                        break;
                    }
                }
            }
        };
        if !matches!(cfg.step_rule, StepRule::Armijo { .. }) {
            add_inner(&mut report, &proj.report);
        }
        let x_new = proj.y;
        let feas = problem.check_feasibility(&x_new, FEASIBILITY_TOL)?;
        if !feas.feasible {
            return Err(SolverError::Numerical(format!(
                "iterate {k} left the feasible set by {}",
                feas.worst_violation
            )));
        }
        let f_new = problem.value(&x_new);
        let grad_new = problem.gradient(&x_new);

        let certificate = if separable && mu > 0.0 {
            let lambda: Vec<f64> = proj
                .certificate
                .lambda
                .iter()
                .map(|l| l / (2.0 * mu))
                .collect();
            Some(kkt_residual(problem, &x_new, &lambda)?)
        } else {
            None
        };
        let residual = certificate.as_ref().map(KktCertificate::max_residual);

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let step_len = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sy: f64 = s.iter().zip(grad_new.iter().zip(&grad)).map(|(si, (gn, go))| si * (gn - go)).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        bb_step = (sy > 0.0 && ss > 0.0).then(|| (ss / sy).clamp(1e-12, 1e12));

        x = x_new;
        fx = f_new;
        grad = grad_new;
        if fx <= best.0 {
            best = (fx, x.clone(), certificate.clone());
        }
        progress(Progress {
            iteration: k,
            objective: fx,
            kkt_residual: residual,
        });

        if residual.is_some_and(|r| r <= cfg.kkt_tol) {
            report.termination = Termination::KktTolerance;
            break;
        }
        if step_len == 0.0 {
            report.termination = Termination::Stationary;
            break;
        }
        history.push_back(fx);
        if history.len() > cfg.stall_window {
            let old = history.pop_front().expect("non-empty history");
            if (old - fx) / fx.abs().max(f64::MIN_POSITIVE) < cfg.obj_tol {
                report.termination = Termination::Stalled;
                break;
            }
        }
    }

    let (objective, y, certificate) = best;
    report.wall_time = started.elapsed();
    Ok(GpSolution {
        y,
        objective,
        certificate,
        report,
    })
}
