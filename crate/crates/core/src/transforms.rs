//! Reductions between problem forms.
//!
//! * Lower-bounded prefix constraints become upper-bounded ones through the
//!   reflection `z = beta - y`.
//! * An equality total is removed by substituting the last variable, with an
//!   optional penalty for its upper bound.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SolverError};
use crate::problem::{
    AscendingProblem, LastConstraint, Objective, PieceForm, ScalarConvexPiece, SmoothObjective,
    FEASIBILITY_TOL,
};

/// `minimize G(y)` subject to prefix sums of `y` >= prefix sums of `alpha`
/// (the last one `=` or `>=`) and `0 <= y <= beta`.
#[derive(Clone, Debug)]
pub struct P2Problem {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub objective: Objective,
    pub last_constraint: LastConstraint,
}

/// Maps between the original variables `y` and the reflected `z = beta - y`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectMap {
    pub beta: Vec<f64>,
}

impl ReflectMap {
    pub fn to_original(&self, z: &[f64]) -> Vec<f64> {
        self.beta.iter().zip(z).map(|(b, zi)| b - zi).collect()
    }

    pub fn to_reflected(&self, y: &[f64]) -> Vec<f64> {
        self.to_original(y)
    }
}

/// Suffix minima `gamma'_k = min_{l >= k} gamma_l`.
pub fn monotonize_gamma(gamma: &[f64]) -> Vec<f64> {
    let mut out = gamma.to_vec();
    for k in (0..out.len().saturating_sub(1)).rev() {
        out[k] = out[k].min(out[k + 1]);
    }
    out
}

struct ReflectedObjective {
    inner: Arc<dyn SmoothObjective>,
    beta: Vec<f64>,
}

impl SmoothObjective for ReflectedObjective {
    fn dim(&self) -> usize {
        self.beta.len()
    }

    fn value(&self, z: &[f64]) -> f64 {
        let y: Vec<f64> = self.beta.iter().zip(z).map(|(b, zi)| b - zi).collect();
        self.inner.value(&y)
    }

    fn gradient(&self, z: &[f64], out: &mut [f64]) {
        let y: Vec<f64> = self.beta.iter().zip(z).map(|(b, zi)| b - zi).collect();
        self.inner.gradient(&y, out);
        out.iter_mut().for_each(|g| *g = -*g);
    }
}

/// Reflects a lower-bounded instance into an upper-bounded one.
///
/// Infinite entries of `beta` are replaced by `surrogate`, which must then be
/// given; it has to be large enough not to cut off the optimum.
pub fn p2_to_p1(problem: &P2Problem, surrogate: Option<f64>) -> Result<(AscendingProblem, ReflectMap)> {
    let n = problem.alpha.len();
    if problem.beta.len() != n {
        return Err(SolverError::DimensionMismatch {
            what: "beta",
            expected: n,
            found: problem.beta.len(),
        });
    }
    if let Some(s) = surrogate {
        if !(s.is_finite() && s > 0.0) {
            return Err(SolverError::invalid("surrogate", format!("{s} must be finite and > 0")));
        }
    }
    let beta = problem
        .beta
        .iter()
        .enumerate()
        .map(|(i, &b)| match (b.is_finite(), surrogate) {
            (true, _) => Ok(b),
            (false, Some(s)) => Ok(s),
            (false, None) => Err(SolverError::invalid(
                format!("beta[{i}]"),
                "infinite bound needs a finite surrogate",
            )),
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut gamma = Vec::with_capacity(n);
    let mut acc = 0.0;
    for (b, a) in beta.iter().zip(&problem.alpha) {
        acc += b - a;
        gamma.push(acc);
    }
    let gamma = monotonize_gamma(&gamma);
    if gamma.first().is_some_and(|&g| g < 0.0) {
        return Err(SolverError::Infeasible(format!(
            "reflected right-hand side {} is negative",
            gamma[0]
        )));
    }
    let alpha: Vec<f64> = gamma
        .iter()
        .enumerate()
        .map(|(k, g)| if k == 0 { *g } else { (g - gamma[k - 1]).max(0.0) })
        .collect();

    let objective = match &problem.objective {
        Objective::Separable(pieces) => {
            if pieces.len() != n {
                return Err(SolverError::DimensionMismatch {
                    what: "objective",
                    expected: n,
                    found: pieces.len(),
                });
            }
            let reflected = pieces
                .iter()
                .zip(&beta)
                .map(|(p, &b)| {
                    let inner = if p.upper() == b {
                        p.clone()
                    } else {
                        ScalarConvexPiece::new(p.form().clone(), b)?
                    };
                    ScalarConvexPiece::new(PieceForm::Reflected(Box::new(inner)), b)
                })
                .collect::<Result<Vec<_>>>()?;
            Objective::Separable(reflected)
        }
        Objective::General(g) => Objective::General(Arc::new(ReflectedObjective {
            inner: Arc::clone(g),
            beta: beta.clone(),
        })),
    };
    let reduced = AscendingProblem::new(alpha, beta.clone(), objective, problem.last_constraint)?;
    Ok((reduced, ReflectMap { beta }))
}

/// Options for [`eliminate_equality`].
#[derive(Clone, Debug, PartialEq)]
pub struct EliminationOptions {
    /// Penalty weight `M` on `(y_n - beta_n)^+`; estimated from sampled
    /// gradients when `None`.
    pub penalty_weight: Option<f64>,
    /// Width of the quadratic smoothing of the hinge at `beta_n`.
    pub hinge_width: f64,
    /// Seed for the gradient sampling behind the default `M`.
    pub seed: u64,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        EliminationOptions {
            penalty_weight: None,
            hinge_width: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Hinge {
    weight: f64,
    bound: f64,
    width: f64,
}

impl Hinge {
    fn value(&self, t: f64) -> f64 {
        let e = t - self.bound;
        self.weight
            * if e <= 0.0 {
                0.0
            } else if e < self.width {
                e * e / (2.0 * self.width)
            } else {
                e - self.width / 2.0
            }
    }

    fn slope(&self, t: f64) -> f64 {
        self.weight * ((t - self.bound) / self.width).clamp(0.0, 1.0)
    }
}

struct EliminatedObjective {
    full: Objective,
    total: f64,
    penalty: Option<Hinge>,
}

impl EliminatedObjective {
    fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        y.push(self.total - x.iter().sum::<f64>());
        y
    }
}

impl SmoothObjective for EliminatedObjective {
    fn dim(&self) -> usize {
        self.full.dim() - 1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let y = self.lift(x);
        let last = y[y.len() - 1];
        self.full.value(&y) + self.penalty.map_or(0.0, |h| h.value(last))
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let y = self.lift(x);
        let mut g = vec![0.0; y.len()];
        self.full.gradient(&y, &mut g);
        let last = y[y.len() - 1];
        let dn = g[y.len() - 1] + self.penalty.map_or(0.0, |h| h.slope(last));
        for (o, gi) in out.iter_mut().zip(&g) {
            *o = gi - dn;
        }
    }
}

/// An equality-form instance rewritten over its first `n - 1` variables.
#[derive(Clone, Debug)]
pub struct Eliminated {
    pub problem: AscendingProblem,
    pub total: f64,
    /// Penalty weight actually used, if `beta_n` is finite.
    pub penalty_weight: Option<f64>,
}

impl Eliminated {
    /// Appends `y_n = total - sum x`.
    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        y.push(self.total - x.iter().sum::<f64>());
        y
    }
}

/// Largest total reachable under the prefix and box constraints.
fn greedy_total(alpha: &[f64], beta: &[f64]) -> f64 {
    let (mut cap, mut sum) = (0.0, 0.0);
    for (a, b) in alpha.iter().zip(beta) {
        cap += a;
        sum += b.min(cap - sum).max(0.0);
    }
    sum
}

fn sampled_gradient_bound(problem: &AscendingProblem, total: f64, seed: u64) -> f64 {
    let n = problem.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi: Vec<f64> = problem.beta().iter().map(|b| b.min(total)).collect();
    let mut g = vec![0.0; n];
    let mut worst = 0.0f64;
    for s in 0..64 {
        let y: Vec<f64> = match s {
            0 => vec![0.0; n],
            1 => hi.clone(),
            _ => hi.iter().map(|h| h * rng.gen::<f64>()).collect(),
        };
        problem.objective().gradient(&y, &mut g);
        worst = g.iter().filter(|v| v.is_finite()).fold(worst, |m, v| m.max(v.abs()));
    }
    worst
}

/// Substitutes `y_n = sum alpha - sum_{i<n} y_i`.
///
/// The reduced instance keeps the first `n - 1` prefix constraints and boxes
/// with an inequality total. If `beta_n` is finite, `M (y_n - beta_n)^+` is
/// added with a quadratically smoothed hinge.
pub fn eliminate_equality(problem: &AscendingProblem, opts: &EliminationOptions) -> Result<Eliminated> {
    let n = problem.n();
    if problem.last_constraint() != LastConstraint::Equality {
        return Err(SolverError::invalid("last_constraint", "elimination needs an equality total"));
    }
    if n < 2 {
        return Err(SolverError::invalid("n", "elimination needs at least two variables"));
    }
    if !(opts.hinge_width.is_finite() && opts.hinge_width > 0.0) {
        return Err(SolverError::invalid("hinge_width", "must be finite and > 0"));
    }
    let total: f64 = problem.alpha().iter().sum();
    let reachable = greedy_total(problem.alpha(), problem.beta());
    if reachable < total - FEASIBILITY_TOL * (1.0 + total) {
        return Err(SolverError::Infeasible(format!(
            "total {total} exceeds the largest reachable sum {reachable}"
        )));
    }
    let beta_n = problem.beta()[n - 1];
    let penalty_weight = if beta_n.is_finite() {
        let m = match opts.penalty_weight {
            Some(m) if m.is_finite() && m > 0.0 => m,
            Some(m) => return Err(SolverError::invalid("penalty_weight", format!("{m} must be > 0"))),
            None => 1.0 + sampled_gradient_bound(problem, total, opts.seed),
        };
        Some(m)
    } else {
        None
    };
    let objective = EliminatedObjective {
        full: problem.objective().clone(),
        total,
        penalty: penalty_weight.map(|weight| Hinge {
            weight,
            bound: beta_n,
            width: opts.hinge_width,
        }),
    };
    let reduced = AscendingProblem::new(
        problem.alpha()[..n - 1].to_vec(),
        problem.beta()[..n - 1].to_vec(),
        Objective::General(Arc::new(objective)),
        LastConstraint::Inequality,
    )?;
    Ok(Eliminated {
        problem: reduced,
        total,
        penalty_weight,
    })
}

/// Replaces an equality total with `<=`. Valid when the objective is
/// decreasing in every coordinate, so the total binds at the optimum anyway.
pub fn relax_equality(problem: &AscendingProblem) -> AscendingProblem {
    problem.clone().with_last_constraint(LastConstraint::Inequality)
}
