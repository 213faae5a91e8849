//! Problem instances: separable convex terms, the ascending constraint data
//! and feasibility checks.
//!
//! An instance minimizes `F(y)` subject to
//!
//! ```text
//!   y_1 + ... + y_k <= alpha_1 + ... + alpha_k      k = 1..n-1
//!   y_1 + ... + y_n  = (<=) alpha_1 + ... + alpha_n
//!   0 <= y_i <= beta_i
//! ```
//!
//! Upper bounds may be `f64::INFINITY`. Derivative ranges `[l_i, h_i]` are
//! extended reals, so a term like `v / z` whose derivative blows up at zero is
//! represented with `l_i = -inf`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};

/// Default absolute tolerance for feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const INVERSE_BISECTION_TOL: f64 = 1e-12;
const INVERSE_BISECTION_MAX_ITER: usize = 200;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Closed-form families of strictly convex scalar terms.
#[derive(Clone)]
pub enum PieceForm {
    /// `weight * (y - center)^2`, `weight > 0`.
    Quadratic { center: f64, weight: f64 },
    /// `1/4 (shift - z)^4 + v (shift - z)`.
    Quartic { v: f64, shift: f64 },
    /// `v / z`, `v > 0`.
    Reciprocal { v: f64 },
    /// Expected newsvendor cost under exponential demand with the given rate:
    /// `((under + over) / rate) exp(-rate y) + over y`.
    Newsvendor { under: f64, over: f64, rate: f64 },
    /// `inner(beta - z)` where `beta` is the inner term's upper bound.
    Reflected(Box<ScalarConvexPiece>),
    /// User supplied term. Without `deriv_inv` the inverse derivative is
    /// computed by bisection.
    Custom {
        eval: ScalarFn,
        deriv: ScalarFn,
        deriv_inv: Option<ScalarFn>,
    },
}

impl fmt::Debug for PieceForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PieceForm::Quadratic { center, weight } => f
                .debug_struct("Quadratic")
                .field("center", center)
                .field("weight", weight)
                .finish(),
            PieceForm::Quartic { v, shift } => f
                .debug_struct("Quartic")
                .field("v", v)
                .field("shift", shift)
                .finish(),
            PieceForm::Reciprocal { v } => f.debug_struct("Reciprocal").field("v", v).finish(),
            PieceForm::Newsvendor { under, over, rate } => f
                .debug_struct("Newsvendor")
                .field("under", under)
                .field("over", over)
                .field("rate", rate)
                .finish(),
            PieceForm::Reflected(inner) => f.debug_tuple("Reflected").field(inner).finish(),
            PieceForm::Custom { deriv_inv, .. } => f
                .debug_struct("Custom")
                .field("closed_form_inverse", &deriv_inv.is_some())
                .finish_non_exhaustive(),
        }
    }
}

/// One separable term `f_i` on `[0, upper]` together with its derivative
/// range `[l, h]` and box minimizer `ubar`.
#[derive(Clone, Debug)]
pub struct ScalarConvexPiece {
    form: PieceForm,
    upper: f64,
    l: f64,
    h: f64,
    ubar: f64,
}

impl ScalarConvexPiece {
    pub fn new(form: PieceForm, upper: f64) -> Result<Self> {
        if !(upper > 0.0) {
            return Err(SolverError::invalid("beta", format!("bound {upper} must be > 0")));
        }
        match &form {
            PieceForm::Quadratic { center, weight } => {
                if !(weight.is_finite() && *weight > 0.0) || !center.is_finite() {
                    return Err(SolverError::invalid(
                        "objective",
                        "quadratic needs a finite center and positive weight",
                    ));
                }
            }
            PieceForm::Quartic { v, shift } => {
                if !v.is_finite() || !shift.is_finite() || upper > *shift {
                    return Err(SolverError::invalid(
                        "objective",
                        "quartic needs finite parameters and upper bound <= shift",
                    ));
                }
            }
            PieceForm::Reciprocal { v } => {
                if !(v.is_finite() && *v > 0.0) || !upper.is_finite() {
                    return Err(SolverError::invalid(
                        "objective",
                        "reciprocal needs v > 0 and a finite upper bound",
                    ));
                }
            }
            PieceForm::Newsvendor { under, over, rate } => {
                if !(*under > 0.0 && *over > 0.0 && *rate > 0.0)
                    || !(under.is_finite() && over.is_finite() && rate.is_finite())
                {
                    return Err(SolverError::invalid(
                        "objective",
                        "newsvendor needs positive finite costs and rate",
                    ));
                }
            }
            PieceForm::Reflected(inner) => {
                if inner.upper != upper {
                    return Err(SolverError::invalid(
                        "objective",
                        "reflected term must share the inner term's bound",
                    ));
                }
            }
            PieceForm::Custom { .. } => {}
        }
        let mut piece = ScalarConvexPiece {
            form,
            upper,
            l: 0.0,
            h: 0.0,
            ubar: 0.0,
        };
        let (l, h) = piece.derivative_range();
        if l.is_nan() || h.is_nan() || l > h {
            return Err(SolverError::invalid(
                "objective",
                format!("derivative range [{l}, {h}] is not an interval"),
            ));
        }
        piece.l = l;
        piece.h = h;
        piece.ubar = piece.clamp_h(0.0);
        Ok(piece)
    }

    pub fn quadratic(center: f64, upper: f64) -> Result<Self> {
        Self::new(
            PieceForm::Quadratic {
                center,
                weight: 1.0,
            },
            upper,
        )
    }

    fn derivative_range(&self) -> (f64, f64) {
        let b = self.upper;
        match &self.form {
            PieceForm::Quadratic { center, weight } => {
                let h = if b.is_finite() {
                    2.0 * weight * (b - center)
                } else {
                    f64::INFINITY
                };
                (-2.0 * weight * center, h)
            }
            PieceForm::Quartic { v, shift } => {
                (-shift.powi(3) - v, -(shift - b).powi(3) - v)
            }
            PieceForm::Reciprocal { v } => (f64::NEG_INFINITY, -v / (b * b)),
            PieceForm::Newsvendor { under, over, rate } => {
                let h = if b.is_finite() {
                    -(under + over) * (-rate * b).exp() + over
                } else {
                    *over
                };
                (-under, h)
            }
            PieceForm::Reflected(inner) => (-inner.h, -inner.l),
            PieceForm::Custom { deriv, .. } => {
                let h = if b.is_finite() {
                    deriv(b)
                } else {
                    f64::INFINITY
                };
                (deriv(0.0), h)
            }
        }
    }

    pub fn form(&self) -> &PieceForm {
        &self.form
    }

    /// The bound `beta_i` of this term's domain.
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `g_i(0)`.
    pub fn l(&self) -> f64 {
        self.l
    }

    /// `g_i(beta_i)`, or its limit when the bound is infinite.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Minimizer of the term over `[0, beta_i]`.
    pub fn ubar(&self) -> f64 {
        self.ubar
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.form {
            PieceForm::Quadratic { center, weight } => weight * (y - center).powi(2),
            PieceForm::Quartic { v, shift } => {
                let t = shift - y;
                0.25 * t.powi(4) + v * t
            }
            PieceForm::Reciprocal { v } => v / y,
            PieceForm::Newsvendor { under, over, rate } => {
                (under + over) / rate * (-rate * y).exp() + over * y
            }
            PieceForm::Reflected(inner) => inner.eval(self.upper - y),
            PieceForm::Custom { eval, .. } => eval(y),
        }
    }

    /// `g_i(y) = f_i'(y)`.
    pub fn deriv(&self, y: f64) -> f64 {
        match &self.form {
            PieceForm::Quadratic { center, weight } => 2.0 * weight * (y - center),
            PieceForm::Quartic { v, shift } => -(shift - y).powi(3) - v,
            PieceForm::Reciprocal { v } => -v / (y * y),
            PieceForm::Newsvendor { under, over, rate } => {
                -(under + over) * (-rate * y).exp() + over
            }
            PieceForm::Reflected(inner) => -inner.deriv(self.upper - y),
            PieceForm::Custom { deriv, .. } => deriv(y),
        }
    }

    /// Inverse derivative, meaningful for `u` in `[l, h]`.
    pub fn deriv_inv(&self, u: f64) -> f64 {
        match &self.form {
            PieceForm::Quadratic { center, weight } => u / (2.0 * weight) + center,
            PieceForm::Quartic { v, shift } => shift - (-u - v).cbrt(),
            PieceForm::Reciprocal { v } => (-v / u).sqrt(),
            PieceForm::Newsvendor { under, over, rate } => {
                -((over - u) / (under + over)).ln() / rate
            }
            PieceForm::Reflected(inner) => self.upper - inner.deriv_inv(-u),
            PieceForm::Custom {
                deriv_inv: Some(inv),
                ..
            } => inv(u),
            PieceForm::Custom {
                deriv, deriv_inv: None, ..
            } => bisect_inverse(deriv.as_ref(), u, self.upper),
        }
    }

    /// `H_i(x) = g_i^{-1}(clamp(x, l_i, h_i))`, always in `[0, beta_i]`.
    pub fn clamp_h(&self, x: f64) -> f64 {
        if x <= self.l {
            0.0
        } else if x >= self.h {
            self.upper
        } else {
            self.deriv_inv(x).clamp(0.0, self.upper)
        }
    }

    /// `phi_i(x)`: projection of `x` onto the derivative range.
    pub fn clamp_derivative(&self, x: f64) -> f64 {
        self.l.max(x.min(self.h))
    }

    pub(crate) fn quadratic_params(&self) -> Option<(f64, f64)> {
        match self.form {
            PieceForm::Quadratic { center, weight } => Some((center, weight)),
            _ => None,
        }
    }
}

fn bisect_inverse(deriv: &(dyn Fn(f64) -> f64 + Send + Sync), u: f64, upper: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = if upper.is_finite() { upper } else { 1.0 };
    if !upper.is_finite() {
        let mut doublings = 0;
        while deriv(hi) < u && doublings < INVERSE_BISECTION_MAX_ITER {
            lo = hi;
            hi *= 2.0;
            doublings += 1;
        }
    }
    for _ in 0..INVERSE_BISECTION_MAX_ITER {
        if hi - lo <= INVERSE_BISECTION_TOL * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if deriv(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A smooth strictly convex objective on `R^n` accessed through values and
/// gradients only.
pub trait SmoothObjective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64]) -> f64;
    fn gradient(&self, y: &[f64], out: &mut [f64]);
}

#[derive(Clone)]
pub enum Objective {
    Separable(Vec<ScalarConvexPiece>),
    General(Arc<dyn SmoothObjective>),
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Separable(p) => f.debug_tuple("Separable").field(p).finish(),
            Objective::General(g) => write!(f, "General(dim = {})", g.dim()),
        }
    }
}

impl Objective {
    pub fn dim(&self) -> usize {
        match self {
            Objective::Separable(p) => p.len(),
            Objective::General(g) => g.dim(),
        }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            Objective::Separable(pieces) => {
                pieces.iter().zip(y).map(|(p, &yi)| p.eval(yi)).sum()
            }
            Objective::General(g) => g.value(y),
        }
    }

    pub fn gradient(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Objective::Separable(pieces) => {
                for ((o, p), &yi) in out.iter_mut().zip(pieces).zip(y) {
                    *o = p.deriv(yi);
                }
            }
            Objective::General(g) => g.gradient(y, out),
        }
    }

    pub fn pieces(&self) -> Option<&[ScalarConvexPiece]> {
        match self {
            Objective::Separable(p) => Some(p),
            Objective::General(_) => None,
        }
    }
}

/// Flavor of the last (total-sum) constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LastConstraint {
    #[serde(rename = "eq")]
    Equality,
    #[serde(rename = "ineq")]
    Inequality,
}

#[derive(Clone, Debug)]
pub struct AscendingProblem {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    objective: Objective,
    last_constraint: LastConstraint,
}

impl AscendingProblem {
    pub fn new(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        objective: Objective,
        last_constraint: LastConstraint,
    ) -> Result<Self> {
        let n = alpha.len();
        if n == 0 {
            return Err(SolverError::invalid("n", "problem must have at least one variable"));
        }
        if beta.len() != n {
            return Err(SolverError::DimensionMismatch {
                what: "beta",
                expected: n,
                found: beta.len(),
            });
        }
        if objective.dim() != n {
            return Err(SolverError::DimensionMismatch {
                what: "objective",
                expected: n,
                found: objective.dim(),
            });
        }
        for (i, &a) in alpha.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(SolverError::invalid(
                    format!("alpha[{i}]"),
                    format!("{a} is not a finite non-negative number"),
                ));
            }
        }
        for (i, &b) in beta.iter().enumerate() {
            if !(b > 0.0) {
                return Err(SolverError::invalid(
                    format!("beta[{i}]"),
                    format!("{b} must be > 0"),
                ));
            }
        }
        if let Objective::Separable(pieces) = &objective {
            for (i, (p, &b)) in pieces.iter().zip(&beta).enumerate() {
                if p.upper() != b {
                    return Err(SolverError::invalid(
                        format!("beta[{i}]"),
                        format!("term bound {} differs from beta {b}", p.upper()),
                    ));
                }
            }
        }
        Ok(AscendingProblem {
            alpha,
            beta,
            objective,
            last_constraint,
        })
    }

    /// Builds a separable inequality-form instance from closed-form terms.
    pub fn separable(alpha: Vec<f64>, beta: Vec<f64>, forms: Vec<PieceForm>) -> Result<Self> {
        if forms.len() != beta.len() {
            return Err(SolverError::DimensionMismatch {
                what: "objective",
                expected: beta.len(),
                found: forms.len(),
            });
        }
        let pieces = forms
            .into_iter()
            .zip(&beta)
            .map(|(f, &b)| ScalarConvexPiece::new(f, b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            alpha,
            beta,
            Objective::Separable(pieces),
            LastConstraint::Inequality,
        )
    }

    /// `sum (y_i - center_i)^2` with the given constraint data.
    pub fn quadratic(centers: &[f64], alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let forms = centers
            .iter()
            .map(|&center| PieceForm::Quadratic {
                center,
                weight: 1.0,
            })
            .collect();
        Self::separable(alpha, beta, forms)
    }

    pub fn with_last_constraint(mut self, last: LastConstraint) -> Self {
        self.last_constraint = last;
        self
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn last_constraint(&self) -> LastConstraint {
        self.last_constraint
    }

    pub fn pieces(&self) -> Option<&[ScalarConvexPiece]> {
        self.objective.pieces()
    }

    pub(crate) fn require_pieces(&self, op: &'static str) -> Result<&[ScalarConvexPiece]> {
        self.pieces().ok_or(SolverError::Unsupported(op))
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.objective.value(y)
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n()];
        self.objective.gradient(y, &mut g);
        g
    }

    pub fn check_feasibility(&self, y: &[f64], tol: f64) -> Result<Feasibility> {
        check_feasibility(self, y, tol)
    }
}

/// Primal point, multipliers and the infinity-norm KKT residuals.
///
/// `lambda[k]` multiplies the k-th prefix constraint, `eta_dual[i]` the lower
/// bound `y_i >= 0` and `delta[i]` the upper bound `y_i <= beta_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KktCertificate {
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eta_dual: Vec<f64>,
    pub delta: Vec<f64>,
    pub stationarity_residual: f64,
    pub feasibility_residual: f64,
    pub complementarity_residual: f64,
}

impl KktCertificate {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual
            .max(self.feasibility_residual)
            .max(self.complementarity_residual)
    }
}

/// Where the largest constraint violation of a point occurs. Indices are
/// zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Violation {
    Prefix(usize),
    Lower(usize),
    Upper(usize),
    Total,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub worst_violation: f64,
    pub location: Option<Violation>,
}

pub fn check_feasibility(problem: &AscendingProblem, y: &[f64], tol: f64) -> Result<Feasibility> {
    let n = problem.n();
    if y.len() != n {
        return Err(SolverError::DimensionMismatch {
            what: "y",
            expected: n,
            found: y.len(),
        });
    }
    let mut worst = 0.0;
    let mut location = None;
    let mut note = |v: f64, at: Violation| {
        if v > worst {
            worst = v;
            location = Some(at);
        }
    };
    let (mut ys, mut alphas) = (0.0, 0.0);
    for (i, (&yi, (&a, &b))) in y.iter().zip(problem.alpha.iter().zip(&problem.beta)).enumerate() {
        ys += yi;
        alphas += a;
        note(ys - alphas, Violation::Prefix(i));
        note(-yi, Violation::Lower(i));
        note(yi - b, Violation::Upper(i));
    }
    if problem.last_constraint == LastConstraint::Equality {
        note(alphas - ys, Violation::Total);
    }
    Ok(Feasibility {
        feasible: worst <= tol,
        worst_violation: worst,
        location,
    })
}

/// Box minimizers `ybar_i = H_i(0)` of each separable term.
pub fn unconstrained_minimizers(problem: &AscendingProblem) -> Result<Vec<f64>> {
    let pieces = problem.require_pieces("unconstrained_minimizers")?;
    Ok(pieces.iter().map(ScalarConvexPiece::ubar).collect())
}
