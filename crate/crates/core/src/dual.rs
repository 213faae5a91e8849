//! Finite dual method for separable objectives under ascending constraints.
//!
//! The method works on the prefix surplus `d_k = sum_{i<=k} (ybar_i - alpha_i)`
//! of the box minimizers. Only the successive record indices `w_1 < ... < w_L`
//! of `d` can carry a positive multiplier, so the solver walks those blocks
//! from the back, assigning one multiplier per outer iteration:
//!
//! * Case 1: the block `(w_{j-1}, w_j]` still has a non-negative surplus under
//!   the multipliers already fixed behind it. Solve one scalar equation for
//!   `lambda_{w_j}` that makes the block tight.
//! * Case 2: the block is short. Merge it with later blocks up to the first
//!   `w_r` whose merged surplus is non-negative, re-solve the multiplier at
//!   `w_r` and zero the ones in between.
//!
//! The primal point is then `y_i = H_i(-sum_{k>=i} lambda_k)`.
//!
//! Block surpluses are evaluated as `sum (H_s(-shift) - ybar_s) + (d_end -
//! d_before)`. At zero shift the first sum vanishes exactly, so the record
//! structure of `d` (which was built with the same floating-point values)
//! carries over to the case tests without rounding noise.

use std::ops::RangeInclusive;
use std::time::Instant;

use crate::error::{Result, SolverError};
use crate::oracles::kkt_residual_pieces;
use crate::problem::{AscendingProblem, KktCertificate, LastConstraint, ScalarConvexPiece};
use crate::projection::{rho_root, RhoFunction, RhoTerm};
use crate::report::{Counters, Diagnostics, Method, SolveReport, Termination};

/// Default precision for scalar equations.
pub const EQUATION_TOL: f64 = 1.5e-8;

const BRACKET_DOUBLINGS: usize = 200;
const BISECTION_MAX_ITER: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct DualConfig {
    /// Residual an equation solve must reach; worse solves are counted in
    /// [`Diagnostics::loose_equations`]. Bisection itself runs to floating
    /// point resolution.
    pub eq_tol: f64,
    /// Slack for the `>= 0` comparisons in breakpoint and case tests.
    pub degenerate_tol: f64,
    /// Verify the block invariants after every outer iteration.
    pub check_invariants: bool,
    /// Relative tolerance used by the invariant checks.
    pub invariant_tol: f64,
}

impl Default for DualConfig {
    fn default() -> Self {
        DualConfig {
            eq_tol: EQUATION_TOL,
            degenerate_tol: 0.0,
            check_invariants: cfg!(debug_assertions),
            invariant_tol: 1e-8,
        }
    }
}

/// Prefix surpluses `d` and the record indices `w` (zero-based).
#[derive(Clone, Debug, PartialEq)]
pub struct BreakpointSet {
    pub d: Vec<f64>,
    pub w: Vec<usize>,
}

impl BreakpointSet {
    /// Number of breakpoints `L`.
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// First index of block `j` (zero-based block number).
    pub fn block_start(&self, j: usize) -> usize {
        if j == 0 {
            0
        } else {
            self.w[j - 1] + 1
        }
    }

    /// `d` just before index `start`, with `d_0 = 0`.
    fn d_before(&self, start: usize) -> f64 {
        if start == 0 {
            0.0
        } else {
            self.d[start - 1]
        }
    }
}

pub fn compute_breakpoints(ybar: &[f64], alpha: &[f64]) -> Result<BreakpointSet> {
    compute_breakpoints_with(ybar, alpha, 0.0)
}

pub fn compute_breakpoints_with(ybar: &[f64], alpha: &[f64], tau: f64) -> Result<BreakpointSet> {
    if ybar.len() != alpha.len() {
        return Err(SolverError::DimensionMismatch {
            what: "alpha",
            expected: ybar.len(),
            found: alpha.len(),
        });
    }
    let mut d = Vec::with_capacity(ybar.len());
    let mut acc = 0.0;
    for (&yb, &a) in ybar.iter().zip(alpha) {
        acc += yb - a;
        d.push(acc);
    }
    let mut w = Vec::new();
    let mut level = 0.0;
    for (k, &dk) in d.iter().enumerate() {
        if dk >= level - tau {
            w.push(k);
            level = dk;
        }
    }
    Ok(BreakpointSet { d, w })
}

/// Multipliers on the breakpoints while the outer loop runs. Entries at
/// positions `>= j` are final for the current pass, the rest are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    pub lambda_w: Vec<f64>,
    pub j: usize,
}

impl DualState {
    /// `shifts[r] = sum_{t > r} lambda_w[t]`.
    fn shifts(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.lambda_w.len()];
        let mut acc = 0.0;
        for r in (0..self.lambda_w.len()).rev() {
            out[r] = acc;
            acc += self.lambda_w[r];
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct DualSolution {
    pub certificate: KktCertificate,
    pub report: SolveReport,
}

struct Workspace<'a> {
    pieces: &'a [ScalarConvexPiece],
    ybar: Vec<f64>,
    breaks: BreakpointSet,
    cfg: &'a DualConfig,
    all_quadratic: bool,
    counters: Counters,
    diag: Diagnostics,
}

impl<'a> Workspace<'a> {
    fn new(pieces: &'a [ScalarConvexPiece], alpha: &[f64], cfg: &'a DualConfig) -> Result<Self> {
        let ybar: Vec<f64> = pieces.iter().map(ScalarConvexPiece::ubar).collect();
        let breaks = compute_breakpoints_with(&ybar, alpha, cfg.degenerate_tol)?;
        Ok(Workspace {
            pieces,
            all_quadratic: pieces.iter().all(|p| p.quadratic_params().is_some()),
            ybar,
            breaks,
            cfg,
            counters: Counters::default(),
            diag: Diagnostics::default(),
        })
    }

    /// `sum_{s in start..=end} (H_s(-shift) - alpha_s)`.
    fn surplus(&mut self, start: usize, end: usize, shift: f64) -> f64 {
        self.counters.predicate_evals += 1;
        let moved: f64 = if shift == 0.0 {
            0.0
        } else {
            (start..=end)
                .map(|s| self.pieces[s].clamp_h(-shift) - self.ybar[s])
                .sum()
        };
        moved + (self.breaks.d[end] - self.breaks.d_before(start))
    }

    /// Right-hand side so that `sum H_s(-shift - xi) - rhs` is the block surplus.
    fn block_rhs(&self, start: usize, end: usize) -> f64 {
        let ybar_sum: f64 = self.ybar[start..=end].iter().sum();
        ybar_sum - (self.breaks.d[end] - self.breaks.d_before(start))
    }

    fn solve(&mut self, start: usize, end: usize, shift: f64) -> Result<f64> {
        let rhs = self.block_rhs(start, end);
        self.counters.inner_solves += 1;
        if self.all_quadratic {
            let rho = quadratic_rho(&self.pieces[start..=end], shift, rhs);
            Ok(rho_root(&rho, &mut self.counters.comparisons))
        } else {
            let (xi, loose) =
                bisect_block(&self.pieces[start..=end], shift, rhs, self.cfg.eq_tol)?;
            if loose {
                self.diag.loose_equations += 1;
            }
            Ok(xi)
        }
    }

    /// Smallest admissible merge target among the breakpoints in `active`
    /// (those with a positive multiplier, stored in descending order). The
    /// merge predicate is monotone along that list; any breakpoint with a zero
    /// multiplier is dominated by the nearest positive one below it, so the
    /// search never needs to look at zero-multiplier breakpoints.
    fn find_r_star(&mut self, shifts: &[f64], j: usize, active: &[usize]) -> Option<usize> {
        let start = self.breaks.block_start(j);
        let tau = self.cfg.degenerate_tol;
        let pred = |ws: &mut Self, r: usize| {
            let end = ws.breaks.w[r];
            ws.surplus(start, end, shifts[r]) >= -tau
        };
        // active[..k] satisfy the predicate, active[k..] do not
        let (mut lo, mut hi) = (0usize, active.len());
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if pred(self, active[mid]) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let verified = lo > 0 && (lo == active.len() || !pred(self, active[lo]));
        if verified {
            return Some(active[lo - 1]);
        }
        let found = active.iter().rev().copied().find(|&r| pred(self, r));
        if found.is_some() {
            self.diag.r_star_fallbacks += 1;
        }
        found
    }

    /// Partial feasibility and complementarity for indices from the start of
    /// block `j` onward.
    fn check_block_invariants(&mut self, state: &DualState, j: usize, alpha: &[f64]) {
        let start = self.breaks.block_start(j);
        let n = self.pieces.len();
        let w = &self.breaks.w;
        let mut tail = vec![0.0; n - start];
        let mut acc = 0.0;
        let mut r = w.len();
        for i in (start..n).rev() {
            while r > 0 && w[r - 1] >= i {
                r -= 1;
                acc += state.lambda_w[r];
            }
            tail[i - start] = acc;
        }
        let scale = 1.0 + alpha[start..].iter().sum::<f64>() + self.ybar[start..].iter().sum::<f64>();
        let tol = self.cfg.invariant_tol * scale;
        let mut partial = 0.0;
        let mut next_w = j;
        for i in start..n {
            let y = self.pieces[i].clamp_h(-tail[i - start]);
            if y > self.ybar[i] + 1e-12 * (1.0 + self.ybar[i].abs()) {
                self.diag.lemma2_violations += 1;
            }
            partial += y - alpha[i];
            if partial > tol {
                self.diag.proposition1_violations += 1;
                return;
            }
            if next_w < w.len() && w[next_w] == i {
                if state.lambda_w[next_w] > 0.0 && partial.abs() > tol {
                    self.diag.proposition1_violations += 1;
                    return;
                }
                next_w += 1;
            }
        }
    }
}

pub(crate) fn quadratic_rho(pieces: &[ScalarConvexPiece], shift: f64, rhs: f64) -> RhoFunction {
    let terms = pieces
        .iter()
        .map(|p| {
            let (center, weight) = p.quadratic_params().expect("quadratic block");
            RhoTerm {
                center,
                weight,
                upper: p.upper(),
            }
        })
        .collect();
    RhoFunction { terms, shift, rhs }
}

/// Smallest `xi >= 0` with `sum H_s(-shift - xi) <= rhs`, by doubling and
/// bisection. Returns the root and whether its residual exceeds `eq_tol`.
pub(crate) fn bisect_block(
    pieces: &[ScalarConvexPiece],
    shift: f64,
    rhs: f64,
    eq_tol: f64,
) -> Result<(f64, bool)> {
    let f = |xi: f64| pieces.iter().map(|p| p.clamp_h(-shift - xi)).sum::<f64>() - rhs;
    if f(0.0) <= 0.0 {
        return Ok((0.0, false));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut doublings = 0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > BRACKET_DOUBLINGS || !hi.is_finite() {
            return Err(SolverError::Numerical(format!(
                "block equation not bracketed after {BRACKET_DOUBLINGS} doublings"
            )));
        }
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((hi, f(hi).abs() > eq_tol))
}

/// Solves `sum_{s in block} (H_s(-shift - xi) - alpha_s) = 0` for the smallest
/// `xi >= 0`. The block surplus at `xi = 0` must be non-negative.
pub fn solve_block_equation(
    pieces: &[ScalarConvexPiece],
    block: RangeInclusive<usize>,
    shift: f64,
    alpha: &[f64],
) -> Result<f64> {
    if pieces.len() != alpha.len() {
        return Err(SolverError::DimensionMismatch {
            what: "alpha",
            expected: pieces.len(),
            found: alpha.len(),
        });
    }
    if *block.end() >= pieces.len() || block.is_empty() {
        return Err(SolverError::invalid("block", format!("{block:?} out of range")));
    }
    let rhs: f64 = alpha[block.clone()].iter().sum();
    let slice = &pieces[block];
    if slice.iter().all(|p| p.quadratic_params().is_some()) {
        let mut comparisons = 0;
        Ok(rho_root(&quadratic_rho(slice, shift, rhs), &mut comparisons))
    } else {
        let (xi, _) = bisect_block(slice, shift, rhs, EQUATION_TOL)?;
        Ok(xi)
    }
}

/// Merge target for a short block `j` (zero-based): the smallest `r > j`
/// whose merged surplus `sum_{s = start_j}^{w_r} (H_s(-sum_{t>r} lambda_t) -
/// alpha_s)` is non-negative. `state` must come from the outer loop, so that
/// its multipliers above `j` satisfy the loop invariants.
pub fn find_r_star(
    pieces: &[ScalarConvexPiece],
    state: &DualState,
    breaks: &BreakpointSet,
    j: usize,
    alpha: &[f64],
) -> Result<Option<usize>> {
    let cfg = DualConfig::default();
    let mut ws = Workspace::new(pieces, alpha, &cfg)?;
    if ws.breaks != *breaks || state.lambda_w.len() != breaks.len() || j >= breaks.len() {
        return Err(SolverError::invalid(
            "breaks",
            "breakpoints or state do not belong to these pieces",
        ));
    }
    let shifts = state.shifts();
    let active: Vec<usize> = (j + 1..breaks.len())
        .rev()
        .filter(|&r| state.lambda_w[r] > 0.0)
        .collect();
    Ok(ws.find_r_star(&shifts, j, &active))
}

pub fn run_dual(problem: &AscendingProblem, cfg: &DualConfig) -> Result<DualSolution> {
    if problem.last_constraint() == LastConstraint::Equality {
        return Err(SolverError::Unsupported(
            "dual method with an equality total; eliminate it first",
        ));
    }
    let pieces = problem.require_pieces("dual method on a non-separable objective")?;
    let (certificate, report) = run_dual_pieces(pieces, problem.alpha(), cfg)?;
    Ok(DualSolution {
        certificate,
        report,
    })
}

pub(crate) fn run_dual_pieces(
    pieces: &[ScalarConvexPiece],
    alpha: &[f64],
    cfg: &DualConfig,
) -> Result<(KktCertificate, SolveReport)> {
    let started = Instant::now();
    let n = pieces.len();
    let mut ws = Workspace::new(pieces, alpha, cfg)?;
    let big_l = ws.breaks.len();
    let mut report = SolveReport::new(Method::Dual);
    report.breakpoints = Some(big_l);

    let mut state = DualState {
        lambda_w: vec![0.0; big_l],
        j: big_l,
    };
    // breakpoints above `j` with a positive multiplier, largest first
    let mut active: Vec<usize> = Vec::new();
    for j in (0..big_l).rev() {
        state.j = j;
        ws.counters.outer_iterations += 1;
        let shifts = state.shifts();
        let start = ws.breaks.block_start(j);
        let end = ws.breaks.w[j];
        if ws.surplus(start, end, shifts[j]) >= -cfg.degenerate_tol {
            let xi = ws.solve(start, end, shifts[j])?;
            state.lambda_w[j] = xi;
            if xi > 0.0 {
                active.push(j);
            }
        } else {
            ws.diag.case2_merges += 1;
            match ws.find_r_star(&shifts, j, &active) {
                Some(r) => {
                    let previous = state.lambda_w[r];
                    if !(previous > 0.0) {
                        ws.diag.lemma1_violations += 1;
                    }
                    let xi = ws.solve(start, ws.breaks.w[r], shifts[r])?;
                    // multipliers near zero carry rounding noise of the
                    // surplus evaluation, hence the absolute part
                    if xi > previous + 1e-12 * (1.0 + previous + shifts[r]) {
                        ws.diag.monotone_violations += 1;
                    }
                    state.lambda_w[r] = xi;
                    state.lambda_w[j..r].iter_mut().for_each(|l| *l = 0.0);
                    while active.last().is_some_and(|&a| a <= r) {
                        active.pop();
                    }
                    if xi > 0.0 {
                        active.push(r);
                    }
                }
                None => {
                    ws.diag.r_star_not_found += 1;
                    state.lambda_w[j..].iter_mut().for_each(|l| *l = 0.0);
                    active.clear();
                }
            }
        }
        if cfg.check_invariants {
            ws.check_block_invariants(&state, j, alpha);
        }
    }

    let mut lambda = vec![0.0; n];
    for (r, &k) in ws.breaks.w.iter().enumerate() {
        lambda[k] = state.lambda_w[r];
    }
    let mut y = Vec::with_capacity(n);
    let mut tail = 0.0;
    for i in (0..n).rev() {
        tail += lambda[i];
        y.push(pieces[i].clamp_h(-tail));
    }
    y.reverse();
    for (yi, yb) in y.iter().zip(&ws.ybar) {
        if *yi > yb + 1e-12 * (1.0 + yb.abs()) {
            ws.diag.lemma2_violations += 1;
        }
    }

    let certificate = kkt_residual_pieces(pieces, alpha, &y, &lambda)?;
    report.counters = ws.counters;
    report.diagnostics = ws.diag;
    report.termination = if big_l == 0 {
        Termination::Unconstrained
    } else {
        Termination::Finished
    };
    report.wall_time = started.elapsed();
    Ok((certificate, report))
}
