//! Independent correctness anchors: the KKT residual checker, a
//! reimplementation of the variable-fixing P-S method, and an exhaustive
//! active-set oracle for tiny instances.

use std::time::Instant;

use crate::dual::{bisect_block, quadratic_rho, EQUATION_TOL};
use crate::error::{Result, SolverError};
use crate::problem::{AscendingProblem, KktCertificate, LastConstraint, PieceForm, ScalarConvexPiece};
use crate::projection::rho_root;
use crate::report::{Method, SolveReport, Termination};

/// Largest instance the active-set oracle accepts.
pub const ORACLE_MAX_N: usize = 6;

/// KKT certificate of `(y, lambda)` for a separable inequality-form problem.
pub fn kkt_residual(problem: &AscendingProblem, y: &[f64], lambda: &[f64]) -> Result<KktCertificate> {
    let pieces = problem.require_pieces("kkt_residual")?;
    kkt_residual_pieces(pieces, problem.alpha(), y, lambda)
}

pub(crate) fn kkt_residual_pieces(
    pieces: &[ScalarConvexPiece],
    alpha: &[f64],
    y: &[f64],
    lambda: &[f64],
) -> Result<KktCertificate> {
    let n = pieces.len();
    for (what, len) in [("alpha", alpha.len()), ("y", y.len()), ("lambda", lambda.len())] {
        if len != n {
            return Err(SolverError::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    let mut tail = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += lambda[i];
        tail[i] = acc;
    }

    let mut eta = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let (mut stat, mut feas, mut comp) = (0.0f64, 0.0f64, 0.0f64);
    let (mut ys, mut alphas) = (0.0, 0.0);
    for i in 0..n {
        let p = &pieces[i];
        let phi = p.clamp_derivative(-tail[i]);
        eta[i] = (phi + tail[i]).max(0.0);
        delta[i] = (-phi - tail[i]).max(0.0);

        stat = stat.max((p.deriv(y[i]) + tail[i] - eta[i] + delta[i]).abs());

        ys += y[i];
        alphas += alpha[i];
        let slack = ys - alphas;
        feas = feas
            .max(slack)
            .max(-y[i])
            .max(y[i] - p.upper())
            .max(-lambda[i]);

        comp = comp.max((lambda[i] * slack).abs()).max((y[i] * eta[i]).abs());
        if delta[i] > 0.0 {
            comp = comp.max(((p.upper() - y[i]) * delta[i]).abs());
        }
    }
    Ok(KktCertificate {
        y: y.to_vec(),
        lambda: lambda.to_vec(),
        eta_dual: eta,
        delta,
        stationarity_residual: stat,
        feasibility_residual: feas.max(0.0),
        complementarity_residual: comp,
    })
}

#[derive(Clone, Debug)]
pub struct PsSolution {
    pub y: Vec<f64>,
    /// Prefix multipliers recovered from the common multiplier of each fixed
    /// group.
    pub lambda: Vec<f64>,
    pub certificate: KktCertificate,
    pub report: SolveReport,
}

/// Variable-fixing dual method: for the unassigned suffix starting at `i`,
/// solve the group equation `sum_{m=i}^{l} H_m(-theta) = sum_{m=i}^{l} alpha_m`
/// for every candidate end `l`, keep the largest multiplier (smallest `l` on
/// ties) and fix `y_i..=y_l` at the common value.
pub fn ps_solve(problem: &AscendingProblem) -> Result<PsSolution> {
    if problem.last_constraint() == LastConstraint::Equality {
        return Err(SolverError::Unsupported(
            "P-S method with an equality total; eliminate it first",
        ));
    }
    let pieces = problem.require_pieces("P-S method on a non-separable objective")?;
    let alpha = problem.alpha();
    let started = Instant::now();
    let n = pieces.len();
    let mut report = SolveReport::new(Method::Ps);

    let mut y = vec![0.0; n];
    let mut multiplier = vec![0.0; n];
    let mut i = 0;
    while i < n {
        report.counters.outer_iterations += 1;
        let mut best = 0.0;
        let mut best_end = None;
        let mut rhs = 0.0;
        for l in i..n {
            rhs += alpha[l];
            report.counters.inner_solves += 1;
            let (theta, loose) = group_multiplier(&pieces[i..=l], rhs, &mut report.counters.comparisons)?;
            if loose {
                report.diagnostics.loose_equations += 1;
            }
            if theta > best {
                best = theta;
                best_end = Some(l);
            }
        }
        match best_end {
            Some(end) => {
                for m in i..=end {
                    y[m] = pieces[m].clamp_h(-best);
                    multiplier[m] = best;
                }
                i = end + 1;
            }
            None => {
                for m in i..n {
                    y[m] = pieces[m].ubar();
                }
                i = n;
            }
        }
    }

    let mut lambda = vec![0.0; n];
    for k in 0..n {
        let next = if k + 1 < n { multiplier[k + 1] } else { 0.0 };
        lambda[k] = multiplier[k] - next;
    }
    let certificate = kkt_residual_pieces(pieces, alpha, &y, &lambda)?;
    report.termination = Termination::Finished;
    report.wall_time = started.elapsed();
    Ok(PsSolution {
        y,
        lambda,
        certificate,
        report,
    })
}

/// Smallest `theta >= 0` with `sum H_m(-theta) <= rhs`.
fn group_multiplier(pieces: &[ScalarConvexPiece], rhs: f64, comparisons: &mut u64) -> Result<(f64, bool)> {
    if pieces.iter().all(|p| p.quadratic_params().is_some()) {
        return Ok((rho_root(&quadratic_rho(pieces, 0.0, rhs), comparisons), false));
    }
    if let Some(theta) = reciprocal_closed_form(pieces, rhs) {
        return Ok((theta, false));
    }
    bisect_block(pieces, 0.0, rhs, EQUATION_TOL)
}

/// Closed form for groups of `v / z` terms on `[0, beta]`:
/// `H(-theta) = min(beta, sqrt(v / theta))`, so on each range of saturated
/// terms the equation reads `B_sat + S_free / sqrt(theta) = rhs`.
fn reciprocal_closed_form(pieces: &[ScalarConvexPiece], rhs: f64) -> Option<f64> {
    let mut terms = Vec::with_capacity(pieces.len());
    for p in pieces {
        match p.form() {
            PieceForm::Reciprocal { v } => {
                let b = p.upper();
                terms.push((v / (b * b), b, v.sqrt()));
            }
            _ => return None,
        }
    }
    let total_upper: f64 = terms.iter().map(|t| t.1).sum();
    if total_upper <= rhs {
        return Some(0.0);
    }
    // saturation thresholds, largest first
    terms.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let mut free_sqrt: f64 = terms.iter().map(|t| t.2).sum();
    let mut saturated = 0.0;
    for k in 0..=terms.len() {
        if k > 0 {
            saturated += terms[k - 1].1;
            free_sqrt -= terms[k - 1].2;
        }
        let room = rhs - saturated;
        if room <= 0.0 || free_sqrt <= 0.0 {
            break;
        }
        let theta = (free_sqrt / room).powi(2);
        let below = k == terms.len() || theta >= terms[k].0;
        let above = k == 0 || theta <= terms[k - 1].0;
        if below && above {
            return Some(theta);
        }
    }
    None
}

/// Exact minimizer for `n <= 6` by enumerating which prefix constraints bind.
///
/// For each subset of binding prefixes, the variables between consecutive
/// binding indices share one multiplier fixed by making the later prefix
/// tight; variables after the last binding prefix sit at their box minimizers.
/// Every feasible candidate is a feasible point, and the optimal pattern
/// reproduces the optimum, so the cheapest feasible candidate is the answer.
pub fn active_set_oracle(problem: &AscendingProblem) -> Result<Vec<f64>> {
    let n = problem.n();
    if n > ORACLE_MAX_N {
        return Err(SolverError::TooLarge {
            n,
            limit: ORACLE_MAX_N,
        });
    }
    let pieces = problem.require_pieces("active_set_oracle")?;
    let alpha = problem.alpha();
    let equality = problem.last_constraint() == LastConstraint::Equality;
    let mut prefix = vec![0.0; n];
    let mut acc = 0.0;
    for k in 0..n {
        acc += alpha[k];
        prefix[k] = acc;
    }
    let tol = 1e-12 * (1.0 + acc);

    let mut best: Option<(f64, Vec<f64>)> = None;
    'patterns: for mask in 0u32..(1 << n) {
        if equality && mask & (1 << (n - 1)) == 0 {
            continue;
        }
        let mut y = vec![0.0; n];
        let mut start = 0;
        for k in 0..n {
            if mask & (1 << k) == 0 {
                continue;
            }
            let target = prefix[k] - if start == 0 { 0.0 } else { prefix[start - 1] };
            let Some(theta) = common_multiplier(&pieces[start..=k], target) else {
                continue 'patterns;
            };
            for m in start..=k {
                y[m] = pieces[m].clamp_h(-theta);
            }
            start = k + 1;
        }
        for m in start..n {
            y[m] = pieces[m].ubar();
        }
        if !problem.check_feasibility(&y, tol)?.feasible {
            continue;
        }
        let value = problem.value(&y);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, y));
        }
    }
    best.map(|(_, y)| y)
        .ok_or_else(|| SolverError::Numerical("no feasible active set found".into()))
}

/// Solves `sum H_m(-theta) = target` over all real `theta`.
fn common_multiplier(pieces: &[ScalarConvexPiece], target: f64) -> Option<f64> {
    let f = |theta: f64| pieces.iter().map(|p| p.clamp_h(-theta)).sum::<f64>() - target;
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut expansions = 0;
    while f(lo) < 0.0 {
        lo *= 2.0;
        expansions += 1;
        if expansions > 200 || !lo.is_finite() {
            return None;
        }
    }
    while f(hi) > 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 400 || !hi.is_finite() {
            return None;
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
