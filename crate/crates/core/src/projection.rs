//! Euclidean projection onto the ascending polytope
//! `{y : prefix sums of y <= prefix sums of alpha, 0 <= y <= beta}`.
//!
//! The projection is the dual method applied to `sum (y_i - z_i)^2`. With
//! quadratic terms every block equation is a non-increasing piecewise-linear
//! function of the multiplier, so it is solved exactly: sort the kinks, binary
//! search for the linear piece holding the root, then one linear solve.

use crate::dual::{run_dual_pieces, DualConfig};
use crate::error::{Result, SolverError};
use crate::problem::{KktCertificate, ScalarConvexPiece};
use crate::report::SolveReport;

/// One clamped linear term `clamp(center - (shift + xi) / (2 weight), 0, upper)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoTerm {
    pub center: f64,
    pub weight: f64,
    pub upper: f64,
}

impl RhoTerm {
    fn value(&self, x: f64) -> f64 {
        (self.center - x / (2.0 * self.weight)).clamp(0.0, self.upper)
    }
}

/// `rho(xi) = sum_s clamp(center_s - (shift + xi) / (2 w_s), 0, beta_s) - rhs`.
///
/// Non-increasing and piecewise linear with at most two kinks per term.
#[derive(Clone, Debug, PartialEq)]
pub struct RhoFunction {
    pub terms: Vec<RhoTerm>,
    pub shift: f64,
    pub rhs: f64,
}

impl RhoFunction {
    /// Block equation of the projection of `z`: unit weights, `rhs = sum alpha`.
    pub fn for_projection(z: &[f64], alpha: &[f64], beta: &[f64], shift: f64) -> Result<Self> {
        if alpha.len() != z.len() || beta.len() != z.len() {
            return Err(SolverError::DimensionMismatch {
                what: "rho terms",
                expected: z.len(),
                found: alpha.len().min(beta.len()),
            });
        }
        let terms = z
            .iter()
            .zip(beta)
            .map(|(&center, &upper)| RhoTerm {
                center,
                weight: 1.0,
                upper,
            })
            .collect();
        Ok(RhoFunction {
            terms,
            shift,
            rhs: alpha.iter().sum(),
        })
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let x = self.shift + xi;
        self.terms.iter().map(|t| t.value(x)).sum::<f64>() - self.rhs
    }

    /// Positive kinks in ascending order, without duplicates.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut comparisons = 0;
        self.sorted_breakpoints(&mut comparisons)
    }

    fn sorted_breakpoints(&self, comparisons: &mut u64) -> Vec<f64> {
        let mut kinks = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            // lower clamp reached at xi = 2 w c - shift
            let lower = 2.0 * t.weight * t.center - self.shift;
            if lower > 0.0 {
                kinks.push(lower);
            }
            if t.upper.is_finite() {
                let upper = 2.0 * t.weight * (t.center - t.upper) - self.shift;
                if upper > 0.0 {
                    kinks.push(upper);
                }
            }
        }
        kinks.sort_unstable_by(|a, b| {
            *comparisons += 1;
            a.total_cmp(b)
        });
        kinks.dedup();
        kinks
    }
}

/// Smallest root of `rho` on `[0, inf)`. Requires `rho(0) >= 0`.
pub fn solve_rho_root(rho: &RhoFunction) -> Result<f64> {
    let r0 = rho.eval(0.0);
    if r0 < 0.0 {
        return Err(SolverError::invalid(
            "rho",
            format!("rho(0) = {r0} is negative; no non-negative root"),
        ));
    }
    let mut comparisons = 0;
    Ok(rho_root(rho, &mut comparisons))
}

/// Root solve that treats `rho(0) <= 0` as a root at zero.
pub(crate) fn rho_root(rho: &RhoFunction, comparisons: &mut u64) -> f64 {
    let m = rho.terms.len() as u64;
    let r0 = rho.eval(0.0);
    *comparisons += m;
    if r0 <= 0.0 {
        return 0.0;
    }
    let kinks = rho.sorted_breakpoints(comparisons);
    // first kink where rho <= 0; beyond the last kink every term is clamped at
    // zero so rho there equals -rhs <= 0 whenever kinks exist.
    let (mut lo, mut hi) = (0usize, kinks.len());
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        *comparisons += m + 1;
        if rho.eval(kinks[mid]) <= 0.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if lo == kinks.len() {
        // rho is linear past the last kink; only reachable through rounding
        let last = kinks.last().copied().unwrap_or(0.0);
        let r_last = rho.eval(last);
        let slope = active_slope(rho, last + 1.0);
        *comparisons += 2 * m;
        return if slope < 0.0 { last - r_last / slope } else { last };
    }
    let right = kinks[lo];
    let left = if lo == 0 { 0.0 } else { kinks[lo - 1] };
    let (r_left, r_right) = (rho.eval(left), rho.eval(right));
    *comparisons += 2 * m;
    if r_right >= 0.0 || r_left <= r_right {
        return right;
    }
    let xi = left + r_left * (right - left) / (r_left - r_right);
    xi.clamp(left, right)
}

fn active_slope(rho: &RhoFunction, xi: f64) -> f64 {
    let x = rho.shift + xi;
    -rho
        .terms
        .iter()
        .filter(|t| {
            let v = t.center - x / (2.0 * t.weight);
            v > 0.0 && v < t.upper
        })
        .map(|t| 1.0 / (2.0 * t.weight))
        .sum::<f64>()
}

/// Result of projecting a point onto the ascending polytope.
#[derive(Clone, Debug)]
pub struct Projection {
    pub y: Vec<f64>,
    pub certificate: KktCertificate,
    pub report: SolveReport,
}

/// Euclidean projection of `z` with the default dual configuration.
pub fn project(z: &[f64], alpha: &[f64], beta: &[f64]) -> Result<Projection> {
    project_with(z, alpha, beta, &DualConfig::default())
}

pub fn project_with(z: &[f64], alpha: &[f64], beta: &[f64], cfg: &DualConfig) -> Result<Projection> {
    let n = z.len();
    for (what, len) in [("alpha", alpha.len()), ("beta", beta.len())] {
        if len != n {
            return Err(SolverError::DimensionMismatch {
                what,
                expected: n,
                found: len,
            });
        }
    }
    if let Some(i) = alpha.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(SolverError::invalid(format!("alpha[{i}]"), "must be finite and >= 0"));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(SolverError::invalid(format!("z[{i}]"), "must be finite"));
    }
    let pieces = z
        .iter()
        .zip(beta)
        .map(|(&c, &b)| ScalarConvexPiece::quadratic(c, b))
        .collect::<Result<Vec<_>>>()?;
    let (certificate, report) = run_dual_pieces(&pieces, alpha, cfg)?;
    Ok(Projection {
        y: certificate.y.clone(),
        certificate,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn single_term_root() {
        let rho = RhoFunction::for_projection(&[3.0], &[1.0], &[INF], 0.0).unwrap();
        assert_eq!(solve_rho_root(&rho).unwrap(), 4.0);
    }

    #[test]
    fn zero_at_origin() {
        let rho = RhoFunction::for_projection(&[1.0], &[1.0], &[INF], 0.0).unwrap();
        assert_eq!(solve_rho_root(&rho).unwrap(), 0.0);
    }

    #[test]
    fn merged_block_root() {
        let rho = RhoFunction::for_projection(&[2.0, 2.0], &[1.5, 0.0], &[INF, INF], 1.0).unwrap();
        assert!((solve_rho_root(&rho).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn negative_origin_is_rejected() {
        let rho = RhoFunction::for_projection(&[0.5], &[1.0], &[INF], 0.0).unwrap();
        assert!(solve_rho_root(&rho).is_err());
    }

    #[test]
    fn upper_clamp_kinks() {
        // z = 5 clamped to beta = 1 until xi = 8, root where (10 - xi)/2 = 0.5
        let rho = RhoFunction::for_projection(&[5.0], &[0.5], &[1.0], 0.0).unwrap();
        assert_eq!(rho.breakpoints(), vec![8.0, 10.0]);
        assert!((solve_rho_root(&rho).unwrap() - 9.0).abs() < 1e-14);
    }

    #[test]
    fn flat_zero_segment_gives_smallest_root() {
        // alpha = 0: rho reaches 0 at xi = 4 and stays there
        let rho = RhoFunction::for_projection(&[2.0], &[0.0], &[INF], 0.0).unwrap();
        assert_eq!(solve_rho_root(&rho).unwrap(), 4.0);
    }

    #[test]
    fn breakpoint_count_bound() {
        let z: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0 + 1.0).collect();
        let beta: Vec<f64> = (0..40).map(|i| if i % 3 == 0 { INF } else { 0.7 }).collect();
        let rho = RhoFunction::for_projection(&z, &vec![0.1; 40], &beta, 0.0).unwrap();
        let kinks = rho.breakpoints();
        assert!(kinks.len() <= 80);
        assert!(kinks.windows(2).all(|w| w[0] < w[1]));
        assert!(kinks.iter().all(|&k| k > 0.0));
    }

    #[test]
    fn projection_examples() {
        let p = project(&[0.5, 0.5], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(p.y, vec![0.5, 0.5]);

        let p = project(&[3.0, 3.0], &[1.0, 1.0], &[INF, INF]).unwrap();
        assert!((p.y[0] - 1.0).abs() < 1e-14 && (p.y[1] - 1.0).abs() < 1e-14);

        let p = project(&[2.0, 2.0, 2.0], &[1.5, 0.0, 1.5], &[INF; 3]).unwrap();
        let expect = [0.75, 0.75, 1.5];
        for (a, b) in p.y.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14, "{:?}", p.y);
        }
    }

    #[test]
    fn projection_dimension_mismatch() {
        assert!(matches!(
            project(&[1.0, 2.0], &[1.0], &[1.0, 1.0]),
            Err(SolverError::DimensionMismatch { .. })
        ));
    }
}
