use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dual,
    Gp,
    Ps,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dual => "dual",
            Method::Gp => "gp",
            Method::Ps => "ps",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Finite method ran to completion.
    Finished,
    /// Every constraint slack at the box minimizers; no multiplier needed.
    Unconstrained,
    KktTolerance,
    Stalled,
    LineSearchFailed,
    /// A step left the iterate unchanged.
    Stationary,
    MaxIterations,
}

/// Runtime checks of the dual method's internal guarantees. All counters stay
/// at zero on well-posed input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Case 2 picked a merge target whose previous multiplier was not positive.
    pub lemma1_violations: u64,
    /// A materialized primal value exceeded its box minimizer.
    pub lemma2_violations: u64,
    /// Partial feasibility or complementarity failed after an outer loop.
    pub proposition1_violations: u64,
    /// A Case 2 update increased a multiplier.
    pub monotone_violations: u64,
    /// The merge search found no admissible block.
    pub r_star_not_found: u64,
    /// Binary search for the merge target failed verification.
    pub r_star_fallbacks: u64,
    pub case2_merges: u64,
    /// Equations whose final residual exceeded the equation tolerance.
    pub loose_equations: u64,
}

impl Diagnostics {
    pub fn assertions_clean(&self) -> bool {
        self.lemma1_violations == 0
            && self.lemma2_violations == 0
            && self.proposition1_violations == 0
            && self.monotone_violations == 0
            && self.r_star_not_found == 0
    }

    pub fn merge(&mut self, other: &Diagnostics) {
        self.lemma1_violations += other.lemma1_violations;
        self.lemma2_violations += other.lemma2_violations;
        self.proposition1_violations += other.proposition1_violations;
        self.monotone_violations += other.monotone_violations;
        self.r_star_not_found += other.r_star_not_found;
        self.r_star_fallbacks += other.r_star_fallbacks;
        self.case2_merges += other.case2_merges;
        self.loose_equations += other.loose_equations;
    }
}

/// Work counters shared by all solvers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub outer_iterations: u64,
    /// Scalar equations solved (block equations, P-S equations, projections).
    pub inner_solves: u64,
    /// Block-predicate evaluations (case tests and merge search).
    pub predicate_evals: u64,
    /// Comparisons spent inside piecewise-linear equation solves.
    pub comparisons: u64,
}

impl Counters {
    pub fn add(&mut self, other: &Counters) {
        self.outer_iterations += other.outer_iterations;
        self.inner_solves += other.inner_solves;
        self.predicate_evals += other.predicate_evals;
        self.comparisons += other.comparisons;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub method: Method,
    pub counters: Counters,
    /// Number of breakpoints of the instance, when the method computes them.
    pub breakpoints: Option<usize>,
    pub termination: Termination,
    pub diagnostics: Diagnostics,
    #[serde(serialize_with = "as_millis")]
    pub wall_time: Duration,
}

impl SolveReport {
    pub(crate) fn new(method: Method) -> Self {
        SolveReport {
            method,
            counters: Counters::default(),
            breakpoints: None,
            termination: Termination::Finished,
            diagnostics: Diagnostics::default(),
            wall_time: Duration::ZERO,
        }
    }
}

fn as_millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}
