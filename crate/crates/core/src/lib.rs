//! Convex minimization under linear ascending constraints.
//!
//! * [`dual`]: finite dual method for separable objectives.
//! * [`projection`]: exact Euclidean projection onto the ascending polytope.
//! * [`gp`]: gradient projection for general smooth objectives.
//! * [`transforms`]: reductions between problem forms.
//! * [`oracles`]: KKT checker, P-S reference method, active-set oracle.
//! * [`testbed`]: seeded benchmark instances.
//! * [`format`]: JSON problem files and solve reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod error;
pub mod format;
pub mod gp;
pub mod oracles;
pub mod problem;
pub mod projection;
pub mod report;
pub mod testbed;
pub mod transforms;

pub use dual::{compute_breakpoints, run_dual, BreakpointSet, DualConfig, DualSolution};
pub use error::{Result, SolverError};
pub use format::{
    parse_problem_file, parse_problem_str, to_problem_json, FormatError, ObjectiveSpec, ProblemFile,
    ReportFile,
};
pub use gp::{gp_step, solve_gp, solve_gp_with_progress, GpConfig, GpSolution, Progress, StepRule};
pub use oracles::{active_set_oracle, kkt_residual, ps_solve, PsSolution};
pub use problem::{
    check_feasibility, unconstrained_minimizers, AscendingProblem, Feasibility, KktCertificate,
    LastConstraint, Objective, PieceForm, ScalarConvexPiece, SmoothObjective,
};
pub use projection::{project, project_with, solve_rho_root, Projection, RhoFunction};
pub use report::{Counters, Diagnostics, Method, SolveReport, Termination};
pub use testbed::{InstanceSpec, ProblemKind};
pub use transforms::{
    eliminate_equality, monotonize_gamma, p2_to_p1, relax_equality, Eliminated, EliminationOptions,
    P2Problem, ReflectMap,
};
