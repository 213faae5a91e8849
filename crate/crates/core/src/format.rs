//! JSON problem files and solve reports.
//!
//! A problem file looks like
//!
//! ```json
//! {
//!   "n": 2,
//!   "alpha": [1.0, 1.0],
//!   "beta": [null, 2.5],
//!   "last_constraint": "ineq",
//!   "objective": {"kind": "quadratic", "centers": [3.0, 3.0]}
//! }
//! ```
//!
//! `null` in `beta` means no upper bound. Objective kinds:
//!
//! * `quadratic`: `centers`, optional `weights` (default 1), terms
//!   `w (y - c)^2`.
//! * `tp1`: `v`, optional `shift` (default `sum alpha`), terms
//!   `1/4 (shift - y)^4 + v (shift - y)`.
//! * `tp2`: `v`, terms `v / y`.
//! * `tp3`: `under`, `over`, `rate`, newsvendor terms.

use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::problem::{AscendingProblem, KktCertificate, LastConstraint, PieceForm};
use crate::report::{Counters, Diagnostics, Method, SolveReport, Termination};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed problem file at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

impl FormatError {
    fn field(field: impl Into<String>, reason: impl fmt::Display) -> Self {
        FormatError::Validation {
            field: field.into(),
            reason: reason.to_string(),
        }
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

fn ineq() -> LastConstraint {
    LastConstraint::Inequality
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<Option<f64>>,
    #[serde(default = "ineq")]
    pub last_constraint: LastConstraint,
    pub objective: ObjectiveSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic {
        centers: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    Tp1 {
        v: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<f64>,
    },
    Tp2 {
        v: Vec<f64>,
    },
    Tp3 {
        under: Vec<f64>,
        over: Vec<f64>,
        rate: Vec<f64>,
    },
}

fn check_len(field: &str, v: &[f64], n: usize) -> Result<(), FormatError> {
    if v.len() != n {
        return Err(FormatError::field(field, format!("has {} entries, expected n = {n}", v.len())));
    }
    Ok(())
}

impl ProblemFile {
    pub fn into_problem(self) -> Result<AscendingProblem, FormatError> {
        let n = self.n;
        if n == 0 {
            return Err(FormatError::field("n", "must be >= 1"));
        }
        check_len("alpha", &self.alpha, n)?;
        if self.beta.len() != n {
            return Err(FormatError::field(
                "beta",
                format!("has {} entries, expected n = {n}", self.beta.len()),
            ));
        }
        for (i, a) in self.alpha.iter().enumerate() {
            if !(a.is_finite() && *a >= 0.0) {
                return Err(FormatError::field(format!("alpha[{i}]"), format!("{a} must be >= 0")));
            }
        }
        let beta: Vec<f64> = self.beta.iter().map(|b| b.unwrap_or(f64::INFINITY)).collect();
        for (i, b) in beta.iter().enumerate() {
            if !(*b > 0.0) {
                return Err(FormatError::field(format!("beta[{i}]"), format!("{b} must be > 0")));
            }
        }
        let forms: Vec<PieceForm> = match self.objective {
            ObjectiveSpec::Quadratic { centers, weights } => {
                check_len("objective.centers", &centers, n)?;
                let weights = weights.unwrap_or_else(|| vec![1.0; n]);
                check_len("objective.weights", &weights, n)?;
                centers
                    .into_iter()
                    .zip(weights)
                    .map(|(center, weight)| PieceForm::Quadratic { center, weight })
                    .collect()
            }
            ObjectiveSpec::Tp1 { v, shift } => {
                check_len("objective.v", &v, n)?;
                let shift = shift.unwrap_or_else(|| self.alpha.iter().sum());
                v.into_iter().map(|v| PieceForm::Quartic { v, shift }).collect()
            }
            ObjectiveSpec::Tp2 { v } => {
                check_len("objective.v", &v, n)?;
                v.into_iter().map(|v| PieceForm::Reciprocal { v }).collect()
            }
            ObjectiveSpec::Tp3 { under, over, rate } => {
                check_len("objective.under", &under, n)?;
                check_len("objective.over", &over, n)?;
                check_len("objective.rate", &rate, n)?;
                (0..n)
                    .map(|i| PieceForm::Newsvendor {
                        under: under[i],
                        over: over[i],
                        rate: rate[i],
                    })
                    .collect()
            }
        };
        let problem = AscendingProblem::separable(self.alpha, beta, forms).map_err(|e| match e {
            SolverError::InvalidInput { field, reason } => FormatError::Validation { field, reason },
            other => FormatError::field("objective", other),
        })?;
        Ok(problem.with_last_constraint(self.last_constraint))
    }

    /// Describes a separable instance whose terms all belong to one file kind.
    pub fn from_problem(problem: &AscendingProblem) -> Result<Self, SolverError> {
        let pieces = problem.require_pieces("problem file export")?;
        let unsupported = || SolverError::Unsupported("terms without a problem-file representation");
        let objective = match pieces[0].form() {
            PieceForm::Quadratic { .. } => {
                let mut centers = Vec::new();
                let mut weights = Vec::new();
                for p in pieces {
                    match p.form() {
                        PieceForm::Quadratic { center, weight } => {
                            centers.push(*center);
                            weights.push(*weight);
                        }
                        _ => return Err(unsupported()),
                    }
                }
                let weights = weights.iter().any(|w| *w != 1.0).then_some(weights);
                ObjectiveSpec::Quadratic { centers, weights }
            }
            PieceForm::Quartic { shift, .. } => {
                let shift = *shift;
                let v = pieces
                    .iter()
                    .map(|p| match p.form() {
                        PieceForm::Quartic { v, shift: s } if *s == shift => Ok(*v),
                        _ => Err(unsupported()),
                    })
                    .collect::<Result<_, _>>()?;
                ObjectiveSpec::Tp1 {
                    v,
                    shift: Some(shift),
                }
            }
            PieceForm::Reciprocal { .. } => ObjectiveSpec::Tp2 {
                v: pieces
                    .iter()
                    .map(|p| match p.form() {
                        PieceForm::Reciprocal { v } => Ok(*v),
                        _ => Err(unsupported()),
                    })
                    .collect::<Result<_, _>>()?,
            },
            PieceForm::Newsvendor { .. } => {
                let (mut under, mut over, mut rate) = (Vec::new(), Vec::new(), Vec::new());
                for p in pieces {
                    match p.form() {
                        PieceForm::Newsvendor {
                            under: u,
                            over: o,
                            rate: r,
                        } => {
                            under.push(*u);
                            over.push(*o);
                            rate.push(*r);
                        }
                        _ => return Err(unsupported()),
                    }
                }
                ObjectiveSpec::Tp3 { under, over, rate }
            }
            _ => return Err(unsupported()),
        };
        Ok(ProblemFile {
            n: problem.n(),
            alpha: problem.alpha().to_vec(),
            beta: problem.beta().iter().map(|b| b.is_finite().then_some(*b)).collect(),
            last_constraint: problem.last_constraint(),
            objective,
        })
    }
}

pub fn parse_problem_str(text: &str) -> Result<AscendingProblem, FormatError> {
    serde_json::from_str::<ProblemFile>(text)?.into_problem()
}

pub fn parse_problem_file(path: impl AsRef<Path>) -> Result<AscendingProblem, FormatError> {
    let path = path.as_ref();
    let io = |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(io)?;
    parse_problem_str(&text)
}

pub fn to_problem_json(problem: &AscendingProblem) -> Result<String, SolverError> {
    let file = ProblemFile::from_problem(problem)?;
    serde_json::to_string_pretty(&file).map_err(|e| SolverError::Numerical(e.to_string()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktSummary {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub max: f64,
}

impl From<&KktCertificate> for KktSummary {
    fn from(c: &KktCertificate) -> Self {
        KktSummary {
            stationarity: c.stationarity_residual,
            feasibility: c.feasibility_residual,
            complementarity: c.complementarity_residual,
            max: c.max_residual(),
        }
    }
}

/// Versioned, machine-readable result of one solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub method: Method,
    pub n: usize,
    pub y: Vec<f64>,
    pub objective: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktSummary>,
    pub counters: Counters,
    /// Number of breakpoints `L` (dual method only).
    #[serde(rename = "L")]
    pub breakpoints: Option<usize>,
    pub termination: Termination,
    pub diagnostics: Diagnostics,
    pub wall_ms: f64,
}

impl ReportFile {
    pub fn new(
        y: Vec<f64>,
        objective: f64,
        certificate: Option<&KktCertificate>,
        report: &SolveReport,
    ) -> Self {
        ReportFile {
            schema_version: REPORT_SCHEMA_VERSION,
            method: report.method,
            n: y.len(),
            y,
            objective,
            lambda: certificate.map(|c| c.lambda.clone()),
            kkt: certificate.map(KktSummary::from),
            counters: report.counters,
            breakpoints: report.breakpoints,
            termination: report.termination,
            diagnostics: report.diagnostics,
            wall_ms: report.wall_time.as_secs_f64() * 1e3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields serialize")
    }
}
