//! Seeded benchmark instances.
//!
//! All generators draw from `ChaCha8Rng::seed_from_u64(seed)` (crate
//! `rand_chacha` 0.3) using `Rng::gen::<f64>()`, i.e. uniforms on `[0, 1)`
//! built from the top 53 bits of a `u64`, rescaled affinely to `[a, b)`.
//! Parameter vectors are drawn one after another in the order listed on each
//! generator, so an instance is a pure function of `(kind, n, seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::problem::{AscendingProblem, PieceForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Tp1,
    Tp2,
    Tp3,
    RandomQuadratic,
    RandomSeparable,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Tp1 => "tp1",
            ProblemKind::Tp2 => "tp2",
            ProblemKind::Tp3 => "tp3",
            ProblemKind::RandomQuadratic => "random_quadratic",
            ProblemKind::RandomSeparable => "random_separable",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tp1" => Ok(ProblemKind::Tp1),
            "tp2" => Ok(ProblemKind::Tp2),
            "tp3" => Ok(ProblemKind::Tp3),
            "random_quadratic" | "quadratic" => Ok(ProblemKind::RandomQuadratic),
            "random_separable" | "separable" => Ok(ProblemKind::RandomSeparable),
            other => Err(SolverError::invalid("kind", format!("unknown problem kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn new(kind: ProblemKind, n: usize, seed: u64) -> Self {
        InstanceSpec { kind, n, seed }
    }

    pub fn generate(&self) -> Result<AscendingProblem> {
        match self.kind {
            ProblemKind::Tp1 => gen_tp1(self.n, self.seed),
            ProblemKind::Tp2 => gen_tp2(self.n, self.seed),
            ProblemKind::Tp3 => gen_tp3(self.n, self.seed),
            ProblemKind::RandomQuadratic => gen_random_quadratic(self.n, self.seed),
            ProblemKind::RandomSeparable => gen_random_separable(self.n, self.seed),
        }
    }
}

fn rng_for(n: usize, seed: u64) -> Result<ChaCha8Rng> {
    if n == 0 {
        return Err(SolverError::invalid("n", "instance size must be >= 1"));
    }
    Ok(ChaCha8Rng::seed_from_u64(seed))
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| lo + (hi - lo) * rng.gen::<f64>()).collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Quartic test problem, already reflected to `z = B - y` with the artificial
/// bound `B = sum alpha`: minimize `sum 1/4 (B - z_i)^4 + v_i (B - z_i)` with
/// per-step right-hand sides `B - alpha_i` and `0 <= z_i <= B`.
///
/// Draws: `alpha ~ U[0,1)^n`, then `v ~ U[0,1)^n` sorted ascending.
pub fn gen_tp1(n: usize, seed: u64) -> Result<AscendingProblem> {
    let mut rng = rng_for(n, seed)?;
    let alpha = uniform(&mut rng, 0.0, 1.0, n);
    let v = sorted(uniform(&mut rng, 0.0, 1.0, n));
    let shift: f64 = alpha.iter().sum();
    let forms = v.iter().map(|&v| PieceForm::Quartic { v, shift }).collect();
    let steps = alpha.iter().map(|a| shift - a).collect();
    AscendingProblem::separable(steps, vec![shift; n], forms)
}

/// Reciprocal test problem reflected to `z = 1 - y`: minimize `sum v_i / z_i`
/// with per-step right-hand sides `1 - alpha_i` and `0 <= z_i <= 1`.
///
/// Draws: `alpha ~ U[0,1)^n`, then `v ~ U[0,1)^n` sorted ascending.
pub fn gen_tp2(n: usize, seed: u64) -> Result<AscendingProblem> {
    let mut rng = rng_for(n, seed)?;
    let alpha = uniform(&mut rng, 0.0, 1.0, n);
    let v = sorted(uniform(&mut rng, 0.0, 1.0, n));
    let forms = v.iter().map(|&v| PieceForm::Reciprocal { v }).collect();
    let steps = alpha.iter().map(|a| 1.0 - a).collect();
    AscendingProblem::separable(steps, vec![1.0; n], forms)
}

/// Inventory problem with downward substitution and exponential demand.
///
/// Draws: `alpha ~ U[0,20)`, `over ~ U[5,10)`, `under ~ U[20,25)`,
/// `rate ~ U[0.1,0.2)`, each as a length-`n` vector in that order.
pub fn gen_tp3(n: usize, seed: u64) -> Result<AscendingProblem> {
    let mut rng = rng_for(n, seed)?;
    let alpha = uniform(&mut rng, 0.0, 20.0, n);
    let over = uniform(&mut rng, 5.0, 10.0, n);
    let under = uniform(&mut rng, 20.0, 25.0, n);
    let rate = uniform(&mut rng, 0.1, 0.2, n);
    let forms = (0..n)
        .map(|i| PieceForm::Newsvendor {
            under: under[i],
            over: over[i],
            rate: rate[i],
        })
        .collect();
    AscendingProblem::separable(alpha, vec![f64::INFINITY; n], forms)
}

/// Projection-type instance `sum (y_i - z_i)^2`.
///
/// Draws: `z ~ U[-1,3)`, `alpha ~ U[0,1)`, then per index a coin `c ~ U[0,1)`
/// and a bound `b ~ U[0.2,2)`; `beta_i = b` when `c < 0.5`, else infinite.
pub fn gen_random_quadratic(n: usize, seed: u64) -> Result<AscendingProblem> {
    let mut rng = rng_for(n, seed)?;
    let z = uniform(&mut rng, -1.0, 3.0, n);
    let alpha = uniform(&mut rng, 0.0, 1.0, n);
    let beta = (0..n)
        .map(|_| {
            let coin = rng.gen::<f64>();
            let b = 0.2 + 1.8 * rng.gen::<f64>();
            if coin < 0.5 {
                b
            } else {
                f64::INFINITY
            }
        })
        .collect();
    AscendingProblem::quadratic(&z, alpha, beta)
}

/// Mixed separable instance with quadratic, newsvendor, quartic and
/// reciprocal terms.
///
/// Draws: `alpha ~ U[0,1.5)`, then per index a family selector and four
/// parameter uniforms `p1..p4 ~ U[0,1)`.
pub fn gen_random_separable(n: usize, seed: u64) -> Result<AscendingProblem> {
    let mut rng = rng_for(n, seed)?;
    let alpha = uniform(&mut rng, 0.0, 1.5, n);
    let mut beta = Vec::with_capacity(n);
    let mut forms = Vec::with_capacity(n);
    for _ in 0..n {
        let family = rng.gen_range(0..4u32);
        let p: [f64; 4] = std::array::from_fn(|_| rng.gen::<f64>());
        let bound = 0.3 + 2.7 * p[3];
        let (form, b) = match family {
            0 => (
                PieceForm::Quadratic {
                    center: -1.0 + 4.0 * p[0],
                    weight: 0.5 + 2.5 * p[1],
                },
                if p[2] < 0.5 { bound } else { f64::INFINITY },
            ),
            1 => (
                PieceForm::Newsvendor {
                    under: 1.0 + 4.0 * p[0],
                    over: 1.0 + 4.0 * p[1],
                    rate: 0.2 + 1.8 * p[2],
                },
                if p[2] < 0.5 { bound } else { f64::INFINITY },
            ),
            2 => (
                PieceForm::Quartic {
                    v: -1.0 + 2.0 * p[0],
                    shift: bound * (1.0 + p[1]),
                },
                bound,
            ),
            _ => (PieceForm::Reciprocal { v: 0.05 + p[0] }, bound),
        };
        forms.push(form);
        beta.push(b);
    }
    AscendingProblem::separable(alpha, beta, forms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::compute_breakpoints;
    use crate::problem::unconstrained_minimizers;

    #[test]
    fn tp1_minimizers_sit_at_the_bound() {
        let p = gen_tp1(20, 7).unwrap();
        let ybar = unconstrained_minimizers(&p).unwrap();
        let b = p.beta()[0];
        assert!(ybar.iter().all(|&y| y == b));
        let pieces = p.pieces().unwrap();
        for piece in pieces {
            if let PieceForm::Quartic { v, .. } = piece.form() {
                assert!((piece.deriv(b) + v).abs() < 1e-15);
                assert_eq!(piece.h(), -v);
            }
        }
        assert_eq!(compute_breakpoints(&ybar, p.alpha()).unwrap().len(), 20);
    }

    #[test]
    fn tp2_round_trip() {
        let p = gen_tp2(10, 3).unwrap();
        assert!(unconstrained_minimizers(&p).unwrap().iter().all(|&y| y == 1.0));
        let piece =
            crate::problem::ScalarConvexPiece::new(PieceForm::Reciprocal { v: 0.25 }, 1.0).unwrap();
        assert_eq!(piece.deriv(0.5), -1.0);
        assert_eq!(piece.deriv_inv(-1.0), 0.5);
    }

    #[test]
    fn tp3_minimizer_range() {
        let p = gen_tp3(300, 11).unwrap();
        for (piece, y) in p.pieces().unwrap().iter().zip(unconstrained_minimizers(&p).unwrap()) {
            assert!((5.49..=17.92).contains(&y), "{y}");
            assert!(piece.deriv(y).abs() < 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [
            ProblemKind::Tp1,
            ProblemKind::Tp2,
            ProblemKind::Tp3,
            ProblemKind::RandomQuadratic,
            ProblemKind::RandomSeparable,
        ] {
            let a = InstanceSpec::new(kind, 8, 42).generate().unwrap();
            let b = InstanceSpec::new(kind, 8, 42).generate().unwrap();
            let bits = |p: &AscendingProblem| {
                p.alpha()
                    .iter()
                    .chain(p.beta())
                    .chain(&unconstrained_minimizers(p).unwrap())
                    .map(|x| x.to_bits())
                    .collect::<Vec<_>>()
            };
            assert_eq!(bits(&a), bits(&b), "{kind:?}");
            assert_eq!(format!("{:?}", a.objective()), format!("{:?}", b.objective()));
        }
    }

    #[test]
    fn v_is_sorted() {
        let p = gen_tp2(50, 1).unwrap();
        let v: Vec<f64> = p
            .pieces()
            .unwrap()
            .iter()
            .map(|pc| match pc.form() {
                PieceForm::Reciprocal { v } => *v,
                _ => unreachable!(),
            })
            .collect();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zero_size_rejected() {
        assert!(gen_tp3(0, 1).is_err());
    }
}
