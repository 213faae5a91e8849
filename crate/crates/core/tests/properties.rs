use ascent_core::transforms::{eliminate_equality, p2_to_p1, EliminationOptions, P2Problem};
use ascent_core::{
    active_set_oracle, compute_breakpoints, project, run_dual, solve_gp, unconstrained_minimizers,
    DualConfig, GpConfig, InstanceSpec, LastConstraint, Objective, PieceForm, ProblemKind,
    RhoFunction, ScalarConvexPiece, StepRule,
};
use proptest::prelude::*;

fn piece() -> impl Strategy<Value = ScalarConvexPiece> {
    let bound = 0.3f64..3.0;
    prop_oneof![
        (-2.0f64..4.0, 0.2f64..3.0, bound.clone(), any::<bool>()).prop_map(|(c, w, b, fin)| {
            let b = if fin { b } else { f64::INFINITY };
            ScalarConvexPiece::new(PieceForm::Quadratic { center: c, weight: w }, b).unwrap()
        }),
        (-1.0f64..1.0, 1.0f64..2.0, bound.clone()).prop_map(|(v, k, b)| {
            ScalarConvexPiece::new(PieceForm::Quartic { v, shift: b * k }, b).unwrap()
        }),
        (0.05f64..1.0, bound.clone())
            .prop_map(|(v, b)| ScalarConvexPiece::new(PieceForm::Reciprocal { v }, b).unwrap()),
        (1.0f64..5.0, 1.0f64..5.0, 0.1f64..2.0, bound).prop_map(|(u, o, r, b)| {
            let form = PieceForm::Newsvendor {
                under: u,
                over: o,
                rate: r,
            };
            ScalarConvexPiece::new(form, b).unwrap()
        }),
    ]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..4.0, n)
}

proptest! {
    #[test]
    fn clamp_h_is_monotone_and_boxed(p in piece(), a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (ylo, yhi) = (p.clamp_h(lo), p.clamp_h(hi));
        prop_assert!(ylo <= yhi + 1e-12);
        for y in [ylo, yhi] {
            prop_assert!((0.0..=p.upper()).contains(&y));
        }
    }

    #[test]
    fn clamp_h_inverts_derivative(p in piece(), t in 0.05f64..0.95) {
        let upper = if p.upper().is_finite() { p.upper() } else { 5.0 };
        let y = t * upper;
        let back = p.clamp_h(p.deriv(y));
        prop_assert!((back - y).abs() <= 1e-9 * (1.0 + y.abs()), "{} vs {}", back, y);
    }

    #[test]
    fn gradient_matches_finite_differences(p in piece(), t in 0.05f64..0.95) {
        let upper = if p.upper().is_finite() { p.upper() } else { 5.0 };
        let y = t * upper;
        let h = 1e-6 * (1.0 + y);
        let fd = (p.eval(y + h) - p.eval(y - h)) / (2.0 * h);
        prop_assert!((fd - p.deriv(y)).abs() <= 1e-5 * (1.0 + fd.abs()), "{} vs {}", fd, p.deriv(y));
    }

    #[test]
    fn block_equation_is_non_increasing(
        z in point(12),
        shift in 0.0f64..2.0,
        a in 0.0f64..10.0,
        b in 0.0f64..10.0,
    ) {
        let rho = RhoFunction::for_projection(&z, &[0.4; 12], &[1.5; 12], shift).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rho.eval(lo) >= rho.eval(hi) - 1e-12);
    }

    #[test]
    fn projection_geometry(seed in any::<u64>(), a in point(40), b in point(40), c in point(40)) {
        let p = InstanceSpec::new(ProblemKind::RandomQuadratic, 40, seed).generate().unwrap();
        let (alpha, beta) = (p.alpha(), p.beta());
        let pa = project(&a, alpha, beta).unwrap().y;
        let pb = project(&b, alpha, beta).unwrap().y;
        let again = project(&pa, alpha, beta).unwrap().y;
        prop_assert!(dist(&again, &pa) <= 1e-10);
        prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-10);
        // any feasible point makes an obtuse angle with the residual
        let x = project(&c, alpha, beta).unwrap().y;
        let r: Vec<f64> = a.iter().zip(&pa).map(|(u, v)| u - v).collect();
        let d: Vec<f64> = x.iter().zip(&pa).map(|(u, v)| u - v).collect();
        prop_assert!(dot(&r, &d) <= 1e-8);
    }

    #[test]
    fn reflection_preserves_optimum(seed in any::<u64>(), n in 1usize..=6) {
        // lower-bounded instance built by reflecting a feasible upper-bounded one
        let base = InstanceSpec::new(ProblemKind::RandomQuadratic, n, seed).generate().unwrap();
        let beta: Vec<f64> = base.beta().iter().map(|b| if b.is_finite() { *b } else { 3.0 }).collect();
        let alpha_low: Vec<f64> = base.alpha().iter().zip(&beta).map(|(a, b)| (b - a).max(0.0) * 0.5).collect();
        let pieces = base
            .pieces()
            .unwrap()
            .iter()
            .zip(&beta)
            .map(|(pc, &b)| ScalarConvexPiece::new(pc.form().clone(), b).unwrap())
            .collect();
        let p2 = P2Problem {
            alpha: alpha_low.clone(),
            beta: beta.clone(),
            objective: Objective::Separable(pieces),
            last_constraint: LastConstraint::Inequality,
        };
        let (p1, map) = p2_to_p1(&p2, None).unwrap();
        let z = run_dual(&p1, &DualConfig::default()).unwrap().certificate.y;
        let oracle = active_set_oracle(&p1).unwrap();
        prop_assert!((p1.value(&z) - p1.value(&oracle)).abs() <= 1e-8 * (1.0 + p1.value(&oracle).abs()));
        let y = map.to_original(&z);
        prop_assert!((p2.objective.value(&y) - p1.value(&z)).abs() <= 1e-9 * (1.0 + p1.value(&z).abs()));
        // y satisfies the original lower-bounded prefix constraints
        let (mut sy, mut sa) = (0.0, 0.0);
        for i in 0..n {
            sy += y[i];
            sa += alpha_low[i];
            prop_assert!(sy >= sa - 1e-9);
            prop_assert!(y[i] >= -1e-12 && y[i] <= beta[i] + 1e-12);
        }
    }
}

#[test]
fn elimination_preserves_optimum() {
    let cfg = GpConfig {
        step_rule: StepRule::armijo(),
        kkt_tol: 1e-12,
        obj_tol: 1e-15,
        ..GpConfig::default()
    };
    for seed in 0..40 {
        let base = InstanceSpec::new(ProblemKind::RandomQuadratic, 5, seed)
            .generate()
            .unwrap();
        let mut beta = base.beta().to_vec();
        beta[4] = f64::INFINITY;
        let forms = base.pieces().unwrap().iter().map(|p| p.form().clone()).collect();
        let p = ascent_core::AscendingProblem::separable(base.alpha().to_vec(), beta, forms)
            .unwrap()
            .with_last_constraint(LastConstraint::Equality);
        let oracle = active_set_oracle(&p).unwrap();
        let e = eliminate_equality(&p, &EliminationOptions::default()).unwrap();
        let sol = solve_gp(&e.problem, &cfg, None).unwrap();
        let y = e.reconstruct(&sol.y);
        let total: f64 = p.alpha().iter().sum();
        assert!((y.iter().sum::<f64>() - total).abs() <= 1e-10);
        let (fo, fg) = (p.value(&oracle), p.value(&y));
        assert!((fo - fg).abs() <= 1e-8 * (1.0 + fo.abs()), "seed {seed}: {fg} vs {fo}");
    }
}

#[test]
fn worst_case_breakpoints_for_reflected_families() {
    for seed in 0..10 {
        for kind in [ProblemKind::Tp1, ProblemKind::Tp2] {
            let p = InstanceSpec::new(kind, 60, seed).generate().unwrap();
            let ybar = unconstrained_minimizers(&p).unwrap();
            assert_eq!(compute_breakpoints(&ybar, p.alpha()).unwrap().len(), 60);
        }
    }
}
