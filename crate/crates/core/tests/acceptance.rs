//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any hard criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ascent_core::{
    active_set_oracle, project_with, ps_solve, run_dual, solve_gp, AscendingProblem, Diagnostics,
    DualConfig, GpConfig, InstanceSpec, PieceForm, ProblemKind, SolveReport, StepRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Dual runs collected for the iteration-count and diagnostics criteria.
#[derive(Default)]
struct Ledger {
    runs: Vec<(String, usize, SolveReport)>,
    projections: Diagnostics,
}

impl Ledger {
    fn record(&mut self, label: String, n: usize, report: &SolveReport) {
        self.runs.push((label, n, report.clone()));
    }
}

fn checked() -> DualConfig {
    DualConfig {
        check_invariants: true,
        ..DualConfig::default()
    }
}

fn inf_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn centers(p: &AscendingProblem) -> Vec<f64> {
    p.pieces()
        .expect("separable")
        .iter()
        .map(|pc| match pc.form() {
            PieceForm::Quadratic { center, .. } => *center,
            other => panic!("not a projection instance: {other:?}"),
        })
        .collect()
}

fn oracle_equivalence(ledger: &mut Ledger) -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for seed in 0..1000u64 {
        let kind = if seed % 2 == 0 {
            ProblemKind::RandomQuadratic
        } else {
            ProblemKind::RandomSeparable
        };
        let n = 1 + (seed as usize / 2) % 6;
        let p = InstanceSpec::new(kind, n, seed).generate().unwrap();
        let oracle = active_set_oracle(&p).unwrap();
        let dual = run_dual(&p, &checked()).unwrap();
        let mut err = inf_norm(&dual.certificate.y, &oracle);
        ledger.record(format!("{} n={n} seed={seed}", kind.name()), n, &dual.report);
        if kind == ProblemKind::RandomQuadratic {
            let proj = project_with(&centers(&p), p.alpha(), p.beta(), &checked()).unwrap();
            ledger.projections.merge(&proj.report.diagnostics);
            err = err.max(inf_norm(&proj.y, &oracle));
        }
        if err > 1e-8 {
            failures += 1;
        }
        worst = worst.max(err);
    }
    let elapsed = started.elapsed();
    Outcome {
        pass: failures == 0 && elapsed < Duration::from_secs(60),
        detail: format!("1000 instances, max |y - oracle| = {worst:.2e}, {failures} over 1e-8, {elapsed:.2?}"),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn three_way(ledger: &mut Ledger) -> Outcome {
    let started = Instant::now();
    let gp_cfg = GpConfig {
        step_rule: StepRule::armijo(),
        max_iter: 20_000,
        ..GpConfig::default()
    };
    let (mut worst_rel, mut worst_kkt) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for kind in [ProblemKind::Tp1, ProblemKind::Tp2, ProblemKind::Tp3] {
        for n in [50usize, 150] {
            for seed in 0..30u64 {
                let p = InstanceSpec::new(kind, n, seed).generate().unwrap();
                let dual = run_dual(&p, &checked()).unwrap();
                let gp = solve_gp(&p, &gp_cfg, None).unwrap();
                let ps = ps_solve(&p).unwrap();
                let fd = p.value(&dual.certificate.y);
                let (fg, fp) = (gp.objective, p.value(&ps.y));
                let r = rel(fd, fg).max(rel(fd, fp)).max(rel(fg, fp));
                let kkt = dual.certificate.max_residual();
                worst_rel = worst_rel.max(r);
                worst_kkt = worst_kkt.max(kkt);
                if r > 1e-6 || kkt > 1e-7 {
                    failures.push(format!("{} n={n} seed={seed}", kind.name()));
                }
                ledger.record(format!("{} n={n} seed={seed}", kind.name()), n, &dual.report);
            }
        }
    }
    let elapsed = started.elapsed();
    Outcome {
        pass: failures.is_empty() && elapsed < Duration::from_secs(300),
        detail: format!(
            "180 instances, max pairwise rel = {worst_rel:.2e}, max dual KKT = {worst_kkt:.2e}, {elapsed:.2?}{}",
            if failures.is_empty() { String::new() } else { format!(", failing: {failures:?}") }
        ),
    }
}

fn iteration_bound(ledger: &Ledger) -> Outcome {
    let bad: Vec<&str> = ledger
        .runs
        .iter()
        .filter(|(_, n, r)| {
            let big_l = r.breakpoints.unwrap_or(usize::MAX);
            big_l > *n || r.counters.outer_iterations != big_l as u64
        })
        .map(|(label, _, _)| label.as_str())
        .collect();
    Outcome {
        pass: bad.is_empty(),
        detail: format!("{} dual runs, outer iterations == L <= n in all but {}", ledger.runs.len(), bad.len()),
    }
}

fn worst_case_structure(ledger: &Ledger) -> Outcome {
    let relevant: Vec<_> = ledger
        .runs
        .iter()
        .filter(|(label, _, _)| label.starts_with("tp1") || label.starts_with("tp2"))
        .collect();
    let bad = relevant
        .iter()
        .filter(|(_, n, r)| r.breakpoints != Some(*n))
        .count();
    Outcome {
        pass: bad == 0 && !relevant.is_empty(),
        detail: format!("{} TP-1/TP-2 instances, {bad} with L != n", relevant.len()),
    }
}

fn tp3_statistic(ledger: &mut Ledger) -> Outcome {
    let n = 500;
    let mut small = 0;
    let mut ls = Vec::new();
    for seed in 0..30u64 {
        let p = InstanceSpec::new(ProblemKind::Tp3, n, seed).generate().unwrap();
        let dual = run_dual(&p, &checked()).unwrap();
        let big_l = dual.report.breakpoints.unwrap();
        if big_l < n / 4 {
            small += 1;
        }
        ls.push(big_l);
        ledger.record(format!("tp3 n={n} seed={seed}"), n, &dual.report);
    }
    ls.sort_unstable();
    Outcome {
        pass: 2 * small > ls.len(),
        detail: format!("{small}/30 instances with L < {}, median L = {}", n / 4, ls[ls.len() / 2]),
    }
}

fn projection_properties(ledger: &mut Ledger) -> Outcome {
    let n = 100;
    let cfg = checked();
    let (mut idem, mut expand, mut angle) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for seed in 0..1000u64 {
        let p = InstanceSpec::new(ProblemKind::RandomQuadratic, n, seed).generate().unwrap();
        let (alpha, beta) = (p.alpha(), p.beta());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let a = centers(&p);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..3.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..3.0)).collect();
        let proj = |z: &[f64], diag: &mut Diagnostics| {
            let out = project_with(z, alpha, beta, &cfg).unwrap();
            diag.merge(&out.report.diagnostics);
            out.y
        };
        let pa = proj(&a, &mut ledger.projections);
        let pb = proj(&b, &mut ledger.projections);
        let paa = proj(&pa, &mut ledger.projections);
        let x = proj(&c, &mut ledger.projections);
        idem = idem.max(inf_norm(&paa, &pa));
        let d = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(s, t)| (s - t).powi(2)).sum::<f64>().sqrt();
        expand = expand.max(d(&pa, &pb) - d(&a, &b));
        let inner: f64 = a
            .iter()
            .zip(&pa)
            .zip(&x)
            .map(|((ai, pai), xi)| (ai - pai) * (xi - pai))
            .sum();
        angle = angle.max(inner);
    }
    Outcome {
        pass: idem <= 1e-10 && expand <= 1e-10 && angle <= 1e-8,
        detail: format!(
            "1000 instances at n = 100: idempotence {idem:.2e}, max expansion {expand:.2e}, max <z - Pz, x - Pz> = {angle:.2e}"
        ),
    }
}

fn diagnostics_clean(ledger: &Ledger) -> Outcome {
    let mut total = ledger.projections;
    for (_, _, r) in &ledger.runs {
        total.merge(&r.diagnostics);
    }
    Outcome {
        pass: total.assertions_clean(),
        detail: format!(
            "lemma1 {}, lemma2 {}, proposition1 {}, monotone {}, r* not found {} (fallbacks {}, merges {})",
            total.lemma1_violations,
            total.lemma2_violations,
            total.proposition1_violations,
            total.monotone_violations,
            total.r_star_not_found,
            total.r_star_fallbacks,
            total.case2_merges,
        ),
    }
}

fn performance(ledger: &mut Ledger) -> Outcome {
    let n = 2000;
    let p = InstanceSpec::new(ProblemKind::Tp3, n, 1).generate().unwrap();
    let t = Instant::now();
    let dual = run_dual(&p, &checked()).unwrap();
    let dual_time = t.elapsed();
    ledger.record(format!("tp3 n={n} seed=1"), n, &dual.report);

    let q = InstanceSpec::new(ProblemKind::RandomQuadratic, n, 1).generate().unwrap();
    let z = centers(&q);
    let t = Instant::now();
    let proj = project_with(&z, q.alpha(), q.beta(), &DualConfig::default()).unwrap();
    let proj_time = t.elapsed();
    ledger.projections.merge(&proj.report.diagnostics);
    Outcome {
        pass: dual_time < Duration::from_secs(60) && proj_time < Duration::from_secs(5),
        detail: format!("dual TP-3 n = {n}: {dual_time:.2?}, projection n = {n}: {proj_time:.2?}"),
    }
}

/// One projection equation spanning all `n` coordinates: a single breakpoint
/// at the last index and a strictly positive surplus there.
fn single_block_comparisons(n: usize, seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    let mut alpha = vec![0.0; n];
    alpha[0] = z.iter().sum::<f64>() - z[n - 1] / 2.0;
    let beta = vec![f64::INFINITY; n];
    let out = project_with(&z, &alpha, &beta, &DualConfig::default()).unwrap();
    assert_eq!(out.report.breakpoints, Some(1));
    out.report.counters.comparisons
}

fn scaling_probe() -> Outcome {
    let sizes = [250usize, 500, 1000];
    let means: Vec<f64> = sizes
        .iter()
        .map(|&n| (0..10).map(|s| single_block_comparisons(n, s) as f64).sum::<f64>() / 10.0)
        .collect();
    let ratios: Vec<f64> = means.windows(2).map(|w| w[1] / w[0]).collect();
    Outcome {
        pass: ratios.iter().all(|r| *r < 2.6),
        detail: format!(
            "comparisons per equation {:?} at n = {sizes:?}, doubling ratios {:.3?}",
            means.iter().map(|m| m.round() as u64).collect::<Vec<_>>(),
            ratios
        ),
    }
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();
    let mut results = vec![
        (1, "oracle equivalence", oracle_equivalence(&mut ledger), false),
        (2, "three-way agreement", three_way(&mut ledger), false),
        (5, "TP-3 breakpoint statistic", tp3_statistic(&mut ledger), false),
        (6, "projection properties", projection_properties(&mut ledger), false),
        (8, "performance sanity", performance(&mut ledger), false),
    ];
    results.push((3, "outer iterations equal L", iteration_bound(&ledger), false));
    results.push((4, "L = n on TP-1 and TP-2", worst_case_structure(&ledger), false));
    results.push((7, "runtime assertions silent", diagnostics_clean(&ledger), false));
    results.push((9, "comparison scaling", scaling_probe(), true));
    results.sort_by_key(|r| r.0);

    let mut hard_failure = false;
    for (id, name, outcome, advisory) in results {
        let status = match (outcome.pass, advisory) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (advisory)",
        };
        println!("criterion {id} {status} {name}: {}", outcome.detail);
        hard_failure |= !outcome.pass && !advisory;
    }
    if hard_failure {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
