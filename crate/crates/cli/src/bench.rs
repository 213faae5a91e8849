use std::fmt::Write as _;

use ascent_core::{compute_breakpoints, unconstrained_minimizers, InstanceSpec, ReportFile};
use rayon::prelude::*;

use crate::solve::{solve, Settings};
use crate::{write_output, BenchArgs, Failure};

pub const HEADER: &str = "kind,n,seed,method,objective,kkt_residual,outer_iters,inner_solves,L,wall_ms";

/// Thread count from `ASCENT_OPT_THREADS`; 0 or unset lets rayon decide.
fn thread_count() -> Result<usize, Failure> {
    match std::env::var("ASCENT_OPT_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::other(format!("ASCENT_OPT_THREADS must be an integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn instance_rows(args: &BenchArgs, settings: &Settings, seed: u64) -> Result<String, Failure> {
    let problem = InstanceSpec::new(args.kind, args.n, seed).generate()?;
    let ybar = unconstrained_minimizers(&problem)?;
    let l = compute_breakpoints(&ybar, problem.alpha())?.len();
    let mut rows = String::new();
    for &method in &args.methods {
        let r: ReportFile = solve(&problem, method, settings)?;
        let kkt = r.kkt.as_ref().map_or(f64::NAN, |k| k.max);
        writeln!(
            rows,
            "{},{},{},{},{:.17e},{:.6e},{},{},{},{:.4}",
            args.kind.name(),
            args.n,
            seed,
            method.name(),
            r.objective,
            kkt,
            r.counters.outer_iterations,
            r.counters.inner_solves,
            l,
            r.wall_ms
        )
        .expect("writing to a String");
    }
    Ok(rows)
}

pub fn run(args: &BenchArgs) -> Result<(), Failure> {
    let settings = Settings::new(args.tol, args.seed, args.gp_step, args.max_iter)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| Failure::other(e.to_string()))?;
    // collect keeps instance order regardless of scheduling
    let blocks: Vec<String> = pool.install(|| {
        (0..args.instances)
            .into_par_iter()
            .map(|i| instance_rows(args, &settings, args.seed + i))
            .collect::<Result<_, _>>()
    })?;
    let mut text = String::from(HEADER);
    text.push('\n');
    for b in blocks {
        text.push_str(&b);
    }
    write_output(args.out.as_ref(), &text)
}
