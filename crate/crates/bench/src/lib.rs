//! Shared fixtures for the criterion benchmarks.

use ascent_core::{AscendingProblem, InstanceSpec, ProblemKind};

pub const SIZES: [usize; 3] = [100, 1_000, 10_000];

pub fn instance(kind: ProblemKind, n: usize) -> AscendingProblem {
    InstanceSpec::new(kind, n, 0)
        .generate()
        .expect("testbed kinds generate for n >= 1")
}

/// Deterministic point to project, spread over `[-1, 3)`.
pub fn point(n: usize) -> Vec<f64> {
    let mut state = 0x9e37_79b9_7f4a_7c15_u64;
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            -1.0 + 4.0 * (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}
