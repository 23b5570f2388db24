//! Shared instance generators for the integration suites.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vne::lp::LpProblem;

/// Random bounded LP with up to `max_vars` variables and `max_rows` rows.
/// Roughly half the instances are built around a known interior point so
/// the suite sees many feasible solves; the rest may be infeasible.
pub fn random_lp(seed: u64, max_vars: usize, max_rows: usize) -> LpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_rows);
    let mut p = LpProblem::new(n);
    for j in 0..n {
        p.cost[j] = rng.gen_range(-5.0..5.0);
        let lo = if rng.gen_bool(0.3) { rng.gen_range(-3.0..0.0) } else { 0.0 };
        let hi = lo + rng.gen_range(0.5..4.0);
        p.bounds[j] = (lo, hi);
    }
    let anchor: Vec<f64> = (0..n)
        .map(|j| {
            let (lo, hi) = p.bounds[j];
            rng.gen_range(lo..=hi)
        })
        .collect();
    let anchored = rng.gen_bool(0.5);
    for i in 0..m {
        let nnz = rng.gen_range(1..=n.min(6));
        let mut coeffs = Vec::with_capacity(nnz);
        let mut used = vec![false; n];
        for _ in 0..nnz {
            let j = rng.gen_range(0..n);
            if !used[j] {
                used[j] = true;
                coeffs.push((j, rng.gen_range(-4.0..4.0)));
            }
        }
        coeffs.sort_by_key(|&(j, _)| j);
        let rhs = if anchored {
            let act: f64 = coeffs.iter().map(|&(j, a)| a * anchor[j]).sum();
            act + rng.gen_range(0.0..2.0)
        } else {
            rng.gen_range(-4.0..6.0)
        };
        p.add_row(coeffs, rhs, format!("r{i}"));
    }
    p
}

/// Random all-binary program with at most `max_vars` (<= 20) variables.
pub fn random_binary_program(seed: u64, max_vars: usize) -> LpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=10);
    let mut p = LpProblem::new(n);
    for j in 0..n {
        p.cost[j] = rng.gen_range(-5.0..8.0);
        p.integral[j] = true;
        if rng.gen_bool(0.05) {
            let v = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
            p.bounds[j] = (v, v);
        }
    }
    for i in 0..m {
        let nnz = rng.gen_range(1..=n);
        let mut coeffs = Vec::new();
        let mut used = vec![false; n];
        for _ in 0..nnz {
            let j = rng.gen_range(0..n);
            if !used[j] {
                used[j] = true;
                coeffs.push((j, rng.gen_range(-3.0..5.0)));
            }
        }
        coeffs.sort_by_key(|&(j, _)| j);
        let pos_sum: f64 = coeffs.iter().map(|&(_, a): &(usize, f64)| a.max(0.0)).sum();
        let rhs = if rng.gen_bool(0.85) {
            rng.gen_range(0.0..pos_sum.max(0.5))
        } else {
            rng.gen_range(-1.0..1.0)
        };
        p.add_row(coeffs, rhs, format!("r{i}"));
    }
    p
}
