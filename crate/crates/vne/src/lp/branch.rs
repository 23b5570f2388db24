//! Binary integer solves: best-bound branch and bound over LP relaxations,
//! plus an exhaustive enumerator used as an independent cross-check.

use super::{solve_lp_with, LpError, LpProblem, LpSolution, SolverOptions, Status};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

pub fn solve_ilp(p: &LpProblem) -> LpSolution {
    solve_ilp_with(p, &SolverOptions::default())
}

/// Branch and bound over the LP relaxation. Node selection is best bound,
/// the branch variable is the most fractional binary (ties to the lowest
/// index) and the 1-branch is explored first. The incumbent is optimal when
/// the remaining bound gap is within `tol_gap`.
pub fn solve_ilp_with(p: &LpProblem, opts: &SolverOptions) -> LpSolution {
    debug_assert!(p.validate().is_ok());
    for (j, &f) in p.integral.iter().enumerate() {
        if f {
            let (lo, hi) = p.bounds[j];
            assert!(
                lo >= -opts.tol_int && hi <= 1.0 + opts.tol_int,
                "integral variable {j} must have bounds within [0,1]"
            );
        }
    }

    let mut relaxed = p.clone();
    let root = solve_lp_with(&relaxed, opts);
    let mut lp_calls = root.iterations;
    if root.status != Status::Optimal {
        return LpSolution { iterations: lp_calls, ..root };
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    heap.push(Node { bound: root.objective, id: next_id, fixes: Vec::new() });
    next_id += 1;

    let mut incumbent: Option<LpSolution> = None;
    let mut nodes = 0usize;
    let mut capped = false;

    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if node.bound <= inc.objective + opts.tol_gap * (1.0 + inc.objective.abs()) {
                break; // best-bound order: nothing left can beat the incumbent
            }
        }
        nodes += 1;
        if nodes > opts.node_limit {
            capped = true;
            break;
        }

        for j in 0..relaxed.num_vars() {
            relaxed.bounds[j] = p.bounds[j];
        }
        for &(j, v) in &node.fixes {
            relaxed.bounds[j] = (v, v);
        }
        let sol = solve_lp_with(&relaxed, opts);
        lp_calls += sol.iterations;
        if sol.status != Status::Optimal {
            continue; // infeasible subtree
        }
        if let Some(inc) = &incumbent {
            if sol.objective <= inc.objective + opts.tol_gap * (1.0 + inc.objective.abs()) {
                continue;
            }
        }

        match most_fractional(p, &sol.x, opts.tol_int) {
            None => {
                let mut integral = sol.clone();
                for (j, &f) in p.integral.iter().enumerate() {
                    if f {
                        integral.x[j] = integral.x[j].round();
                    }
                }
                integral.objective = p.objective_value(&integral.x);
                let better = incumbent
                    .as_ref()
                    .map_or(true, |inc| integral.objective > inc.objective + 1e-12);
                if better {
                    incumbent = Some(integral);
                }
            }
            Some(j) => {
                // 1-branch first: it gets the smaller id and wins bound ties.
                for v in [1.0, 0.0] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, v));
                    heap.push(Node { bound: sol.objective, id: next_id, fixes });
                    next_id += 1;
                }
            }
        }
    }

    match incumbent {
        Some(mut inc) => {
            inc.status = if capped { Status::NodeLimit } else { Status::Optimal };
            inc.iterations = lp_calls;
            inc
        }
        None => LpSolution {
            status: if capped { Status::NodeLimit } else { Status::Infeasible },
            x: vec![0.0; p.num_vars()],
            objective: f64::NEG_INFINITY,
            duals: vec![0.0; p.num_rows()],
            iterations: lp_calls,
        },
    }
}

fn most_fractional(p: &LpProblem, x: &[f64], tol_int: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &f) in p.integral.iter().enumerate() {
        if !f {
            continue;
        }
        let frac = (x[j] - x[j].round()).abs();
        if frac > tol_int && best.map_or(true, |(_, bf)| frac > bf) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

struct Node {
    bound: f64,
    id: usize,
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: larger bound first, then older node (smaller id).
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Exhaustive enumeration of an all-binary program, in lexicographic order
/// so ties resolve to the lexicographically smallest vector. Variables fixed
/// by their bounds are honored; at most 20 may remain free.
pub fn brute_force_binary(p: &LpProblem) -> Result<LpSolution, LpError> {
    p.validate()?;
    let mut free = Vec::new();
    let mut x = vec![0.0; p.num_vars()];
    for j in 0..p.num_vars() {
        if !p.integral[j] {
            return Err(LpError::Unsupported(format!("variable {j} is continuous")));
        }
        let (lo, hi) = p.bounds[j];
        let lo_r = lo.max(0.0).ceil();
        let hi_r = hi.min(1.0).floor();
        if lo_r > hi_r {
            return Ok(infeasible_solution(p));
        }
        if lo_r == hi_r {
            x[j] = lo_r;
        } else {
            free.push(j);
        }
    }
    if free.len() > 20 {
        return Err(LpError::Unsupported(format!("{} free binaries (cap 20)", free.len())));
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << free.len()) {
        for (k, &j) in free.iter().enumerate() {
            // High bit = first variable, so ascending masks scan in
            // lexicographic order of the solution vector.
            x[j] = ((mask >> (free.len() - 1 - k)) & 1) as f64;
        }
        let feasible = p
            .rows
            .iter()
            .all(|row| row.coeffs.iter().map(|&(j, a)| a * x[j]).sum::<f64>() <= row.rhs + 1e-9);
        if !feasible {
            continue;
        }
        let obj = p.objective_value(&x);
        if best.as_ref().map_or(true, |(b, _)| obj > b + 1e-12) {
            best = Some((obj, x.clone()));
        }
    }

    Ok(match best {
        Some((obj, x)) => LpSolution {
            status: Status::Optimal,
            x,
            objective: obj,
            duals: vec![0.0; p.num_rows()],
            iterations: 1 << free.len(),
        },
        None => infeasible_solution(p),
    })
}

fn infeasible_solution(p: &LpProblem) -> LpSolution {
    LpSolution {
        status: Status::Infeasible,
        x: vec![0.0; p.num_vars()],
        objective: f64::NEG_INFINITY,
        duals: vec![0.0; p.num_rows()],
        iterations: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack() -> LpProblem {
        // max 3a + 2b s.t. 2a + 2b <= 3, binary.
        let mut p = LpProblem::new(2);
        p.cost = vec![3.0, 2.0];
        p.integral = vec![true, true];
        p.add_row(vec![(0, 2.0), (1, 2.0)], 3.0, "knap");
        p
    }

    #[test]
    fn knapsack_picks_first_item() {
        // Enumeration of the 4 binary points: (0,0)=0 (1,0)=3 (0,1)=2, (1,1) infeasible.
        let p = knapsack();
        let bf = brute_force_binary(&p).unwrap();
        assert_eq!(bf.x, vec![1.0, 0.0]);
        assert!((bf.objective - 3.0).abs() < 1e-12);

        let bb = solve_ilp(&p);
        assert_eq!(bb.status, Status::Optimal);
        assert!((bb.objective - 3.0).abs() < 1e-9);
        assert_eq!(bb.x, vec![1.0, 0.0]);
    }

    #[test]
    fn lp_integral_instance_matches_relaxation() {
        let mut p = LpProblem::new(2);
        p.cost = vec![1.0, 1.0];
        p.integral = vec![true, true];
        p.add_row(vec![(0, 1.0)], 1.0, "a");
        p.add_row(vec![(1, 1.0)], 1.0, "b");
        let lp = solve_lp_with(&p, &SolverOptions::default());
        let ilp = solve_ilp(&p);
        assert!((lp.objective - ilp.objective).abs() < 1e-9);
    }

    #[test]
    fn brute_force_trivia() {
        let p = LpProblem::new(0);
        let s = brute_force_binary(&p).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.objective, 0.0);

        let mut infeas = LpProblem::new(1);
        infeas.integral = vec![true];
        infeas.add_row(vec![(0, 1.0)], -0.5, "bad");
        let s = brute_force_binary(&infeas).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn brute_force_rejects_continuous_and_large() {
        let p = LpProblem::new(1);
        assert!(brute_force_binary(&p).is_err());

        let mut big = LpProblem::new(21);
        big.integral = vec![true; 21];
        assert!(brute_force_binary(&big).is_err());
    }
}
